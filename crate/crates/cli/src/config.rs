//! Config document parsing and validation.
//!
//! A config is a single JSON object:
//!
//! ```json
//! {
//!   "space": {"dim": 4, "norm_p": 2},
//!   "operator_set": {"kind": "scalar_family", "dim": 4,
//!                    "sequence": {"kind": "one_plus_inverse"}},
//!   "analyses": [
//!     {"kind": "residual", "x": [[1.0, 0.0], [0,0], [0,0], [0,0]]}
//!   ],
//!   "seed": 7,
//!   "budget": 100
//! }
//! ```
//!
//! Schema violations are reported with a path into the document
//! (`analyses[0].balls[0].radius`), semantic problems (dimension clashes,
//! zero budgets, sup-norm requests for the Euclidean-only solver) with the
//! offending path and a reason. Analyses are parsed one by one from raw JSON
//! so the path tracking stays exact inside them; serde's internally-tagged
//! enums buffer their content, which would otherwise flatten every inner
//! location to the enum itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use opdyn_core::space::{Ball, NormKind, Vector};
use opdyn_core::specs::{GridSpec, GroupSpec, SequenceSpec, SetSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("schema error at {path}: {reason}")]
    Schema { path: String, reason: String },
    #[error("invalid config at {path}: {reason}")]
    Invalid { path: String, reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisConfig {
    pub space: SpaceConfig,
    pub operator_set: SetSpec,
    pub analyses: Vec<AnalysisSpec>,
    pub seed: u64,
    /// Default enumeration budget; individual analyses may override.
    pub budget: u64,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub dim: usize,
    /// `2` (Euclidean) or `"inf"` (sup norm). Defaults to Euclidean.
    #[serde(default = "default_norm")]
    pub norm_p: NormKind,
}

fn default_norm() -> NormKind {
    NormKind::L2
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Default certification margin (absolute). When absent, each ball uses
    /// the library default of 1e-6 times its radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

/// One analysis to run, tagged by `kind` on the wire.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalysisSpec {
    Residual(ResidualParams),
    EpsRecurrent(EpsRecurrentParams),
    Gdelta(GdeltaParams),
    CertifySet(CertifySetParams),
    Construct(ConstructSpecParams),
    OrbitRatio(OrbitRatioParams),
    GroupScan(GroupScanParams),
    TransferCheck(TransferCheckParams),
}

const ANALYSIS_KINDS: [&str; 8] = [
    "residual",
    "eps_recurrent",
    "gdelta",
    "certify_set",
    "construct",
    "orbit_ratio",
    "group_scan",
    "transfer_check",
];

/// Best return residual of `x` over the enumerated family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualParams {
    pub x: Vector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

/// First member moving `x` within `eps` of itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsRecurrentParams {
    pub x: Vector,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

/// Per-level witnesses for residual thresholds 1/1 .. 1/s_max.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GdeltaParams {
    pub x: Vector,
    pub s_max: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

/// Ball-return certification on each listed ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifySetParams {
    pub balls: Vec<Ball>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

/// Nested-ball construction of a near-recurrent vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstructSpecParams {
    pub ball: Ball,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shrink: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

/// Fraction of probe points within `delta` of the orbit of `x`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitRatioParams {
    pub x: Vector,
    pub probes: Vec<Vector>,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

/// Snapshot a regularized exponential group on a grid and certify balls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupScanParams {
    pub group: GroupSpec,
    pub grid: GridSpec,
    pub balls: Vec<Ball>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

/// Compare recurrence of `x` under the family and its unimodular rescaling
/// by `lambda`, with an enlarged budget on the rescaled side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferCheckParams {
    pub lambda: SequenceSpec,
    pub x: Vector,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enlargement: Option<u64>,
}

impl AnalysisSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AnalysisSpec::Residual(_) => "residual",
            AnalysisSpec::EpsRecurrent(_) => "eps_recurrent",
            AnalysisSpec::Gdelta(_) => "gdelta",
            AnalysisSpec::CertifySet(_) => "certify_set",
            AnalysisSpec::Construct(_) => "construct",
            AnalysisSpec::OrbitRatio(_) => "orbit_ratio",
            AnalysisSpec::GroupScan(_) => "group_scan",
            AnalysisSpec::TransferCheck(_) => "transfer_check",
        }
    }

    /// Ball certification solves a Euclidean trust-region subproblem; these
    /// analysis kinds cannot run under the sup norm.
    fn needs_euclidean(&self) -> bool {
        matches!(
            self,
            AnalysisSpec::CertifySet(_)
                | AnalysisSpec::Construct(_)
                | AnalysisSpec::GroupScan(_)
                | AnalysisSpec::TransferCheck(_)
        )
    }
}

/// The document shape before analyses are individually parsed.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    space: SpaceConfig,
    operator_set: SetSpec,
    analyses: Vec<serde_json::Value>,
    #[serde(default)]
    seed: u64,
    budget: u64,
    #[serde(default)]
    tolerances: Tolerances,
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<AnalysisConfig, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let reason = e.inner().to_string();
        let mut path = refine_path(e.path().to_string(), &reason);
        if path == "?" || path == "." {
            // Syntax errors surface before any field is tracked; the reason
            // already carries line/column, so point at the document itself.
            path = "(document)".to_string();
        }
        ConfigError::Schema {
            path,
            reason,
        }
    })?;
    let analyses = raw
        .analyses
        .iter()
        .enumerate()
        .map(|(i, value)| parse_analysis(i, value))
        .collect::<Result<Vec<_>, _>>()?;
    let config = AnalysisConfig {
        space: raw.space,
        operator_set: raw.operator_set,
        analyses,
        seed: raw.seed,
        budget: raw.budget,
        tolerances: raw.tolerances,
    };
    validate(&config)?;
    Ok(config)
}

fn parse_analysis(i: usize, value: &serde_json::Value) -> Result<AnalysisSpec, ConfigError> {
    let kind = value
        .get("kind")
        .and_then(|v| v.as_str())
        .ok_or_else(|| ConfigError::Schema {
            path: format!("analyses[{i}].kind"),
            reason: "missing or non-string analysis kind".to_string(),
        })?;
    match kind {
        "residual" => Ok(AnalysisSpec::Residual(parse_params(i, value)?)),
        "eps_recurrent" => Ok(AnalysisSpec::EpsRecurrent(parse_params(i, value)?)),
        "gdelta" => Ok(AnalysisSpec::Gdelta(parse_params(i, value)?)),
        "certify_set" => Ok(AnalysisSpec::CertifySet(parse_params(i, value)?)),
        "construct" => Ok(AnalysisSpec::Construct(parse_params(i, value)?)),
        "orbit_ratio" => Ok(AnalysisSpec::OrbitRatio(parse_params(i, value)?)),
        "group_scan" => Ok(AnalysisSpec::GroupScan(parse_params(i, value)?)),
        "transfer_check" => Ok(AnalysisSpec::TransferCheck(parse_params(i, value)?)),
        other => Err(ConfigError::Schema {
            path: format!("analyses[{i}].kind"),
            reason: format!(
                "unknown variant `{other}`, expected one of {}",
                ANALYSIS_KINDS.join(", ")
            ),
        }),
    }
}

fn parse_params<'de, T: Deserialize<'de>>(
    i: usize,
    value: &'de serde_json::Value,
) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let reason = e.inner().to_string();
        let sub = e.path().to_string();
        let path = if sub == "." {
            format!("analyses[{i}]")
        } else {
            format!("analyses[{i}].{sub}")
        };
        ConfigError::Schema {
            path: refine_path(path, &reason),
            reason,
        }
    })
}

/// Point schema errors at the missing field itself, not just its parent
/// object, so messages read `analyses[0].balls[0].radius`. A missing field
/// always belongs to the JSON object the tracked path reached.
fn refine_path(path: String, reason: &str) -> String {
    if let Some(rest) = reason.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            return if path == "." {
                field.to_string()
            } else {
                format!("{path}.{field}")
            };
        }
    }
    path
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.into(),
        reason: reason.into(),
    }
}

fn validate(config: &AnalysisConfig) -> Result<(), ConfigError> {
    if config.space.dim == 0 {
        return Err(invalid("space.dim", "dimension must be positive"));
    }
    if config.budget == 0 {
        return Err(invalid("budget", "enumeration budget must be at least 1"));
    }
    if let Some(m) = config.tolerances.margin {
        if !m.is_finite() || m < 0.0 {
            return Err(invalid(
                "tolerances.margin",
                format!("margin must be finite and nonnegative, got {m}"),
            ));
        }
    }
    let dim = config.space.dim;
    for (i, analysis) in config.analyses.iter().enumerate() {
        let at = |field: &str| format!("analyses[{i}].{field}");
        if config.space.norm_p == NormKind::LInf && analysis.needs_euclidean() {
            return Err(invalid(
                format!("analyses[{i}]"),
                format!(
                    "analysis kind '{}' requires the Euclidean norm (norm_p = 2); \
                     the exact ball-return solver has no sup-norm form",
                    analysis.kind_name()
                ),
            ));
        }
        let check_budget = |b: &Option<u64>| -> Result<(), ConfigError> {
            match b {
                Some(0) => Err(invalid(at("budget"), "budget must be at least 1")),
                _ => Ok(()),
            }
        };
        let check_dim = |d: usize, field: &str| -> Result<(), ConfigError> {
            if d != dim {
                Err(invalid(
                    at(field),
                    format!("dimension {d} does not match space.dim {dim}"),
                ))
            } else {
                Ok(())
            }
        };
        let check_margin = |m: &Option<f64>| -> Result<(), ConfigError> {
            match m {
                Some(v) if !v.is_finite() || *v < 0.0 => Err(invalid(
                    at("margin"),
                    format!("margin must be finite and nonnegative, got {v}"),
                )),
                _ => Ok(()),
            }
        };
        match analysis {
            AnalysisSpec::Residual(p) => {
                check_dim(p.x.dim(), "x")?;
                check_budget(&p.budget)?;
            }
            AnalysisSpec::EpsRecurrent(p) => {
                check_dim(p.x.dim(), "x")?;
                check_budget(&p.budget)?;
                if !p.eps.is_finite() || p.eps <= 0.0 {
                    return Err(invalid(
                        at("eps"),
                        format!("eps must be positive, got {}", p.eps),
                    ));
                }
            }
            AnalysisSpec::Gdelta(p) => {
                check_dim(p.x.dim(), "x")?;
                check_budget(&p.budget)?;
                if p.s_max == 0 {
                    return Err(invalid(at("s_max"), "s_max must be at least 1"));
                }
            }
            AnalysisSpec::CertifySet(p) => {
                check_budget(&p.budget)?;
                check_margin(&p.margin)?;
                if p.balls.is_empty() {
                    return Err(invalid(at("balls"), "at least one ball is required"));
                }
                for (j, b) in p.balls.iter().enumerate() {
                    check_dim(b.dim(), &format!("balls[{j}]"))?;
                }
            }
            AnalysisSpec::Construct(p) => {
                check_dim(p.ball.dim(), "ball")?;
                check_budget(&p.budget)?;
                if p.steps == 0 {
                    return Err(invalid(at("steps"), "steps must be at least 1"));
                }
                if let Some(s) = p.shrink {
                    if !s.is_finite() || s <= 0.0 || s >= 1.0 {
                        return Err(invalid(
                            at("shrink"),
                            format!("shrink must lie strictly between 0 and 1, got {s}"),
                        ));
                    }
                }
            }
            AnalysisSpec::OrbitRatio(p) => {
                check_dim(p.x.dim(), "x")?;
                check_budget(&p.budget)?;
                if p.probes.is_empty() {
                    return Err(invalid(at("probes"), "at least one probe is required"));
                }
                for (j, probe) in p.probes.iter().enumerate() {
                    check_dim(probe.dim(), &format!("probes[{j}]"))?;
                }
                if !p.delta.is_finite() || p.delta < 0.0 {
                    return Err(invalid(
                        at("delta"),
                        format!("delta must be finite and nonnegative, got {}", p.delta),
                    ));
                }
            }
            AnalysisSpec::GroupScan(p) => {
                check_margin(&p.margin)?;
                if p.balls.is_empty() {
                    return Err(invalid(at("balls"), "at least one ball is required"));
                }
                for (j, b) in p.balls.iter().enumerate() {
                    check_dim(b.dim(), &format!("balls[{j}]"))?;
                }
            }
            AnalysisSpec::TransferCheck(p) => {
                check_dim(p.x.dim(), "x")?;
                check_budget(&p.budget)?;
                if !p.eps.is_finite() || p.eps <= 0.0 {
                    return Err(invalid(
                        at("eps"),
                        format!("eps must be positive, got {}", p.eps),
                    ));
                }
                if let Some(0) = p.enlargement {
                    return Err(invalid(at("enlargement"), "enlargement must be at least 1"));
                }
            }
        }
    }
    Ok(())
}
