//! Analysis execution: config in, report out.
//!
//! Analyses run in config order, one at a time; parallelism lives inside the
//! individual operations (per-ball certification fans out over the worker
//! pool). A failing analysis is recorded in the report and the batch
//! continues — only config-level problems (schema, operator-set build,
//! dimension clash) abort the run.

use std::time::Instant;

use sha2::{Digest, Sha256};
use thiserror::Error;

use opdyn_core::groups::GroupError;
use opdyn_core::recurrence::{
    self, ConstructParams, RecurrenceError, SetRecurrenceCertificate,
};
use opdyn_core::sets::{EnumerationBudget, OperatorSet};
use opdyn_core::specs::{self, SpecError};
use opdyn_core::transforms::{self, TransformError, DEFAULT_ENLARGEMENT};

use crate::config::{parse_config, AnalysisConfig, AnalysisSpec, ConfigError};
use crate::report::{
    AnalysisReport, BallOutcome, IdentityPoint, NegativeClaim, Outcome, Report, Status,
};

/// Errors that abort a run before any analysis executes. These map to exit
/// code 3 (config error).
#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("building operator_set: {0}")]
    Build(#[from] SpecError),
    #[error("operator_set acts on dim {set_dim} but space.dim is {space_dim}")]
    DimensionMismatch { set_dim: usize, space_dim: usize },
    #[error("OPDYN_WORKERS must be a nonnegative integer, got '{value}'")]
    BadWorkers { value: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: Report,
    /// Any analysis (or per-ball subproblem) hit a feasibility-solver
    /// failure; callers map this to exit code 2.
    pub solver_failure: bool,
}

/// Worker count resolution: the `OPDYN_WORKERS` environment variable beats
/// the `--workers` flag; absent both, rayon picks one thread per core.
/// A count of 0 also means "default".
pub fn resolve_workers(flag: Option<usize>) -> Result<Option<usize>, EngineError> {
    match std::env::var("OPDYN_WORKERS") {
        Ok(value) => value
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| EngineError::BadWorkers { value }),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(EngineError::BadWorkers { value: e.to_string() }),
    }
}

/// Parse, validate, and execute a config document.
pub fn run_analysis(
    text: &str,
    seed_override: Option<u64>,
    workers_flag: Option<usize>,
) -> Result<RunOutcome, EngineError> {
    let config = parse_config(text)?;
    let set = specs::build_set(&config.operator_set)?;
    if set.dim() != config.space.dim {
        return Err(EngineError::DimensionMismatch {
            set_dim: set.dim(),
            space_dim: config.space.dim,
        });
    }
    let workers = resolve_workers(workers_flag)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| EngineError::Pool(e.to_string()))?;

    let seed = seed_override.unwrap_or(config.seed);
    let start = Instant::now();
    let (analyses, solver_failure) = pool.install(|| execute_all(&config, &set));
    let report = Report {
        config_digest: hex_digest(text),
        library_version: opdyn_core::VERSION,
        seed,
        analyses,
        total_elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(RunOutcome { report, solver_failure })
}

fn hex_digest(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn execute_all(config: &AnalysisConfig, set: &OperatorSet) -> (Vec<AnalysisReport>, bool) {
    let mut any_solver_failure = false;
    let reports = config
        .analyses
        .iter()
        .enumerate()
        .map(|(index, spec)| {
            let start = Instant::now();
            let result = execute_one(config, set, spec);
            let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            match result {
                Ok(Executed { outcome, solver_failure }) => {
                    any_solver_failure |= solver_failure;
                    AnalysisReport {
                        index,
                        kind: spec.kind_name(),
                        status: Status::Ok,
                        error: None,
                        outcome: Some(outcome),
                        elapsed_ms,
                    }
                }
                Err(e) => {
                    any_solver_failure |= e.solver_failure();
                    AnalysisReport {
                        index,
                        kind: spec.kind_name(),
                        status: Status::Error,
                        error: Some(e.to_string()),
                        outcome: None,
                        elapsed_ms,
                    }
                }
            }
        })
        .collect();
    (reports, any_solver_failure)
}

struct Executed {
    outcome: Outcome,
    solver_failure: bool,
}

impl Executed {
    fn clean(outcome: Outcome) -> Self {
        Executed { outcome, solver_failure: false }
    }
}

#[derive(Debug, Error)]
enum AnalysisError {
    #[error("{0}")]
    Recurrence(#[from] RecurrenceError),
    #[error("{0}")]
    Transform(#[from] TransformError),
    #[error("{0}")]
    Group(#[from] GroupError),
    #[error("{0}")]
    Spec(#[from] SpecError),
    #[error("group acts on dim {group_dim} but space.dim is {space_dim}")]
    GroupDimension { group_dim: usize, space_dim: usize },
}

impl AnalysisError {
    fn solver_failure(&self) -> bool {
        match self {
            AnalysisError::Recurrence(e) => recurrence_solver_failure(e),
            AnalysisError::Transform(TransformError::Recurrence(e)) => {
                recurrence_solver_failure(e)
            }
            AnalysisError::Group(GroupError::Recurrence(e)) => recurrence_solver_failure(e),
            AnalysisError::Group(GroupError::Transform(TransformError::Recurrence(e))) => {
                recurrence_solver_failure(e)
            }
            _ => false,
        }
    }
}

fn recurrence_solver_failure(e: &RecurrenceError) -> bool {
    matches!(e, RecurrenceError::SolverFailure { .. })
}

fn budget_of(default: u64, per_analysis: &Option<u64>) -> (u64, EnumerationBudget) {
    let n = per_analysis.unwrap_or(default);
    (
        n,
        EnumerationBudget::new(n).expect("budgets validated at parse time"),
    )
}

fn ball_outcomes(
    results: Vec<Result<Option<SetRecurrenceCertificate>, RecurrenceError>>,
    budget: u64,
) -> (Vec<BallOutcome>, bool) {
    let mut solver_failure = false;
    let outcomes = results
        .into_iter()
        .enumerate()
        .map(|(ball_index, result)| match result {
            Ok(Some(certificate)) => BallOutcome {
                ball_index,
                certificate: Some(certificate),
                negative: None,
                error: None,
            },
            Ok(None) => BallOutcome {
                ball_index,
                certificate: None,
                negative: Some(NegativeClaim::new("no certificate found", budget)),
                error: None,
            },
            Err(e) => {
                solver_failure |= recurrence_solver_failure(&e);
                BallOutcome {
                    ball_index,
                    certificate: None,
                    negative: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    (outcomes, solver_failure)
}

fn execute_one(
    config: &AnalysisConfig,
    set: &OperatorSet,
    spec: &AnalysisSpec,
) -> Result<Executed, AnalysisError> {
    let norm = config.space.norm_p;
    match spec {
        AnalysisSpec::Residual(p) => {
            let (n, b) = budget_of(config.budget, &p.budget);
            let witness = recurrence::residual(set, &p.x, norm, b)?;
            Ok(Executed::clean(Outcome::Residual { budget: n, witness }))
        }
        AnalysisSpec::EpsRecurrent(p) => {
            let (n, b) = budget_of(config.budget, &p.budget);
            let witness = recurrence::is_eps_recurrent(set, &p.x, p.eps, norm, b)?;
            let negative = witness
                .is_none()
                .then(|| NegativeClaim::new("no eps-recurrence witness found", n));
            Ok(Executed::clean(Outcome::EpsRecurrent {
                eps: p.eps,
                budget: n,
                witness,
                negative,
            }))
        }
        AnalysisSpec::Gdelta(p) => {
            let (n, b) = budget_of(config.budget, &p.budget);
            let membership = recurrence::gdelta_membership(set, &p.x, p.s_max, norm, b)?;
            let negative = (!membership.member).then(|| {
                NegativeClaim::new(
                    "membership not established (some level lacks a witness)",
                    n,
                )
            });
            Ok(Executed::clean(Outcome::Gdelta {
                s_max: p.s_max,
                budget: n,
                membership,
                negative,
            }))
        }
        AnalysisSpec::CertifySet(p) => {
            let (n, b) = budget_of(config.budget, &p.budget);
            let margin = p.margin.or(config.tolerances.margin);
            let results = recurrence::certify_recurrent_set(set, &p.balls, b, margin)?;
            let (balls, solver_failure) = ball_outcomes(results, n);
            Ok(Executed {
                outcome: Outcome::CertifySet { budget: n, margin, balls },
                solver_failure,
            })
        }
        AnalysisSpec::Construct(p) => {
            let (n, b) = budget_of(config.budget, &p.budget);
            let mut params = ConstructParams::new(p.steps, b);
            if let Some(s) = p.shrink {
                params.shrink = s;
            }
            let shrink = params.shrink;
            let trace = recurrence::construct_recurrent_vector(set, &p.ball, params)?;
            Ok(Executed::clean(Outcome::Construct {
                budget: n,
                steps: p.steps,
                shrink,
                trace,
            }))
        }
        AnalysisSpec::OrbitRatio(p) => {
            let (n, b) = budget_of(config.budget, &p.budget);
            let ratio =
                recurrence::orbit_covering_ratio(set, &p.x, &p.probes, p.delta, norm, b)?;
            Ok(Executed::clean(Outcome::OrbitRatio {
                budget: n,
                delta: p.delta,
                probe_count: p.probes.len(),
                ratio,
            }))
        }
        AnalysisSpec::GroupScan(p) => {
            let group = specs::build_group(&p.group)?;
            if group.dim() != config.space.dim {
                return Err(AnalysisError::GroupDimension {
                    group_dim: group.dim(),
                    space_dim: config.space.dim,
                });
            }
            let grid = specs::build_grid(&p.grid)?;
            let margin = p.margin.or(config.tolerances.margin);
            let scan = group.recurrence_scan(&grid, &p.balls, margin)?;
            let budget = grid.len() as u64;
            let (balls, solver_failure) = ball_outcomes(scan.certificates, budget);
            let identity_points = scan
                .identity_points
                .into_iter()
                .map(|(position, z)| IdentityPoint { position, z: [z.re, z.im] })
                .collect();
            Ok(Executed {
                outcome: Outcome::GroupScan {
                    budget,
                    margin,
                    balls,
                    identity_points,
                },
                solver_failure,
            })
        }
        AnalysisSpec::TransferCheck(p) => {
            let (_, b) = budget_of(config.budget, &p.budget);
            let lambda = specs::build_sequence(&p.lambda)?;
            let enlargement = p.enlargement.unwrap_or(DEFAULT_ENLARGEMENT);
            let transfer =
                transforms::unimodular_transfer_check(set, &lambda, &p.x, p.eps, b, enlargement)?;
            let base_negative = transfer.base_witness.is_none().then(|| {
                NegativeClaim::new("no witness under the base family", transfer.base_budget)
            });
            let scaled_negative = transfer.scaled_witness.is_none().then(|| {
                NegativeClaim::new(
                    "no witness under the rescaled family",
                    transfer.scaled_budget,
                )
            });
            Ok(Executed::clean(Outcome::TransferCheck {
                eps: p.eps,
                transfer,
                base_negative,
                scaled_negative,
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR_CONFIG: &str = r#"{
        "space": {"dim": 2},
        "operator_set": {"kind": "scalar_family", "dim": 2,
                         "sequence": {"kind": "one_plus_inverse"}},
        "analyses": [
            {"kind": "residual", "x": [[1.0, 0.0], [0.0, 0.0]]},
            {"kind": "eps_recurrent", "x": [[1.0, 0.0], [0.0, 0.0]], "eps": 0.1},
            {"kind": "certify_set",
             "balls": [{"center": [[1.0, 0.0], [0.0, 0.0]], "radius": 0.3}]}
        ],
        "budget": 100
    }"#;

    #[test]
    fn scalar_family_run_reports_all_analyses_ok() {
        let outcome = run_analysis(SCALAR_CONFIG, None, Some(2)).unwrap();
        assert!(!outcome.solver_failure);
        let report = outcome.report;
        assert_eq!(report.analyses.len(), 3);
        assert!(report
            .analyses
            .iter()
            .all(|a| a.status == Status::Ok && a.error.is_none()));
        match report.analyses[0].outcome.as_ref().unwrap() {
            Outcome::Residual { witness, budget } => {
                assert_eq!(*budget, 100);
                assert_eq!(witness.op_index, 100);
                assert!((witness.residual - 0.01).abs() < 1e-12);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
        match report.analyses[1].outcome.as_ref().unwrap() {
            Outcome::EpsRecurrent { witness: Some(w), negative: None, .. } => {
                assert_eq!(w.op_index, 11);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
        match report.analyses[2].outcome.as_ref().unwrap() {
            Outcome::CertifySet { balls, .. } => {
                assert_eq!(balls.len(), 1);
                assert!(balls[0].certificate.is_some());
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn negative_answers_carry_budget_qualifiers() {
        let text = r#"{
            "space": {"dim": 2},
            "operator_set": {
                "kind": "powers",
                "base": {"kind": "rank_one_fix", "dim": 2}
            },
            "analyses": [
                {"kind": "eps_recurrent", "x": [[0.0, 0.0], [1.0, 0.0]], "eps": 0.5},
                {"kind": "certify_set",
                 "balls": [{"center": [[0.0, 0.0], [1.0, 0.0]], "radius": 0.5}]}
            ],
            "budget": 50
        }"#;
        let outcome = run_analysis(text, None, Some(1)).unwrap();
        match outcome.report.analyses[0].outcome.as_ref().unwrap() {
            Outcome::EpsRecurrent { witness: None, negative: Some(claim), .. } => {
                assert_eq!(claim.within_budget, 50);
                assert!(claim.claim.contains("within budget 50"));
                assert!(claim.budget_relative);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
        match outcome.report.analyses[1].outcome.as_ref().unwrap() {
            Outcome::CertifySet { balls, .. } => {
                let negative = balls[0].negative.as_ref().unwrap();
                assert!(negative.claim.contains("within budget 50"));
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn failing_analysis_does_not_abort_the_batch() {
        // zero vector is rejected by recurrence queries; the next analysis
        // still runs
        let text = r#"{
            "space": {"dim": 2},
            "operator_set": {"kind": "scalar_family", "dim": 2,
                             "sequence": {"kind": "one_plus_inverse"}},
            "analyses": [
                {"kind": "residual", "x": [[0.0, 0.0], [0.0, 0.0]]},
                {"kind": "residual", "x": [[1.0, 0.0], [0.0, 0.0]]}
            ],
            "budget": 10
        }"#;
        let outcome = run_analysis(text, None, Some(1)).unwrap();
        let analyses = &outcome.report.analyses;
        assert_eq!(analyses[0].status, Status::Error);
        assert!(analyses[0].error.as_ref().unwrap().contains("zero vector"));
        assert_eq!(analyses[1].status, Status::Ok);
        assert!(!outcome.solver_failure);
    }

    #[test]
    fn set_build_failures_are_config_errors() {
        let text = r#"{
            "space": {"dim": 2},
            "operator_set": {
                "kind": "unimodular_scaled",
                "base": {"kind": "powers", "base": {"kind": "identity", "dim": 2}},
                "phases": {"kind": "explicit_list", "values": [[2.0, 0.0]]}
            },
            "analyses": [],
            "budget": 10
        }"#;
        match run_analysis(text, None, None) {
            Err(EngineError::Build(_)) => {}
            other => panic!("expected build error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_clash_between_set_and_space_is_a_config_error() {
        // pad the dim-2 vectors to dim 3 so only the set/space clash remains
        let text = SCALAR_CONFIG
            .replace(r#""space": {"dim": 2}"#, r#""space": {"dim": 3}"#)
            .replace(r#"[[1.0, 0.0], [0.0, 0.0]]"#, r#"[[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]"#);
        match run_analysis(&text, None, None) {
            Err(EngineError::DimensionMismatch { set_dim: 2, space_dim: 3 }) => {}
            other => panic!("expected dimension mismatch, got {other:?}"),
        }
    }

    #[test]
    fn seed_override_lands_in_the_report() {
        let outcome = run_analysis(SCALAR_CONFIG, Some(99), Some(1)).unwrap();
        assert_eq!(outcome.report.seed, 99);
    }

    #[test]
    fn digest_is_the_sha256_of_the_config_text() {
        // echo -n 'abc' | sha256sum
        assert_eq!(
            hex_digest("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
