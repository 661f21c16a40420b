//! Report structure written by `analyze` and friends.
//!
//! One JSON document per run. Every negative claim ("no witness", "no
//! certificate") carries the budget it is relative to, both as a
//! machine-readable field and inside the claim text. All timing fields end
//! in `_ms`; stripping those keys makes reports byte-comparable across runs
//! and worker counts.

use serde::Serialize;

use opdyn_core::recurrence::{
    GdeltaMembership, NestedBallTrace, RecurrenceWitness, SetRecurrenceCertificate,
};
use opdyn_core::transforms::UnimodularTransferReport;

#[derive(Debug, Serialize)]
pub struct Report {
    /// SHA-256 of the exact config text this run executed.
    pub config_digest: String,
    pub library_version: &'static str,
    pub seed: u64,
    pub analyses: Vec<AnalysisReport>,
    pub total_elapsed_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub index: usize,
    pub kind: &'static str,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
}

/// A negative answer, always relative to the enumeration budget that
/// produced it.
#[derive(Debug, Serialize)]
pub struct NegativeClaim {
    pub claim: String,
    pub within_budget: u64,
    pub budget_relative: bool,
}

impl NegativeClaim {
    pub fn new(what: &str, budget: u64) -> Self {
        NegativeClaim {
            claim: format!("{what} within budget {budget}"),
            within_budget: budget,
            budget_relative: true,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BallOutcome {
    pub ball_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<SetRecurrenceCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative: Option<NegativeClaim>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct IdentityPoint {
    /// 0-based position in the grid.
    pub position: usize,
    /// Grid parameter as `[re, im]`.
    pub z: [f64; 2],
}

#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    Residual {
        budget: u64,
        witness: RecurrenceWitness,
    },
    EpsRecurrent {
        eps: f64,
        budget: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        witness: Option<RecurrenceWitness>,
        #[serde(skip_serializing_if = "Option::is_none")]
        negative: Option<NegativeClaim>,
    },
    Gdelta {
        s_max: u32,
        budget: u64,
        membership: GdeltaMembership,
        #[serde(skip_serializing_if = "Option::is_none")]
        negative: Option<NegativeClaim>,
    },
    CertifySet {
        budget: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        margin: Option<f64>,
        balls: Vec<BallOutcome>,
    },
    Construct {
        budget: u64,
        steps: usize,
        shrink: f64,
        trace: NestedBallTrace,
    },
    OrbitRatio {
        budget: u64,
        delta: f64,
        probe_count: usize,
        ratio: f64,
    },
    GroupScan {
        /// The scan budget equals the grid length.
        budget: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        margin: Option<f64>,
        balls: Vec<BallOutcome>,
        identity_points: Vec<IdentityPoint>,
    },
    TransferCheck {
        eps: f64,
        transfer: UnimodularTransferReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        base_negative: Option<NegativeClaim>,
        #[serde(skip_serializing_if = "Option::is_none")]
        scaled_negative: Option<NegativeClaim>,
    },
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}
