//! Machine-readable results of a run.

use serde::{Deserialize, Serialize};

use crate::conditions::{IndexSets, MultiplierVector, RefutationCertificate, Tolerances, Verdict};
use crate::optproblem::{BruteForceReport, OpFirstOrder, OpSecondOrder};
use crate::problem::{HypothesisCheck, ProblemKind};

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierReport {
    /// Normalised to `|l|_inf = 1`.
    pub values: Vec<f64>,
    /// Exact fractions where the entries are recognisably rational.
    pub rational: Vec<Option<String>>,
    /// Scaled so that `l0 = -1` when `l0 != 0`.
    pub reporting_scale: Vec<f64>,
}

impl From<&MultiplierVector> for MultiplierReport {
    fn from(m: &MultiplierVector) -> Self {
        MultiplierReport {
            values: m.values.clone(),
            rational: m.rational.clone(),
            reporting_scale: m.reporting_scale(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderReport {
    pub index_sets: IndexSets,
    pub multipliers: Vec<MultiplierReport>,
    /// Some multiplier has `l0 != 0`.
    pub normal: bool,
    pub over_budget: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    /// Linearised endpoint rows `d phi_i(X)` and `d psi_c(X)`.
    pub endpoint_rows: Vec<f64>,
    pub index_sets: IndexSets,
    /// `(eps, residual / eps²)` of the best correction, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expansion: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub separator: Option<Vec<f64>>,
    pub separators: usize,
    pub psi_rank: usize,
    /// Largest `l . k` over random samples of the cone `K`.
    pub sample_max: Option<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpReport {
    pub first_order: OpFirstOrder,
    pub second_order: Option<OpSecondOrder>,
    pub separation: Option<SeparationReport>,
    pub bruteforce: Option<BruteForceReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    /// SHA-256 of the canonical problem text below.
    pub input_digest: String,
    pub problem: String,
    pub kind: ProblemKind,
    pub hypotheses: Vec<HypothesisCheck>,
    pub first_order: Option<FirstOrderReport>,
    pub direction: Option<DirectionReport>,
    pub certificate: Option<RefutationCertificate>,
    pub op: Option<OpReport>,
    pub verdict: Verdict,
    pub reason: String,
    pub notes: Vec<String>,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }

    /// Second-order functional of the best correction, if one was evaluated.
    pub fn lhs(&self) -> Option<f64> {
        self.certificate.as_ref().and_then(|c| c.best_lhs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise to JSON")
    }
}
