//! First- and second-order necessary conditions along a candidate pair.

mod direction;
mod mayer;
mod multipliers;
mod second_order;

pub use direction::{active_sets, critical_sets, verify_singular_direction, SingularDirection};
pub use mayer::{mayer_augment, BolzaProblem};
pub(crate) use multipliers::{significant, sorted_multipliers};
pub use multipliers::{find_first_order_multipliers, rationalize, AdjointBasis, MultiplierCone, MultiplierVector};
pub use second_order::{
    refute_optimality, second_order_lhs, stationarity_residual, CandidateEvaluation, RefutationCertificate,
    SecondOrderTerms,
};

use serde::{Deserialize, Serialize};

use crate::exec::Exec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// An inequality endpoint constraint counts as active when `|phi_i| <= act_tol`.
    pub act_tol: f64,
    /// Tolerance on linearised endpoint rows of a singular direction.
    pub row_tol: f64,
    /// Bound on `|∇_u H(v)|` expected along a singular direction.
    pub stationarity_tol: f64,
    /// The second-order functional must exceed this to count as positive.
    pub refutation_margin: f64,
    /// Largest number of multiplier rays examined before giving up.
    pub ray_budget: usize,
    /// Tolerance of the cone enumeration.
    pub cone_tol: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            act_tol: 1e-8,
            row_tol: 1e-8,
            stationarity_tol: 1e-6,
            refutation_margin: 1e-6,
            ray_budget: 64,
            cone_tol: 1e-9,
            exec: Exec::default(),
        }
    }
}

impl Tolerances {
    /// Sets one field by name; used for command-line overrides.
    pub fn set(&mut self, key: &str, value: f64) -> crate::Result<()> {
        match key {
            "act_tol" => self.act_tol = value,
            "row_tol" => self.row_tol = value,
            "stationarity_tol" => self.stationarity_tol = value,
            "refutation_margin" => self.refutation_margin = value,
            "ray_budget" => self.ray_budget = value as usize,
            "cone_tol" => self.cone_tol = value,
            _ => return Err(crate::Error::input(format!("tolerances.{key}"), "unknown tolerance")),
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Refuted,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Consistent => 0,
            Verdict::Refuted => 3,
            Verdict::Inconclusive => 4,
        }
    }
}

/// Index sets of the endpoint inequality constraints (`0` is the cost).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IndexSets {
    /// Active constraints, always containing `0`.
    pub active: Vec<usize>,
    pub inactive: Vec<usize>,
    /// Inactive plus active constraints the direction strictly decreases.
    pub strict: Option<Vec<usize>>,
    /// The complement of `strict` in `0..=j`.
    pub critical: Option<Vec<usize>>,
}
