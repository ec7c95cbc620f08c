//! Obfuscation policies `p(U | X, S)`: validation, the exact LP and the
//! polynomial greedy construction.

mod greedy;
mod lp;
mod policy;
pub mod simplex;
mod theta;

pub use greedy::{greedy_construct, greedy_over_support, size_cdf_given_s};
pub use lp::{
    lp_build, lp_build_with_cap, lp_solve, Constraint, ConstraintKind, LpInstance, LpSolution, DEFAULT_K_CAP,
};
pub use policy::{
    expected_cost, policy_validate, sample_subset, ObfuscationPolicy, PolicyEntry, PolicyFile, ValidationReport,
};
pub use theta::{coverage_bound, theorem_bound, theta_profile, ThetaProfile};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::prob::{ConditionalMatrix, JointDistribution};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Lp,
    Greedy,
    /// `U = [K]` always; used only when both constructions are unavailable.
    Trivial,
}

impl Solver {
    /// LP while it is affordable, greedy beyond the cap.
    pub fn auto(k: usize) -> Self {
        if k <= DEFAULT_K_CAP {
            Solver::Lp
        } else {
            Solver::Greedy
        }
    }
}

/// Builds a policy with the requested solver. A failed greedy construction
/// falls back to the LP when K is within the cap, otherwise to `U = [K]`.
/// Returns the solver that actually produced the policy.
pub fn build_policy<T: Scalar>(
    joint: &JointDistribution<T>,
    n: usize,
    solver: Solver,
) -> Result<(ObfuscationPolicy<T>, Solver)> {
    let k = joint.k();
    match solver {
        Solver::Lp => Ok((lp_solve(&lp_build(joint, n)?)?.policy, Solver::Lp)),
        Solver::Greedy => match greedy_over_support(&ConditionalMatrix::from_joint(joint)) {
            Ok(p) => Ok((p, Solver::Greedy)),
            Err(e) if k <= DEFAULT_K_CAP => {
                log::warn!("greedy construction failed ({e}); solving the LP instead");
                Ok((lp_solve(&lp_build(joint, n)?)?.policy, Solver::Lp))
            }
            Err(e) => {
                log::warn!("greedy construction failed ({e}); using U = [K]");
                Ok((ObfuscationPolicy::trivial(k), Solver::Trivial))
            }
        },
        Solver::Trivial => Ok((ObfuscationPolicy::trivial(k), Solver::Trivial)),
    }
}
