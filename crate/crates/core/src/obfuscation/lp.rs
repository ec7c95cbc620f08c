//! Minimum-cost obfuscation as a linear program.
//!
//! Variables are `p(u | x, s)` for supported s and `x in u`. Each `(s, x)`
//! normalizes to one, and for every non-empty u the law `P(U = u | S = s)`
//! of each supported s equals that of the first supported row.

use crate::error::{Error, Result};
use crate::obfuscation::simplex::{self, StandardForm};
use crate::obfuscation::ObfuscationPolicy;
use crate::prob::{capacity_cost, ConditionalMatrix, JointDistribution};
use crate::scalar::Scalar;
use crate::subset::Subset;

/// Largest K accepted by [`lp_build`]; the variable count grows as `K^2 2^(K-1)`.
pub const DEFAULT_K_CAP: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    Normalization { s: usize, x: usize },
    Independence { reference: usize, s: usize, u: Subset },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint<T> {
    pub kind: ConstraintKind,
    pub coeffs: Vec<(usize, T)>,
    pub rhs: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpInstance<T> {
    pub k: usize,
    pub servers: usize,
    /// Variable j is `p(u | x, s)` for `variables[j] = (s, x, u)`.
    pub variables: Vec<(usize, usize, Subset)>,
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
}

impl<T: Scalar> LpInstance<T> {
    pub fn normalization_rows(&self) -> usize {
        self.constraints.iter().filter(|c| matches!(c.kind, ConstraintKind::Normalization { .. })).count()
    }

    pub fn independence_rows(&self) -> usize {
        self.constraints.len() - self.normalization_rows()
    }

    fn standard_form(&self) -> StandardForm<T> {
        StandardForm {
            rows: self.constraints.iter().map(|c| c.coeffs.clone()).collect(),
            rhs: self.constraints.iter().map(|c| c.rhs.clone()).collect(),
            cost: self.objective.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution<T> {
    pub policy: ObfuscationPolicy<T>,
    pub objective: T,
    pub pivots: usize,
}

pub fn lp_build<T: Scalar>(joint: &JointDistribution<T>, n: usize) -> Result<LpInstance<T>> {
    lp_build_with_cap(joint, n, DEFAULT_K_CAP)
}

pub fn lp_build_with_cap<T: Scalar>(joint: &JointDistribution<T>, n: usize, cap: usize) -> Result<LpInstance<T>> {
    let k = joint.k();
    if k > cap {
        return Err(Error::TooLarge { k, cap });
    }
    let costs: Vec<T> = (1..=k).map(|c| capacity_cost(n, c)).collect::<Result<_>>()?;
    let cond = ConditionalMatrix::from_joint(joint);
    let support = joint.support();

    let mut variables = Vec::new();
    let mut objective = Vec::new();
    let mut constraints = Vec::new();
    // index[s][x] lists (u, variable) pairs
    let mut index: Vec<Vec<Vec<(Subset, usize)>>> = vec![vec![Vec::new(); k]; k];
    for &s in &support {
        for x in 0..k {
            for u in Subset::all_nonempty(k).filter(|u| u.contains(x)) {
                index[s][x].push((u, variables.len()));
                variables.push((s, x, u));
                objective.push(joint.p(s, x).clone() * costs[u.len() - 1].clone());
            }
            constraints.push(Constraint {
                kind: ConstraintKind::Normalization { s, x },
                coeffs: index[s][x].iter().map(|&(_, v)| (v, T::one())).collect(),
                rhs: T::one(),
            });
        }
    }

    if let Some((&reference, rest)) = support.split_first() {
        for &s in rest {
            for u in Subset::all_nonempty(k) {
                let mut coeffs = Vec::new();
                for x in u.iter() {
                    let var = |row: usize| index[row][x].iter().find(|&&(w, _)| w == u).map(|&(_, v)| v);
                    let ps = cond.p(s, x);
                    if !ps.is_negligible() {
                        coeffs.push((var(s).expect("variable exists"), ps.clone()));
                    }
                    let pr = cond.p(reference, x);
                    if !pr.is_negligible() {
                        coeffs.push((var(reference).expect("variable exists"), -pr.clone()));
                    }
                }
                constraints.push(Constraint {
                    kind: ConstraintKind::Independence { reference, s, u },
                    coeffs,
                    rhs: T::zero(),
                });
            }
        }
    }

    Ok(LpInstance { k, servers: n, variables, objective, constraints })
}

pub fn lp_solve<T: Scalar>(inst: &LpInstance<T>) -> Result<LpSolution<T>> {
    let opt = simplex::minimize(&inst.standard_form())?;
    let mut policy = ObfuscationPolicy::new(inst.k);
    for (&(s, x, u), v) in inst.variables.iter().zip(opt.x) {
        policy.set(s, x, u, v);
    }
    log::debug!("lp: {} variables, {} rows, {} pivots", inst.variables.len(), inst.constraints.len(), opt.pivots);
    Ok(LpSolution { policy, objective: opt.objective, pivots: opt.pivots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{symmetric_pair_joint, three_way_joint};
    use crate::obfuscation::{expected_cost, greedy_construct, policy_validate};
    use crate::testing::r;
    use crate::Rational;

    #[test]
    fn symmetric_pair_instance_shape() {
        let inst = lp_build(&symmetric_pair_joint(), 2).unwrap();
        assert_eq!(inst.variables.len(), 8);
        assert_eq!(inst.normalization_rows(), 4);
        assert_eq!(inst.independence_rows(), 3);
        // objective of (s=1, x=1, {1,2}) is 3/8 * 3/2
        let j = inst.variables.iter().position(|&v| v == (0, 0, Subset::full(2))).unwrap();
        assert_eq!(inst.objective[j], r(9, 16));
    }

    #[test]
    fn symmetric_pair_optimum() {
        let joint = symmetric_pair_joint();
        let sol = lp_solve(&lp_build(&joint, 2).unwrap()).unwrap();
        assert_eq!(sol.objective, r(5, 4));
        assert!(policy_validate(&sol.policy, &joint).is_valid());
        assert_eq!(expected_cost(&sol.policy, &joint, 2).unwrap(), r(5, 4));
    }

    #[test]
    fn single_message() {
        let joint = JointDistribution::validate(vec![vec![r(1, 1)]]).unwrap();
        let sol = lp_solve(&lp_build(&joint, 3).unwrap()).unwrap();
        assert_eq!(sol.objective, r(1, 1));
        assert_eq!(sol.policy.get(0, 0, Subset::singleton(0)), r(1, 1));
    }

    #[test]
    fn independent_requests_cost_one() {
        let marg = [r(1, 2), r(1, 3), r(1, 6)];
        let rows = (0..3).map(|s| (0..3).map(|x| marg[s].clone() * marg[x].clone()).collect()).collect();
        let joint = JointDistribution::validate(rows).unwrap();
        let sol = lp_solve(&lp_build(&joint, 2).unwrap()).unwrap();
        assert_eq!(sol.objective, r(1, 1));
    }

    #[test]
    fn not_worse_than_greedy_on_three_way() {
        let joint = three_way_joint();
        let sol = lp_solve(&lp_build(&joint, 2).unwrap()).unwrap();
        assert!(policy_validate(&sol.policy, &joint).is_valid());
        let greedy = greedy_construct(&ConditionalMatrix::from_joint(&joint)).unwrap();
        assert!(sol.objective <= expected_cost(&greedy, &joint, 2).unwrap());
    }

    #[test]
    fn partial_support_prior() {
        let joint = JointDistribution::validate(vec![vec![r(1, 2), r(1, 2)], vec![r(0, 1), r(0, 1)]]).unwrap();
        let inst = lp_build(&joint, 2).unwrap();
        assert_eq!(inst.independence_rows(), 0);
        assert_eq!(lp_solve(&inst).unwrap().objective, r(1, 1));
    }

    #[test]
    fn cap_is_enforced() {
        let joint = JointDistribution::<Rational>::uniform(4);
        assert_eq!(lp_build_with_cap(&joint, 2, 3).unwrap_err(), Error::TooLarge { k: 4, cap: 3 });
    }
}
