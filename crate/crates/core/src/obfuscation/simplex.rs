//! Dense two-phase primal simplex with Bland's rule.
//!
//! Solves `minimize c.x subject to A x = b, x >= 0`. With an exact scalar the
//! result is an exact optimal vertex; Bland's rule rules out cycling, and the
//! pivot cap only guards against bugs.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct StandardForm<T> {
    /// Constraint rows as sparse `(column, coefficient)` lists.
    pub rows: Vec<Vec<(usize, T)>>,
    pub rhs: Vec<T>,
    pub cost: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimum<T> {
    pub x: Vec<T>,
    pub objective: T,
    pub pivots: usize,
}

pub const DEFAULT_PIVOT_LIMIT: usize = 200_000;

pub fn minimize<T: Scalar>(lp: &StandardForm<T>) -> Result<Optimum<T>> {
    minimize_with_limit(lp, DEFAULT_PIVOT_LIMIT)
}

pub fn minimize_with_limit<T: Scalar>(lp: &StandardForm<T>, limit: usize) -> Result<Optimum<T>> {
    let n = lp.cost.len();
    let m = lp.rows.len();
    if lp.rhs.len() != m {
        return Err(Error::InvalidParams(format!("{m} rows but {} right-hand sides", lp.rhs.len())));
    }
    let width = n + m + 1;
    let rhs_col = n + m;

    let mut tab = Tableau {
        rows: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
        obj: vec![T::zero(); width],
        pivots: 0,
        limit,
    };
    for (i, (row, b)) in lp.rows.iter().zip(&lp.rhs).enumerate() {
        let mut dense = vec![T::zero(); width];
        let flip = b.is_negative();
        for (j, a) in row {
            if *j >= n {
                return Err(Error::InvalidParams(format!("row {i} references column {j} of {n}")));
            }
            dense[*j] = dense[*j].clone() + if flip { -a.clone() } else { a.clone() };
        }
        dense[n + i] = T::one();
        dense[rhs_col] = if flip { -b.clone() } else { b.clone() };
        tab.rows.push(dense);
        tab.basis.push(n + i);
    }

    // Phase one: drive the artificial variables to zero.
    let mut phase1 = vec![T::zero(); n + m];
    for c in phase1.iter_mut().skip(n) {
        *c = T::one();
    }
    tab.price(&phase1);
    tab.run(n + m)?;
    let infeasibility = -tab.obj[rhs_col].clone();
    if !infeasibility.is_negligible() {
        return Err(Error::Infeasible);
    }

    // Pivot remaining (zero-valued) artificials out, or drop redundant rows.
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| !tab.rows[i][j].is_negligible()) {
                Some(j) => tab.pivot(i, j),
                None => {
                    tab.rows.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let mut phase2 = lp.cost.clone();
    phase2.extend(std::iter::repeat_with(T::zero).take(m));
    tab.price(&phase2);
    tab.run(n)?;

    let mut x = vec![T::zero(); n];
    for (row, &b) in tab.rows.iter().zip(&tab.basis) {
        if b < n {
            x[b] = row[rhs_col].clone();
        }
    }
    let objective = x.iter().zip(&lp.cost).fold(T::zero(), |acc, (xi, ci)| acc + xi.clone() * ci.clone());
    Ok(Optimum { x, objective, pivots: tab.pivots })
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    basis: Vec<usize>,
    /// Reduced costs; the last entry holds minus the objective value.
    obj: Vec<T>,
    pivots: usize,
    limit: usize,
}

impl<T: Scalar> Tableau<T> {
    fn price(&mut self, cost: &[T]) {
        let width = self.obj.len();
        let mut obj: Vec<T> = cost.to_vec();
        obj.push(T::zero());
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = &cost[b];
            if cb.is_negligible() {
                continue;
            }
            for j in 0..width {
                if !row[j].is_negligible() {
                    obj[j] = obj[j].clone() - cb.clone() * row[j].clone();
                }
            }
        }
        self.obj = obj;
    }

    /// Bland's rule over the first `allowed` columns.
    fn run(&mut self, allowed: usize) -> Result<()> {
        let rhs_col = self.obj.len() - 1;
        loop {
            let Some(enter) = (0..allowed).find(|&j| self.obj[j].is_negative() && !self.obj[j].is_negligible()) else {
                return Ok(());
            };
            let mut leave: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = &row[enter];
                if !a.is_positive() || a.is_negligible() {
                    continue;
                }
                let ratio = row[rhs_col].clone() / a.clone();
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br && !ratio.approx_eq(&br) {
                            Some((i, ratio))
                        } else if ratio.approx_eq(&br) && self.basis[i] < self.basis[bi] {
                            Some((i, br))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((row, _)) = leave else {
                return Err(Error::InvalidParams("linear program is unbounded".into()));
            };
            if self.pivots >= self.limit {
                return Err(Error::IterationLimit(self.limit));
            }
            self.pivot(row, enter);
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        self.pivots += 1;
        let width = self.obj.len();
        let inv = T::one() / self.rows[r][c].clone();
        let nz: Vec<usize> = (0..width).filter(|&j| !self.rows[r][j].is_negligible()).collect();
        for &j in &nz {
            self.rows[r][j] = self.rows[r][j].clone() * inv.clone();
        }
        self.rows[r][c] = T::one();
        let pivot_row = self.rows[r].clone();
        let eliminate = |target: &mut Vec<T>| {
            let f = target[c].clone();
            if f.is_negligible() {
                return;
            }
            for &j in &nz {
                target[j] = target[j].clone() - f.clone() * pivot_row[j].clone();
            }
            target[c] = T::zero();
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.basis[r] = c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::r;
    use crate::Rational;

    fn form(rows: Vec<Vec<(usize, Rational)>>, rhs: Vec<Rational>, cost: Vec<Rational>) -> StandardForm<Rational> {
        StandardForm { rows, rhs, cost }
    }

    #[test]
    fn small_exact_optimum() {
        // min -x0 - 2 x1  s.t.  x0 + x1 + s0 = 4,  x0 + 3 x1 + s1 = 6
        let lp = form(
            vec![vec![(0, r(1, 1)), (1, r(1, 1)), (2, r(1, 1))], vec![(0, r(1, 1)), (1, r(3, 1)), (3, r(1, 1))]],
            vec![r(4, 1), r(6, 1)],
            vec![r(-1, 1), r(-2, 1), r(0, 1), r(0, 1)],
        );
        let opt = minimize(&lp).unwrap();
        assert_eq!(opt.objective, r(-5, 1));
        assert_eq!(&opt.x[..2], &[r(3, 1), r(1, 1)]);
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        // x0 + x1 = 1 stated twice, once negated
        let lp = form(
            vec![vec![(0, r(1, 1)), (1, r(1, 1))], vec![(0, r(-1, 1)), (1, r(-1, 1))]],
            vec![r(1, 1), r(-1, 1)],
            vec![r(3, 1), r(2, 1)],
        );
        let opt = minimize(&lp).unwrap();
        assert_eq!(opt.objective, r(2, 1));
        assert_eq!(opt.x, vec![r(0, 1), r(1, 1)]);
    }

    #[test]
    fn infeasible_is_reported() {
        let lp = form(vec![vec![(0, r(1, 1))], vec![(0, r(1, 1))]], vec![r(1, 1), r(2, 1)], vec![r(1, 1)]);
        assert_eq!(minimize(&lp).unwrap_err(), Error::Infeasible);
    }

    #[test]
    fn pivot_limit_is_enforced() {
        let lp =
            form(vec![vec![(0, r(1, 1)), (1, r(1, 1)), (2, r(1, 1))]], vec![r(1, 1)], vec![r(1, 1), r(-1, 1), r(0, 1)]);
        assert_eq!(minimize_with_limit(&lp, 1).unwrap_err(), Error::IterationLimit(1));
    }

    #[test]
    fn float_instantiation_agrees() {
        let lp = StandardForm {
            rows: vec![vec![(0, 1.0), (1, 1.0), (2, 1.0)], vec![(0, 1.0), (1, 3.0), (3, 1.0)]],
            rhs: vec![4.0, 6.0],
            cost: vec![-1.0, -2.0, 0.0, 0.0],
        };
        let opt = minimize(&lp).unwrap();
        assert!((opt.objective + 5.0).abs() < 1e-9);
    }
}
