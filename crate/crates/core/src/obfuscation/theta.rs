use crate::error::{Error, Result};
use crate::prob::{capacity_cost, ConditionalMatrix};
use crate::scalar::Scalar;

/// Sorted-likelihood profile of a conditional matrix.
///
/// `order[i]` lists the rows s in increasing order of `p(X = i | S = s)`
/// (ties: smaller s first), `lambda[j]` sums the (j+1)-th smallest likelihood
/// of every column, `sigma` is the largest (1-based) j with `lambda_j <= 1`
/// and `theta[j]` is the guaranteed mass of sets of size j+1.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaProfile<T> {
    pub k: usize,
    pub lambda: Vec<T>,
    pub sigma: usize,
    pub theta: Vec<T>,
    pub order: Vec<Vec<usize>>,
}

impl<T: Scalar> ThetaProfile<T> {
    /// `sum_{j <= i} theta_j` for `i = 1..=K` (index i-1).
    pub fn cumulative(&self) -> Vec<T> {
        let mut acc = T::zero();
        self.theta
            .iter()
            .map(|t| {
                acc = acc.clone() + t.clone();
                acc.clone()
            })
            .collect()
    }

    /// 1-based rank of row `s` in column `i`.
    pub fn rank(&self, i: usize, s: usize) -> Option<usize> {
        self.order[i].iter().position(|&r| r == s).map(|p| p + 1)
    }
}

/// Requires every row to be supported.
pub fn theta_profile<T: Scalar>(cond: &ConditionalMatrix<T>) -> Result<ThetaProfile<T>> {
    if let Some(row) = (0..cond.k()).find(|&s| !cond.is_supported(s)) {
        return Err(Error::PartialSupport { row });
    }
    Ok(profile_over(cond, &cond.support()))
}

/// Profile restricted to the given rows; `lambda` then has one entry per row.
pub(crate) fn profile_over<T: Scalar>(cond: &ConditionalMatrix<T>, rows: &[usize]) -> ThetaProfile<T> {
    let k = cond.k();
    let m = rows.len();
    let order: Vec<Vec<usize>> = (0..k)
        .map(|i| {
            let mut col = rows.to_vec();
            // stable sort keeps smaller s first on ties
            col.sort_by(|&a, &b| cond.p(a, i).partial_cmp(cond.p(b, i)).expect("comparable likelihoods"));
            col
        })
        .collect();
    let lambda: Vec<T> =
        (0..m).map(|j| (0..k).fold(T::zero(), |acc, i| acc + cond.p(order[i][j], i).clone())).collect();
    let sigma = (0..m).filter(|&j| T::one().at_least(&lambda[j])).map(|j| j + 1).max().unwrap_or(0);

    let mut theta = vec![T::zero(); k];
    for j in 0..sigma {
        theta[j] = if j == 0 { lambda[0].clone() } else { lambda[j].clone() - lambda[j - 1].clone() };
    }
    if sigma < k && sigma > 0 {
        let rest = T::one() - lambda[sigma - 1].clone();
        if !rest.is_negligible() {
            theta[sigma] = rest;
        }
    }
    ThetaProfile { k, lambda, sigma, theta, order }
}

/// `sum_i theta_i C(N, i)`: the cost when `|U|` meets the guarantee with
/// equality, which is the largest cost any admissible `|U|` law can have.
pub fn theorem_bound<T: Scalar>(profile: &ThetaProfile<T>, n: usize) -> Result<T> {
    let mut total = T::zero();
    for (j, t) in profile.theta.iter().enumerate() {
        if !t.is_negligible() {
            total = total + t.clone() * capacity_cost::<T>(n, j + 1)?;
        }
    }
    Ok(total)
}

/// Lower bound on the cost of any independent policy. Since every supported
/// s releases the same law of U, `P(x in U) >= max_s p(x|s)`, so
/// `E|U| >= m = sum_x max_s p(x|s)`. With `C(N, .)` concave, the cheapest law
/// of mean m sits on sizes 1 and K, giving the chord value at m.
pub fn coverage_bound<T: Scalar>(cond: &ConditionalMatrix<T>, n: usize) -> Result<T> {
    let k = cond.k();
    let rows = cond.support();
    if k == 1 || rows.is_empty() {
        return Ok(T::one());
    }
    let m = (0..k).fold(T::zero(), |acc, x| {
        let top = rows.iter().map(|&s| cond.p(s, x).clone()).fold(T::zero(), |a, b| if b > a { b } else { a });
        acc + top
    });
    let slope = (capacity_cost::<T>(n, k)? - T::one()) / T::from_count(k - 1);
    Ok(T::one() + (m - T::one()) * slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{symmetric_pair_joint, three_way_conditional};
    use crate::testing::r;
    use crate::Rational;

    #[test]
    fn three_way_profile() {
        let p = theta_profile(&three_way_conditional()).unwrap();
        assert_eq!(p.lambda, vec![r(1, 2), r(9, 10), r(8, 5)]);
        assert_eq!(p.sigma, 2);
        assert_eq!(p.theta, vec![r(1, 2), r(2, 5), r(1, 10)]);
        assert_eq!(p.order[0], vec![0, 2, 1]);
        assert_eq!(p.order[1], vec![0, 1, 2]);
        assert_eq!(p.order[2], vec![1, 2, 0]);
        assert_eq!(theorem_bound(&p, 2).unwrap(), r(51, 40));
    }

    #[test]
    fn symmetric_pair_profile() {
        let cond = ConditionalMatrix::from_joint(&symmetric_pair_joint());
        let p = theta_profile(&cond).unwrap();
        assert_eq!(p.lambda, vec![r(1, 2), r(3, 2)]);
        assert_eq!(p.sigma, 1);
        assert_eq!(p.theta, vec![r(1, 2), r(1, 2)]);
        assert_eq!(theorem_bound(&p, 2).unwrap(), r(5, 4));
        assert_eq!(coverage_bound(&cond, 2).unwrap(), r(5, 4));
    }

    #[test]
    fn uniform_rows_collapse_to_singletons() {
        let cond = ConditionalMatrix::from_rows(vec![vec![r(1, 3); 3]; 3]).unwrap();
        let p = theta_profile(&cond).unwrap();
        assert!(p.lambda.iter().all(|l| *l == r(1, 1)));
        assert_eq!(p.sigma, 3);
        assert_eq!(p.theta, vec![r(1, 1), r(0, 1), r(0, 1)]);
        assert_eq!(theorem_bound(&p, 5).unwrap(), r(1, 1));
        assert_eq!(coverage_bound(&cond, 5).unwrap(), r(1, 1));
    }

    #[test]
    fn coverage_bound_on_three_way() {
        // m = 1/2 + 1/2 + 3/5 = 8/5, chord from C(2,1) = 1 to C(2,3) = 7/4
        assert_eq!(coverage_bound(&three_way_conditional(), 2).unwrap(), r(1, 1) + r(3, 5) * r(3, 8));
    }

    #[test]
    fn partial_support_is_rejected() {
        let cond =
            ConditionalMatrix::<Rational>::from_rows(vec![vec![r(1, 2), r(1, 2)], vec![r(0, 1), r(0, 1)]]).unwrap();
        assert_eq!(theta_profile(&cond).unwrap_err(), Error::PartialSupport { row: 1 });
    }

    #[test]
    fn ties_prefer_smaller_row() {
        let cond = ConditionalMatrix::from_rows(vec![vec![r(1, 2), r(1, 2)], vec![r(1, 2), r(1, 2)]]).unwrap();
        let p = theta_profile(&cond).unwrap();
        assert_eq!(p.order, vec![vec![0, 1], vec![0, 1]]);
    }
}
