//! Small reference instances used by tests, the CLI scenarios and the docs.

use crate::obfuscation::ObfuscationPolicy;
use crate::prob::{ConditionalMatrix, JointDistribution};
use crate::scalar::Scalar;
use crate::subset::Subset;
use crate::Rational;

fn r(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

/// Two requests that agree with probability 3/4:
/// `p = [[3/8, 1/8], [1/8, 3/8]]`.
pub fn symmetric_pair_joint() -> JointDistribution<Rational> {
    JointDistribution::validate(vec![vec![r(3, 8), r(1, 8)], vec![r(1, 8), r(3, 8)]]).expect("valid joint")
}

/// A feasible obfuscation policy for [`symmetric_pair_joint`] with expected
/// cost 5/4 at N = 2.
pub fn symmetric_pair_policy() -> ObfuscationPolicy<Rational> {
    let one = Subset::singleton(0);
    let two = Subset::singleton(1);
    let both = Subset::full(2);
    let mut p = ObfuscationPolicy::new(2);
    p.set(0, 0, one, r(1, 3));
    p.set(0, 0, both, r(2, 3));
    p.set(0, 1, two, r(1, 1));
    p.set(1, 0, one, r(1, 1));
    p.set(1, 1, two, r(1, 3));
    p.set(1, 1, both, r(2, 3));
    p
}

/// Three-valued likelihood matrix `p(x|s)` whose greedy construction needs
/// one companion per column.
pub fn three_way_conditional() -> ConditionalMatrix<Rational> {
    ConditionalMatrix::from_rows(vec![
        vec![r(1, 10), r(3, 10), r(6, 10)],
        vec![r(5, 10), r(4, 10), r(1, 10)],
        vec![r(2, 10), r(5, 10), r(3, 10)],
    ])
    .expect("valid conditional")
}

/// [`three_way_conditional`] under a uniform prior on S.
pub fn three_way_joint() -> JointDistribution<Rational> {
    JointDistribution::from_conditional(&[r(1, 3), r(1, 3), r(1, 3)], &three_way_conditional()).expect("valid joint")
}
