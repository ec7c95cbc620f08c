use crate::scalar::Scalar;
use crate::Rational;

pub(crate) fn r(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}
