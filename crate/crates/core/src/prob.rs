//! Probability primitives, message storage and system configuration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sum, Scalar};

/// Joint law `p(S = s, X = x)` over `[K] x [K]`; `table[s][x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution<T> {
    k: usize,
    table: Vec<Vec<T>>,
}

impl<T: Scalar> JointDistribution<T> {
    /// Checks squareness, nonnegativity and that the entries sum to one.
    pub fn validate(raw: Vec<Vec<T>>) -> Result<Self> {
        let k = raw.len();
        if k == 0 {
            return Err(Error::Empty);
        }
        for (row, r) in raw.iter().enumerate() {
            if r.len() != k {
                return Err(Error::NotSquare { rows: k, row, len: r.len() });
            }
            for (col, v) in r.iter().enumerate() {
                if v.is_negative() && !v.is_negligible() {
                    return Err(Error::NegativeEntry { row, col, value: v.render() });
                }
            }
        }
        let total = sum(raw.iter().flatten().cloned());
        if !total.approx_eq(&T::one()) {
            let deficit = T::one() - total.clone();
            return Err(Error::SumNotOne { sum: total.render(), deficit: deficit.render() });
        }
        Ok(JointDistribution { k, table: raw })
    }

    /// `p(s, x) = prior(s) p(x|s)`.
    pub fn from_conditional(prior: &[T], cond: &ConditionalMatrix<T>) -> Result<Self> {
        if prior.len() != cond.k() {
            return Err(Error::InvalidParams("prior length differs from K".into()));
        }
        let table =
            (0..cond.k()).map(|s| (0..cond.k()).map(|x| prior[s].clone() * cond.p(s, x).clone()).collect()).collect();
        Self::validate(table)
    }

    pub fn uniform(k: usize) -> Self {
        let cell = T::from_ratio(1, (k * k) as i64);
        JointDistribution { k, table: vec![vec![cell; k]; k] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self, s: usize, x: usize) -> &T {
        &self.table[s][x]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.table
    }

    /// `p(S = s)` for every s.
    pub fn marginal_s(&self) -> Vec<T> {
        self.table.iter().map(|r| sum(r.iter().cloned())).collect()
    }

    pub fn marginal_x(&self) -> Vec<T> {
        (0..self.k).map(|x| sum(self.table.iter().map(|r| r[x].clone()))).collect()
    }

    /// Indices s with `p(S = s) > 0`.
    pub fn support(&self) -> Vec<usize> {
        self.marginal_s().iter().enumerate().filter(|(_, m)| !m.is_negligible()).map(|(s, _)| s).collect()
    }

    /// Draws `(s, x)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let cells = self
            .table
            .iter()
            .enumerate()
            .flat_map(|(s, r)| r.iter().enumerate().map(move |(x, p)| ((s, x), p.clone())));
        sample_weighted(cells, rng).expect("joint distribution has positive mass")
    }

    pub fn to_file(&self) -> JointFile {
        JointFile { k: self.k, p: self.table.iter().map(|r| r.iter().map(Scalar::render).collect()).collect() }
    }

    pub fn from_file(file: &JointFile) -> Result<Self> {
        let raw = parse_matrix(&file.p, "p")?;
        let joint = Self::validate(raw)?;
        if joint.k != file.k {
            return Err(Error::Parse(format!("K = {} but matrix is {}x{}", file.k, joint.k, joint.k)));
        }
        Ok(joint)
    }
}

/// On-disk form: `{"K": 2, "p": [["3/8","1/8"],["1/8","3/8"]]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub p: Vec<Vec<String>>,
}

/// On-disk conditional matrix: `{"K": 3, "rows": [["0.1","0.3","0.6"], ...]}`,
/// row s holding `p(X = .|S = s)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionalFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub rows: Vec<Vec<String>>,
}

pub(crate) fn parse_matrix<T: Scalar>(rows: &[Vec<String>], name: &str) -> Result<Vec<Vec<T>>> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .enumerate()
                .map(|(j, text)| {
                    T::parse(text).ok_or_else(|| Error::Parse(format!("{name}[{i}][{j}]: cannot parse {text:?}")))
                })
                .collect()
        })
        .collect()
}

pub fn validate_joint<T: Scalar>(raw: Vec<Vec<T>>) -> Result<JointDistribution<T>> {
    JointDistribution::validate(raw)
}

/// Likelihoods `p(X = x | S = s)`, `rows[s][x]`. Rows with `p(S = s) = 0` are
/// all-zero and excluded from `support`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalMatrix<T> {
    k: usize,
    rows: Vec<Vec<T>>,
    support: Vec<bool>,
}

impl<T: Scalar> ConditionalMatrix<T> {
    pub fn from_joint(joint: &JointDistribution<T>) -> Self {
        let k = joint.k();
        let marg = joint.marginal_s();
        let mut rows = Vec::with_capacity(k);
        let mut support = Vec::with_capacity(k);
        for (s, m) in marg.iter().enumerate() {
            if m.is_negligible() {
                rows.push(vec![T::zero(); k]);
                support.push(false);
            } else {
                rows.push(joint.rows()[s].iter().map(|v| v.clone() / m.clone()).collect());
                support.push(true);
            }
        }
        ConditionalMatrix { k, rows, support }
    }

    /// Builds from explicit rows. An all-zero row is treated as unsupported;
    /// every other row must be a probability vector.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::Empty);
        }
        let mut support = Vec::with_capacity(k);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(Error::NotSquare { rows: k, row, len: r.len() });
            }
            if let Some(col) = r.iter().position(|v| v.is_negative() && !v.is_negligible()) {
                return Err(Error::NegativeEntry { row, col, value: r[col].render() });
            }
            let total = sum(r.iter().cloned());
            if total.is_negligible() {
                support.push(false);
            } else if total.approx_eq(&T::one()) {
                support.push(true);
            } else {
                let deficit = T::one() - total.clone();
                return Err(Error::SumNotOne { sum: total.render(), deficit: deficit.render() });
            }
        }
        Ok(ConditionalMatrix { k, rows, support })
    }

    pub fn from_file(file: &ConditionalFile) -> Result<Self> {
        let cond = Self::from_rows(parse_matrix(&file.rows, "rows")?)?;
        if cond.k != file.k {
            return Err(Error::Parse(format!("K = {} but matrix is {}x{}", file.k, cond.k, cond.k)));
        }
        Ok(cond)
    }

    pub fn to_file(&self) -> ConditionalFile {
        ConditionalFile { k: self.k, rows: self.rows.iter().map(|r| r.iter().map(Scalar::render).collect()).collect() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self, s: usize, x: usize) -> &T {
        &self.rows[s][x]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn is_supported(&self, s: usize) -> bool {
        self.support[s]
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.k).filter(|&s| self.support[s]).collect()
    }

    pub fn has_full_support(&self) -> bool {
        self.support.iter().all(|&b| b)
    }
}

/// `C(N, k) = 1 + 1/N + ... + 1/N^(k-1)`, the normalized download cost of
/// capacity-achieving PIR over k messages.
pub fn capacity_cost<T: Scalar>(n: usize, k: usize) -> Result<T> {
    if n < 2 || k < 1 {
        return Err(Error::InvalidParams(format!("capacity_cost needs N >= 2, k >= 1 (got N = {n}, k = {k})")));
    }
    let inv = T::from_ratio(1, n as i64);
    let mut term = T::one();
    let mut total = T::zero();
    for _ in 0..k {
        total = total + term.clone();
        term = term * inv.clone();
    }
    Ok(total)
}

/// Draws one label with probability proportional to its weight. Zero-weight
/// labels are never returned.
pub(crate) fn sample_weighted<L, T, I, R>(items: I, rng: &mut R) -> Option<L>
where
    T: Scalar,
    I: IntoIterator<Item = (L, T)>,
    R: Rng + ?Sized,
{
    let items: Vec<(L, f64)> =
        items.into_iter().filter(|(_, w)| !w.is_negligible()).map(|(l, w)| (l, w.to_f64())).collect();
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut target = rng.random::<f64>() * total;
    let last = items.len().checked_sub(1)?;
    for (i, (label, w)) in items.into_iter().enumerate() {
        if target < w || i == last {
            return Some(label);
        }
        target -= w;
    }
    None
}

/// K replicated messages of L bits each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageStore {
    messages: Vec<Vec<bool>>,
    length: usize,
}

impl MessageStore {
    pub fn new(messages: Vec<Vec<bool>>) -> Result<Self> {
        let length = messages.first().map(Vec::len).ok_or(Error::Empty)?;
        if let Some(m) = messages.iter().position(|m| m.len() != length) {
            return Err(Error::InvalidParams(format!(
                "message {} has {} bits, expected {length}",
                m + 1,
                messages[m].len()
            )));
        }
        Ok(MessageStore { messages, length })
    }

    /// Parses `'0'/'1'` strings, one per message.
    pub fn from_bit_strings(rows: &[&str]) -> Result<Self> {
        let messages = rows
            .iter()
            .map(|r| {
                r.chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(Error::Parse(format!("bad bit {other:?}"))),
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(messages)
    }

    pub fn random<R: Rng + ?Sized>(k: usize, length: usize, rng: &mut R) -> Self {
        let messages = (0..k).map(|_| (0..length).map(|_| rng.random()).collect()).collect();
        MessageStore { messages, length }
    }

    pub fn k(&self) -> usize {
        self.messages.len()
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn message(&self, m: usize) -> &[bool] {
        &self.messages[m]
    }

    pub fn bit(&self, message: usize, bit: usize) -> Option<bool> {
        self.messages.get(message)?.get(bit).copied()
    }
}

/// N servers, K messages of L bits, and the root seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub servers: usize,
    pub messages: usize,
    pub length: usize,
    pub seed: u64,
}

impl SystemConfig {
    pub fn new(servers: usize, messages: usize, length: usize, seed: u64) -> Result<Self> {
        let cfg = SystemConfig { servers, messages, length, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Smallest valid length, `L = N^K`.
    pub fn minimal(servers: usize, messages: usize, seed: u64) -> Result<Self> {
        let length = checked_pow(servers, messages).ok_or_else(|| Error::InvalidParams("N^K overflows".into()))?;
        Self::new(servers, messages, length, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.servers < 2 {
            return Err(Error::InvalidParams(format!("N = {} < 2", self.servers)));
        }
        if self.messages < 1 || self.messages > crate::subset::MAX_K {
            return Err(Error::InvalidParams(format!("K = {} out of range", self.messages)));
        }
        let block =
            checked_pow(self.servers, self.messages).ok_or_else(|| Error::InvalidParams("N^K overflows".into()))?;
        if self.length == 0 || !self.length.is_multiple_of(block) {
            return Err(Error::BlockMismatch { block, length: self.length });
        }
        Ok(())
    }
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn pair() -> Vec<Vec<Rational>> {
        vec![vec![r(3, 8), r(1, 8)], vec![r(1, 8), r(3, 8)]]
    }

    #[test]
    fn validates_pair() {
        let j = validate_joint(pair()).unwrap();
        assert_eq!(j.k(), 2);
        assert_eq!(j.marginal_s(), vec![r(1, 2), r(1, 2)]);
    }

    #[test]
    fn rejects_bad_sum_with_deficit() {
        let err = validate_joint(vec![vec![r(1, 2), r(1, 2)], vec![r(1, 4), r(1, 4)]]).unwrap_err();
        assert_eq!(err, Error::SumNotOne { sum: "3/2".into(), deficit: "-1/2".into() });
    }

    #[test]
    fn rejects_negative_and_non_square() {
        let err = validate_joint(vec![vec![r(3, 2), r(-1, 2)], vec![r(0, 1), r(0, 1)]]).unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { row: 0, col: 1, .. }));
        let err = validate_joint(vec![vec![r(1, 1), r(0, 1)]]).unwrap_err();
        assert!(matches!(err, Error::NotSquare { .. }));
    }

    #[test]
    fn degenerate_point_mass_is_valid() {
        let j = validate_joint(vec![vec![r(1, 1), r(0, 1)], vec![r(0, 1), r(0, 1)]]).unwrap();
        assert_eq!(j.support(), vec![0]);
    }

    #[test]
    fn conditional_of_pair() {
        let c = ConditionalMatrix::from_joint(&validate_joint(pair()).unwrap());
        assert_eq!(c.rows(), &[vec![r(3, 4), r(1, 4)], vec![r(1, 4), r(3, 4)]]);
        assert!(c.has_full_support());
    }

    #[test]
    fn conditional_of_uniform_and_unsupported_row() {
        let c = ConditionalMatrix::from_joint(&JointDistribution::<Rational>::uniform(3));
        assert!(c.rows().iter().flatten().all(|v| *v == r(1, 3)));

        let j = validate_joint(vec![vec![r(1, 4), r(3, 4)], vec![r(0, 1), r(0, 1)]]).unwrap();
        let c = ConditionalMatrix::from_joint(&j);
        assert_eq!(c.support(), vec![0]);
        assert!(!c.is_supported(1));
    }

    #[test]
    fn capacity_values() {
        assert_eq!(capacity_cost::<Rational>(2, 2).unwrap(), r(3, 2));
        assert_eq!(capacity_cost::<Rational>(2, 3).unwrap(), r(7, 4));
        for n in 2..6 {
            assert_eq!(capacity_cost::<Rational>(n, 1).unwrap(), r(1, 1));
        }
        assert!(capacity_cost::<Rational>(1, 2).is_err());
        assert!(capacity_cost::<Rational>(2, 0).is_err());
    }

    #[test]
    fn capacity_is_monotone() {
        for n in 2..=8 {
            for k in 1..10 {
                let here = capacity_cost::<Rational>(n, k).unwrap();
                assert!(capacity_cost::<Rational>(n, k + 1).unwrap() > here);
                assert!(capacity_cost::<Rational>(n + 1, k).unwrap() < here || k == 1);
            }
        }
    }

    #[test]
    fn config_requires_block_divisibility() {
        assert!(SystemConfig::new(2, 2, 4, 0).is_ok());
        assert!(SystemConfig::new(2, 2, 8, 0).is_ok());
        assert!(matches!(SystemConfig::new(2, 2, 6, 0), Err(Error::BlockMismatch { .. })));
        assert!(SystemConfig::new(1, 2, 4, 0).is_err());
        assert_eq!(SystemConfig::minimal(3, 2, 0).unwrap().length, 9);
    }

    #[test]
    fn joint_file_round_trip_and_bad_entry() {
        let j = validate_joint(pair()).unwrap();
        let text = serde_json::to_string(&j.to_file()).unwrap();
        assert_eq!(text, r#"{"K":2,"p":[["3/8","1/8"],["1/8","3/8"]]}"#);
        let back: JointFile = serde_json::from_str(&text).unwrap();
        assert_eq!(JointDistribution::<Rational>::from_file(&back).unwrap(), j);

        let bad = JointFile { k: 2, p: vec![vec!["1/2".into(), "x".into()], vec!["0".into(), "0".into()]] };
        let err = JointDistribution::<Rational>::from_file(&bad).unwrap_err();
        assert!(err.to_string().contains("p[0][1]"), "{err}");
    }
}
