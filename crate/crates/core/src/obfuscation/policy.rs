use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{capacity_cost, sample_weighted, ConditionalMatrix, JointDistribution};
use crate::scalar::{sum, Scalar};
use crate::subset::Subset;

/// Conditional law `p(U = u | X = x, S = s)`, stored sparsely. Indices are
/// 0-based; absent entries are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ObfuscationPolicy<T> {
    k: usize,
    entries: BTreeMap<(usize, usize, Subset), T>,
}

impl<T: Scalar> ObfuscationPolicy<T> {
    pub fn new(k: usize) -> Self {
        ObfuscationPolicy { k, entries: BTreeMap::new() }
    }

    /// `U = [K]` with probability one for every `(s, x)`.
    pub fn trivial(k: usize) -> Self {
        let mut p = Self::new(k);
        for s in 0..k {
            for x in 0..k {
                p.set(s, x, Subset::full(k), T::one());
            }
        }
        p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, s: usize, x: usize, u: Subset) -> T {
        self.entries.get(&(s, x, u)).cloned().unwrap_or_else(T::zero)
    }

    pub fn set(&mut self, s: usize, x: usize, u: Subset, p: T) {
        if p.is_negligible() {
            self.entries.remove(&(s, x, u));
        } else {
            self.entries.insert((s, x, u), p);
        }
    }

    pub fn add(&mut self, s: usize, x: usize, u: Subset, p: T) {
        let cur = self.get(s, x, u);
        self.set(s, x, u, cur + p);
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Subset, &T)> {
        self.entries.iter().map(|(&(s, x, u), p)| (s, x, u, p))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Subsets with positive probability for `(s, x)`.
    pub fn row(&self, s: usize, x: usize) -> impl Iterator<Item = (Subset, &T)> {
        self.entries.range((s, x, Subset::EMPTY)..=(s, x, Subset::from_mask(u32::MAX))).map(|(&(_, _, u), p)| (u, p))
    }

    /// `P(U = u | S = s) = sum_x p(u|x,s) p(x|s)`.
    pub fn u_given_s(&self, cond: &ConditionalMatrix<T>, s: usize) -> BTreeMap<Subset, T> {
        let mut out = BTreeMap::new();
        for x in 0..self.k {
            let px = cond.p(s, x);
            if px.is_negligible() {
                continue;
            }
            for (u, p) in self.row(s, x) {
                let e = out.entry(u).or_insert_with(T::zero);
                *e = e.clone() + p.clone() * px.clone();
            }
        }
        out
    }

    /// `P(U = u) = sum_{s,x} p(s,x) p(u|x,s)`.
    pub fn u_marginal(&self, joint: &JointDistribution<T>) -> BTreeMap<Subset, T> {
        let mut out = BTreeMap::new();
        for (s, x, u, p) in self.entries() {
            if s >= joint.k() || x >= joint.k() {
                continue;
            }
            let w = joint.p(s, x).clone() * p.clone();
            if w.is_negligible() {
                continue;
            }
            let e = out.entry(u).or_insert_with(T::zero);
            *e = e.clone() + w;
        }
        out
    }

    /// `P(|U| = c)` for `c = 0..=K`.
    pub fn size_marginal(&self, joint: &JointDistribution<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.k + 1];
        for (u, p) in self.u_marginal(joint) {
            out[u.len()] = out[u.len()].clone() + p;
        }
        out
    }

    pub fn to_file(&self) -> PolicyFile {
        PolicyFile {
            k: self.k,
            entries: self
                .entries()
                .map(|(s, x, u, p)| PolicyEntry { s: s + 1, x: x + 1, u: u.to_one_based(), p: p.render() })
                .collect(),
        }
    }

    pub fn from_file(file: &PolicyFile) -> Result<Self> {
        let k = file.k;
        if k == 0 || k > crate::subset::MAX_K {
            return Err(Error::Parse(format!("K = {k} out of range")));
        }
        let mut p = Self::new(k);
        for (n, e) in file.entries.iter().enumerate() {
            if e.s == 0 || e.s > k || e.x == 0 || e.x > k {
                return Err(Error::Parse(format!("entries[{n}]: index out of range")));
            }
            let u = Subset::from_one_based(&e.u, k)
                .ok_or_else(|| Error::Parse(format!("entries[{n}].u: member out of range")))?;
            let v = T::parse(&e.p).ok_or_else(|| Error::Parse(format!("entries[{n}].p: cannot parse {:?}", e.p)))?;
            p.add(e.s - 1, e.x - 1, u, v);
        }
        Ok(p)
    }
}

/// On-disk policy with 1-based indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub entries: Vec<PolicyEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub s: usize,
    pub x: usize,
    pub u: Vec<usize>,
    pub p: String,
}

/// Outcome of [`policy_validate`]. Witnesses are 0-based.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport<T> {
    /// `(s, x, u)` with positive mass although `x` is not in `u`.
    pub support: Option<(usize, usize, Subset)>,
    /// `(s, x, total)` whose row does not sum to one.
    pub normalization: Option<(usize, usize, T)>,
    /// `(reference s, s, u)` where `P(U = u | S = s)` differs.
    pub independence: Option<(usize, usize, Subset)>,
}

impl<T> ValidationReport<T> {
    pub fn support_ok(&self) -> bool {
        self.support.is_none()
    }

    pub fn normalization_ok(&self) -> bool {
        self.normalization.is_none()
    }

    pub fn independence_ok(&self) -> bool {
        self.independence.is_none()
    }

    pub fn is_valid(&self) -> bool {
        self.support_ok() && self.normalization_ok() && self.independence_ok()
    }
}

/// Checks `x in u`, normalization for every supported `(s, x)` and exact
/// independence of `U` from `S`.
pub fn policy_validate<T: Scalar>(policy: &ObfuscationPolicy<T>, joint: &JointDistribution<T>) -> ValidationReport<T> {
    let k = joint.k();
    let support =
        policy.entries().find(|&(_, x, u, _)| !u.contains(x) || !u.is_within(k)).map(|(s, x, u, _)| (s, x, u));

    let supp = joint.support();
    let normalization = supp
        .iter()
        .flat_map(|&s| (0..k).map(move |x| (s, x)))
        .map(|(s, x)| (s, x, sum(policy.row(s, x).map(|(_, p)| p.clone()))))
        .find(|(_, _, total)| !total.approx_eq(&T::one()));

    let cond = ConditionalMatrix::from_joint(joint);
    let mut independence = None;
    if let Some((&reference, rest)) = supp.split_first() {
        let base = policy.u_given_s(&cond, reference);
        'outer: for &s in rest {
            let other = policy.u_given_s(&cond, s);
            for u in base.keys().chain(other.keys()) {
                let a = base.get(u).cloned().unwrap_or_else(T::zero);
                let b = other.get(u).cloned().unwrap_or_else(T::zero);
                if !a.approx_eq(&b) {
                    independence = Some((reference, s, *u));
                    break 'outer;
                }
            }
        }
    }
    ValidationReport { support, normalization, independence }
}

/// `E[C(N, |U|)] = sum_{s,x,u} p(s,x) p(u|x,s) C(N,|u|)`.
pub fn expected_cost<T: Scalar>(policy: &ObfuscationPolicy<T>, joint: &JointDistribution<T>, n: usize) -> Result<T> {
    let mut total = T::zero();
    for (c, p) in policy.size_marginal(joint).into_iter().enumerate().skip(1) {
        if !p.is_negligible() {
            total = total + p * capacity_cost::<T>(n, c)?;
        }
    }
    Ok(total)
}

/// Draws `u ~ p(.|x, s)`; the result always contains `x`.
pub fn sample_subset<T: Scalar, R: Rng + ?Sized>(
    policy: &ObfuscationPolicy<T>,
    s: usize,
    x: usize,
    rng: &mut R,
) -> Result<Subset> {
    let candidates = policy.row(s, x).filter(|(u, _)| u.contains(x)).map(|(u, p)| (u, p.clone()));
    sample_weighted(candidates, rng).ok_or(Error::UnsupportedPair { s, x })
}
