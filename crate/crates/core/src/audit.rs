//! Privacy verification.
//!
//! Exact checks build rational joint laws by enumeration and test whether
//! they factorize; the reported bits are a floating-point diagnostic only.
//! Empirical checks compare sampled query features across private values by
//! total-variation distance.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::location::{
    advance, condition, posterior_init, step_policy, tau, Matrix, MobilityModel, PosteriorState, PrivacySchedule,
};
use crate::obfuscation::{sample_subset, theta_profile, ObfuscationPolicy, Solver};
use crate::pir::{all_keys, key_space_size, pir_query, pir_query_with_key, pir_setup, PirQuery};
use crate::prob::{ConditionalMatrix, JointDistribution, SystemConfig};
use crate::rng::SeedTree;
use crate::scalar::{sum, Scalar};
use crate::subset::Subset;
use crate::Rational;

/// Largest enumeration attempted by exact audits.
pub const EXACT_STATE_CAP: u128 = 10_000_000;
pub const DEFAULT_TV_THRESHOLD: f64 = 0.01;
pub const DEFAULT_EMPIRICAL_TRIALS: u64 = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct MiResult {
    pub exact_zero: bool,
    pub bits: f64,
    /// A cell where `p(a, b) != p(a) p(b)`.
    pub witness: Option<String>,
}

/// Finite joint law of two labelled variables.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteJoint<A: Ord, B: Ord> {
    cells: BTreeMap<(A, B), Rational>,
}

impl<A: Ord + Clone + Debug, B: Ord + Clone + Debug> Default for DiscreteJoint<A, B> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A: Ord + Clone + Debug, B: Ord + Clone + Debug> DiscreteJoint<A, B> {
    pub fn new() -> Self {
        DiscreteJoint { cells: BTreeMap::new() }
    }

    pub fn add(&mut self, a: A, b: B, p: Rational) {
        if p.is_negligible() {
            return;
        }
        let e = self.cells.entry((a, b)).or_insert_with(|| Rational::from_ratio(0, 1));
        *e = e.clone() + p;
    }

    pub fn get(&self, a: &A, b: &B) -> Rational {
        self.cells.get(&(a.clone(), b.clone())).cloned().unwrap_or_else(|| Rational::from_ratio(0, 1))
    }

    pub fn total(&self) -> Rational {
        sum(self.cells.values().cloned())
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn marginal_a(&self) -> BTreeMap<A, Rational> {
        let mut out = BTreeMap::new();
        for ((a, _), p) in &self.cells {
            let e = out.entry(a.clone()).or_insert_with(|| Rational::from_ratio(0, 1));
            *e = e.clone() + p.clone();
        }
        out
    }

    pub fn marginal_b(&self) -> BTreeMap<B, Rational> {
        let mut out = BTreeMap::new();
        for ((_, b), p) in &self.cells {
            let e = out.entry(b.clone()).or_insert_with(|| Rational::from_ratio(0, 1));
            *e = e.clone() + p.clone();
        }
        out
    }
}

/// `I(A; B)`, with zero decided by exact factorization. The joint need not
/// be normalized.
pub fn mutual_information<A: Ord + Clone + Debug, B: Ord + Clone + Debug>(j: &DiscreteJoint<A, B>) -> MiResult {
    let total = j.total();
    if total.is_negligible() {
        return MiResult { exact_zero: true, bits: 0.0, witness: None };
    }
    let ma = j.marginal_a();
    let mb = j.marginal_b();
    let mut witness = None;
    'outer: for (a, pa) in &ma {
        for (b, pb) in &mb {
            if j.get(a, b) * total.clone() != pa.clone() * pb.clone() {
                witness = Some(format!("{a:?} / {b:?}"));
                break 'outer;
            }
        }
    }
    let t = total.to_f64();
    let bits = j
        .cells
        .iter()
        .map(|((a, b), p)| {
            let p = p.to_f64() / t;
            let q = ma[a].to_f64() / t * mb[b].to_f64() / t;
            p * (p / q).log2()
        })
        .sum::<f64>()
        .max(0.0);
    let exact_zero = witness.is_none();
    MiResult { exact_zero, bits: if exact_zero { 0.0 } else { bits }, witness }
}

/// `I(A; B | C)` over cells keyed `(a, b, c)`: zero iff every slice factorizes.
pub fn conditional_mutual_information<A, B, C>(cells: &BTreeMap<(A, B, C), Rational>) -> MiResult
where
    A: Ord + Clone + Debug,
    B: Ord + Clone + Debug,
    C: Ord + Clone + Debug,
{
    let mut slices: BTreeMap<C, DiscreteJoint<A, B>> = BTreeMap::new();
    for ((a, b, c), p) in cells {
        slices.entry(c.clone()).or_default().add(a.clone(), b.clone(), p.clone());
    }
    let total = sum(cells.values().cloned()).to_f64();
    let mut out = MiResult { exact_zero: true, bits: 0.0, witness: None };
    for (c, slice) in &slices {
        let mi = mutual_information(slice);
        out.bits += slice.total().to_f64() / total * mi.bits;
        if !mi.exact_zero && out.exact_zero {
            out.exact_zero = false;
            out.witness = mi.witness.map(|w| format!("{c:?}: {w}"));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub mode: Mode,
    /// Mutual information in bits (exact mode) or total-variation distance.
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl AuditCheck {
    fn exact(name: impl Into<String>, mi: MiResult) -> Self {
        AuditCheck {
            name: name.into(),
            mode: Mode::Exact,
            value: mi.bits,
            threshold: None,
            pass: mi.exact_zero,
            witness: mi.witness,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = AuditCheck>) {
        self.checks.extend(checks);
    }
}

/// `I(S; U) = 0` for the law `p(s) p(x|s) p(u|x,s)`.
pub fn audit_policy_independence(
    policy: &ObfuscationPolicy<Rational>,
    joint: &JointDistribution<Rational>,
) -> AuditCheck {
    let mut j = DiscreteJoint::new();
    for (s, x, u, p) in policy.entries() {
        if s < joint.k() && x < joint.k() {
            j.add(s + 1, u, joint.p(s, x).clone() * p.clone());
        }
    }
    AuditCheck::exact("I(S;U)", mutual_information(&j))
}

/// `P(|U| <= i) >= theta_1 + ... + theta_i` for every i, using the law of U
/// given the first supported row.
pub fn check_theta_bound(policy: &ObfuscationPolicy<Rational>, cond: &ConditionalMatrix<Rational>) -> AuditCheck {
    let name = "P(|U|<=i) >= theta_1+..+theta_i";
    let profile = match theta_profile(cond) {
        Ok(p) => p,
        Err(e) => {
            return AuditCheck {
                name: name.into(),
                mode: Mode::Exact,
                value: 0.0,
                threshold: None,
                pass: false,
                witness: Some(e.to_string()),
            };
        }
    };
    let cdf = crate::obfuscation::size_cdf_given_s(policy, cond, 0);
    let guarantee = profile.cumulative();
    let failure = (0..cond.k()).find(|&i| cdf[i] < guarantee[i]);
    let slack = (0..cond.k()).map(|i| (cdf[i].clone() - guarantee[i].clone()).to_f64()).fold(f64::INFINITY, f64::min);
    AuditCheck {
        name: name.into(),
        mode: Mode::Exact,
        value: slack,
        threshold: None,
        pass: failure.is_none(),
        witness: failure.map(|i| format!("i = {}: {} < {}", i + 1, cdf[i].render(), guarantee[i].render())),
    }
}

/// Per server, how often each canonical query occurs over all keys, for PIR
/// over `u` wanting `desired`.
#[derive(Clone, Debug)]
pub struct QueryLaw {
    pub keys: u64,
    pub per_server: Vec<BTreeMap<PirQuery, u64>>,
}

impl QueryLaw {
    pub fn enumerate(servers: usize, u: Subset, desired: usize, length: usize) -> Result<Self> {
        let params = pir_setup(servers, u, length)?;
        let size = key_space_size(&params);
        if size > EXACT_STATE_CAP {
            return Err(Error::ExactModeInfeasible { states: size, cap: EXACT_STATE_CAP });
        }
        let mut per_server = vec![BTreeMap::new(); servers];
        for key in all_keys(&params) {
            for q in pir_query_with_key(&params, desired, &key)? {
                *per_server[q.server].entry(q).or_insert(0) += 1;
            }
        }
        Ok(QueryLaw { keys: size as u64, per_server })
    }

    pub fn probability(&self, server: usize) -> impl Iterator<Item = (&PirQuery, Rational)> {
        let keys = self.keys as i64;
        self.per_server[server].iter().map(move |(q, &c)| (q, Rational::from_ratio(c as i64, keys)))
    }
}

/// Memoized [`QueryLaw`]s.
#[derive(Default)]
pub struct QueryLaws {
    servers: usize,
    length: usize,
    cache: HashMap<(Subset, usize), QueryLaw>,
}

impl QueryLaws {
    pub fn new(servers: usize, length: usize) -> Self {
        QueryLaws { servers, length, cache: HashMap::new() }
    }

    pub fn get(&mut self, u: Subset, desired: usize) -> Result<&QueryLaw> {
        if !self.cache.contains_key(&(u, desired)) {
            let law = QueryLaw::enumerate(self.servers, u, desired, self.length)?;
            self.cache.insert((u, desired), law);
        }
        Ok(&self.cache[&(u, desired)])
    }
}

fn enumeration_size(
    joint: &JointDistribution<Rational>,
    policy: &ObfuscationPolicy<Rational>,
    config: &SystemConfig,
) -> Result<u128> {
    let mut total = 0u128;
    for (s, x, u, p) in policy.entries() {
        if s >= joint.k() || joint.p(s, x).is_negligible() || p.is_negligible() {
            continue;
        }
        total = total.saturating_add(key_space_size(&pir_setup(config.servers, u, config.length)?));
    }
    Ok(total)
}

/// `(S, Q_i)` law of the non-private request at server i, by enumeration.
fn nonprivate_query_joint(
    joint: &JointDistribution<Rational>,
    policy: &ObfuscationPolicy<Rational>,
    laws: &mut QueryLaws,
    server: usize,
) -> Result<DiscreteJoint<usize, PirQuery>> {
    let mut j = DiscreteJoint::new();
    for (s, x, u, p) in policy.entries() {
        if s >= joint.k() {
            continue;
        }
        let w = joint.p(s, x).clone() * p.clone();
        if w.is_negligible() {
            continue;
        }
        for (q, pq) in laws.get(u, x)?.probability(server) {
            j.add(s + 1, q.clone(), w.clone() * pq);
        }
    }
    Ok(j)
}

/// Exact `I(S; Q_i) = 0` for the non-private request at every server.
pub fn audit_query_privacy_exact(
    joint: &JointDistribution<Rational>,
    policy: &ObfuscationPolicy<Rational>,
    config: &SystemConfig,
) -> Result<Vec<AuditCheck>> {
    let states = enumeration_size(joint, policy, config)?;
    if states > EXACT_STATE_CAP {
        return Err(Error::ExactModeInfeasible { states, cap: EXACT_STATE_CAP });
    }
    let mut laws = QueryLaws::new(config.servers, config.length);
    (0..config.servers)
        .map(|i| {
            let j = nonprivate_query_joint(joint, policy, &mut laws, i)?;
            Ok(AuditCheck::exact(format!("I(S;Q_{}^X)", i + 1), mutual_information(&j)))
        })
        .collect()
}

/// Accumulates low-dimensional query features per private value and
/// compares each private value's feature law with the pooled one.
///
/// Features per server: the set of messages a query touches, and for every
/// `(message, bit)` the size of the sum it appears in (0 if absent).
#[derive(Clone, Debug)]
pub struct EmpiricalQueryAudit {
    k: usize,
    length: usize,
    /// `counts[server][feature][s]` maps a feature value to its count.
    counts: Vec<Vec<Vec<BTreeMap<u32, u64>>>>,
    per_s: Vec<u64>,
}

impl EmpiricalQueryAudit {
    pub fn new(k: usize, servers: usize, length: usize) -> Self {
        let features = 1 + k * length;
        EmpiricalQueryAudit {
            k,
            length,
            counts: vec![vec![vec![BTreeMap::new(); k]; features]; servers],
            per_s: vec![0; k],
        }
    }

    pub fn observe(&mut self, s: usize, queries: &[PirQuery]) {
        self.per_s[s] += 1;
        for q in queries {
            let mut size = vec![0u32; self.k * self.length];
            let mut touched = Subset::EMPTY;
            for combo in &q.combos {
                for &(m, b) in combo {
                    touched = touched.with(m);
                    size[m * self.length + b] = combo.len() as u32;
                }
            }
            let by_feature = &mut self.counts[q.server];
            *by_feature[0][s].entry(touched.mask()).or_insert(0) += 1;
            for (f, v) in size.into_iter().enumerate() {
                *by_feature[f + 1][s].entry(v).or_insert(0) += 1;
            }
        }
    }

    fn feature_name(&self, f: usize) -> String {
        if f == 0 {
            "messages touched".into()
        } else {
            let (m, b) = ((f - 1) / self.length, (f - 1) % self.length);
            format!("sum size of (message {}, bit {b})", m + 1)
        }
    }

    /// One check per server: the largest TV distance over features and s.
    pub fn finish(&self, threshold: f64) -> Vec<AuditCheck> {
        let total: u64 = self.per_s.iter().sum();
        self.counts
            .iter()
            .enumerate()
            .map(|(server, features)| {
                let mut worst = (0.0f64, String::new());
                for (f, by_s) in features.iter().enumerate() {
                    let mut pooled: BTreeMap<u32, u64> = BTreeMap::new();
                    for m in by_s {
                        for (&v, &c) in m {
                            *pooled.entry(v).or_insert(0) += c;
                        }
                    }
                    for (s, m) in by_s.iter().enumerate() {
                        let n = self.per_s[s];
                        if n == 0 {
                            continue;
                        }
                        let tv = 0.5
                            * pooled
                                .iter()
                                .map(|(v, &c)| {
                                    let ps = *m.get(v).unwrap_or(&0) as f64 / n as f64;
                                    (ps - c as f64 / total as f64).abs()
                                })
                                .sum::<f64>();
                        if tv > worst.0 {
                            worst = (tv, format!("{} given S = {}", self.feature_name(f), s + 1));
                        }
                    }
                }
                let pass = worst.0 < threshold;
                AuditCheck {
                    name: format!("TV(Q_{}^X | S)", server + 1),
                    mode: Mode::Empirical,
                    value: worst.0,
                    threshold: Some(threshold),
                    pass,
                    witness: if pass { None } else { Some(worst.1) },
                }
            })
            .collect()
    }
}

/// Samples `trials` non-private requests and runs [`EmpiricalQueryAudit`].
pub fn audit_query_privacy_empirical(
    joint: &JointDistribution<Rational>,
    policy: &ObfuscationPolicy<Rational>,
    config: &SystemConfig,
    trials: u64,
    threshold: f64,
) -> Result<Vec<AuditCheck>> {
    let seeds = SeedTree::new(config.seed).child("audit", 0);
    let mut audit = EmpiricalQueryAudit::new(config.messages, config.servers, config.length);
    let mut params_cache: HashMap<Subset, crate::pir::SchemeParams> = HashMap::new();
    for t in 0..trials {
        let mut rng = seeds.stream("trial", t);
        let (s, x) = joint.sample(&mut rng);
        let u = sample_subset(policy, s, x, &mut rng)?;
        let params = match params_cache.get(&u) {
            Some(p) => p,
            None => {
                let p = pir_setup(config.servers, u, config.length)?;
                params_cache.entry(u).or_insert(p)
            }
        };
        let (queries, _) = pir_query(params, x, &mut rng)?;
        audit.observe(s, &queries);
    }
    Ok(audit.finish(threshold))
}

/// Exact audit when the enumeration fits, otherwise the empirical one.
pub fn audit_query_privacy(
    joint: &JointDistribution<Rational>,
    policy: &ObfuscationPolicy<Rational>,
    config: &SystemConfig,
    mode: Mode,
    trials: u64,
) -> Result<Vec<AuditCheck>> {
    if mode == Mode::Exact {
        match audit_query_privacy_exact(joint, policy, config) {
            Err(Error::ExactModeInfeasible { states, cap }) => {
                log::warn!("exact query audit needs {states} states (cap {cap}); sampling instead");
            }
            other => return other,
        }
    }
    audit_query_privacy_empirical(joint, policy, config, trials, DEFAULT_TV_THRESHOLD)
}

/// Checks, per server, that leaking nothing through the non-private query
/// alone is equivalent to leaking nothing through both queries together,
/// along with the two conditions that make this so.
pub fn audit_proposition1(
    joint: &JointDistribution<Rational>,
    policy: &ObfuscationPolicy<Rational>,
    config: &SystemConfig,
) -> Result<Vec<AuditCheck>> {
    let states = enumeration_size(joint, policy, config)?.saturating_mul(key_space_size(&pir_setup(
        config.servers,
        Subset::full(config.messages),
        config.length,
    )?));
    if states > EXACT_STATE_CAP {
        return Err(Error::ExactModeInfeasible { states, cap: EXACT_STATE_CAP });
    }
    let k = joint.k();
    let full = Subset::full(k);
    let prior = joint.marginal_s();
    let mut laws = QueryLaws::new(config.servers, config.length);
    let mut checks = Vec::new();
    for i in 0..config.servers {
        let x_joint = nonprivate_query_joint(joint, policy, &mut laws, i)?;
        let mut s_joint = DiscreteJoint::new();
        // (Q^X, Q^S, S) cells; the two keys are drawn independently, so each
        // (key_X, key_S) pair contributes the product of the per-key weights.
        let mut triple: BTreeMap<(PirQuery, PirQuery, usize), Rational> = BTreeMap::new();
        for s in 0..k {
            if prior[s].is_negligible() {
                continue;
            }
            let qs_law: Vec<(PirQuery, Rational)> =
                laws.get(full, s)?.probability(i).map(|(q, p)| (q.clone(), p)).collect();
            for (qs, ps) in &qs_law {
                s_joint.add(s + 1, qs.clone(), prior[s].clone() * ps.clone());
            }
            let qx_given_s: Vec<(PirQuery, Rational)> = x_joint
                .marginal_b()
                .keys()
                .map(|q| (q.clone(), x_joint.get(&(s + 1), q)))
                .filter(|(_, p)| !p.is_negligible())
                .collect();
            for (qx, px) in &qx_given_s {
                for (qs, ps) in &qs_law {
                    triple.insert((qx.clone(), qs.clone(), s + 1), px.clone() * ps.clone());
                }
            }
        }
        let mut pair_joint: DiscreteJoint<usize, (PirQuery, PirQuery)> = DiscreteJoint::new();
        for ((qx, qs, s), p) in &triple {
            pair_joint.add(*s, (qx.clone(), qs.clone()), p.clone());
        }
        let lhs = mutual_information(&pair_joint);
        let rhs = mutual_information(&x_joint);
        let name = |what: &str| format!("{what} at server {}", i + 1);
        checks.push(AuditCheck::exact(name("I(S;Q^S)"), mutual_information(&s_joint)));
        checks.push(AuditCheck::exact(name("I(Q^X;Q^S|S)"), conditional_mutual_information(&triple)));
        checks.push(AuditCheck {
            name: name("I(S;Q^X,Q^S)=0 <=> I(S;Q^X)=0"),
            mode: Mode::Exact,
            value: lhs.bits,
            threshold: None,
            pass: lhs.exact_zero == rhs.exact_zero,
            witness: (lhs.exact_zero != rhs.exact_zero)
                .then(|| format!("joint zero: {}, single zero: {}", lhs.exact_zero, rhs.exact_zero)),
        });
        checks.push(AuditCheck::exact(name("I(S;Q^X,Q^S)"), lhs));
    }
    Ok(checks)
}

/// `I(X_tau; U_t | history) = 0` for the tracked law `joint[a][b]`
/// (a current, b latest private) and the step's policy.
pub fn audit_online_privacy(joint: &Matrix, policy: &ObfuscationPolicy<Rational>) -> AuditCheck {
    let k = joint.len();
    let mut j = DiscreteJoint::new();
    for (a, row) in joint.iter().enumerate() {
        for (b, p) in row.iter().enumerate() {
            if p.is_negligible() {
                continue;
            }
            for (u, pu) in policy.row(b, a) {
                if u.is_within(k) {
                    j.add(b + 1, u, p.clone() * pu.clone());
                }
            }
        }
    }
    AuditCheck::exact("I(X_tau;U_t|history)", mutual_information(&j))
}

/// One node of the exhaustive location check: an instant and a realized
/// history of released sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryCheck {
    pub t: usize,
    pub history: Vec<Subset>,
    /// Tracked posterior equals the one obtained by summing over all traces.
    pub posterior_matches: bool,
    pub online: AuditCheck,
    /// Per server: private locations so far versus this instant's query.
    pub queries: Vec<AuditCheck>,
}

impl HistoryCheck {
    pub fn pass(&self) -> bool {
        self.posterior_matches && self.online.pass && self.queries.iter().all(|c| c.pass)
    }
}

/// Walks every realizable history of released sets up to the horizon. At
/// each node the tracked posterior is compared with brute-force enumeration
/// over all location traces, and, if `with_queries`, the private locations
/// seen so far are checked to be independent of each server's query given
/// the history.
pub fn location_brute_force(
    model: &MobilityModel,
    schedule: &PrivacySchedule,
    config: &SystemConfig,
    solver: Solver,
    with_queries: bool,
) -> Result<Vec<HistoryCheck>> {
    let k = model.k();
    let horizon = schedule.horizon;
    let states = (k as u128).saturating_pow(horizon as u32 + 1);
    if states > EXACT_STATE_CAP {
        return Err(Error::ExactModeInfeasible { states, cap: EXACT_STATE_CAP });
    }
    // all traces with positive probability
    let mut traces: Vec<(Vec<usize>, Rational)> = vec![];
    let mut stack: Vec<(Vec<usize>, Rational)> =
        model.pi0().iter().enumerate().filter(|(_, p)| !p.is_negligible()).map(|(x, p)| (vec![x], p.clone())).collect();
    while let Some((trace, p)) = stack.pop() {
        if trace.len() == horizon + 1 {
            traces.push((trace, p));
            continue;
        }
        let t = trace.len() - 1;
        let row = &model.transition(t)?[trace[t]];
        for (y, q) in row.iter().enumerate() {
            if !q.is_negligible() {
                let mut next = trace.clone();
                next.push(y);
                stack.push((next, p.clone() * q.clone()));
            }
        }
    }
    traces.sort();

    let mut laws = QueryLaws::new(config.servers, config.length);
    let mut out = Vec::new();
    let mut frontier: Vec<(PosteriorState, Vec<ObfuscationPolicy<Rational>>)> = vec![(posterior_init(model), vec![])];
    while let Some((state, policies)) = frontier.pop() {
        let t = state.t;
        // weight of each trace given the realized history
        let weights: Vec<Rational> = traces
            .iter()
            .map(|(trace, p)| {
                let mut w = p.clone();
                for (j, (policy, u)) in policies.iter().zip(&state.history).enumerate() {
                    w *= policy.get(trace[tau(j, schedule)], trace[j], *u);
                }
                w
            })
            .collect();
        let total = sum(weights.iter().cloned());
        let mut oracle = vec![vec![Rational::from_ratio(0, 1); k]; k];
        for ((trace, _), w) in traces.iter().zip(&weights) {
            let cell = &mut oracle[trace[t]][trace[tau(t, schedule)]];
            *cell = cell.clone() + w.clone() / total.clone();
        }
        let posterior_matches = oracle == state.joint;

        let private = schedule.is_private(t);
        let policy =
            if private { ObfuscationPolicy::trivial(k) } else { step_policy(&state, config.servers, solver)?.0 };
        let online = audit_online_privacy(&state.joint, &policy);

        let mut queries = Vec::new();
        if with_queries {
            let seen: Vec<usize> = schedule.private.range(..=t).copied().collect();
            for i in 0..config.servers {
                let mut j: DiscreteJoint<Vec<usize>, PirQuery> = DiscreteJoint::new();
                for ((trace, _), w) in traces.iter().zip(&weights) {
                    if w.is_negligible() {
                        continue;
                    }
                    let key: Vec<usize> = seen.iter().map(|&p| trace[p] + 1).collect();
                    for (u, pu) in policy.row(trace[tau(t, schedule)], trace[t]) {
                        for (q, pq) in laws.get(u, trace[t])?.probability(i) {
                            j.add(key.clone(), q.clone(), w.clone() * pu.clone() * pq);
                        }
                    }
                }
                queries.push(AuditCheck::exact(format!("I(X_P;Y_{}^t|history)", i + 1), mutual_information(&j)));
            }
        }

        if t < horizon {
            let mut released: BTreeMap<Subset, Rational> = BTreeMap::new();
            for (a, row) in state.joint.iter().enumerate() {
                for (b, p) in row.iter().enumerate() {
                    for (u, pu) in policy.row(b, a) {
                        let e = released.entry(u).or_insert_with(|| Rational::from_ratio(0, 1));
                        *e = e.clone() + p.clone() * pu.clone();
                    }
                }
            }
            for (u, p) in released.into_iter().rev() {
                if p.is_negligible() {
                    continue;
                }
                let conditioned = if private { state.joint.clone() } else { condition(&state, &policy, u)? };
                let next = advance(&conditioned, &state, u, model, schedule)?;
                let mut next_policies = policies.clone();
                next_policies.push(policy.clone());
                frontier.push((next, next_policies));
            }
        }
        out.push(HistoryCheck { t, history: state.history.clone(), posterior_matches, online, queries });
    }
    out.sort_by(|a, b| (a.t, &a.history).cmp(&(b.t, &b.history)));
    Ok(out)
}
