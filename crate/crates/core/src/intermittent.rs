//! Two correlated requests: S privately over all K messages, then X over a
//! random set U drawn from an obfuscation policy.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::obfuscation::{expected_cost, sample_subset, theta_profile, ObfuscationPolicy};
use crate::pir::{answer_length, pir_decode, pir_query, pir_setup, PirAnswer, PirKey, PirQuery, SchemeParams};
use crate::prob::{capacity_cost, ConditionalMatrix, JointDistribution, MessageStore, SystemConfig};
use crate::rng::SeedTree;
use crate::scalar::{as_text, Scalar};
use crate::subset::Subset;
use crate::Rational;

pub use crate::obfuscation::theorem_bound;

/// Anything that can answer one query per server.
pub trait Servers {
    fn count(&self) -> usize;

    /// `queries[i]` goes to server `queries[i].server`; answers come back in
    /// the same order.
    fn fetch(&self, queries: &[PirQuery]) -> Result<Vec<PirAnswer>>;
}

/// N replicas of one in-memory store.
#[derive(Clone, Copy, Debug)]
pub struct LocalServers<'a> {
    pub store: &'a MessageStore,
    pub n: usize,
}

impl<'a> LocalServers<'a> {
    pub fn new(store: &'a MessageStore, n: usize) -> Self {
        LocalServers { store, n }
    }
}

impl Servers for LocalServers<'_> {
    fn count(&self) -> usize {
        self.n
    }

    fn fetch(&self, queries: &[PirQuery]) -> Result<Vec<PirAnswer>> {
        queries.iter().map(|q| crate::pir::pir_answer(q, self.store)).collect()
    }
}

/// Normalized download cost: bits returned by each server divided by L.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    #[serde(with = "as_text::vec")]
    pub per_server: Vec<Rational>,
    #[serde(with = "as_text")]
    pub total: Rational,
    #[serde(with = "as_text::option", default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<Rational>,
}

impl CostReport {
    pub fn from_answers(answers: &[PirAnswer], length: usize) -> Self {
        let per_server: Vec<Rational> =
            answers.iter().map(|a| Rational::from_ratio(a.bits.len() as i64, length as i64)).collect();
        let total = per_server.iter().cloned().sum();
        CostReport { per_server, total, bound: None }
    }

    pub fn bits(&self, length: usize) -> usize {
        let l = Rational::from_count(length);
        (self.total.clone() * l).to_integer().try_into().unwrap_or(usize::MAX)
    }
}

/// One PIR retrieval over a subset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retrieval {
    pub desired: usize,
    pub subset: Subset,
    pub params: SchemeParams,
    pub key: PirKey,
    pub queries: Vec<PirQuery>,
    pub answers: Vec<PirAnswer>,
    pub decoded: Vec<bool>,
    pub cost: CostReport,
}

/// PIR for `desired` over `subset`, answered by `servers`.
pub fn retrieve_over<R: Rng + ?Sized>(
    subset: Subset,
    desired: usize,
    config: &SystemConfig,
    servers: &dyn Servers,
    rng: &mut R,
) -> Result<Retrieval> {
    if servers.count() != config.servers {
        return Err(Error::InvalidParams(format!("{} servers connected, N = {}", servers.count(), config.servers)));
    }
    let params = pir_setup(config.servers, subset, config.length)?;
    let (queries, key) = pir_query(&params, desired, rng)?;
    let answers = servers.fetch(&queries)?;
    for (q, a) in queries.iter().zip(&answers) {
        if a.bits.len() != answer_length(q) || a.server != q.server {
            return Err(Error::InconsistentAnswers(format!(
                "server {} returned {} bits for {} sums",
                q.server + 1,
                a.bits.len(),
                answer_length(q)
            )));
        }
    }
    let decoded = pir_decode(&answers, &key, &params, desired)?;
    let cost = CostReport::from_answers(&answers, config.length);
    Ok(Retrieval { desired, subset, params, key, queries, answers, decoded, cost })
}

/// `W_s` through full-K PIR; normalized cost `C(N, K)`.
pub fn retrieve_private<R: Rng + ?Sized>(
    s: usize,
    config: &SystemConfig,
    servers: &dyn Servers,
    rng: &mut R,
) -> Result<Retrieval> {
    let mut r = retrieve_over(Subset::full(config.messages), s, config, servers, rng)?;
    r.cost.bound = Some(capacity_cost(config.servers, config.messages)?);
    Ok(r)
}

/// `W_x` through PIR over `u ~ p(. | x, s)`; normalized cost `C(N, |u|)`.
pub fn retrieve_nonprivate<R: Rng + ?Sized>(
    x: usize,
    s: usize,
    policy: &ObfuscationPolicy<Rational>,
    config: &SystemConfig,
    servers: &dyn Servers,
    rng: &mut R,
) -> Result<Retrieval> {
    let u = sample_subset(policy, s, x, rng)?;
    retrieve_over(u, x, config, servers, rng)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoRequestTranscript {
    pub trial: u64,
    pub s: usize,
    pub x: usize,
    pub private: Retrieval,
    pub nonprivate: Retrieval,
}

impl TwoRequestTranscript {
    pub fn u(&self) -> Subset {
        self.nonprivate.subset
    }
}

/// Draws `(s, x)` and performs both retrievals for one trial.
pub fn two_request_trial(
    joint: &JointDistribution<Rational>,
    policy: &ObfuscationPolicy<Rational>,
    config: &SystemConfig,
    servers: &dyn Servers,
    seeds: &SeedTree,
    trial: u64,
) -> Result<TwoRequestTranscript> {
    // separate streams keep the two requests' keys independent
    let tree = seeds.child("trial", trial);
    let (s, x) = joint.sample(&mut tree.stream("requests", 0));
    let private = retrieve_private(s, config, servers, &mut tree.stream("private", 0))?;
    let nonprivate = retrieve_nonprivate(x, s, policy, config, servers, &mut tree.stream("nonprivate", 0))?;
    Ok(TwoRequestTranscript { trial, s, x, private, nonprivate })
}

/// Downloaded bits for one `(s, x)` cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStat {
    pub s: usize,
    pub x: usize,
    pub count: u64,
    pub bits_x: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoRequestSummary {
    pub trials: u64,
    pub servers: usize,
    pub messages: usize,
    pub length: usize,
    #[serde(with = "as_text")]
    pub cost_s: Rational,
    /// Exact mean of the sampled `C(N, |U|)`.
    #[serde(with = "as_text")]
    pub cost_x_empirical: Rational,
    #[serde(with = "as_text")]
    pub cost_x_expected: Rational,
    #[serde(with = "as_text::option")]
    pub theorem_bound: Option<Rational>,
    pub pairs: Vec<PairStat>,
    pub bits_s: u64,
    pub bits_x: u64,
    /// None when no reference store was supplied.
    pub decoded_ok: Option<bool>,
}

impl TwoRequestSummary {
    /// Mean bits downloaded for X over trials with the given `(s, x)`.
    pub fn mean_bits_x(&self, s: usize, x: usize) -> Option<f64> {
        self.pairs.iter().find(|p| p.s == s && p.x == x && p.count > 0).map(|p| p.bits_x as f64 / p.count as f64)
    }
}

/// Runs `trials` independent two-request trials. Every transcript is passed
/// to `observe` in trial order. `reference`, when given, is used to check
/// that both decoded messages are the stored ones.
pub fn run_two_request(
    joint: &JointDistribution<Rational>,
    policy: &ObfuscationPolicy<Rational>,
    config: &SystemConfig,
    servers: &dyn Servers,
    trials: u64,
    reference: Option<&MessageStore>,
    mut observe: impl FnMut(&TwoRequestTranscript),
) -> Result<TwoRequestSummary> {
    config.validate()?;
    if joint.k() != config.messages || policy.k() != config.messages {
        return Err(Error::InvalidParams("K differs between joint, policy and configuration".into()));
    }
    let seeds = SeedTree::new(config.seed);
    let mut pairs: BTreeMap<(usize, usize), (u64, u64)> = BTreeMap::new();
    let (mut bits_s, mut bits_x) = (0u64, 0u64);
    let mut decoded_ok = true;
    for trial in 0..trials {
        let t = two_request_trial(joint, policy, config, servers, &seeds, trial)?;
        let bs: usize = t.private.answers.iter().map(|a| a.bits.len()).sum();
        let bx: usize = t.nonprivate.answers.iter().map(|a| a.bits.len()).sum();
        bits_s += bs as u64;
        bits_x += bx as u64;
        let e = pairs.entry((t.s, t.x)).or_default();
        e.0 += 1;
        e.1 += bx as u64;
        if let Some(store) = reference {
            decoded_ok &= t.private.decoded == store.message(t.s) && t.nonprivate.decoded == store.message(t.x);
        }
        observe(&t);
    }

    let cond = ConditionalMatrix::from_joint(joint);
    let theorem_bound = match theta_profile(&cond) {
        Ok(p) => Some(theorem_bound(&p, config.servers)?),
        Err(_) => None,
    };
    let denom = (config.length as u64).saturating_mul(trials.max(1));
    Ok(TwoRequestSummary {
        trials,
        servers: config.servers,
        messages: config.messages,
        length: config.length,
        cost_s: capacity_cost(config.servers, config.messages)?,
        cost_x_empirical: Rational::new((bits_x as i64).into(), (denom as i64).into()),
        cost_x_expected: expected_cost(policy, joint, config.servers)?,
        theorem_bound,
        pairs: pairs.into_iter().map(|((s, x), (count, bits_x))| PairStat { s, x, count, bits_x }).collect(),
        bits_s,
        bits_x,
        decoded_ok: reference.map(|_| decoded_ok),
    })
}
