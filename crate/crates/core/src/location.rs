//! Online location privacy over a Markov mobility model.
//!
//! At every instant the user fetches the content for its current location
//! through PIR. At instants marked private the set is all K locations. At the
//! others, a policy is solved against the tracked joint law of the current
//! location and the latest private one, so the released set is independent
//! of that private location given everything released so far.

use std::collections::BTreeSet;

use num_traits::Signed;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audit::{audit_online_privacy, AuditCheck};
use crate::error::{Error, Result};
use crate::intermittent::{retrieve_over, Retrieval, Servers};
use crate::obfuscation::{build_policy, sample_subset, ObfuscationPolicy, Solver};
use crate::prob::{capacity_cost, parse_matrix, sample_weighted, JointDistribution, MessageStore, SystemConfig};
use crate::rng::SeedTree;
use crate::scalar::{as_text, sum, Scalar};
use crate::subset::Subset;
use crate::Rational;

pub type Matrix = Vec<Vec<Rational>>;

#[derive(Clone, Debug, PartialEq)]
pub enum Transitions {
    Invariant(Matrix),
    /// `steps[t]` moves the chain from t to t+1.
    Variant(Vec<Matrix>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MobilityModel {
    k: usize,
    pi0: Vec<Rational>,
    transitions: Transitions,
}

impl MobilityModel {
    pub fn new(pi0: Vec<Rational>, transitions: Transitions) -> Result<Self> {
        let k = pi0.len();
        if k == 0 {
            return Err(Error::Empty);
        }
        check_distribution(&pi0, "pi0")?;
        let mats: Vec<&Matrix> = match &transitions {
            Transitions::Invariant(m) => vec![m],
            Transitions::Variant(ms) => ms.iter().collect(),
        };
        for (n, m) in mats.into_iter().enumerate() {
            if m.len() != k {
                return Err(Error::NotSquare { rows: k, row: m.len(), len: k });
            }
            for (row, r) in m.iter().enumerate() {
                if r.len() != k {
                    return Err(Error::NotSquare { rows: k, row, len: r.len() });
                }
                check_distribution(r, &format!("transitions[{n}][{row}]"))?;
            }
        }
        Ok(MobilityModel { k, pi0, transitions })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pi0(&self) -> &[Rational] {
        &self.pi0
    }

    /// Kernel from t to t+1.
    pub fn transition(&self, t: usize) -> Result<&Matrix> {
        match &self.transitions {
            Transitions::Invariant(m) => Ok(m),
            Transitions::Variant(ms) => {
                ms.get(t).ok_or_else(|| Error::InvalidParams(format!("no transition matrix for step {t} -> {}", t + 1)))
            }
        }
    }

    /// Samples `x_0..=x_horizon`.
    pub fn sample_trace<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Result<Vec<usize>> {
        let mut x = sample_weighted(self.pi0.iter().cloned().enumerate(), rng).ok_or(Error::Empty)?;
        let mut trace = vec![x];
        for t in 0..horizon {
            let row = &self.transition(t)?[x];
            x = sample_weighted(row.iter().cloned().enumerate(), rng).ok_or(Error::Empty)?;
            trace.push(x);
        }
        Ok(trace)
    }

    pub fn from_file(file: &MobilityFile) -> Result<Self> {
        let pi0 = parse_matrix(std::slice::from_ref(&file.pi0), "pi0")?.remove(0);
        let transitions = match &file.transitions {
            TransitionsFile::One(m) => Transitions::Invariant(parse_matrix(m, "transitions")?),
            TransitionsFile::Many(ms) => Transitions::Variant(
                ms.iter()
                    .enumerate()
                    .map(|(n, m)| parse_matrix(m, &format!("transitions[{n}]")))
                    .collect::<Result<_>>()?,
            ),
        };
        let model = Self::new(pi0, transitions)?;
        if model.k != file.k {
            return Err(Error::Parse(format!("K = {} but pi0 has {} entries", file.k, model.k)));
        }
        Ok(model)
    }

    pub fn to_file(&self) -> MobilityFile {
        let render = |m: &Matrix| m.iter().map(|r| r.iter().map(Scalar::render).collect()).collect();
        MobilityFile {
            k: self.k,
            pi0: self.pi0.iter().map(Scalar::render).collect(),
            transitions: match &self.transitions {
                Transitions::Invariant(m) => TransitionsFile::One(render(m)),
                Transitions::Variant(ms) => TransitionsFile::Many(ms.iter().map(render).collect()),
            },
        }
    }
}

fn check_distribution(v: &[Rational], name: &str) -> Result<()> {
    if let Some(col) = v.iter().position(|p| p.is_negative()) {
        return Err(Error::NegativeEntry { row: 0, col, value: format!("{name}: {}", v[col].render()) });
    }
    let total = sum(v.iter().cloned());
    if total != Rational::from_ratio(1, 1) {
        let deficit = Rational::from_ratio(1, 1) - total.clone();
        return Err(Error::SumNotOne { sum: format!("{name}: {}", total.render()), deficit: deficit.render() });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MobilityFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub pi0: Vec<String>,
    pub transitions: TransitionsFile,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransitionsFile {
    One(Vec<Vec<String>>),
    Many(Vec<Vec<Vec<String>>>),
}

/// Instants `0..=horizon`, of which `private` need protection. Always
/// contains 0 after construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacySchedule {
    pub horizon: usize,
    pub private: BTreeSet<usize>,
    /// How far the user's schedule was shifted to start at a private instant.
    #[serde(default)]
    pub offset: usize,
}

impl PrivacySchedule {
    pub fn new(horizon: usize, private: impl IntoIterator<Item = usize>) -> Result<Self> {
        let private: BTreeSet<usize> = private.into_iter().filter(|&t| t <= horizon).collect();
        let first = *private
            .first()
            .ok_or_else(|| Error::InvalidParams("privacy schedule has no private instant within the horizon".into()))?;
        Ok(PrivacySchedule {
            horizon: horizon - first,
            private: private.into_iter().map(|t| t - first).collect(),
            offset: first,
        })
    }

    pub fn all_private(horizon: usize) -> Self {
        PrivacySchedule { horizon, private: (0..=horizon).collect(), offset: 0 }
    }

    pub fn is_private(&self, t: usize) -> bool {
        self.private.contains(&t)
    }
}

/// Latest private instant not after t.
pub fn tau(t: usize, schedule: &PrivacySchedule) -> usize {
    schedule.private.range(..=t).next_back().copied().unwrap_or(0)
}

/// `joint[a][b] = P(X_t = a, X_tau(t) = b | sets released before t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    pub t: usize,
    pub tau: usize,
    #[serde(with = "matrix_text")]
    pub joint: Matrix,
    pub history: Vec<Subset>,
}

impl PosteriorState {
    /// The tracked law in policy orientation: S is the latest private
    /// location, X the current one.
    pub fn as_request_joint(&self) -> Result<JointDistribution<Rational>> {
        let k = self.joint.len();
        JointDistribution::validate((0..k).map(|b| (0..k).map(|a| self.joint[a][b].clone()).collect()).collect())
    }
}

mod matrix_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::scalar::Scalar;
    use crate::Rational;

    pub fn serialize<S: Serializer>(m: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter().map(|r| r.iter().map(Scalar::render).collect::<Vec<_>>()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Rational>>, D::Error> {
        let raw = Vec::<Vec<String>>::deserialize(d)?;
        crate::prob::parse_matrix(&raw, "joint").map_err(serde::de::Error::custom)
    }
}

pub fn posterior_init(model: &MobilityModel) -> PosteriorState {
    let k = model.k;
    let mut joint = vec![vec![Rational::from_ratio(0, 1); k]; k];
    for (a, p) in model.pi0.iter().enumerate() {
        joint[a][a] = p.clone();
    }
    PosteriorState { t: 0, tau: 0, joint, history: Vec::new() }
}

/// Policy for a non-private step, solved against the tracked posterior.
pub fn step_policy(
    state: &PosteriorState,
    servers: usize,
    solver: Solver,
) -> Result<(ObfuscationPolicy<Rational>, Solver)> {
    build_policy(&state.as_request_joint()?, servers, solver)
}

/// Conditions the tracked law on the released set:
/// `joint(a, b) ∝ joint(a, b) p(u | a, b)`.
pub fn condition(state: &PosteriorState, policy: &ObfuscationPolicy<Rational>, u: Subset) -> Result<Matrix> {
    let k = state.joint.len();
    let mut out: Matrix =
        (0..k).map(|a| (0..k).map(|b| state.joint[a][b].clone() * policy.get(b, a, u)).collect()).collect();
    let total = sum(out.iter().flatten().cloned());
    if total.is_negligible() {
        return Err(Error::DegeneratePosterior { t: state.t });
    }
    for v in out.iter_mut().flatten() {
        *v = v.clone() / total.clone();
    }
    Ok(out)
}

/// Moves the (already conditioned) law at t to t+1. When t+1 is private the
/// new latest private location is the new location itself.
pub fn advance(
    joint: &Matrix,
    state: &PosteriorState,
    u: Subset,
    model: &MobilityModel,
    schedule: &PrivacySchedule,
) -> Result<PosteriorState> {
    let k = joint.len();
    let kernel = model.transition(state.t)?;
    let mut next = vec![vec![Rational::from_ratio(0, 1); k]; k];
    for (y, row) in next.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = sum((0..k).map(|a| joint[a][b].clone() * kernel[a][y].clone()));
        }
    }
    let t = state.t + 1;
    if schedule.is_private(t) {
        for (y, row) in next.iter_mut().enumerate() {
            let total = sum(row.iter().cloned());
            row.iter_mut().for_each(|c| *c = Rational::from_ratio(0, 1));
            row[y] = total;
        }
    }
    let mut history = state.history.clone();
    history.push(u);
    Ok(PosteriorState { t, tau: tau(t, schedule), joint: next, history })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub private: bool,
    pub x: usize,
    pub u: Subset,
    #[serde(with = "as_text")]
    pub cost: Rational,
    pub bits: usize,
    pub online_privacy: AuditCheck,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<Solver>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoded_ok: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<Retrieval>,
}

fn check_schedule(state: &PosteriorState, schedule: &PrivacySchedule, want_private: bool) -> Result<()> {
    if schedule.is_private(state.t) != want_private {
        let detail = if want_private { "instant is not private" } else { "instant is private" };
        return Err(Error::ScheduleMismatch { t: state.t, detail: detail.into() });
    }
    Ok(())
}

/// Private instant: the set is `[K]`, the law passes through unchanged and
/// is then advanced. At the last instant no advance happens.
pub fn step_private<R: Rng + ?Sized>(
    state: &PosteriorState,
    x: usize,
    ctx: &StepContext<'_>,
    rng: &mut R,
) -> Result<(StepRecord, Option<PosteriorState>)> {
    check_schedule(state, ctx.schedule, true)?;
    let k = ctx.model.k;
    let u = Subset::full(k);
    let retrieval = retrieve_over(u, x, ctx.config, ctx.servers, rng)?;
    let policy = ObfuscationPolicy::trivial(k);
    let check = audit_online_privacy(&state.joint, &policy);
    let record = ctx.record(state, x, u, retrieval, check, None)?;
    let next = ctx.next(&state.joint, state, u)?;
    Ok((record, next))
}

/// Non-private instant: solve the policy against the tracked law, release
/// `u ~ p(. | x, x_tau)`, then condition on u and advance.
pub fn step_nonprivate<R: Rng + ?Sized>(
    state: &PosteriorState,
    x: usize,
    x_tau: usize,
    ctx: &StepContext<'_>,
    rng: &mut R,
) -> Result<(StepRecord, Option<PosteriorState>)> {
    check_schedule(state, ctx.schedule, false)?;
    let (policy, used) = step_policy(state, ctx.config.servers, ctx.solver)?;
    let u = sample_subset(&policy, x_tau, x, rng)?;
    let retrieval = retrieve_over(u, x, ctx.config, ctx.servers, rng)?;
    let check = audit_online_privacy(&state.joint, &policy);
    let record = ctx.record(state, x, u, retrieval, check, Some(used))?;
    let conditioned = condition(state, &policy, u)?;
    let next = ctx.next(&conditioned, state, u)?;
    Ok((record, next))
}

/// Everything a step needs besides the posterior and the true locations.
pub struct StepContext<'a> {
    pub model: &'a MobilityModel,
    pub schedule: &'a PrivacySchedule,
    pub config: &'a SystemConfig,
    pub servers: &'a dyn Servers,
    pub solver: Solver,
    pub reference: Option<&'a MessageStore>,
}

impl StepContext<'_> {
    fn record(
        &self,
        state: &PosteriorState,
        x: usize,
        u: Subset,
        retrieval: Retrieval,
        check: AuditCheck,
        solver: Option<Solver>,
    ) -> Result<StepRecord> {
        let bits = retrieval.answers.iter().map(|a| a.bits.len()).sum();
        Ok(StepRecord {
            t: state.t,
            private: self.schedule.is_private(state.t),
            x,
            u,
            cost: capacity_cost(self.config.servers, u.len())?,
            bits,
            online_privacy: check,
            solver,
            decoded_ok: self.reference.map(|s| retrieval.decoded == s.message(x)),
            retrieval: Some(retrieval),
        })
    }

    fn next(&self, joint: &Matrix, state: &PosteriorState, u: Subset) -> Result<Option<PosteriorState>> {
        if state.t >= self.schedule.horizon {
            return Ok(None);
        }
        advance(joint, state, u, self.model, self.schedule).map(Some)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub servers: usize,
    pub locations: usize,
    pub horizon: usize,
    pub offset: usize,
    pub trace: Vec<usize>,
    pub steps: Vec<StepRecord>,
    #[serde(with = "as_text")]
    pub total_cost: Rational,
    pub total_bits: usize,
    pub all_private_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoded_ok: Option<bool>,
}

/// Samples a trace and runs the mechanism over it. Randomness: the trace
/// from stream `trace`, instant t from stream `step`/t.
pub fn simulate(ctx: &StepContext<'_>, seed: u64) -> Result<TraceReport> {
    let k = ctx.model.k;
    if ctx.config.messages != k {
        return Err(Error::InvalidParams(format!("model has K = {k} but the store has {}", ctx.config.messages)));
    }
    let seeds = SeedTree::new(seed);
    let trace = ctx.model.sample_trace(ctx.schedule.horizon, &mut seeds.stream("trace", 0))?;
    let mut state = Some(posterior_init(ctx.model));
    let mut steps = Vec::with_capacity(trace.len());
    for (t, &x) in trace.iter().enumerate() {
        let current = state.take().expect("state for every instant up to the horizon");
        let mut rng = seeds.stream("step", t as u64);
        let (record, next) = if ctx.schedule.is_private(t) {
            step_private(&current, x, ctx, &mut rng)?
        } else {
            step_nonprivate(&current, x, trace[current.tau], ctx, &mut rng)?
        };
        log::debug!("t = {t}: x = {}, u = {}, cost = {}", x + 1, record.u, record.cost.render());
        steps.push(record);
        state = next;
    }
    let total_cost = sum(steps.iter().map(|s| s.cost.clone()));
    let total_bits = steps.iter().map(|s| s.bits).sum();
    let all_private_ok = steps.iter().all(|s| s.online_privacy.pass);
    let decoded_ok = ctx.reference.map(|_| steps.iter().all(|s| s.decoded_ok == Some(true)));
    Ok(TraceReport {
        servers: ctx.config.servers,
        locations: k,
        horizon: ctx.schedule.horizon,
        offset: ctx.schedule.offset,
        trace,
        steps,
        total_cost,
        total_bits,
        all_private_ok,
        decoded_ok,
    })
}
