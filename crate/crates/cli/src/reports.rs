//! Report types and the functions that build them. Builders take the
//! servers as a parameter so the same run can go in-process or over TCP.

use ipir_core::audit::{
    audit_policy_independence, audit_proposition1, audit_query_privacy, check_theta_bound, location_brute_force,
    AuditCheck, AuditReport, EmpiricalQueryAudit, Mode, DEFAULT_EMPIRICAL_TRIALS, DEFAULT_TV_THRESHOLD,
};
use ipir_core::intermittent::{run_two_request, Servers};
use ipir_core::location::{simulate, MobilityModel, PrivacySchedule, StepContext};
use ipir_core::obfuscation::{theta_profile, PolicyFile};
use ipir_core::pir::PirQuery;
use ipir_core::prob::JointFile;
use ipir_core::scalar::as_text;
use ipir_core::{
    capacity_cost, Conditional, Error, Joint, MessageStore, Policy, Rational, Solver, Subset, SystemConfig,
};
use ipir_net::wire::WireMessage;
use serde::{Deserialize, Serialize};

use crate::args::AuditMode;
use crate::error::CliResult;

/// `P(|U| = i)` for `i = 1..=K`.
pub fn size_law(policy: &Policy, joint: &Joint) -> Vec<Rational> {
    policy.size_marginal(joint).split_off(1)
}

/// A policy file with a cost summary; loadable wherever a policy is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutput {
    #[serde(flatten)]
    pub policy: PolicyFile,
    pub summary: PolicySummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub solver: Solver,
    pub servers: usize,
    /// Expected `C(N, |U|)`.
    #[serde(with = "as_text")]
    pub cost: Rational,
    #[serde(with = "as_text::vec")]
    pub size_law: Vec<Rational>,
    #[serde(with = "as_text::vec", default, skip_serializing_if = "Vec::is_empty")]
    pub theta: Vec<Rational>,
    #[serde(with = "as_text::option", default, skip_serializing_if = "Option::is_none")]
    pub theorem_bound: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivots: Option<usize>,
    pub audits: AuditReport,
}

pub fn policy_output(
    policy: &Policy,
    joint: &Joint,
    servers: usize,
    solver: Solver,
    pivots: Option<usize>,
) -> CliResult<PolicyOutput> {
    let cond = Conditional::from_joint(joint);
    let law = size_law(policy, joint);
    let mut cost = Rational::from_integer(0.into());
    for (i, p) in law.iter().enumerate() {
        cost += p * capacity_cost::<Rational>(servers, i + 1)?;
    }
    let (theta, theorem_bound) = match theta_profile(&cond) {
        Ok(p) => {
            let bound = ipir_core::obfuscation::theorem_bound(&p, servers)?;
            (p.theta, Some(bound))
        }
        Err(_) => (vec![], None),
    };
    let mut audits = AuditReport::default();
    audits.extend([audit_policy_independence(policy, joint)]);
    if solver == Solver::Greedy {
        audits.extend([check_theta_bound(policy, &cond)]);
    }
    Ok(PolicyOutput {
        policy: policy.to_file(),
        summary: PolicySummary { solver, servers, cost, size_law: law, theta, theorem_bound, pivots, audits },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairView {
    pub s: usize,
    pub x: usize,
    pub count: u64,
    /// Exact sample mean of the bits downloaded for X.
    #[serde(with = "as_text")]
    pub mean_bits_x: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoRequestReport {
    pub servers: usize,
    pub messages: usize,
    pub length: usize,
    pub seed: u64,
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<Solver>,
    #[serde(with = "as_text")]
    pub cost_s: Rational,
    #[serde(with = "as_text")]
    pub cost_x_empirical: Rational,
    #[serde(with = "as_text")]
    pub cost_x_expected: Rational,
    #[serde(with = "as_text::option")]
    pub theorem_bound: Option<Rational>,
    #[serde(with = "as_text::vec")]
    pub size_law: Vec<Rational>,
    #[serde(with = "as_text::vec", default, skip_serializing_if = "Vec::is_empty")]
    pub theta: Vec<Rational>,
    pub bits_s: u64,
    pub bits_x: u64,
    pub pairs: Vec<PairView>,
    pub decoded_ok: Option<bool>,
    pub audits: AuditReport,
    pub audit_handle: Option<String>,
}

pub type WireQuery = Vec<Vec<[usize; 2]>>;

/// Per-trial record of what each server saw. Indices are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub trial: u64,
    pub s: usize,
    pub x: usize,
    pub u: Subset,
    pub private: Vec<WireQuery>,
    pub nonprivate: Vec<WireQuery>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptFile {
    pub config: SystemConfig,
    pub joint: JointFile,
    pub policy: PolicyFile,
    pub records: Vec<TranscriptRecord>,
}

fn to_wire(queries: &[PirQuery]) -> Vec<WireQuery> {
    queries
        .iter()
        .map(|q| match WireMessage::query("", q) {
            WireMessage::Query { combos, .. } => combos,
            _ => unreachable!("query builds a query"),
        })
        .collect()
}

pub fn from_wire(queries: &[WireQuery]) -> CliResult<Vec<PirQuery>> {
    queries
        .iter()
        .enumerate()
        .map(|(server, combos)| {
            let combos = ipir_net::wire::combos_from_wire(combos)
                .map_err(|e| crate::error::CliError::Config(format!("transcript: {e}")))?;
            Ok(PirQuery { server, combos })
        })
        .collect()
}

pub struct TwoRequestSetup {
    pub joint: Joint,
    pub policy: Policy,
    pub solver: Option<Solver>,
    pub config: SystemConfig,
    pub trials: u64,
    pub audit: AuditMode,
}

pub fn two_request_report(
    setup: &TwoRequestSetup,
    servers: &dyn Servers,
    reference: Option<&MessageStore>,
    transcript: Option<&mut Vec<TranscriptRecord>>,
) -> CliResult<TwoRequestReport> {
    let (joint, policy, config) = (&setup.joint, &setup.policy, &setup.config);
    let mut observed = (setup.audit == AuditMode::Empirical)
        .then(|| EmpiricalQueryAudit::new(config.messages, config.servers, config.length));
    let mut records = transcript;
    let summary = run_two_request(joint, policy, config, servers, setup.trials, reference, |t| {
        if let Some(audit) = observed.as_mut() {
            audit.observe(t.s, &t.nonprivate.queries);
        }
        if let Some(records) = records.as_deref_mut() {
            records.push(TranscriptRecord {
                trial: t.trial,
                s: t.s + 1,
                x: t.x + 1,
                u: t.u(),
                private: to_wire(&t.private.queries),
                nonprivate: to_wire(&t.nonprivate.queries),
            });
        }
    })?;

    let mut audits = AuditReport::default();
    match setup.audit {
        AuditMode::None => {}
        AuditMode::Exact => {
            audits.extend(policy_checks(setup));
            audits.extend(audit_query_privacy(joint, policy, config, Mode::Exact, DEFAULT_EMPIRICAL_TRIALS)?);
            audits.extend(joint_query_checks(joint, policy, config)?);
        }
        AuditMode::Empirical => {
            audits.extend(policy_checks(setup));
            audits.extend(observed.expect("observer set for empirical audits").finish(DEFAULT_TV_THRESHOLD));
        }
    }

    let theta = theta_profile(&Conditional::from_joint(joint)).map(|p| p.theta).unwrap_or_default();
    Ok(TwoRequestReport {
        servers: config.servers,
        messages: config.messages,
        length: config.length,
        seed: config.seed,
        trials: summary.trials,
        solver: setup.solver,
        cost_s: summary.cost_s,
        cost_x_empirical: summary.cost_x_empirical,
        cost_x_expected: summary.cost_x_expected,
        theorem_bound: summary.theorem_bound,
        size_law: size_law(policy, joint),
        theta,
        bits_s: summary.bits_s,
        bits_x: summary.bits_x,
        pairs: summary
            .pairs
            .iter()
            .map(|p| PairView {
                s: p.s + 1,
                x: p.x + 1,
                count: p.count,
                mean_bits_x: Rational::new((p.bits_x as i64).into(), (p.count as i64).into()),
            })
            .collect(),
        decoded_ok: summary.decoded_ok,
        audits,
        audit_handle: None,
    })
}

fn policy_checks(setup: &TwoRequestSetup) -> Vec<AuditCheck> {
    let mut out = vec![audit_policy_independence(&setup.policy, &setup.joint)];
    if setup.solver == Some(Solver::Greedy) {
        out.push(check_theta_bound(&setup.policy, &Conditional::from_joint(&setup.joint)));
    }
    out
}

/// The joint-query checks when enumeration is affordable, none otherwise.
pub fn joint_query_checks(joint: &Joint, policy: &Policy, config: &SystemConfig) -> CliResult<Vec<AuditCheck>> {
    match audit_proposition1(joint, policy, config) {
        Ok(c) => Ok(c),
        Err(Error::ExactModeInfeasible { states, .. }) => {
            log::info!("joint-query audit skipped: {states} states");
            Ok(vec![])
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepView {
    pub t: usize,
    pub private: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<usize>,
    pub u: Subset,
    #[serde(with = "as_text")]
    pub cost: Rational,
    pub bits: usize,
    pub online_privacy_bits: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<Solver>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoded_ok: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationReport {
    pub servers: usize,
    pub locations: usize,
    pub length: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Private instants after shifting the schedule to start at 0.
    pub private: Vec<usize>,
    /// How far the schedule was shifted.
    pub offset: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<usize>>,
    pub steps: Vec<StepView>,
    #[serde(with = "as_text")]
    pub total_cost: Rational,
    pub total_bits: usize,
    pub decoded_ok: Option<bool>,
    pub audits: AuditReport,
}

pub struct LocationSetup {
    pub model: MobilityModel,
    pub schedule: PrivacySchedule,
    pub config: SystemConfig,
    pub solver: Solver,
    pub redact: bool,
    pub verify: bool,
}

pub fn location_report(
    setup: &LocationSetup,
    servers: &dyn Servers,
    reference: Option<&MessageStore>,
) -> CliResult<LocationReport> {
    let ctx = StepContext {
        model: &setup.model,
        schedule: &setup.schedule,
        config: &setup.config,
        servers,
        solver: setup.solver,
        reference,
    };
    let trace = simulate(&ctx, setup.config.seed)?;
    let mut audits = AuditReport::default();
    audits.extend(trace.steps.iter().map(|s| {
        let mut c = s.online_privacy.clone();
        c.name = format!("t = {}: {}", s.t, c.name);
        c
    }));
    if setup.verify {
        audits.extend(verify(setup)?);
    }
    Ok(LocationReport {
        servers: trace.servers,
        locations: trace.locations,
        length: setup.config.length,
        horizon: trace.horizon,
        seed: setup.config.seed,
        private: setup.schedule.private.iter().copied().collect(),
        offset: trace.offset,
        trace: (!setup.redact).then(|| trace.trace.iter().map(|x| x + 1).collect()),
        steps: trace
            .steps
            .iter()
            .map(|s| StepView {
                t: s.t,
                private: s.private,
                x: (!setup.redact).then_some(s.x + 1),
                u: s.u,
                cost: s.cost.clone(),
                bits: s.bits,
                online_privacy_bits: s.online_privacy.value,
                solver: s.solver,
                decoded_ok: s.decoded_ok,
            })
            .collect(),
        total_cost: trace.total_cost,
        total_bits: trace.total_bits,
        decoded_ok: trace.decoded_ok,
        audits,
    })
}

/// Exhaustive check over every realizable history, folded into three checks.
fn verify(setup: &LocationSetup) -> CliResult<Vec<AuditCheck>> {
    let nodes = location_brute_force(&setup.model, &setup.schedule, &setup.config, setup.solver, true)?;
    let fold = |name: &str, value: &dyn Fn(&ipir_core::audit::HistoryCheck) -> (f64, bool)| {
        let mut worst = 0.0f64;
        let mut witness = None;
        for n in &nodes {
            let (v, ok) = value(n);
            worst = worst.max(v);
            if !ok && witness.is_none() {
                let h: Vec<String> = n.history.iter().map(|u| u.to_string()).collect();
                witness = Some(format!("t = {}, history [{}]", n.t, h.join(", ")));
            }
        }
        AuditCheck {
            name: format!("{name} over {} histories", nodes.len()),
            mode: Mode::Exact,
            value: worst,
            threshold: None,
            pass: witness.is_none(),
            witness,
        }
    };
    Ok(vec![
        fold("tracked posterior = enumeration", &|n| (0.0, n.posterior_matches)),
        fold("I(X_tau;U_t|history)", &|n| (n.online.value, n.online.pass)),
        fold("I(X_P;Y_i^t|history)", &|n| {
            (n.queries.iter().map(|c| c.value).fold(0.0, f64::max), n.queries.iter().all(|c| c.pass))
        }),
    ])
}
