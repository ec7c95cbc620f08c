//! One function per subcommand. Each returns the JSON report and whether
//! its audits passed; `main` decides where the report goes.

use std::path::Path;
use std::time::Duration;

use ipir_core::audit::{audit_policy_independence, audit_query_privacy_exact, AuditReport, EmpiricalQueryAudit};
use ipir_core::intermittent::{LocalServers, Servers};
use ipir_core::obfuscation::{build_policy, greedy_construct, lp_build, lp_solve};
use ipir_core::pir::{PirAnswer, PirQuery};
use ipir_core::{Error, Joint, MessageStore, Policy, Rational, Solver, SystemConfig};
use ipir_net::RemoteServers;
use serde::Serialize;

use crate::args::{
    AuditArgs, GreedyArgs, LocationArgs, ReportArgs, Scenario, ServeArgs, SolveLpArgs, TransportArgs, TwoRequestArgs,
    UploadArgs,
};
use crate::error::{CliError, CliResult};
use crate::inputs::{self, load_store, random_store, read_json, to_json};
use crate::reports::{
    from_wire, joint_query_checks, location_report, policy_output, two_request_report, LocationSetup, TranscriptFile,
    TwoRequestSetup,
};

#[derive(Debug)]
pub struct Outcome {
    pub json: String,
    pub pass: bool,
    pub output: Option<std::path::PathBuf>,
}

impl Outcome {
    fn new<T: Serialize>(report: &T, pass: bool, output: Option<&Path>) -> Self {
        Outcome { json: to_json(report), pass, output: output.map(Path::to_path_buf) }
    }
}

pub fn solve_lp(args: &SolveLpArgs) -> CliResult<Outcome> {
    let joint = inputs::load_joint(&args.joint)?;
    let sol = lp_solve(&lp_build(&joint, args.servers)?)?;
    let report = policy_output(&sol.policy, &joint, args.servers, Solver::Lp, Some(sol.pivots))?;
    Ok(Outcome::new(&report, report.summary.audits.all_pass(), args.output.as_deref()))
}

pub fn greedy(args: &GreedyArgs) -> CliResult<Outcome> {
    let cond = inputs::load_conditional(&args.cond)?;
    let policy = greedy_construct(&cond)?;
    // the law of U does not depend on S, so any full-support prior will do
    let uniform = vec![Rational::new(1.into(), (cond.k() as i64).into()); cond.k()];
    let joint = Joint::from_conditional(&uniform, &cond)?;
    let report = policy_output(&policy, &joint, args.servers, Solver::Greedy, None)?;
    Ok(Outcome::new(&report, report.summary.audits.all_pass(), args.output.as_deref()))
}

/// Servers for a run plus the store used to check decoding, if known.
pub struct Transport {
    pub servers: Backend,
    pub reference: Option<MessageStore>,
    pub length: usize,
}

pub enum Backend {
    Local { store: MessageStore, n: usize },
    Remote(RemoteServers),
}

impl Servers for Backend {
    fn count(&self) -> usize {
        match self {
            Backend::Local { n, .. } => *n,
            Backend::Remote(r) => r.count(),
        }
    }

    fn fetch(&self, queries: &[PirQuery]) -> ipir_core::Result<Vec<PirAnswer>> {
        match self {
            Backend::Local { store, n } => LocalServers::new(store, *n).fetch(queries),
            Backend::Remote(r) => r.fetch(queries),
        }
    }
}

impl Backend {
    /// Framing and payload totals go to stderr, apart from the report.
    fn log_wire(&self) {
        if let Backend::Remote(r) = self {
            let w = r.stats();
            eprintln!(
                "wire: {} round trips, {} answer bits, {} bytes sent, {} bytes received",
                w.round_trips, w.answer_bits, w.bytes_sent, w.bytes_received
            );
        }
    }
}

/// Local servers over the given or a seeded random store, or remote ones.
pub fn transport(args: &TransportArgs, n: usize, k: usize, seed: u64) -> CliResult<Transport> {
    let store = args.store.as_deref().map(load_store).transpose()?;
    if let Some(s) = &store {
        if s.k() != k {
            return Err(CliError::Config(format!("store has K = {} but the inputs have K = {k}", s.k())));
        }
    }
    let length = match (args.length, &store) {
        (Some(l), Some(s)) if l != s.length() => {
            return Err(CliError::Config(format!("--length {l} but the store has L = {}", s.length())))
        }
        (Some(l), _) => l,
        (None, Some(s)) => s.length(),
        (None, None) => u32::try_from(k)
            .ok()
            .and_then(|k| n.checked_pow(k))
            .ok_or_else(|| CliError::Config("N^K overflows".into()))?,
    };
    if args.remote.is_empty() {
        let store = store.unwrap_or_else(|| random_store(k, length, seed));
        return Ok(Transport { servers: Backend::Local { store: store.clone(), n }, reference: Some(store), length });
    }
    if args.remote.len() != n {
        return Err(CliError::Config(format!("{} endpoints for N = {n}", args.remote.len())));
    }
    let remote = RemoteServers::connect(&args.remote, Duration::from_millis(args.timeout_ms))?;
    if remote.params() != (k, length) {
        let (rk, rl) = remote.params();
        return Err(CliError::Config(format!("servers hold K = {rk}, L = {rl}; expected K = {k}, L = {length}")));
    }
    Ok(Transport { servers: Backend::Remote(remote), reference: store, length })
}

pub fn two_request(args: &TwoRequestArgs) -> CliResult<Outcome> {
    let joint = inputs::load_joint(&args.joint)?;
    let k = joint.k();
    let (policy, solver) = match &args.policy {
        Some(path) => {
            let p = inputs::load_policy(path)?;
            if p.k() != k {
                return Err(CliError::Config(format!("policy has K = {} but the joint has K = {k}", p.k())));
            }
            (p, None)
        }
        None => {
            let want = if args.auto_lp {
                Solver::Lp
            } else if args.auto_greedy {
                Solver::Greedy
            } else {
                Solver::auto(k)
            };
            let (p, used) = build_policy(&joint, args.servers, want)?;
            (p, Some(used))
        }
    };
    let t = transport(&args.transport, args.servers, k, args.seed)?;
    let config = SystemConfig::new(args.servers, k, t.length, args.seed)?;
    let setup = TwoRequestSetup { joint, policy, solver, config, trials: args.trials, audit: args.audit };
    let mut records = args.transcript.as_ref().map(|_| Vec::new());
    let mut report = two_request_report(&setup, &t.servers, t.reference.as_ref(), records.as_mut())?;
    t.servers.log_wire();
    if report.decoded_ok == Some(false) {
        return Err(CliError::Runtime("a retrieval decoded the wrong message".into()));
    }
    if let (Some(path), Some(records)) = (&args.transcript, records) {
        let file = TranscriptFile {
            config: setup.config,
            joint: setup.joint.to_file(),
            policy: setup.policy.to_file(),
            records,
        };
        inputs::write_json(path, &file)?;
        report.audit_handle = Some(path.display().to_string());
    }
    Ok(Outcome::new(&report, report.audits.all_pass(), args.output.as_deref()))
}

pub fn simulate_location(args: &LocationArgs) -> CliResult<Outcome> {
    let model = inputs::load_model(&args.model)?;
    let schedule = inputs::load_schedule(&args.schedule, args.horizon)?;
    let k = model.k();
    let t = transport(&args.transport, args.servers, k, args.seed)?;
    let setup = LocationSetup {
        model,
        schedule,
        config: SystemConfig::new(args.servers, k, t.length, args.seed)?,
        solver: args.solver.resolve(k),
        redact: args.redact,
        verify: args.verify,
    };
    let report = location_report(&setup, &t.servers, t.reference.as_ref())?;
    t.servers.log_wire();
    if report.decoded_ok == Some(false) {
        return Err(CliError::Runtime("a retrieval decoded the wrong location".into()));
    }
    Ok(Outcome::new(&report, report.audits.all_pass(), args.output.as_deref()))
}

pub fn audit(args: &AuditArgs) -> CliResult<Outcome> {
    let file: TranscriptFile = read_json(&args.transcript)?;
    let in_file = |e: Error| CliError::config(args.transcript.display(), e);
    let joint = Joint::from_file(&file.joint).map_err(in_file)?;
    let policy = Policy::from_file(&file.policy).map_err(in_file)?;
    let config = file.config;
    config.validate().map_err(in_file)?;
    if joint.k() != config.messages || policy.k() != config.messages {
        return Err(CliError::config(args.transcript.display(), "K differs between joint, policy and config"));
    }

    let mut report = AuditReport::default();
    report.extend([audit_policy_independence(&policy, &joint)]);
    let exact = if args.empirical {
        None
    } else {
        match audit_query_privacy_exact(&joint, &policy, &config) {
            Ok(c) => Some(c),
            Err(Error::ExactModeInfeasible { states, cap }) if !args.exact => {
                log::warn!("exact audit needs {states} states (cap {cap}); using the transcript");
                None
            }
            Err(e) => return Err(e.into()),
        }
    };
    match exact {
        Some(checks) => {
            report.extend(checks);
            report.extend(joint_query_checks(&joint, &policy, &config)?);
        }
        None => {
            if file.records.is_empty() {
                return Err(CliError::config(args.transcript.display(), "no records to audit"));
            }
            let mut observed = EmpiricalQueryAudit::new(config.messages, config.servers, config.length);
            for (n, r) in file.records.iter().enumerate() {
                if r.s == 0 || r.s > config.messages || r.nonprivate.len() != config.servers {
                    return Err(CliError::config(args.transcript.display(), format!("records[{n}] is malformed")));
                }
                observed.observe(r.s - 1, &from_wire(&r.nonprivate)?);
            }
            report.extend(observed.finish(args.threshold));
        }
    }
    Ok(Outcome::new(&report, report.all_pass(), args.output.as_deref()))
}

pub fn serve(args: &ServeArgs) -> CliResult<()> {
    let store = load_store(&args.store)?;
    let server = ipir_net::Server::bind(store, args.listen.as_str())
        .map_err(|e| CliError::Config(format!("cannot listen on {}: {e}", args.listen)))?;
    eprintln!("listening on {}", server.local_addr());
    server.run()?;
    Ok(())
}

#[derive(Serialize)]
struct UploadSummary {
    store: String,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "L")]
    l: usize,
    seed: u64,
    bytes: usize,
}

pub fn upload(args: &UploadArgs) -> CliResult<Outcome> {
    if args.messages == 0 || args.length == 0 || !args.length.is_multiple_of(8) {
        return Err(CliError::Config(format!("need K >= 1 and L a positive multiple of 8, got L = {}", args.length)));
    }
    let store = random_store(args.messages, args.length, args.seed);
    ipir_net::store_file::write(&args.store, &store)?;
    let summary = UploadSummary {
        store: args.store.display().to_string(),
        k: args.messages,
        l: args.length,
        seed: args.seed,
        bytes: 8 + args.messages * args.length / 8,
    };
    Ok(Outcome::new(&summary, true, None))
}

pub fn report(args: &ReportArgs) -> CliResult<String> {
    let value: serde_json::Value = read_json(&args.file)?;
    Ok(crate::render::render(&value))
}

pub enum RunResult {
    Report(Outcome),
    Served,
}

pub fn run_scenario(path: &Path, output: Option<std::path::PathBuf>) -> CliResult<RunResult> {
    let mut scenario: Scenario = read_json(path)?;
    scenario.rebase(path.parent().unwrap_or(Path::new(".")));
    if let Some(o) = output {
        scenario.set_output(o);
    }
    Ok(match &scenario {
        Scenario::SolveLp(a) => RunResult::Report(solve_lp(a)?),
        Scenario::Greedy(a) => RunResult::Report(greedy(a)?),
        Scenario::TwoRequest(a) => RunResult::Report(two_request(a)?),
        Scenario::Location(a) => RunResult::Report(simulate_location(a)?),
        Scenario::Audit(a) => RunResult::Report(audit(a)?),
        Scenario::Serve(a) => {
            serve(a)?;
            RunResult::Served
        }
    })
}

/// Audit failures of a finished report, for the exit status.
pub fn check(outcome: &Outcome) -> CliResult<()> {
    if outcome.pass {
        Ok(())
    } else {
        Err(CliError::AuditFailed("see the audits section of the report".into()))
    }
}
