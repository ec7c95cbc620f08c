//! Acceptance criteria 1-8, one line each. Exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ipir_cli::args::AuditMode;
use ipir_cli::inputs::random_store;
use ipir_cli::reports::{location_report, two_request_report, LocationSetup, TwoRequestReport, TwoRequestSetup};
use ipir_core::audit::{
    audit_policy_independence, audit_proposition1, audit_query_privacy_empirical, audit_query_privacy_exact,
    location_brute_force, HistoryCheck, DEFAULT_TV_THRESHOLD,
};
use ipir_core::fixtures::{symmetric_pair_joint, symmetric_pair_policy, three_way_conditional, three_way_joint};
use ipir_core::intermittent::{LocalServers, Servers};
use ipir_core::location::{MobilityModel, PrivacySchedule, Transitions};
use ipir_core::obfuscation::{
    coverage_bound, expected_cost, greedy_construct, lp_build, lp_solve, policy_validate, size_cdf_given_s,
    theorem_bound, theta_profile,
};
use ipir_core::{Conditional, Joint, MessageStore, Rational, Solver, SystemConfig};
use ipir_net::{serve, RemoteServers, ServerHandle};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PAIR_TRIALS: u64 = 100_000;
const MEAN_BITS_TOL: f64 = 0.05;
const COST_TOL: f64 = 0.01;
const RANDOM_INSTANCES: usize = 200;
const EMPIRICAL_TRIALS: u64 = 100_000;
const MAX_HORIZON: usize = 4;
const LOCATION_SEEDS: u64 = 5;

fn r(a: i64, b: i64) -> Rational {
    Rational::new(a.into(), b.into())
}

fn f(q: &Rational) -> f64 {
    q.to_f64().unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

// shared fixtures

fn pair_setup(trials: u64) -> (TwoRequestSetup, MessageStore) {
    let config = SystemConfig::minimal(2, 2, 1).unwrap();
    let store = random_store(2, config.length, config.seed);
    let setup = TwoRequestSetup {
        joint: symmetric_pair_joint(),
        policy: symmetric_pair_policy(),
        solver: None,
        config,
        trials,
        audit: AuditMode::None,
    };
    (setup, store)
}

fn pair_report(servers: &dyn Servers, trials: u64) -> TwoRequestReport {
    let (setup, store) = pair_setup(trials);
    two_request_report(&setup, servers, Some(&store), None).unwrap()
}

fn models() -> Vec<MobilityModel> {
    vec![
        MobilityModel::new(
            vec![r(1, 2), r(1, 2)],
            Transitions::Invariant(vec![vec![r(3, 4), r(1, 4)], vec![r(1, 4), r(3, 4)]]),
        )
        .unwrap(),
        MobilityModel::new(
            vec![r(2, 3), r(1, 3)],
            Transitions::Invariant(vec![vec![r(1, 5), r(4, 5)], vec![r(2, 3), r(1, 3)]]),
        )
        .unwrap(),
        MobilityModel::new(
            vec![r(1, 4), r(3, 4)],
            Transitions::Variant(vec![
                vec![vec![r(1, 2), r(1, 2)], vec![r(1, 3), r(2, 3)]],
                vec![vec![r(9, 10), r(1, 10)], vec![r(1, 1), r(0, 1)]],
                vec![vec![r(1, 1), r(0, 1)], vec![r(2, 5), r(3, 5)]],
                vec![vec![r(1, 2), r(1, 2)], vec![r(1, 2), r(1, 2)]],
            ]),
        )
        .unwrap(),
    ]
}

/// Every schedule over 0..=horizon containing 0, for every horizon up to the cap.
fn schedules() -> Vec<PrivacySchedule> {
    let mut out = vec![];
    for horizon in 0..=MAX_HORIZON {
        for mask in 0..1usize << horizon {
            let private = std::iter::once(0).chain((1..=horizon).filter(|t| mask >> (t - 1) & 1 == 1));
            out.push(PrivacySchedule::new(horizon, private).unwrap());
        }
    }
    out
}

fn location_setup(model: &MobilityModel, schedule: &PrivacySchedule, seed: u64) -> LocationSetup {
    LocationSetup {
        model: model.clone(),
        schedule: schedule.clone(),
        config: SystemConfig::minimal(2, 2, seed).unwrap(),
        solver: Solver::Lp,
        redact: false,
        verify: false,
    }
}

/// Full-support rows with weights in 1..=60/K, so denominators stay at most 60.
fn random_conditionals() -> Vec<Conditional> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..RANDOM_INSTANCES)
        .map(|n| {
            let k = 2 + n % 4;
            let max_w = (60 / k) as i64;
            let rows = (0..k)
                .map(|_| {
                    let w: Vec<i64> = (0..k).map(|_| rng.random_range(1..=max_w)).collect();
                    let d: i64 = w.iter().sum();
                    w.into_iter().map(|v| r(v, d)).collect()
                })
                .collect();
            Conditional::from_rows(rows).unwrap()
        })
        .collect()
}

fn uniform_joint(cond: &Conditional) -> Joint {
    Joint::from_conditional(&vec![r(1, cond.k() as i64); cond.k()], cond).unwrap()
}

// criteria

fn criterion1() -> Outcome {
    let start = Instant::now();
    let (setup, store) = pair_setup(PAIR_TRIALS);
    let report = pair_report(&LocalServers::new(&store, 2), PAIR_TRIALS);
    let elapsed = start.elapsed();
    let six_bits = report.bits_s == 6 * PAIR_TRIALS && report.cost_s == r(3, 2);
    let cell = report.pairs.iter().find(|p| p.s == 1 && p.x == 1).unwrap();
    let mean = f(&cell.mean_bits_x);
    let expected_exact =
        report.cost_x_expected == r(5, 4) && expected_cost(&setup.policy, &setup.joint, 2).unwrap() == r(5, 4);
    let empirical = f(&report.cost_x_empirical);
    let pass = six_bits
        && (mean - 16.0 / 3.0).abs() <= MEAN_BITS_TOL
        && expected_exact
        && (empirical - 1.25).abs() <= COST_TOL
        && report.decoded_ok == Some(true)
        && within(elapsed, Duration::from_secs(10));
    outcome(
        pass,
        format!(
            "private bits/trial = {} (want 6); mean bits | S=X=1 = {mean:.4} (want 16/3 ± {MEAN_BITS_TOL}); \
             cost_x = {} exact, {empirical:.4} empirical (want 5/4, ± {COST_TOL}); {} trials in {elapsed:.1?} (limit 10s)",
            report.bits_s as f64 / PAIR_TRIALS as f64,
            report.cost_x_expected,
            PAIR_TRIALS
        ),
    )
}

fn criterion2() -> Outcome {
    let start = Instant::now();
    let cond = three_way_conditional();
    let joint = three_way_joint();
    let policy = greedy_construct(&cond).unwrap();
    let elapsed = start.elapsed();
    let law: Vec<Rational> = policy.size_marginal(&joint).split_off(1);
    let profile = theta_profile(&cond).unwrap();
    let cdf = size_cdf_given_s(&policy, &cond, 0);
    let independent = audit_policy_independence(&policy, &joint).pass;
    let cost = expected_cost(&policy, &joint, 2).unwrap();
    let pass = law == vec![r(1, 2), r(2, 5), r(1, 10)]
        && independent
        && cdf == profile.cumulative()
        && cost == r(51, 40)
        && within(elapsed, Duration::from_secs(1));
    let shown: Vec<String> = law.iter().map(|q| q.to_string()).collect();
    outcome(
        pass,
        format!(
            "|U| law = ({}) (want 1/2, 2/5, 1/10); I(S;U) = 0: {independent}; theta equality: {}; cost = {cost} \
             (want 51/40); {elapsed:.1?} (limit 1s)",
            shown.join(", "),
            cdf == profile.cumulative()
        ),
    )
}

fn criterion3(instances: &[Conditional]) -> Outcome {
    let start = Instant::now();
    let mut failures = vec![];
    for (n, cond) in instances.iter().enumerate() {
        let policy = greedy_construct(cond).unwrap();
        let profile = theta_profile(cond).unwrap();
        let guarantee = profile.cumulative();
        let joint = uniform_joint(cond);
        let valid = policy_validate(&policy, &joint).is_valid();
        let cdf = size_cdf_given_s(&policy, cond, 0);
        let meets = cdf.iter().zip(&guarantee).all(|(a, b)| a >= b);
        let bounded =
            [2, 3].iter().all(|&n| expected_cost(&policy, &joint, n).unwrap() <= theorem_bound(&profile, n).unwrap());
        if !(valid && meets && bounded) {
            failures.push(n);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && within(elapsed, Duration::from_secs(60)),
        format!(
            "{} random full-support conditionals, K in 2..=5: {} violate the size guarantee or cost bound \
             (N = 2, 3); {elapsed:.1?} (limit 60s)",
            instances.len(),
            failures.len()
        ),
    )
}

fn criterion4(instances: &[Conditional]) -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut failures = vec![];
    for (n, cond) in instances.iter().enumerate().filter(|(_, c)| c.k() <= 4) {
        let joint = uniform_joint(cond);
        let sol = lp_solve(&lp_build(&joint, 2).unwrap()).unwrap();
        let greedy = expected_cost(&greedy_construct(cond).unwrap(), &joint, 2).unwrap();
        let lower = coverage_bound(cond, 2).unwrap().max(r(1, 1));
        let ok = policy_validate(&sol.policy, &joint).is_valid() && lower <= sol.objective && sol.objective <= greedy;
        if !ok {
            failures.push(n);
        }
        checked += 1;
    }
    let pair = lp_solve(&lp_build(&symmetric_pair_joint(), 2).unwrap()).unwrap().objective;
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && pair == r(5, 4),
        format!(
            "{checked} instances with K <= 4: {} outside [max(1, coverage bound), greedy cost]; \
             two-message optimum = {pair} (want 5/4 exactly); {elapsed:.1?}",
            failures.len()
        ),
    )
}

fn criterion5() -> Outcome {
    let start = Instant::now();
    let config = SystemConfig::minimal(2, 2, 5).unwrap();
    let exact = audit_query_privacy_exact(&symmetric_pair_joint(), &symmetric_pair_policy(), &config).unwrap();
    let joint_checks = audit_proposition1(&symmetric_pair_joint(), &symmetric_pair_policy(), &config).unwrap();
    let exact_ok = exact.len() == 2 && exact.iter().all(|c| c.pass && c.value == 0.0);
    let joint_ok = joint_checks.len() == 8 && joint_checks.iter().all(|c| c.pass);

    let config3 = SystemConfig::minimal(2, 3, 5).unwrap();
    let greedy = greedy_construct(&three_way_conditional()).unwrap();
    let empirical =
        audit_query_privacy_empirical(&three_way_joint(), &greedy, &config3, EMPIRICAL_TRIALS, DEFAULT_TV_THRESHOLD)
            .unwrap();
    let worst = empirical.iter().map(|c| c.value).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    outcome(
        exact_ok && joint_ok && empirical.iter().all(|c| c.pass) && within(elapsed, Duration::from_secs(300)),
        format!(
            "N=K=2, L=4: I(S;Q_i^X) = 0 exactly at both servers: {exact_ok}; joint-query equivalence \
             ({} checks): {joint_ok}; N=2, K=3: worst TV = {worst:.4} over {EMPIRICAL_TRIALS} trials \
             (threshold {DEFAULT_TV_THRESHOLD}); {elapsed:.1?} (limit 5 min)",
            joint_checks.len()
        ),
    )
}

struct LocationRun {
    nodes: Vec<HistoryCheck>,
    decoded: bool,
    simulations: usize,
    elapsed: Duration,
}

fn location_run() -> LocationRun {
    let start = Instant::now();
    let config = SystemConfig::minimal(2, 2, 0).unwrap();
    let mut nodes = vec![];
    let mut decoded = true;
    let mut simulations = 0;
    for model in models() {
        for schedule in schedules() {
            nodes.extend(location_brute_force(&model, &schedule, &config, Solver::Lp, true).unwrap());
            for seed in 0..LOCATION_SEEDS {
                let setup = location_setup(&model, &schedule, seed);
                let store = random_store(2, setup.config.length, seed);
                let report = location_report(&setup, &LocalServers::new(&store, 2), Some(&store)).unwrap();
                decoded &= report.decoded_ok == Some(true) && report.steps.iter().all(|s| s.decoded_ok == Some(true));
                simulations += 1;
            }
        }
    }
    LocationRun { nodes, decoded, simulations, elapsed: start.elapsed() }
}

fn criterion6(run: &LocationRun) -> Outcome {
    let posterior = run.nodes.iter().filter(|n| !n.posterior_matches).count();
    let online = run.nodes.iter().filter(|n| !n.online.pass).count();
    outcome(
        posterior == 0 && online == 0 && run.decoded && within(run.elapsed, Duration::from_secs(120)),
        format!(
            "K=2, N=2, horizons 0..={MAX_HORIZON}, {} schedules x {} models: {} history nodes, {posterior} posterior \
             mismatches, {online} with online leakage; {} simulated traces decode correctly: {}; {:.1?} (limit 2 min)",
            schedules().len(),
            models().len(),
            run.nodes.len(),
            run.simulations,
            run.decoded,
            run.elapsed
        ),
    )
}

fn criterion7(run: &LocationRun) -> Outcome {
    let checked: usize = run.nodes.iter().map(|n| n.queries.len()).sum();
    let leaks = run.nodes.iter().flat_map(|n| &n.queries).filter(|c| !c.pass).count();
    outcome(
        checked > 0 && leaks == 0,
        format!("I(private locations so far; server query | history) = 0 in {checked} of {checked} node-server pairs (leaks: {leaks})"),
    )
}

fn start_servers(store: &MessageStore) -> (Vec<ServerHandle>, RemoteServers) {
    let handles: Vec<_> = (0..2).map(|_| serve(store.clone(), "127.0.0.1:0").unwrap()).collect();
    let endpoints: Vec<String> = handles.iter().map(|h| h.addr().to_string()).collect();
    let remote = RemoteServers::connect(&endpoints, Duration::from_secs(10)).unwrap();
    (handles, remote)
}

fn criterion8() -> Outcome {
    let start = Instant::now();
    let (_, store) = pair_setup(PAIR_TRIALS);
    let (_handles, remote) = start_servers(&store);
    let local = serde_json::to_string(&pair_report(&LocalServers::new(&store, 2), PAIR_TRIALS)).unwrap();
    let networked = pair_report(&remote, PAIR_TRIALS);
    let pair_same = local == serde_json::to_string(&networked).unwrap();
    let bits_same = remote.stats().answer_bits == networked.bits_s + networked.bits_x;

    let mut location_same = true;
    let mut runs = 0;
    for model in models() {
        for schedule in schedules().iter().filter(|s| s.horizon == MAX_HORIZON) {
            let setup = location_setup(&model, schedule, 3);
            let store = random_store(2, setup.config.length, 3);
            let (_handles, remote) = start_servers(&store);
            let a = location_report(&setup, &LocalServers::new(&store, 2), Some(&store)).unwrap();
            let b = location_report(&setup, &remote, Some(&store)).unwrap();
            location_same &= serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap();
            location_same &= remote.stats().answer_bits == b.total_bits as u64;
            runs += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        pair_same && bits_same && location_same,
        format!(
            "two-request report over TCP identical to in-process ({PAIR_TRIALS} trials): {pair_same}; \
             wire answer bits = library bits: {bits_same} ({}); {runs} location reports identical with matching \
             bits: {location_same}; {elapsed:.1?}",
            remote.stats().answer_bits
        ),
    )
}

fn main() -> ExitCode {
    let instances = random_conditionals();
    let location = location_run();
    let results = [
        criterion1(),
        criterion2(),
        criterion3(&instances),
        criterion4(&instances),
        criterion5(),
        criterion6(&location),
        criterion7(&location),
        criterion8(),
    ];
    for (n, o) in results.iter().enumerate() {
        println!("criterion {}: {} - {}", n + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if results.iter().all(|o| o.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
