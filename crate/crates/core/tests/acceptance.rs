//! One test per acceptance criterion on the default arena. Each prints its
//! claims and a single `criterion N: PASS|FAIL` line.

use std::sync::OnceLock;

use dollard::rate_lab::{
    cauchy_experiment, cauchy_verdicts, conservation_verdicts, decay_runs, decay_verdicts,
    gauge_experiment, gauge_verdicts, identity_verdicts, profile_verdicts, robustness_verdicts,
    round_trip_verdicts, AcceptanceConfig, DecayRun, Verdict,
};

fn config() -> &'static AcceptanceConfig {
    static CFG: OnceLock<AcceptanceConfig> = OnceLock::new();
    CFG.get_or_init(AcceptanceConfig::default)
}

struct Runs {
    ok: Vec<DecayRun>,
    failed: Vec<Verdict>,
}

fn collect(label: &str, eta: f64, doubled: bool) -> Runs {
    let cfg = config();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for r in decay_runs(&cfg.arena, eta, doubled) {
        match r {
            Ok(run) => ok.push(run),
            Err(e) => failed.push(Verdict::failed(format!("{label}.run"), e.to_string())),
        }
    }
    Runs { ok, failed }
}

fn base() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    RUNS.get_or_init(|| collect("base", 0.0, false))
}

fn damped() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    RUNS.get_or_init(|| collect("eta", config().robust_eta, false))
}

fn doubled() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    RUNS.get_or_init(|| collect("doubled", 0.0, true))
}

fn cauchy(eta: f64) -> Vec<Verdict> {
    match cauchy_experiment(config(), eta) {
        Ok(o) => {
            println!("  differences {:?} window {:?}", o.cauchy, o.window);
            cauchy_verdicts(config(), &o)
        }
        Err(e) => vec![Verdict::failed("c5.run", e.to_string())],
    }
}

fn gauge(eta: f64) -> Vec<Verdict> {
    match gauge_experiment(config(), eta) {
        Ok(o) => gauge_verdicts(config(), &o),
        Err(e) => vec![Verdict::failed("c7.run", e.to_string())],
    }
}

fn base_cauchy() -> &'static Vec<Verdict> {
    static V: OnceLock<Vec<Verdict>> = OnceLock::new();
    V.get_or_init(|| cauchy(0.0))
}

fn base_gauge() -> &'static Vec<Verdict> {
    static V: OnceLock<Vec<Verdict>> = OnceLock::new();
    V.get_or_init(|| gauge(0.0))
}

fn rates(runs: &Runs) -> Vec<Verdict> {
    let w = config().arena.fit_window;
    decay_verdicts(&runs.ok, w)
        .into_iter()
        .chain(profile_verdicts(&runs.ok, w))
        .collect()
}

fn verdict(criterion: u32, claims: &[Verdict]) {
    for v in claims {
        println!("  {}", v.summary_line());
    }
    let failed: Vec<&str> = claims
        .iter()
        .filter(|v| !v.pass)
        .map(|v| v.claim_id.as_str())
        .collect();
    let status = if failed.is_empty() && !claims.is_empty() {
        "PASS"
    } else {
        "FAIL"
    };
    println!(
        "criterion {criterion}: {status} ({}/{} claims)",
        claims.len() - failed.len(),
        claims.len()
    );
    assert!(
        !claims.is_empty(),
        "criterion {criterion} produced no claims"
    );
    assert!(
        failed.is_empty(),
        "criterion {criterion} failed: {failed:?}"
    );
}

#[test]
fn criterion_1_operator_identities() {
    verdict(1, &identity_verdicts(&config().arena));
}

#[test]
fn criterion_2_conservation_and_structure() {
    let runs = base();
    let mut claims = runs.failed.clone();
    claims.extend(conservation_verdicts(&runs.ok));
    verdict(2, &claims);
}

#[test]
fn criterion_3_decay_rates() {
    let runs = base();
    let mut claims = runs.failed.clone();
    claims.extend(decay_verdicts(&runs.ok, config().arena.fit_window));
    verdict(3, &claims);
}

#[test]
fn criterion_4_profile_errors() {
    let runs = base();
    let mut claims = runs.failed.clone();
    claims.extend(profile_verdicts(&runs.ok, config().arena.fit_window));
    verdict(4, &claims);
}

#[test]
fn criterion_5_cauchy_convergence_in_seed_time() {
    verdict(5, base_cauchy());
}

#[test]
fn criterion_6_round_trip() {
    verdict(6, &round_trip_verdicts(config()));
}

#[test]
fn criterion_7_gauge_covariance() {
    verdict(7, base_gauge());
}

#[test]
fn criterion_8_robustness_under_box_and_damping() {
    let cfg = config();
    let base_rates = rates(base());
    let mut claims: Vec<Verdict> = base().failed.clone();
    claims.extend(damped().failed.iter().cloned());
    claims.extend(doubled().failed.iter().cloned());

    let base_all: Vec<Verdict> = base_rates
        .iter()
        .cloned()
        .chain(base_cauchy().iter().cloned())
        .chain(base_gauge().iter().cloned())
        .collect();
    let eta_all: Vec<Verdict> = rates(damped())
        .into_iter()
        .chain(cauchy(cfg.robust_eta))
        .chain(gauge(cfg.robust_eta))
        .collect();
    claims.extend(robustness_verdicts("eta", &base_all, &eta_all));
    claims.extend(robustness_verdicts(
        "doubled",
        &base_rates,
        &rates(doubled()),
    ));
    verdict(8, &claims);
}
