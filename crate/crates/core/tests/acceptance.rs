//! End-to-end acceptance checks. Runs the bundled presets, the reference
//! oracles and a determinism rerun, and prints one PASS or FAIL line per
//! criterion. Exits non-zero when any criterion fails.

mod oracles;

use std::fs;
use std::path::Path;
use std::time::Instant;

use fowfsim::scenario::{
    compare_runs, files, run_scenario, write_run, RunOutput, RunSummary, ScenarioConfig,
};

const BASELINE_POWER: [f64; 3] = [5.0e6, 3.0e6, 3.0e6];
const BASELINE_TOLERANCE: f64 = 0.15;
const BASELINE_RUNTIME: f64 = 120.0;
const ENERGY_GAIN: f64 = 15.0;
const REFERENCE_TARGETS: [f64; 3] = [72.0, -89.0, 70.0];
const REFERENCE_GAP: f64 = 20.0;
const LATERAL_RMSE: f64 = 5.0;
const SETTLE_LIMIT: f64 = 1200.0;
const TRACKING_FRACTION: f64 = 0.05;
const ORACLE_RUNTIME: f64 = 300.0;

struct Outcome {
    criterion: u8,
    pass: bool,
}

fn report(criterion: u8, pass: bool, detail: String) -> Outcome {
    println!(
        "criterion {criterion}: {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    Outcome { criterion, pass }
}

/// Runs a preset into `dir` and returns the output and its wall time.
fn run_preset(name: &str, dir: &Path) -> (RunOutput, f64) {
    let mut cfg = ScenarioConfig::load(&format!("preset:{name}")).unwrap();
    cfg.run.output_dir = dir.to_path_buf();
    let started = Instant::now();
    let out = run_scenario(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
    write_run(&out, dir).unwrap();
    (out, started.elapsed().as_secs_f64())
}

fn baseline_powers(base: &RunOutput, seconds: f64) -> Outcome {
    let powers: Vec<f64> = base.metrics.turbines.iter().map(|t| t.mean_power).collect();
    let within = powers
        .iter()
        .zip(BASELINE_POWER)
        .all(|(p, r)| (p - r).abs() <= BASELINE_TOLERANCE * r);
    let mw: Vec<String> = powers.iter().map(|p| format!("{:.3}", p / 1e6)).collect();
    report(
        1,
        within && seconds <= BASELINE_RUNTIME,
        format!(
            "baseline mean power ({}) MW against (5, 3, 3) +/-15%, runtime {seconds:.1} s <= {BASELINE_RUNTIME} s",
            mw.join(", ")
        ),
    )
}

fn energy_gain(s1: &RunOutput, base: &RunOutput) -> Outcome {
    let c = compare_runs(&RunSummary::from_output(s1), &RunSummary::from_output(base)).unwrap();
    let downstream = &c.effective_speed_gain_percent[1..];
    let pass = c.energy_gain_percent >= ENERGY_GAIN && downstream.iter().all(|g| *g > 0.0);
    let gains: Vec<String> = downstream.iter().map(|g| format!("{g:+.1}%")).collect();
    report(
        2,
        pass,
        format!(
            "scenario 1 energy gain {:+.2}% (>= {ENERGY_GAIN}%), downstream effective-speed gains [{}] after t = {} s",
            c.energy_gain_percent,
            gains.join(", "),
            c.window_start
        ),
    )
}

fn alternating_targets(s1: &RunOutput) -> Outcome {
    let t = &s1.plan.targets;
    let alternates = t.windows(2).all(|w| w[0] * w[1] < 0.0);
    let gap = |sign: f64| {
        t.iter()
            .zip(REFERENCE_TARGETS)
            .map(|(a, r)| (a - sign * r).abs())
            .fold(0.0, f64::max)
    };
    let (direct, mirrored) = (gap(1.0), gap(-1.0));
    let near = direct.min(mirrored) <= REFERENCE_GAP;
    report(
        3,
        alternates,
        format!(
            "scenario 1 targets ({:.0}, {:.0}, {:.0}) m alternate in sign; informational: largest gap to (72, -89, 70) m is {direct:.0} m, to its mirror {mirrored:.0} m, {} the {REFERENCE_GAP} m band",
            t[0],
            t[1],
            t[2],
            if near { "within" } else { "outside" }
        ),
    )
}

fn settling(runs: &[(&str, &RunOutput)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, out) in runs {
        let mut cells = Vec::new();
        for t in &out.metrics.turbines {
            let ok = matches!((t.settle_time, t.lateral_rmse),
                (Some(s), Some(r)) if s <= SETTLE_LIMIT && r <= LATERAL_RMSE);
            pass &= ok;
            cells.push(format!(
                "{}/{}",
                t.settle_time.map_or("never".into(), |s| format!("{s:.0}s")),
                t.lateral_rmse.map_or("-".into(), |r| format!("{r:.2}m"))
            ));
        }
        parts.push(format!("{name} [{}]", cells.join(", ")));
    }
    report(
        4,
        pass,
        format!(
            "settle/RMSE per turbine {} (settle <= {SETTLE_LIMIT} s, RMSE <= {LATERAL_RMSE} m)",
            parts.join("; ")
        ),
    )
}

fn power_tracking(s2: &RunOutput, base: &RunOutput) -> Outcome {
    let m = &s2.metrics;
    let target = m.power_target.unwrap();
    let rmse = m.power_tracking_rmse.unwrap_or(f64::INFINITY);
    let peak = base.metrics.peak_sustained_power;
    report(
        5,
        rmse <= TRACKING_FRACTION * target && peak < target,
        format!(
            "scenario 2 tracking RMSE {:.1} kW ({:.2}% of {:.1} MW, limit 5%), baseline best 300 s mean {:.3} MW < target",
            rmse / 1e3,
            100.0 * rmse / target,
            target / 1e6,
            peak / 1e6
        ),
    )
}

fn limits(runs: &[(&str, &RunOutput)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, out) in runs {
        let m = &out.metrics;
        let total = m.saturation_violations + m.rate_violations + m.speed_band_violations;
        pass &= total == 0;
        parts.push(format!(
            "{name} {}/{}/{}",
            m.saturation_violations, m.rate_violations, m.speed_band_violations
        ));
    }
    report(
        6,
        pass,
        format!(
            "saturation/rate/speed-band violations: {}",
            parts.join(", ")
        ),
    )
}

fn reference_oracles() -> Outcome {
    use oracles::{advection, catenary, model, qp};
    let started = Instant::now();
    let (coarse, fine) = advection::refinement();
    let ratio = coarse / fine;
    let jac = model::analytic_jacobian_error();
    let errs = model::model_jacobian_errors();
    let orders = [errs[0] / errs[1], errs[1] / errs[2]];
    let enumeration = qp::enumeration_worst(0..50);
    let certificate = (100..150)
        .map(|seed| qp::certify(seed, 30, 60).map(|(_, e)| e))
        .collect::<Result<Vec<f64>, String>>();
    let certificate_worst = certificate
        .as_ref()
        .map(|v| v.iter().copied().fold(0.0, f64::max))
        .unwrap_or(f64::INFINITY);
    let tension = catenary::worst_relative_error();
    let (residual, imbalance, torque) = model::trim_balance();
    let seconds = started.elapsed().as_secs_f64();

    let pass = ratio >= 1.8
        && jac <= 1e-9
        && orders.iter().all(|r| (3.6..=4.4).contains(r))
        && enumeration <= 1e-6
        && certificate_worst <= 1e-6
        && tension <= 0.005
        && residual <= 1e-6
        && imbalance <= 1e-6
        && torque <= 1e-6
        && seconds <= ORACLE_RUNTIME;
    report(
        7,
        pass,
        format!(
            "advection refinement ratio {ratio:.3}; jacobian error {jac:.1e}, order ratios ({:.2}, {:.2}); QP vs enumeration {enumeration:.1e} over 50, certified 30x60 {certificate_worst:.1e} over 50{}; catenary vs shooting {:.1e}; trim residual {residual:.1e}, force {imbalance:.1e}, torque {torque:.1e}; {seconds:.1} s",
            orders[0],
            orders[1],
            certificate.err().map_or(String::new(), |e| format!(" ({e})")),
            tension
        ),
    )
}

/// Artifact names in `dir` other than the wall-clock timing log.
fn artifacts(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != files::TIMING)
        .collect();
    names.sort();
    names
}

/// Artifacts that differ byte-wise between two run directories, or that
/// exist in only one of them.
fn differing_files(a: &Path, b: &Path) -> Vec<String> {
    let (names_a, names_b) = (artifacts(a), artifacts(b));
    let mut bad: Vec<String> = names_a
        .iter()
        .filter(|n| fs::read(a.join(n)).ok() != fs::read(b.join(n)).ok())
        .cloned()
        .collect();
    bad.extend(names_b.into_iter().filter(|n| !names_a.contains(n)));
    bad
}

fn determinism(root: &Path) -> Outcome {
    let mut bad = Vec::new();
    let mut checked = 0;
    for name in ["scenario1", "scenario2"] {
        let again = root.join(format!("{name}_rerun"));
        run_preset(name, &again);
        let first = root.join(name);
        checked += artifacts(&first).len();
        bad.extend(
            differing_files(&first, &again)
                .into_iter()
                .map(|f| format!("{name}/{f}")),
        );
    }
    report(
        8,
        bad.is_empty(),
        if bad.is_empty() {
            format!("reruns of scenario 1 and 2 reproduce {checked} artifacts byte-for-byte (timing.log excluded)")
        } else {
            format!("differing artifacts: {}", bad.join(", "))
        },
    )
}

fn main() {
    // Under `cargo test -- --list` or filters, behave like an empty suite.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let root = tempfile::tempdir().unwrap();
    let (base, base_seconds) = run_preset("baseline", &root.path().join("baseline"));
    let (s1, _) = run_preset("scenario1", &root.path().join("scenario1"));
    let (s2, _) = run_preset("scenario2", &root.path().join("scenario2"));

    let outcomes = [
        baseline_powers(&base, base_seconds),
        energy_gain(&s1, &base),
        alternating_targets(&s1),
        settling(&[("scenario 1", &s1), ("scenario 2", &s2)]),
        power_tracking(&s2, &base),
        limits(&[
            ("baseline", &base),
            ("scenario 1", &s1),
            ("scenario 2", &s2),
        ]),
        reference_oracles(),
        determinism(root.path()),
    ];
    let failed: Vec<u8> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| o.criterion)
        .collect();
    println!(
        "acceptance: {} of {} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
