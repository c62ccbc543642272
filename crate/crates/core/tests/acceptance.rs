//! Acceptance suite. Runs every exit criterion at its pinned tolerance and
//! prints one `PASS`/`FAIL` line per criterion with the measured values.
//!
//! A failing criterion is reported but does not fail the workspace test run,
//! so the remaining test targets still execute. Set
//! `CRIMESIM_ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails.
//! A panic (an error in the machinery rather than a criterion) always fails.
//!
//! The long scenario runs (fig2 on 128^2 to t = 10, fig1 on 256^2) take
//! several minutes in the optimized test profile.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crimesim::convergence::{convergence_test, TEST_NAMES};
use crimesim::diagnostics::{
    boundedness_audit_with, mass_ledger_check, min_v_lower_bound_check, refinement_blowup_classifier, weak_residual,
    Classification, CosineBump, TestFunction,
};
use crimesim::io::{load_scenario, load_scenario_with_overrides, read_snapshot, write_snapshot, Scenario};
use crimesim::{run, Field, FinalStatus, Grid, Trajectory};

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

struct Suite {
    outcomes: Vec<Outcome>,
}

impl Suite {
    fn report(&mut self, name: &'static str, passed: bool, detail: String) {
        println!("{}  {name}: {detail}", if passed { "PASS" } else { "FAIL" });
        self.outcomes.push(Outcome { name, passed, detail });
    }
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"))
}

fn scenario(name: &str, overrides: &[String]) -> Scenario {
    load_scenario_with_overrides(&scenario_path(name), overrides).expect("bundled scenario loads")
}

fn simulate(s: &Scenario) -> Trajectory {
    run(
        s.initial_state().unwrap(),
        &s.params().unwrap(),
        &s.control,
        s.t_end,
        &s.output_times,
    )
    .unwrap()
}

fn snapshot_at(traj: &Trajectory, t: f64) -> Option<&crimesim::integrator::TimedSnapshot> {
    traj.snapshots.iter().find(|s| s.t == t)
}

fn max_abs_diff(a: &Field, b: &Field) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Union of the scenario's own output times and `extra`, sorted.
fn with_times(s: &Scenario, extra: &[f64]) -> String {
    let mut t: Vec<f64> = s.output_times.iter().chain(extra).copied().collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    let list: Vec<String> = t.iter().map(|x| format!("{x:?}")).collect();
    format!("output_times=[{}]", list.join(", "))
}

fn uniform_times(t_end: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|k| t_end * k as f64 / intervals as f64).collect()
}

fn restrict(traj: &Trajectory, times: &[f64]) -> Trajectory {
    let mut t = traj.clone();
    t.snapshots.retain(|s| times.contains(&s.t));
    t
}

fn steady_state(suite: &mut Suite) {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut statuses = Vec::new();
    for m in ["1.0", "3.0"] {
        let s = scenario(
            "steady_state",
            &[format!("model.m={m}"), "grid.nx=64".into(), "grid.ny=64".into()],
        );
        let traj = simulate(&s);
        let init = s.initial_state().unwrap();
        worst = worst
            .max(max_abs_diff(&traj.final_state.u, &init.u))
            .max(max_abs_diff(&traj.final_state.v, &init.v));
        statuses.push((traj.final_status, traj.final_state.t));
    }
    let secs = start.elapsed().as_secs_f64();
    let reached = statuses.iter().all(|&(st, t)| st == FinalStatus::ReachedT && t == 5.0);
    suite.report(
        "steady-state preservation (m = 1, 3; 64^2; t = 5)",
        reached && worst <= 1e-9 && secs < 60.0,
        format!("max deviation {worst:.3e} (tol 1e-9), {secs:.1} s (limit 60 s)"),
    );
}

fn v_lower_bound(suite: &mut Suite, runs: &[(&str, &Trajectory)]) {
    let mut worst = f64::INFINITY;
    let mut failing = Vec::new();
    for (name, traj) in runs {
        let v0_min = traj.diagnostics.rows[0].min_v;
        let c = min_v_lower_bound_check(&traj.diagnostics, v0_min).unwrap();
        worst = worst.min(c.worst_ratio);
        if !c.passed {
            failing.push(name.to_string());
        }
    }
    suite.report(
        "v lower bound in every bundled scenario",
        failing.is_empty(),
        format!(
            "{} scenarios, worst min_v / (v0_min e^-t) = {worst:.6}, failing: {failing:?}",
            runs.len()
        ),
    );

    let s = scenario("decoupled_decay", &[]);
    let traj = simulate(&s);
    let v0 = s.initial_state().unwrap().v;
    let end = snapshot_at(&traj, 1.0).expect("snapshot at t = 1");
    let rel = end.v.values().iter().zip(v0.values()).fold(0.0f64, |m, (v, v0)| {
        m.max((v - v0 * (-1.0f64).exp()).abs() / (v0 * (-1.0f64).exp()))
    });
    let max_dt = traj.diagnostics.rows.iter().map(|r| r.dt).fold(0.0, f64::max);
    suite.report(
        "decoupled decay v = v0 e^-t at t = 1",
        rel <= 1e-6 && max_dt <= 1e-3,
        format!("max relative error {rel:.3e} (tol 1e-6), max dt {max_dt:e}"),
    );
}

fn mass_ledger(suite: &mut Suite, fig2: &Trajectory) {
    let ledger = mass_ledger_check(&fig2.diagnostics).unwrap();
    let worst_abs = fig2
        .diagnostics
        .rows
        .iter()
        .map(|r| r.flux_div_defect.abs())
        .fold(0.0, f64::max);
    suite.report(
        "mass ledger closes over the fig2 run",
        ledger.closes(1e-3),
        format!(
            "cumulative defect {:.3e} <= 1e-3 * {:.4} + clipped {:.3e}",
            ledger.cumulative_defect, ledger.initial_mass, ledger.clipped_mass
        ),
    );
    suite.report(
        "flux-divergence integrals vanish per step",
        ledger.worst_flux_div <= 1e-12,
        format!(
            "worst |defect| / max(1, sum |terms|) = {:.3e} (tol 1e-12), worst absolute {worst_abs:.3e}",
            ledger.worst_flux_div
        ),
    );
}

fn convergence(suite: &mut Suite) {
    let start = Instant::now();
    let reports: Vec<_> = TEST_NAMES.iter().map(|n| convergence_test(n).unwrap()).collect();
    let secs = start.elapsed().as_secs_f64();
    let detail: Vec<String> = reports.iter().map(|r| format!("{} {:.2?}", r.test, r.ratios)).collect();
    suite.report(
        "convergence orders (manufactured solutions)",
        reports.iter().all(|r| r.passed) && secs < 300.0,
        format!("{}; {secs:.1} s (limit 300 s)", detail.join(", ")),
    );
}

fn fig2(suite: &mut Suite, traj: &Trajectory, s: &Scenario, secs: f64) {
    let init_peak = traj.diagnostics.rows[0].linf_u;
    let peak = traj.peak_linf_u;
    suite.report(
        "fig2: linf(u) below 50x its initial peak for t <= 10",
        peak < 50.0 * init_peak && traj.final_status != FinalStatus::BlowupSuspected,
        format!("peak {peak:.4} vs initial {init_peak:.4}, {:?}", traj.final_status),
    );
    let audit = boundedness_audit_with(&traj.diagnostics, s.model.m, s.diagnostics.plateau_factor).unwrap();
    let detail: Vec<String> = audit
        .monitors
        .iter()
        .map(|m| format!("{} {:.3}/{:.3}", m.name, m.last_quarter_sup, m.middle_half_sup))
        .collect();
    suite.report(
        "fig2: all four monitors plateau",
        audit.in_bounded_regime && audit.all_plateaued(),
        format!("last quarter / middle half sups: {}", detail.join(", ")),
    );
    let change = match (snapshot_at(traj, 9.0), snapshot_at(traj, 10.0)) {
        (Some(a), Some(b)) => Some(max_abs_diff(&b.u, &a.u) / b.u.max_abs().max(1.0)),
        _ => None,
    };
    let equilibrated = traj.final_status == FinalStatus::Equilibrated;
    suite.report(
        "fig2: equilibrium by t = 10",
        equilibrated || change.is_some_and(|c| c < 1e-4),
        format!(
            "status {:?}, relative sup change over [9, 10] = {}",
            traj.final_status,
            change.map_or("n/a".into(), |c| format!("{c:.3e} (tol 1e-4)"))
        ),
    );
    suite.report(
        "fig2: runtime on 128^2",
        secs < 1800.0,
        format!("{secs:.1} s (limit 1800 s)"),
    );
}

fn fig1(suite: &mut Suite, traj: &Trajectory) {
    let c0 = traj.diagnostics.rows[0].concentration_index;
    let c = traj
        .diagnostics
        .rows
        .iter()
        .find(|r| r.t == 0.95)
        .map(|r| r.concentration_index);
    suite.report(
        "fig1: concentration index at t = 0.95 exceeds 5x initial (128^2)",
        c.is_some_and(|c| c > 5.0 * c0),
        format!(
            "initial {c0:.3}, at t = 0.95 {}",
            c.map_or("n/a".into(), |c| format!("{c:.3} ({:.3}x)", c / c0))
        ),
    );

    let start = Instant::now();
    let s = scenario("fig1_m1_chi10", &["output_times=[]".into()]);
    let r = refinement_blowup_classifier(&s, &[(64, 64), (128, 128), (256, 256)]).unwrap();
    let secs = start.elapsed().as_secs_f64();
    suite.report(
        "fig1: refinement classifier reports robust concentration",
        r.classification == Classification::ConcentrationRobust && secs < 3600.0,
        format!(
            "peaks {:.3?} on 64/128/256, {:?}, {secs:.1} s (limit 3600 s)",
            r.peaks, r.classification
        ),
    );
}

fn fig3(suite: &mut Suite, m1: &Trajectory, m3: &Trajectory) {
    let linf = |traj: &Trajectory, t: f64| snapshot_at(traj, t).map(|s| s.u.max_abs());
    let (a0, a1, a5) = (linf(m1, 0.0), linf(m1, 0.1), linf(m1, 0.5));
    let grows = matches!((a0, a1), (Some(a0), Some(a1)) if a1 > a0);
    let decays = matches!((a1, a5), (Some(a1), Some(a5)) if a5 < a1);
    suite.report(
        "fig3 m = 1: initial growth then decay",
        grows && decays,
        format!("linf(u) at t = 0, 0.1, 0.5: {a0:.4?}, {a1:.4?}, {a5:.4?}"),
    );

    // Each recorded value after t = 0.05 must stay within 2% of the running minimum.
    let mut running_min = f64::INFINITY;
    let mut worst: f64 = 0.0;
    for r in m3.diagnostics.rows.iter().filter(|r| r.t >= 0.05) {
        running_min = running_min.min(r.linf_u);
        worst = worst.max(r.linf_u / running_min);
    }
    suite.report(
        "fig3 m = 3: linf(u) non-increasing after t = 0.05",
        worst <= 1.02,
        format!("largest rise over running minimum {worst:.5} (tol 1.02)"),
    );
}

fn weak(suite: &mut Suite, fine: &Trajectory, fine_times: &[f64], coarse_scenario: &Scenario, coarse_times: &[f64]) {
    let coarse = simulate(coarse_scenario);
    let coarse = restrict(&coarse, coarse_times);
    let fine = restrict(fine, fine_times);
    let params = coarse_scenario.params().unwrap();
    let grid = coarse_scenario.grid().unwrap();
    let family = CosineBump::seeded_family(7, 5, &grid, (0.0, coarse_scenario.t_end));
    let mut worst_u = f64::INFINITY;
    let mut worst_v = f64::INFINITY;
    let mut lines = Vec::new();
    let mut ok = true;
    for phi in &family {
        let (c, f) = match (weak_residual(&coarse, &params, phi), weak_residual(&fine, &params, phi)) {
            (Ok(c), Ok(f)) => (c, f),
            (c, f) => {
                ok = false;
                lines.push(format!("{}: {:?} / {:?}", phi.id(), c.err(), f.err()));
                continue;
            }
        };
        let (ru, rv) = (c.residual_u / f.residual_u, c.residual_v / f.residual_v);
        worst_u = worst_u.min(ru);
        worst_v = worst_v.min(rv);
        lines.push(format!("{} u {ru:.2} v {rv:.2}", c.test_function_id));
    }
    suite.report(
        "weak residuals shrink 3x under h and snapshot-interval halving",
        ok && worst_u >= 3.0 && worst_v >= 3.0,
        format!("worst ratios u {worst_u:.2}, v {worst_v:.2}; {}", lines.join("; ")),
    );
}

fn snapshot_round_trip(suite: &mut Suite) {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut failures = 0usize;
    const COUNT: usize = 10_000;
    for k in 0..COUNT {
        let nx = rng.gen_range(2..=24);
        let ny = rng.gen_range(2..=24);
        let x0: f64 = rng.gen_range(-10.0..10.0);
        let y0: f64 = rng.gen_range(-10.0..10.0);
        let grid = Grid::new(
            x0,
            x0 + rng.gen_range(0.1..10.0),
            y0,
            y0 + rng.gen_range(0.1..10.0),
            nx,
            ny,
        )
        .unwrap();
        // Raw bit patterns cover NaN payloads, infinities and subnormals.
        let values: Vec<f64> = (0..nx * ny)
            .map(|_| match rng.gen_range(0..4) {
                0 => f64::from_bits(rng.gen()),
                1 => rng.gen_range(-1e3..1e3),
                2 => rng.gen::<f64>() * 1e-300,
                _ => rng.gen_range(0.0..1.0),
            })
            .collect();
        let field = Field::from_values(grid, values).unwrap();
        let t = rng.gen_range(0.0..100.0);
        let path = dir.path().join(format!("f{}.cwf", k % 16));
        write_snapshot(&field, t, "u", &path).unwrap();
        let back = read_snapshot(&path).unwrap();
        let same = back.t.to_bits() == t.to_bits()
            && back.field.grid() == field.grid()
            && back
                .field
                .values()
                .iter()
                .zip(field.values())
                .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            failures += 1;
        }
    }
    suite.report(
        "CWF1 snapshot round-trip is bitwise",
        failures == 0,
        format!("{COUNT} randomized fields, {failures} mismatches"),
    );
}

fn main() {
    let mut suite = Suite { outcomes: Vec::new() };
    let total = Instant::now();

    snapshot_round_trip(&mut suite);
    steady_state(&mut suite);
    convergence(&mut suite);

    // fig2 on 128^2 with the figure times, the unit interval [9, 10] and the
    // 80-interval snapshot grid used for the weak residuals.
    let base = scenario("fig2_m3_chi10", &[]);
    let fine_times = uniform_times(base.t_end, 80);
    let coarse_times = uniform_times(base.t_end, 40);
    let mut extra = fine_times.clone();
    extra.extend([9.0, 10.0]);
    let fig2_s = scenario("fig2_m3_chi10", &[with_times(&base, &extra)]);
    let start = Instant::now();
    let fig2_traj = simulate(&fig2_s);
    let fig2_secs = start.elapsed().as_secs_f64();
    fig2(&mut suite, &fig2_traj, &fig2_s, fig2_secs);
    mass_ledger(&mut suite, &fig2_traj);
    let coarse = scenario(
        "fig2_m3_chi10",
        &[
            "grid.nx=64".into(),
            "grid.ny=64".into(),
            "control.stop_on_equilibrium=false".into(),
            with_times(&base, &coarse_times),
        ],
    );
    weak(&mut suite, &fig2_traj, &fine_times, &coarse, &coarse_times);

    let fig1_traj = simulate(&scenario("fig1_m1_chi10", &[]));
    fig1(&mut suite, &fig1_traj);

    let fig3_m1 = simulate(&scenario("fig3_m1_chi5", &[]));
    let fig3_m3 = simulate(&scenario("fig3_m3_chi5", &[]));
    fig3(&mut suite, &fig3_m1, &fig3_m3);

    let steady = simulate(&load_scenario(&scenario_path("steady_state")).unwrap());
    let decay = simulate(&scenario("decoupled_decay", &[]));
    v_lower_bound(
        &mut suite,
        &[
            ("fig1_m1_chi10", &fig1_traj),
            ("fig2_m3_chi10", &fig2_traj),
            ("fig3_m1_chi5", &fig3_m1),
            ("fig3_m3_chi5", &fig3_m3),
            ("steady_state", &steady),
            ("decoupled_decay", &decay),
        ],
    );

    let failed: Vec<&Outcome> = suite.outcomes.iter().filter(|o| !o.passed).collect();
    println!(
        "\nacceptance: {} passed, {} failed ({:.0} s)",
        suite.outcomes.len() - failed.len(),
        failed.len(),
        total.elapsed().as_secs_f64()
    );
    for o in &failed {
        println!("  failed: {} ({})", o.name, o.detail);
    }
    let strict = std::env::var("CRIMESIM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
