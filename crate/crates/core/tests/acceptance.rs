//! Acceptance criteria 1-11. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any fails.

use std::path::Path;
use std::time::Instant;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use xbs_core::analysis::{bound_report, check_dwell_bound, check_non_zeno, check_vobs_monotone, BoundReport};
use xbs_core::certificates::{
    complete_gains, dwell_time_floor, dwell_time_lower_bound, lyapunov_residual, solve_common_lyapunov,
};
use xbs_core::engine::{simulate, ClosedLoop, Simulation};
use xbs_core::model::{HSchedule, HybridState, HybridTrajectory, PlantParams, Sample};
use xbs_core::scenario::{execute, run_config, CheckSelection, ScenarioConfig};
use xbs_core::Result;

const SCENARIO: &str = r#"{
    "schema": 1,
    "name": "dry road",
    "plant": {"a": 375.0, "c": 24.0, "d": 12.5},
    "observer": {"k1_plus": 40.0, "k2_plus": -3.0},
    "controller": {"k": 500.0, "z_star_init": 75.0, "epsilon": 0.01, "R": 15.0, "R_tilde": 0.5,
                   "h_schedule": "paper_v", "max_cycles": 10},
    "solver": {"rel_tol": 1e-10, "abs_tol": 1e-12, "event_tol": 1e-12, "max_step": 1e-2,
               "t_end": 40.0, "zeno_window": 1e-6, "zeno_max_jumps": 8, "record_interval": 0.0},
    "initial": {"z0": [10.0, 0.4], "z_hat0": [10.0, 0.0]}
}"#;

fn plant() -> PlantParams {
    PlantParams::new(375.0, 24.0, 12.5).unwrap()
}

fn scenario(t_end: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::from_json(SCENARIO).unwrap();
    cfg.solver.t_end = t_end;
    cfg
}

struct Run {
    lp: ClosedLoop,
    sim: Simulation,
    bounds: BoundReport,
    sim_secs: f64,
}

fn full_run() -> Result<Run> {
    let cfg = scenario(40.0);
    let lp = cfg.closed_loop()?;
    let start = Instant::now();
    let sim = simulate(&lp, &cfg.solver, Vector2::from(cfg.initial.z0), Vector2::from(cfg.initial.z_hat0))?;
    let sim_secs = start.elapsed().as_secs_f64();
    let bounds = bound_report(&lp, &sim.trajectory, cfg.analysis.threshold_fraction)?;
    Ok(Run { lp, sim, bounds, sim_secs })
}

fn c1() -> Result<(bool, String)> {
    let p = plant();
    let start = Instant::now();
    let g = complete_gains(&p, 40.0, -3.0)?;
    let once = start.elapsed().as_secs_f64();
    let start = Instant::now();
    for _ in 0..1000 {
        std::hint::black_box(complete_gains(std::hint::black_box(&p), 40.0, -3.0)?);
    }
    let avg = start.elapsed().as_secs_f64() / 1000.0;

    let exact = g.k1_minus() == 8.0 && (g.k2_minus() + 357.0 / 375.0).abs() <= 2.0 * f64::EPSILON;
    let r = p.c / p.a;
    let ineq = g.k1_plus() > p.c
        && g.k2_plus() < -r * g.k1_plus()
        && g.k1_minus() < p.c
        && g.k2_minus() < -r * g.k1_minus();
    let hurwitz = [g.a1(), g.a2()].iter().all(|m| m.trace() < 0.0 && m.determinant() > 0.0);
    Ok((
        exact && ineq && hurwitz && once < 1e-3 && avg < 1e-3,
        format!(
            "k1- = {}, k2- = {:.17} (target {:.17}); inequalities {ineq}, Hurwitz {hurwitz}; {:.1} us first call, {:.2} us avg",
            g.k1_minus(),
            g.k2_minus(),
            -357.0 / 375.0,
            once * 1e6,
            avg * 1e6
        ),
    ))
}

/// `A^T P + P A = -C^T C` for one mode, unknowns `(p11, p12, p22)`.
fn lyapunov_oracle(a: &Matrix2<f64>) -> Matrix2<f64> {
    let (a11, a12, a21, a22) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let m = Matrix3::new(
        2.0 * a11, 2.0 * a21, 0.0,
        a12, a11 + a22, a21,
        0.0, 2.0 * a12, 2.0 * a22,
    );
    let x = m.lu().solve(&Vector3::new(-1.0, 0.0, 0.0)).unwrap();
    Matrix2::new(x[0], x[1], x[1], x[2])
}

fn c2() -> Result<(bool, String)> {
    let g = complete_gains(&plant(), 40.0, -3.0)?;
    let cert = solve_common_lyapunov(&g)?;
    let pm = cert.p();
    let (r1, r2) = (lyapunov_residual(&g.a1(), &pm), lyapunov_residual(&g.a2(), &pm));
    let oracle = lyapunov_oracle(&g.a1());
    let published = Matrix2::new(0.14034, 1.70455, 1.70455, 26.6335);
    let pd = pm[(0, 0)] > 0.0 && pm.determinant() > 0.0 && cert.lambda_min > 0.0;
    let elem = (pm - published).abs().max();
    let vs_oracle = (pm - oracle).abs().max();
    let gamma_rel = (cert.gamma - 29.31).abs() / 29.31;
    Ok((
        r1 <= 1e-9 && r2 <= 1e-9 && pd && elem <= 1e-4 && vs_oracle <= 1e-9 && gamma_rel <= 0.01,
        format!(
            "residuals {r1:.1e}/{r2:.1e}, P = [[{:.5}, {:.5}], [{:.5}, {:.4}]], max dev {elem:.1e} (oracle {vs_oracle:.1e}), gamma = {:.3}",
            pm[(0, 0)], pm[(0, 1)], pm[(1, 0)], pm[(1, 1)], cert.gamma
        ),
    ))
}

fn c3(run: &Run) -> (bool, String) {
    let v = &run.bounds.vobs;
    (
        v.monotone,
        format!("{} samples, worst relative increase {:.2e}", run.sim.trajectory.len(), v.worst_violation),
    )
}

fn c4(run: &Run) -> (bool, String) {
    let p = &run.bounds.phi_oracle;
    (
        p.ok && p.cycles_checked > 0,
        format!("{} completed cycles, max relative error {:.2e}", p.cycles_checked, p.max_rel_err),
    )
}

fn c5(run: &Run) -> (bool, String) {
    let t = &run.bounds.tau_clock;
    (t.ok, format!("max relative error {:.2e} at t = {:.4}", t.max_rel_err, t.worst_t))
}

/// First time `z2' = M (c z2 + d)` started at `-sigma` reaches `+sigma`,
/// by fixed-step RK4 with linear interpolation of the crossing.
fn comparison_crossing(p: &PlantParams, m: f64, sigma: f64) -> f64 {
    let f = |z: f64| m * (p.c * z + p.d);
    let h = 1e-9;
    let (mut t, mut z) = (0.0, -sigma);
    loop {
        let k1 = f(z);
        let k2 = f(z + 0.5 * h * k1);
        let k3 = f(z + 0.5 * h * k2);
        let k4 = f(z + h * k3);
        let zn = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if zn >= sigma {
            return t + h * (sigma - z) / (zn - z);
        }
        t += h;
        z = zn;
    }
}

fn c6(run: &Run) -> Result<(bool, String)> {
    let (p, cfg) = (&run.lp.params, &run.lp.cfg);
    let b1 = dwell_time_lower_bound(p, cfg, 1)?;
    let oracle = comparison_crossing(p, 2.0 * cfg.z_star_init, b1.sigma);
    let rel = (b1.t_lower - oracle).abs() / oracle;
    let near = (b1.t_lower - 1.288e-3).abs() < 5e-7;
    let check = check_dwell_bound(&run.sim.trajectory, p, cfg)?;
    let intervals: usize = check.per_cycle.iter().map(|c| c.intervals).sum();
    Ok((
        near && rel <= 1e-6 && check.ok && intervals > 0,
        format!(
            "T_l1 = {:.6e}, comparison ODE {:.6e} (rel {rel:.1e}); {intervals} intervals, min interval/bound = {:.3}",
            b1.t_lower,
            oracle,
            check.min_ratio.unwrap_or(f64::NAN)
        ),
    ))
}

fn c7(run: &Run) -> Result<(bool, String)> {
    let z = check_non_zeno(&run.sim.trajectory, &run.lp.params, &run.lp.cfg, 1.0)?;
    let t_lmin = dwell_time_floor(&run.lp.params, &run.lp.cfg)?;
    let bound = 2 * (1.0 / t_lmin).ceil() as usize + 1;
    Ok((
        z.ok && z.bound == bound,
        format!(
            "{} jumps total, at most {} in any unit window (bound {bound})",
            run.sim.trajectory.jumps.len(),
            z.max_jumps_in_window
        ),
    ))
}

fn c8(run: &Run) -> (bool, String) {
    let traj = &run.sim.trajectory;
    let target = 75.0 / 32.0;
    let t_hit = traj
        .samples
        .iter()
        .find(|s| (s.state.z_star.abs() - target).abs() < 1e-9)
        .map(|s| s.t);
    let reach_ok = t_hit.is_some_and(|t| (8.0..=40.0).contains(&t));

    let peak = |f: &dyn Fn(&Sample) -> f64| -> Option<f64> {
        traj.span_of(1).map(|s| s.samples(traj).iter().map(f).fold(0.0, f64::max))
    };
    let metrics: [(&str, &dyn Fn(&Sample) -> f64); 3] = [
        ("|z1|", &|s| s.state.z[0].abs()),
        ("|z2|", &|s| s.state.z[1].abs()),
        ("|z~|", &|s| s.state.z_tilde.norm()),
    ];
    let end8 = traj.span_of(8).filter(|s| s.completed).map(|s| traj.samples[s.last]);
    let decrease_ok = match end8 {
        Some(end) => metrics
            .iter()
            .all(|(_, f)| peak(*f).is_some_and(|p| f(&end) * 10.0 <= p)),
        None => false,
    };
    let starts: Vec<String> = traj
        .cycle_spans()
        .iter()
        .map(|s| format!("i={}@{:.3}", s.cycle, traj.samples[s.first].t))
        .collect();
    let fast = run.sim_secs < 10.0;
    (
        reach_ok && decrease_ok && fast,
        format!(
            "|z*| = 2.34 first at t = {}; cycle 8 {}; cycle starts [{}]; simulated in {:.2} s",
            t_hit.map_or("never (t <= 40)".into(), |t| format!("{t:.3}")),
            if end8.is_some() { "completed" } else { "not completed by t = 40" },
            starts.join(", "),
            run.sim_secs
        ),
    )
}

fn c9(run: &Run) -> (bool, String) {
    let env = &run.bounds.envelope;
    let checked: usize = env.iter().map(|e| e.samples_checked).sum();
    let detail: Vec<String> = env
        .iter()
        .map(|e| format!("i={} T={:.3e} margin={:.2}", e.cycle, e.t_activation, e.log_margin))
        .collect();
    (
        !env.is_empty() && checked > 0 && run.bounds.envelope_ok(),
        format!("{checked} samples; {}", detail.join("; ")),
    )
}

fn c10() -> Result<(bool, String)> {
    let p = plant();
    let rejected = [24.0, 20.0, 0.0]
        .iter()
        .all(|&k1| complete_gains(&p, k1, -3.0).is_err_and(|e| e.kind() == "InvalidGains"));

    let sched = HSchedule::InvOnePlusPow(4.0);
    let mut cfg = scenario(0.05);
    cfg.controller.h_schedule = sched.clone();
    let (_, _, report) = execute(&cfg, &CheckSelection::All)?;
    let flagged = !sched.g_converges_to_zero()
        && !report.g_converges
        && report.warnings.iter().any(|w| w.contains("does not converge"));

    let cert = solve_common_lyapunov(&complete_gains(&p, 40.0, -3.0)?)?;
    let grown = HybridTrajectory {
        samples: (0..50)
            .map(|k| Sample {
                t: k as f64 * 0.01,
                j: 0,
                state: HybridState {
                    tau: 0.0,
                    cycle: 1,
                    z: Vector2::new(1.0, 0.1),
                    z_tilde: Vector2::new(1.0, -0.5) * 1.05f64.powi(k),
                    z_star: 37.5,
                    phi: Matrix2::identity(),
                },
            })
            .collect(),
        jumps: vec![],
        termination: None,
    };
    let v = check_vobs_monotone(&grown, &cert);
    Ok((
        rejected && flagged && !v.monotone,
        format!(
            "k1+ <= c rejected: {rejected}; 1/(1+4^-i) flagged: {flagged}; grown z~ detected: {} (increase {:.2e})",
            !v.monotone, v.worst_violation
        ),
    ))
}

fn read_all(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| {
            let e = e?;
            Ok((e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path())?))
        })
        .collect::<Result<_>>()?;
    files.sort();
    Ok(files)
}

fn c11() -> Result<(bool, String)> {
    let cfg = scenario(2.0);
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    run_config(&cfg, a.path(), &CheckSelection::All)?;
    run_config(&cfg, b.path(), &CheckSelection::All)?;
    let (fa, fb) = (read_all(a.path())?, read_all(b.path())?);
    let bytes: usize = fa.iter().map(|(_, d)| d.len()).sum();
    Ok((
        fa.len() == 4 && fa == fb,
        format!("{} files, {bytes} bytes, identical: {}", fa.len(), fa == fb),
    ))
}

fn main() {
    let mut results: Vec<(u32, bool, String)> = Vec::new();
    let mut push = |n: u32, r: Result<(bool, String)>| {
        let (ok, detail) = r.unwrap_or_else(|e| (false, format!("error {}: {e}", e.kind())));
        println!("{} criterion {n}: {detail}", if ok { "PASS" } else { "FAIL" });
        results.push((n, ok, detail));
    };
    push(1, c1());
    push(2, c2());
    match full_run() {
        Ok(run) => {
            push(3, Ok(c3(&run)));
            push(4, Ok(c4(&run)));
            push(5, Ok(c5(&run)));
            push(6, c6(&run));
            push(7, c7(&run));
            push(8, Ok(c8(&run)));
            push(9, Ok(c9(&run)));
        }
        Err(e) => {
            for n in [3, 4, 5, 6, 7, 8, 9] {
                push(n, Err(xbs_core::Error::InvalidConfig(format!("scenario run failed: {e}"))));
            }
        }
    }
    push(10, c10());
    push(11, c11());

    let failed: Vec<u32> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
