//! Read-only checks of simulated hybrid arcs against the design bounds.

use serde::Serialize;

use crate::certificates::{
    attractive_radius, decay_certificate, dwell_time_floor, dwell_time_lower_bound,
    DecayCertificate, ExcitationAssumption, LyapunovCertificate,
};
use crate::dynamics::control_input;
use crate::engine::ClosedLoop;
use crate::error::{Error, Result};
use crate::model::{ControllerConfig, CycleSpan, HybridTrajectory, JumpKind, PlantParams, Sample};

pub const VOBS_REL_SLACK: f64 = 1e-6;
pub const PHI_ORACLE_TOL: f64 = 1e-5;
pub const TAU_REL_TOL: f64 = 1e-6;
pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VobsReport {
    pub monotone: bool,
    /// Largest relative increase `(V_{k+1} - V_k) / V_k` over all sample pairs.
    pub worst_violation: f64,
    pub worst_index: Option<usize>,
}

/// `V_obs = z~^T P z~` must not increase between consecutive samples,
/// across flows and jumps alike.
pub fn check_vobs_monotone(traj: &HybridTrajectory, cert: &LyapunovCertificate) -> VobsReport {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_index = None;
    let mut monotone = true;
    for (k, w) in traj.samples.windows(2).enumerate() {
        let v0 = cert.v_obs(&w[0].state.z_tilde);
        let v1 = cert.v_obs(&w[1].state.z_tilde);
        let rel = if v0 > 0.0 {
            (v1 - v0) / v0
        } else if v1 > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if rel > worst {
            worst = rel;
            worst_index = Some(k + 1);
        }
        if v1 > v0 * (1.0 + VOBS_REL_SLACK) {
            monotone = false;
        }
    }
    VobsReport {
        monotone,
        worst_violation: if worst.is_finite() || worst == f64::INFINITY { worst } else { 0.0 },
        worst_index,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiOracleReport {
    pub ok: bool,
    /// `max |z~(t) - Phi(t) z~(t_i)| / |z~(t_i)|` over completed cycles.
    pub max_rel_err: f64,
    pub cycles_checked: usize,
}

pub fn check_phi_oracle(traj: &HybridTrajectory) -> PhiOracleReport {
    let mut max_rel_err: f64 = 0.0;
    let mut cycles_checked = 0;
    let mut ok = true;
    for span in traj.cycle_spans().iter().filter(|s| s.completed) {
        cycles_checked += 1;
        let samples = span.samples(traj);
        let z0 = samples[0].state.z_tilde;
        let n0 = z0.norm();
        for s in samples {
            let err = (s.state.z_tilde - s.state.phi * z0).norm();
            if n0 > 0.0 {
                max_rel_err = max_rel_err.max(err / n0);
                ok &= err <= PHI_ORACLE_TOL * n0;
            } else {
                ok &= err == 0.0;
            }
        }
    }
    PhiOracleReport {
        ok,
        max_rel_err,
        cycles_checked,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauReport {
    pub ok: bool,
    pub max_rel_err: f64,
    pub worst_t: f64,
}

/// Compares the recorded `tau` with an independent quadrature of `|z1|`
/// restarted at every cycle. The quadrature is the trapezoid rule with the
/// endpoint-derivative correction `h^2/12 (f'_0 - f'_1)`, exact for cubics.
pub fn check_tau_clock(traj: &HybridTrajectory, params: &PlantParams, k: f64) -> TauReport {
    let mut max_rel_err: f64 = 0.0;
    let mut worst_t = 0.0;
    let mut ok = true;
    for span in traj.cycle_spans() {
        let samples = span.samples(traj);
        let mut q = samples[0].state.tau;
        for w in samples.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let h = b.t - a.t;
            if h > 0.0 {
                let s = (a.state.z[0] + b.state.z[0]).signum();
                let f0 = s * a.state.z[0];
                let f1 = s * b.state.z[0];
                let d0 = s * z1_dot(params, k, a);
                let d1 = s * z1_dot(params, k, b);
                q += 0.5 * h * (f0 + f1) + h * h / 12.0 * (d0 - d1);
            }
            let tau = b.state.tau;
            let err = (tau - q).abs();
            let scale = tau.abs().max(q.abs());
            let rel = if scale > 0.0 { err / scale } else { 0.0 };
            if rel > max_rel_err {
                max_rel_err = rel;
                worst_t = b.t;
            }
            ok &= err <= TAU_REL_TOL * scale;
        }
    }
    TauReport {
        ok,
        max_rel_err,
        worst_t,
    }
}

fn z1_dot(params: &PlantParams, k: f64, s: &Sample) -> f64 {
    let st = &s.state;
    -params.a * st.z[0] * st.z[1] + control_input(params, k, st)
}

/// Excitation data extracted from `|z1|` samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DwellReport {
    pub cycle: Option<u32>,
    pub intervals: Vec<[f64; 2]>,
    pub tau_d: f64,
    pub tau_s: f64,
    pub z_low: f64,
    pub z_high: f64,
    pub mu: f64,
    pub mu_window: f64,
    /// Whether the first/last interval was cut by the end of the record.
    pub truncated: [bool; 2],
    pub assumption_holds: bool,
}

impl DwellReport {
    pub fn assumption(&self) -> ExcitationAssumption {
        ExcitationAssumption {
            tau_d: self.tau_d,
            tau_s: self.tau_s,
            z_low: self.z_low,
            z_high: self.z_high,
        }
    }
}

fn dedup_times(t: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut ts = Vec::with_capacity(t.len());
    let mut ys = Vec::with_capacity(y.len());
    for (&ti, &yi) in t.iter().zip(y) {
        if ts.last() == Some(&ti) {
            continue;
        }
        ts.push(ti);
        ys.push(yi);
    }
    (ts, ys)
}

fn crossing(t0: f64, y0: f64, t1: f64, y1: f64, level: f64) -> f64 {
    if y1 == y0 {
        return t1;
    }
    t0 + (level - y0) / (y1 - y0) * (t1 - t0)
}

fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut f = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    f.push(0.0);
    for k in 1..t.len() {
        acc += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
        f.push(acc);
    }
    f
}

fn interp(t: &[f64], f: &[f64], x: f64) -> f64 {
    let idx = t.partition_point(|&ti| ti <= x);
    if idx == 0 {
        return f[0];
    }
    if idx >= t.len() {
        return f[t.len() - 1];
    }
    let (t0, t1) = (t[idx - 1], t[idx]);
    f[idx - 1] + (f[idx] - f[idx - 1]) * (x - t0) / (t1 - t0)
}

/// Minimum over sliding windows of length `window` of the mean of `y`.
/// Windows start at sample times; a window longer than the record
/// degenerates to the record mean.
pub fn min_window_average(t: &[f64], y: &[f64], window: f64) -> f64 {
    let (t, y) = dedup_times(t, y);
    let duration = t[t.len() - 1] - t[0];
    if t.len() < 2 || duration <= 0.0 {
        return y.first().copied().unwrap_or(0.0);
    }
    let f = cumulative_trapezoid(&t, &y);
    if !(window > 0.0) || window >= duration {
        return f[f.len() - 1] / duration;
    }
    let t_last = t[t.len() - 1];
    let mut mu = f64::INFINITY;
    for (k, &tk) in t.iter().enumerate() {
        if tk + window > t_last {
            break;
        }
        mu = mu.min((interp(&t, &f, tk + window) - f[k]) / window);
    }
    mu
}

/// Finds the maximal intervals where `y >= z_low`.
pub fn extract_dwell_series(t: &[f64], y: &[f64], z_low: f64, window: f64) -> Result<DwellReport> {
    if t.is_empty() || t.len() != y.len() {
        return Err(Error::NoExcitation);
    }
    let (t, y) = dedup_times(t, y);
    let n = t.len();
    let mut intervals: Vec<[f64; 2]> = Vec::new();
    let mut truncated = [false, false];
    let mut start: Option<f64> = None;
    for k in 0..n {
        let above = y[k] >= z_low;
        match (start, above) {
            (None, true) => {
                start = Some(if k == 0 {
                    truncated[0] = true;
                    t[0]
                } else {
                    crossing(t[k - 1], y[k - 1], t[k], y[k], z_low)
                });
            }
            (Some(a), false) => {
                intervals.push([a, crossing(t[k - 1], y[k - 1], t[k], y[k], z_low)]);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        intervals.push([a, t[n - 1]]);
        truncated[1] = true;
    }
    if intervals.is_empty() {
        return Err(Error::NoExcitation);
    }
    let m = intervals.len();
    let interior = |idx: usize| !((idx == 0 && truncated[0]) || (idx == m - 1 && truncated[1]));
    let lengths = intervals.iter().map(|iv| iv[1] - iv[0]);
    let tau_d_interior = lengths
        .clone()
        .enumerate()
        .filter(|(i, _)| interior(*i))
        .map(|(_, l)| l)
        .fold(f64::INFINITY, f64::min);
    let tau_d = if tau_d_interior.is_finite() {
        tau_d_interior
    } else {
        lengths.fold(f64::INFINITY, f64::min)
    };
    let tau_s = intervals
        .windows(2)
        .map(|w| w[1][0] - w[0][1])
        .fold(0.0, f64::max);
    let z_high = y.iter().copied().fold(0.0, f64::max);
    let mu = min_window_average(&t, &y, window);
    let assumption_holds = tau_d > 0.0 && mu > 0.0 && z_high >= z_low;
    Ok(DwellReport {
        cycle: None,
        intervals,
        tau_d,
        tau_s,
        z_low,
        z_high,
        mu,
        mu_window: window,
        truncated,
        assumption_holds,
    })
}

/// Re-checks the report invariants against raw samples: samples inside an
/// interval sit at or above `z_low`, all samples stay under `z_high`,
/// interior intervals last at least `tau_d`, and gaps do not exceed `tau_s`.
pub fn verify_dwell_report(t: &[f64], y: &[f64], rep: &DwellReport) -> bool {
    let m = rep.intervals.len();
    for (k, iv) in rep.intervals.iter().enumerate() {
        let interior = !((k == 0 && rep.truncated[0]) || (k == m - 1 && rep.truncated[1]));
        if interior && iv[1] - iv[0] < rep.tau_d {
            return false;
        }
    }
    if rep.intervals.windows(2).any(|w| w[1][0] - w[0][1] > rep.tau_s) {
        return false;
    }
    for (&ti, &yi) in t.iter().zip(y) {
        if yi > rep.z_high {
            return false;
        }
        let inside = rep.intervals.iter().any(|iv| ti > iv[0] && ti < iv[1]);
        if inside && yi < rep.z_low {
            return false;
        }
    }
    true
}

fn within_jumps(traj: &HybridTrajectory, span: &CycleSpan) -> Vec<f64> {
    let (j0, j1) = (traj.samples[span.first].j, traj.samples[span.last].j);
    traj.jumps
        .iter()
        .filter(|jr| jr.kind == JumpKind::WithinCycle && jr.j >= j0 && jr.j < j1)
        .map(|jr| jr.t)
        .collect()
}

/// Excitation window of a cycle: the longest span covering two consecutive
/// within-cycle periods, or the whole cycle when fewer jumps exist.
fn cycle_window(traj: &HybridTrajectory, span: &CycleSpan) -> f64 {
    let jt = within_jumps(traj, span);
    let samples = span.samples(traj);
    let duration = samples[samples.len() - 1].t - samples[0].t;
    if jt.len() < 3 {
        return duration;
    }
    jt.windows(3).map(|w| w[2] - w[0]).fold(0.0, f64::max)
}

/// Dwell data for one cycle with `z_low = threshold_fraction |z*|`.
pub fn extract_dwell(
    traj: &HybridTrajectory,
    cycle: u32,
    threshold_fraction: f64,
) -> Result<DwellReport> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::InvalidConfig("threshold_fraction must lie in (0, 1)".into()));
    }
    let span = traj.span_of(cycle).ok_or(Error::CycleNotFound(cycle))?;
    let samples = span.samples(traj);
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.state.z[0].abs()).collect();
    let z_low = threshold_fraction * samples[0].state.z_star.abs();
    let mut rep = extract_dwell_series(&t, &y, z_low, cycle_window(traj, &span))?;
    rep.cycle = Some(cycle);
    Ok(rep)
}

/// Smallest `T` with `int_{t0}^{t} |z1| >= mu (t - t0)` for every later
/// sample of the cycle.
pub fn activation_delay(samples: &[Sample], mu: f64) -> f64 {
    let t0 = samples[0].t;
    let mut acc = 0.0;
    let mut last_bad = t0;
    for w in samples.windows(2) {
        acc += 0.5 * (w[1].t - w[0].t) * (w[0].state.z[0].abs() + w[1].state.z[0].abs());
        if acc < mu * (w[1].t - t0) {
            last_bad = w[1].t;
        }
    }
    last_bad - t0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub cycle: u32,
    pub ok: bool,
    /// `min ln(kappa1 |z~(t0)| e^{-kappa2 mu (t - t0)} / |z~(t)|)`; `>= 0` when the bound holds.
    pub log_margin: f64,
    /// Same margin using the accumulated clock `tau` in place of `mu (t - t0)`.
    pub tau_log_margin: f64,
    pub t_activation: f64,
    pub samples_checked: usize,
}

/// Checks `|z~(t)| <= kappa1 |z~(t0)| exp(-kappa2 mu (t - t0))` on the
/// samples of `cycle` with `t >= t0 + T`.
pub fn check_envelope(
    traj: &HybridTrajectory,
    decay: &DecayCertificate,
    cycle: u32,
) -> Result<EnvelopeReport> {
    let (Some(mu), Some(t_act)) = (decay.mu, decay.t_activation) else {
        return Err(Error::InvalidConfig(
            "decay certificate lacks mu / activation delay".into(),
        ));
    };
    let span = traj.span_of(cycle).ok_or(Error::CycleNotFound(cycle))?;
    let samples = span.samples(traj);
    let (t0, tau0) = (samples[0].t, samples[0].state.tau);
    let n0 = samples[0].state.z_tilde.norm();
    let mut log_margin = f64::INFINITY;
    let mut tau_log_margin = f64::INFINITY;
    let mut samples_checked = 0;
    if n0 > 0.0 {
        for s in samples.iter().filter(|s| s.t >= t0 + t_act) {
            samples_checked += 1;
            let n = s.state.z_tilde.norm();
            if n == 0.0 {
                continue;
            }
            let base = decay.ln_kappa1 + n0.ln() - n.ln();
            log_margin = log_margin.min(base - decay.kappa2 * mu * (s.t - t0));
            tau_log_margin = tau_log_margin.min(base - decay.kappa2 * (s.state.tau - tau0));
        }
    }
    Ok(EnvelopeReport {
        cycle,
        ok: log_margin >= 0.0,
        log_margin,
        tau_log_margin,
        t_activation: t_act,
        samples_checked,
    })
}

/// Decay constants for one cycle, built from that cycle's dwell data.
pub fn cycle_decay_certificate(
    lp: &ClosedLoop,
    traj: &HybridTrajectory,
    cycle: u32,
    threshold_fraction: f64,
) -> Result<(DwellReport, DecayCertificate)> {
    let dwell = extract_dwell(traj, cycle, threshold_fraction)?;
    let mut decay = decay_certificate(&lp.gains, &lp.cert, &dwell.assumption())?;
    let span = traj.span_of(cycle).ok_or(Error::CycleNotFound(cycle))?;
    decay.mu = Some(dwell.mu);
    decay.t_activation = Some(activation_delay(span.samples(traj), dwell.mu));
    Ok((dwell, decay))
}

/// Time at which `|z1|` first drops into the attractive set of the cycle.
fn entry_time(samples: &[Sample], radius: f64) -> Option<f64> {
    samples.iter().find(|s| s.state.z[0].abs() <= radius).map(|s| s.t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleDwell {
    pub cycle: u32,
    pub bound: f64,
    pub min_interval: Option<f64>,
    pub intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DwellCheck {
    pub ok: bool,
    /// Smallest observed interval divided by its cycle's bound.
    pub min_ratio: Option<f64>,
    pub per_cycle: Vec<CycleDwell>,
}

/// Flow time between consecutive within-cycle jumps, counted once the
/// trajectory is inside the cycle's attractive set, against the closed-form
/// lower bound.
pub fn check_dwell_bound(
    traj: &HybridTrajectory,
    params: &PlantParams,
    cfg: &ControllerConfig,
) -> Result<DwellCheck> {
    let mut per_cycle = Vec::new();
    let mut ok = true;
    let mut min_ratio: Option<f64> = None;
    for span in traj.cycle_spans().iter().filter(|s| s.cycle >= 1) {
        let bound = dwell_time_lower_bound(params, cfg, span.cycle)?.t_lower;
        let samples = span.samples(traj);
        let Some(t_in) = entry_time(samples, attractive_radius(cfg, span.cycle)) else {
            per_cycle.push(CycleDwell {
                cycle: span.cycle,
                bound,
                min_interval: None,
                intervals: 0,
            });
            continue;
        };
        let jt: Vec<f64> = within_jumps(traj, span).into_iter().filter(|&t| t >= t_in).collect();
        let mut min_iv: Option<f64> = None;
        for w in jt.windows(2) {
            let iv = w[1] - w[0];
            min_iv = Some(min_iv.map_or(iv, |m| m.min(iv)));
            ok &= iv >= bound;
            let r = iv / bound;
            min_ratio = Some(min_ratio.map_or(r, |m| m.min(r)));
        }
        per_cycle.push(CycleDwell {
            cycle: span.cycle,
            bound,
            min_interval: min_iv,
            intervals: jt.len().saturating_sub(1),
        });
    }
    Ok(DwellCheck {
        ok,
        min_ratio,
        per_cycle,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZenoCheck {
    pub ok: bool,
    pub window: f64,
    pub max_jumps_in_window: usize,
    pub bound: usize,
}

/// No window of length `window` may hold more than `2 ceil(window / T_lmin) + 1` jumps.
pub fn check_non_zeno(
    traj: &HybridTrajectory,
    params: &PlantParams,
    cfg: &ControllerConfig,
    window: f64,
) -> Result<ZenoCheck> {
    let t_lmin = dwell_time_floor(params, cfg)?;
    let bound = 2 * (window / t_lmin).ceil() as usize + 1;
    let times: Vec<f64> = traj.jumps.iter().map(|j| j.t).collect();
    let mut max_jumps = 0;
    let mut hi = 0;
    for lo in 0..times.len() {
        while hi < times.len() && times[hi] <= times[lo] + window {
            hi += 1;
        }
        max_jumps = max_jumps.max(hi - lo);
    }
    Ok(ZenoCheck {
        ok: max_jumps <= bound,
        window,
        max_jumps_in_window: max_jumps,
        bound,
    })
}

/// `z2(t) = (z2(0) + d/c) e^{c M t} - d/c`, the solution of
/// `z2' = M (c z2 + d)`.
pub fn comparison_bound(params: &PlantParams, m: f64, z2_0: f64, t: f64) -> f64 {
    let r = params.ratio();
    (z2_0 + r) * (params.c * m * t).exp() - r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OvershootReport {
    pub cycle: u32,
    pub ok: bool,
    pub phases_checked: usize,
    /// Smallest `bound - z2` (upward phases) or `z2 - bound` (downward phases).
    pub min_margin: f64,
}

/// Overshoot of `z2` after each within-cycle jump, while `z1` has not yet
/// taken the sign of the new reference, against the comparison solution
/// started from `+-(d/c + eps) / 2^(i-1)` with rate `max |z1|` over the
/// attractive set.
pub fn check_overshoot_bound(
    traj: &HybridTrajectory,
    params: &PlantParams,
    cfg: &ControllerConfig,
    cycle: u32,
) -> Result<OvershootReport> {
    let span = traj
        .span_of(cycle)
        .filter(|s| s.completed && cycle >= 1)
        .ok_or(Error::CycleNotFound(cycle))?;
    let samples = span.samples(traj);
    let m = attractive_radius(cfg, cycle);
    let z2_0 = (params.ratio() + cfg.epsilon) / 2f64.powi(cycle as i32 - 1);
    let t_in = entry_time(samples, m);
    let mut phases = 0;
    let mut min_margin = f64::INFINITY;
    if let Some(t_in) = t_in {
        let j_first = samples[0].j;
        for (k, s) in samples.iter().enumerate() {
            // post-jump point of a within-cycle jump
            let is_start = k > 0
                && samples[k - 1].j + 1 == s.j
                && s.j > j_first
                && samples[k - 1].state.z_star == -s.state.z_star
                && s.t >= t_in;
            if !is_start {
                continue;
            }
            phases += 1;
            let up = s.state.z_star < 0.0;
            let ref_sign = s.state.z_star.signum();
            for p in &samples[k..] {
                if p.j != s.j || p.state.z[0] * ref_sign > 0.0 {
                    break;
                }
                let dt = p.t - s.t;
                let margin = if up {
                    comparison_bound(params, m, z2_0, dt) - p.state.z[1]
                } else {
                    p.state.z[1] - (-(params.ratio()) + (-z2_0 + params.ratio()) * (-params.c * m * dt).exp())
                };
                min_margin = min_margin.min(margin);
            }
        }
    }
    Ok(OvershootReport {
        cycle,
        ok: min_margin >= 0.0,
        phases_checked: phases,
        min_margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub ok: bool,
    pub cycles_entered: usize,
    /// Largest `|z1| / radius` after entry.
    pub worst_ratio: f64,
}

/// Once `|z1|` enters the attractive set of a cycle it stays there until the
/// cycle ends.
pub fn check_invariance(traj: &HybridTrajectory, cfg: &ControllerConfig) -> InvarianceReport {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut entered = 0;
    for span in traj.cycle_spans().iter().filter(|s| s.cycle >= 1) {
        let radius = attractive_radius(cfg, span.cycle);
        let samples = span.samples(traj);
        if let Some(pos) = samples.iter().position(|s| s.state.z[0].abs() <= radius) {
            entered += 1;
            for s in &samples[pos..] {
                let r = s.state.z[0].abs() / radius;
                worst = worst.max(r);
                ok &= r <= 1.0 + 1e-9;
            }
        }
    }
    InvarianceReport {
        ok,
        cycles_entered: entered,
        worst_ratio: worst,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub vobs: VobsReport,
    pub phi_oracle: PhiOracleReport,
    pub tau_clock: TauReport,
    pub dwell: DwellCheck,
    pub zeno: ZenoCheck,
    pub invariance: InvarianceReport,
    pub envelope: Vec<EnvelopeReport>,
    pub overshoot: Vec<OvershootReport>,
    pub dwell_reports: Vec<DwellReport>,
    pub decay: Vec<DecayCertificate>,
}

impl BoundReport {
    pub fn envelope_ok(&self) -> bool {
        self.envelope.iter().all(|e| e.ok)
    }

    pub fn overshoot_ok(&self) -> bool {
        self.overshoot.iter().all(|o| o.ok)
    }
}

/// Runs every check on one trajectory.
pub fn bound_report(lp: &ClosedLoop, traj: &HybridTrajectory, threshold_fraction: f64) -> Result<BoundReport> {
    let (params, cfg) = (&lp.params, &lp.cfg);
    let mut envelope = Vec::new();
    let mut dwell_reports = Vec::new();
    let mut decay = Vec::new();
    let mut overshoot = Vec::new();
    for span in traj.cycle_spans() {
        match cycle_decay_certificate(lp, traj, span.cycle, threshold_fraction) {
            Ok((d, dc)) => {
                envelope.push(check_envelope(traj, &dc, span.cycle)?);
                dwell_reports.push(d);
                decay.push(dc);
            }
            Err(Error::NoExcitation) => {}
            Err(e) => return Err(e),
        }
        if span.completed && span.cycle >= 1 {
            overshoot.push(check_overshoot_bound(traj, params, cfg, span.cycle)?);
        }
    }
    Ok(BoundReport {
        vobs: check_vobs_monotone(traj, &lp.cert),
        phi_oracle: check_phi_oracle(traj),
        tau_clock: check_tau_clock(traj, params, lp.k()),
        dwell: check_dwell_bound(traj, params, cfg)?,
        zeno: check_non_zeno(traj, params, cfg, 1.0)?,
        invariance: check_invariance(traj, cfg),
        envelope,
        overshoot,
        dwell_reports,
        decay,
    })
}
