//! Hybrid-arc execution: adaptive Dormand-Prince 5(4) flow with event
//! localization, guard-triggered jumps and a Zeno watchdog.

use std::collections::VecDeque;

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::certificates::{
    complete_gains, dwell_time_floor, solve_common_lyapunov, LyapunovCertificate,
};
use crate::dynamics::{apply_jump, flow_map, in_dc, in_dnc};
use crate::error::{Error, Result};
use crate::model::{
    derive_control_gain, g_of, ControllerConfig, GainDerivation, HybridState, HybridTrajectory,
    JumpKind, JumpRecord, ObserverGains, PlantParams, Sample, SolverConfig, Termination,
};

/// Everything needed to evaluate the closed loop.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub params: PlantParams,
    pub gains: ObserverGains,
    pub cert: LyapunovCertificate,
    pub cfg: ControllerConfig,
    pub gain: GainDerivation,
}

impl ClosedLoop {
    pub fn new(
        params: PlantParams,
        k1_plus: f64,
        k2_plus: f64,
        cfg: ControllerConfig,
    ) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let gains = complete_gains(&params, k1_plus, k2_plus)?;
        let cert = solve_common_lyapunov(&gains)?;
        let gain = derive_control_gain(&params, &cfg, cert.gamma)?;
        Ok(Self {
            params,
            gains,
            cert,
            cfg,
            gain,
        })
    }

    pub fn k(&self) -> f64 {
        self.gain.k
    }

    /// Step cap: the user value, tightened to a tenth of the uniform dwell
    /// floor when the band is non-degenerate.
    pub fn max_step(&self, solver: &SolverConfig) -> f64 {
        match dwell_time_floor(&self.params, &self.cfg) {
            Ok(t) => solver.max_step.min(t / 10.0),
            Err(_) => solver.max_step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    pub t: f64,
    pub j: u32,
    pub guard: JumpKind,
    pub bracket_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowOutcome {
    Event(EventRecord),
    HorizonReached,
    Converged,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub bisections: usize,
}

/// Picks the cycle index and reference for the first flow.
pub fn initialize(
    lp: &ClosedLoop,
    z0: Vector2<f64>,
    z_hat0: Vector2<f64>,
) -> Result<HybridState> {
    let cfg = &lp.cfg;
    if !(z0.norm() <= cfg.r) {
        return Err(Error::BadInitialBall(format!("|z0| = {} exceeds R = {}", z0.norm(), cfg.r)));
    }
    let err = z_hat0 - z0;
    if !(err.norm() <= cfg.r_tilde) {
        return Err(Error::BadInitialBall(format!(
            "|z^0 - z0| = {} exceeds R~ = {}",
            err.norm(),
            cfg.r_tilde
        )));
    }
    if !(z0[1] > lp.params.z2_floor()) {
        return Err(Error::BadInitialBall(format!(
            "z2 = {} is not above -d/c = {}",
            z0[1],
            lp.params.z2_floor()
        )));
    }
    let i0 = initial_cycle(cfg, lp.cert.gamma);
    let z_star = if i0 == 0 {
        cfg.z_star_init
    } else {
        let mag = cfg.z_star_init / 2f64.powi(i0 as i32);
        if z_hat0[1] < 0.0 {
            mag
        } else {
            -mag
        }
    };
    Ok(HybridState {
        tau: 0.0,
        cycle: i0,
        z: z0,
        z_tilde: err,
        z_star,
        phi: Matrix2::identity(),
    })
}

/// `max{0, max{i >= 1 : R~ <= eps g(i-1) / gamma}}`, capped at `max_cycles`.
pub fn initial_cycle(cfg: &ControllerConfig, gamma: f64) -> u32 {
    let mut i0 = 0;
    for i in 1..=cfg.max_cycles {
        if cfg.r_tilde <= cfg.epsilon * g_of(cfg, i - 1) / gamma {
            i0 = i;
        } else {
            break;
        }
    }
    i0
}

const N: usize = 9;
type Y = [f64; N];

fn pack(s: &HybridState) -> Y {
    [
        s.tau,
        s.z[0],
        s.z[1],
        s.z_tilde[0],
        s.z_tilde[1],
        s.phi[(0, 0)],
        s.phi[(0, 1)],
        s.phi[(1, 0)],
        s.phi[(1, 1)],
    ]
}

fn unpack(y: &Y, cycle: u32, z_star: f64) -> HybridState {
    HybridState {
        tau: y[0],
        cycle,
        z: Vector2::new(y[1], y[2]),
        z_tilde: Vector2::new(y[3], y[4]),
        z_star,
        phi: Matrix2::new(y[5], y[6], y[7], y[8]),
    }
}

// Dormand-Prince 5(4)
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a> {
    lp: &'a ClosedLoop,
    solver: &'a SolverConfig,
    stats: SolverStats,
}

struct Trial {
    y: Y,
    err: f64,
    f_end: Y,
}

impl Stepper<'_> {
    fn rhs(&mut self, y: &Y, cycle: u32, z_star: f64) -> Result<Y> {
        self.stats.rhs_evals += 1;
        let s = unpack(y, cycle, z_star);
        let f = flow_map(&self.lp.params, &self.lp.gains, self.lp.k(), &s)?;
        Ok([
            f.d_tau,
            f.d_z[0],
            f.d_z[1],
            f.d_z_tilde[0],
            f.d_z_tilde[1],
            f.d_phi[(0, 0)],
            f.d_phi[(0, 1)],
            f.d_phi[(1, 0)],
            f.d_phi[(1, 1)],
        ])
    }

    fn step(&mut self, y: &Y, f0: &Y, h: f64, cycle: u32, z_star: f64) -> Result<Trial> {
        let mut k = [[0.0; N]; 7];
        k[0] = *f0;
        let mut yi = [0.0; N];
        for s in 1..7 {
            for n in 0..N {
                let mut acc = 0.0;
                for (r, kr) in k.iter().enumerate().take(s) {
                    acc += A[s][r] * kr[n];
                }
                yi[n] = y[n] + h * acc;
            }
            k[s] = self.rhs(&yi, cycle, z_star)?;
        }
        debug_assert!(C[6] == 1.0);
        let mut err = 0.0;
        for n in 0..N {
            let mut e = 0.0;
            for (r, kr) in k.iter().enumerate() {
                e += E[r] * kr[n];
            }
            let scale = self.solver.abs_tol + self.solver.rel_tol * y[n].abs().max(yi[n].abs());
            let q = h * e / scale;
            err += q * q;
        }
        Ok(Trial {
            y: yi,
            err: (err / N as f64).sqrt(),
            f_end: k[6],
        })
    }
}

/// True when the trial end point crosses `z1 = 0` or enters a jump set.
fn event_at(lp: &ClosedLoop, start_sign: f64, s: &HybridState) -> bool {
    (start_sign != 0.0 && s.z[0] * start_sign < 0.0)
        || in_dc(&lp.params, &lp.cfg, s)
        || in_dnc(&lp.params, &lp.cfg, &lp.cert, s)
}

fn guard_at(lp: &ClosedLoop, s: &HybridState) -> Option<JumpKind> {
    if in_dc(&lp.params, &lp.cfg, s) {
        Some(JumpKind::WithinCycle)
    } else if in_dnc(&lp.params, &lp.cfg, &lp.cert, s) {
        Some(JumpKind::NewCycle)
    } else {
        None
    }
}

fn converged(s: &HybridState, tol: f64) -> bool {
    s.z.norm() + s.z_tilde.norm() < tol
}

struct FlowCtx<'a> {
    stepper: Stepper<'a>,
    h: f64,
}

impl FlowCtx<'_> {
    /// Flows from `state` until an event, the horizon, or convergence.
    /// Every kept sample is pushed to `out`; the start point is not.
    fn flow(
        &mut self,
        state: &mut HybridState,
        t: &mut f64,
        j: u32,
        out: &mut Vec<Sample>,
    ) -> Result<FlowOutcome> {
        let lp = self.stepper.lp;
        let solver = *self.stepper.solver;
        let h_max = lp.max_step(&solver);
        if let Some(guard) = guard_at(lp, state) {
            return Ok(FlowOutcome::Event(EventRecord {
                t: *t,
                j,
                guard,
                bracket_width: 0.0,
            }));
        }
        let (cycle, z_star) = (state.cycle, state.z_star);
        let mut y = pack(state);
        let mut f0 = self.stepper.rhs(&y, cycle, z_star)?;
        let mut last_kept = *t;
        loop {
            if *t >= solver.t_end {
                return Ok(FlowOutcome::HorizonReached);
            }
            let h_min = 16.0 * f64::EPSILON * t.abs().max(1.0);
            let mut h = self.h.min(h_max).min(solver.t_end - *t);
            let trial = match self.stepper.step(&y, &f0, h, cycle, z_star) {
                Ok(tr) => tr,
                Err(Error::StateOutOfDomain { z2, floor, .. }) => {
                    if h <= h_min.max(solver.event_tol) {
                        return Err(Error::StateOutOfDomain { t: *t, z2, floor });
                    }
                    self.stepper.stats.rejected += 1;
                    self.h = h / 4.0;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if !(trial.err <= 1.0) {
                self.stepper.stats.rejected += 1;
                let fac = if trial.err.is_finite() {
                    (0.9 * trial.err.powf(-0.2)).clamp(0.2, 1.0)
                } else {
                    0.2
                };
                self.h = h * fac;
                if self.h < h_min {
                    return Err(Error::StepFailure { t: *t, h: self.h });
                }
                continue;
            }
            self.stepper.stats.accepted += 1;
            let fac = if trial.err > 0.0 {
                (0.9 * trial.err.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            self.h = (h * fac).min(h_max);

            let sign0 = state.z[0].signum() * f64::from(u8::from(state.z[0] != 0.0));
            let end = unpack(&trial.y, cycle, z_star);
            if !event_at(lp, sign0, &end) {
                y = trial.y;
                f0 = trial.f_end;
                *t += h;
                *state = end;
                if solver.record_interval == 0.0 || *t - last_kept >= solver.record_interval {
                    out.push(Sample { t: *t, j, state: *state });
                    last_kept = *t;
                }
                if converged(state, solver.abs_tol) {
                    out.push(Sample { t: *t, j, state: *state });
                    return Ok(FlowOutcome::Converged);
                }
                continue;
            }

            // bisect on the step length; land on the right end
            let (mut lo, mut hi) = (0.0, h);
            let mut landed = trial;
            while hi - lo > solver.event_tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                self.stepper.stats.bisections += 1;
                let tr = self.stepper.step(&y, &f0, mid, cycle, z_star)?;
                let s = unpack(&tr.y, cycle, z_star);
                if event_at(lp, sign0, &s) {
                    hi = mid;
                    landed = tr;
                } else {
                    lo = mid;
                }
            }
            h = hi;
            y = landed.y;
            f0 = landed.f_end;
            *t += h;
            *state = unpack(&y, cycle, z_star);
            out.push(Sample { t: *t, j, state: *state });
            last_kept = *t;
            if let Some(guard) = guard_at(lp, state) {
                return Ok(FlowOutcome::Event(EventRecord {
                    t: *t,
                    j,
                    guard,
                    bracket_width: hi - lo,
                }));
            }
        }
    }
}

/// Flows a single segment starting at `(t_start, j)`.
pub fn integrate_flow(
    lp: &ClosedLoop,
    solver: &SolverConfig,
    state: &HybridState,
    t_start: f64,
    j: u32,
) -> Result<(Vec<Sample>, FlowOutcome)> {
    solver.validate()?;
    let mut ctx = FlowCtx {
        stepper: Stepper {
            lp,
            solver,
            stats: SolverStats::default(),
        },
        h: initial_step(lp, solver),
    };
    let mut s = *state;
    let mut t = t_start;
    let mut out = vec![Sample { t, j, state: s }];
    let outcome = ctx.flow(&mut s, &mut t, j, &mut out)?;
    Ok((out, outcome))
}

fn initial_step(lp: &ClosedLoop, solver: &SolverConfig) -> f64 {
    lp.max_step(solver).min(1e-6)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub trajectory: HybridTrajectory,
    pub events: Vec<EventRecord>,
    pub stats: SolverStats,
}

/// Runs the closed loop from `(z0, z^0)` until the horizon, the cycle cap,
/// or convergence.
pub fn simulate(
    lp: &ClosedLoop,
    solver: &SolverConfig,
    z0: Vector2<f64>,
    z_hat0: Vector2<f64>,
) -> Result<Simulation> {
    let s0 = initialize(lp, z0, z_hat0)?;
    simulate_from(lp, solver, s0)
}

/// Same as [`simulate`] from an explicit hybrid state.
pub fn simulate_from(lp: &ClosedLoop, solver: &SolverConfig, s0: HybridState) -> Result<Simulation> {
    solver.validate()?;
    let mut ctx = FlowCtx {
        stepper: Stepper {
            lp,
            solver,
            stats: SolverStats::default(),
        },
        h: initial_step(lp, solver),
    };
    let mut traj = HybridTrajectory::default();
    let mut events = Vec::new();
    let mut recent: VecDeque<f64> = VecDeque::new();
    let (mut state, mut t, mut j) = (s0, 0.0, 0u32);
    traj.samples.push(Sample { t, j, state });

    let termination = loop {
        if state.cycle > lp.cfg.max_cycles {
            break Termination::MaxCycles;
        }
        if converged(&state, solver.abs_tol) {
            break Termination::Converged;
        }
        match ctx.flow(&mut state, &mut t, j, &mut traj.samples)? {
            FlowOutcome::HorizonReached => break Termination::HorizonReached,
            FlowOutcome::Converged => break Termination::Converged,
            FlowOutcome::Event(ev) => {
                recent.push_back(ev.t);
                while recent.front().is_some_and(|&t0| t0 < ev.t - solver.zeno_window) {
                    recent.pop_front();
                }
                if recent.len() > solver.zeno_max_jumps {
                    return Err(Error::ZenoSuspected {
                        t: ev.t,
                        jumps: recent.len(),
                        window: solver.zeno_window,
                    });
                }
                if traj.samples.last().map(|s| (s.t, s.j)) != Some((t, j)) {
                    traj.samples.push(Sample { t, j, state });
                }
                let next = apply_jump(&state, ev.guard);
                if ev.guard == JumpKind::WithinCycle && in_dc(&lp.params, &lp.cfg, &next) {
                    return Err(Error::IllegalJump(format!(
                        "within-cycle guard still active after the jump at t = {t}"
                    )));
                }
                traj.jumps.push(JumpRecord {
                    t,
                    j,
                    kind: ev.guard,
                    bracket_width: ev.bracket_width,
                });
                events.push(ev);
                state = next;
                j += 1;
                traj.samples.push(Sample { t, j, state });
            }
        }
    };
    traj.termination = Some(termination);
    Ok(Simulation {
        trajectory: traj,
        events,
        stats: ctx.stepper.stats,
    })
}
