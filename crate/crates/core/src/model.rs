//! Domain types shared by every other module: plant and observer
//! parameters, controller configuration with its cycle schedule, the
//! hybrid state, and hybrid trajectories.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters `(a, c, d)` of the bilinear plant
///
/// ```text
/// z1' = -a z1 z2 + u
/// z2' = (c z2 + d) z1,        y = z1
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    pub a: f64,
    pub c: f64,
    pub d: f64,
}

impl PlantParams {
    pub fn new(a: f64, c: f64, d: f64) -> Result<Self> {
        let p = Self { a, c, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("c", self.c), ("d", self.d)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} must be > 0")));
            }
        }
        Ok(())
    }

    /// `d / c`, the half-width of the first switching band.
    pub fn ratio(&self) -> f64 {
        self.d / self.c
    }

    /// Lower boundary `-d/c` of the admissible `z2` half-line.
    pub fn z2_floor(&self) -> f64 {
        -self.d / self.c
    }

    /// Output row `C = [1 0]`.
    pub fn output_matrix() -> nalgebra::RowVector2<f64> {
        nalgebra::RowVector2::new(1.0, 0.0)
    }
}

/// Switched observer gains. Built through
/// [`complete_gains`](crate::certificates::complete_gains), which enforces the
/// Hurwitz and common-Lyapunov conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObserverGains {
    pub(crate) a: f64,
    pub(crate) c: f64,
    pub(crate) k1_plus: f64,
    pub(crate) k1_minus: f64,
    pub(crate) k2_plus: f64,
    pub(crate) k2_minus: f64,
}

impl ObserverGains {
    pub fn k1_plus(&self) -> f64 {
        self.k1_plus
    }
    pub fn k1_minus(&self) -> f64 {
        self.k1_minus
    }
    pub fn k2_plus(&self) -> f64 {
        self.k2_plus
    }
    pub fn k2_minus(&self) -> f64 {
        self.k2_minus
    }

    /// Mode matrix used while `z1 > 0`.
    pub fn a1(&self) -> Matrix2<f64> {
        Matrix2::new(-self.k1_plus, -self.a, -self.k2_plus, self.c)
    }

    /// Mode matrix used while `z1 < 0`.
    pub fn a2(&self) -> Matrix2<f64> {
        Matrix2::new(self.k1_minus, self.a, self.k2_minus, -self.c)
    }

    /// `A(w1)`: `A1` for positive, `A2` for negative and zero at zero.
    pub fn mode(&self, w1: f64) -> Matrix2<f64> {
        if w1 > 0.0 {
            self.a1()
        } else if w1 < 0.0 {
            self.a2()
        } else {
            Matrix2::zeros()
        }
    }

    /// Switched gain `k1(z1)`.
    pub fn k1(&self, z1: f64) -> f64 {
        if z1 > 0.0 {
            self.k1_plus
        } else if z1 < 0.0 {
            self.k1_minus
        } else {
            0.0
        }
    }

    /// Switched gain `k2(z1)`.
    pub fn k2(&self, z1: f64) -> f64 {
        if z1 > 0.0 {
            self.k2_plus
        } else if z1 < 0.0 {
            self.k2_minus
        } else {
            0.0
        }
    }
}

/// Per-cycle contraction factors `h(i)`, `i >= 1`.
///
/// Textual forms accepted in configuration files:
/// `"constant:v"`, `"paper_v"`, `"inv_one_plus_pow:b"` (`h(i) = 1/(1 + b^-i)`),
/// or a JSON array of explicit values (the last one repeats past the end).
#[derive(Debug, Clone, PartialEq)]
pub enum HSchedule {
    Constant(f64),
    /// `1/(1 + 4^-i)` for `i <= 8`, then `1/2`.
    PaperV,
    InvOnePlusPow(f64),
    List(Vec<f64>),
}

impl HSchedule {
    /// `h(i)` for `i >= 1`. `h(0)` depends on the certificate and lives on
    /// [`ControllerConfig::h0`].
    pub fn h(&self, i: u32) -> f64 {
        debug_assert!(i >= 1);
        match self {
            HSchedule::Constant(v) => *v,
            HSchedule::PaperV => {
                if i <= 8 {
                    1.0 / (1.0 + 4f64.powi(-(i as i32)))
                } else {
                    0.5
                }
            }
            HSchedule::InvOnePlusPow(b) => 1.0 / (1.0 + b.powi(-(i as i32))),
            HSchedule::List(v) => {
                let idx = (i as usize - 1).min(v.len() - 1);
                v[idx]
            }
        }
    }

    /// Whether `g(i) = prod h(j)` tends to zero, decided from the closed form
    /// of each schedule family.
    pub fn g_converges_to_zero(&self) -> bool {
        match self {
            HSchedule::Constant(v) => *v < 1.0,
            HSchedule::PaperV => true,
            // sum of b^-i converges, so the product has a positive limit
            HSchedule::InvOnePlusPow(_) => false,
            HSchedule::List(v) => v.last().is_some_and(|&x| x < 1.0),
        }
    }

    /// Checks `h(i) in (0, 1)` for `i = 1..=upto`.
    pub fn validate(&self, upto: u32) -> Result<()> {
        match self {
            HSchedule::List(v) if v.is_empty() => {
                return Err(Error::InvalidConfig("h_schedule list is empty".into()))
            }
            HSchedule::InvOnePlusPow(b) if !(*b > 1.0) => {
                return Err(Error::InvalidConfig(format!(
                    "inv_one_plus_pow base {b} must exceed 1"
                )))
            }
            _ => {}
        }
        for i in 1..=upto.max(1) {
            let h = self.h(i);
            if !(h > 0.0 && h < 1.0) {
                return Err(Error::InvalidConfig(format!("h({i}) = {h} is not in (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "paper_v" {
            return Ok(HSchedule::PaperV);
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("bad h_schedule value {s:?}: {e}")))
        };
        if let Some(v) = spec.strip_prefix("constant:") {
            return Ok(HSchedule::Constant(num(v)?));
        }
        if let Some(v) = spec.strip_prefix("inv_one_plus_pow:") {
            return Ok(HSchedule::InvOnePlusPow(num(v)?));
        }
        Err(Error::InvalidConfig(format!("unknown h_schedule {spec:?}")))
    }
}

impl Serialize for HSchedule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            HSchedule::Constant(v) => s.serialize_str(&format!("constant:{v}")),
            HSchedule::PaperV => s.serialize_str("paper_v"),
            HSchedule::InvOnePlusPow(b) => s.serialize_str(&format!("inv_one_plus_pow:{b}")),
            HSchedule::List(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for HSchedule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            List(Vec<f64>),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => HSchedule::parse(&t).map_err(serde::de::Error::custom),
            Raw::List(v) => Ok(HSchedule::List(v)),
        }
    }
}

/// How the controller gain `k` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainSpec {
    /// Use `k` as given.
    Fixed(f64),
    /// `k = gamma a R~ + k'`, with `k'` raised to every lower bound.
    Derived { k_prime: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub z_star_init: f64,
    pub gain: GainSpec,
    pub epsilon: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "R_tilde")]
    pub r_tilde: f64,
    pub h_schedule: HSchedule,
    pub max_cycles: u32,
}

impl ControllerConfig {
    /// Default estimation threshold when none is configured.
    pub fn default_epsilon(z_star_init: f64) -> f64 {
        0.01 * z_star_init
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z_star_init.is_finite() && self.z_star_init > 0.0) {
            return Err(Error::InvalidConfig("z_star_init must be > 0".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be > 0".into()));
        }
        if !(self.r >= 0.0 && self.r_tilde >= 0.0) {
            return Err(Error::InvalidConfig("R and R_tilde must be >= 0".into()));
        }
        match self.gain {
            GainSpec::Fixed(k) if !(k > 0.0) => {
                return Err(Error::InvalidConfig(format!("k = {k} must be > 0")))
            }
            GainSpec::Derived { k_prime } if !(k_prime > 0.0) => {
                return Err(Error::InvalidConfig(format!("k_prime = {k_prime} must be > 0")))
            }
            _ => {}
        }
        self.h_schedule.validate(self.max_cycles)
    }

    /// `h(i)` including the initialization entry `h(0) = eps / (gamma R~)`
    /// (taken as 1 when `R~ = 0`).
    pub fn h(&self, i: u32, gamma: f64) -> f64 {
        if i == 0 {
            self.h0(gamma)
        } else {
            self.h_schedule.h(i)
        }
    }

    pub fn h0(&self, gamma: f64) -> f64 {
        if self.r_tilde == 0.0 {
            1.0
        } else {
            self.epsilon / (gamma * self.r_tilde)
        }
    }
}

/// `g(i) = h(1) h(2) ... h(i)`, with `g(0) = 1`.
pub fn g_of(cfg: &ControllerConfig, i: u32) -> f64 {
    (1..=i).map(|j| cfg.h_schedule.h(j)).product()
}

/// Element `sign * z*_in / 2^i` of the reference set.
pub fn reference_set_value(cfg: &ControllerConfig, i: u32, sign: i8) -> f64 {
    debug_assert!(sign == 1 || sign == -1);
    f64::from(sign) * cfg.z_star_init / 2f64.powi(i as i32)
}

/// Lower bounds on `k'` collected from the stability arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KPrimeBound {
    UserValue,
    /// `k' >= 16 a^2 R~^2`
    Initialization,
    /// `2 k' >= a^2 eps^2`
    Invariance,
    /// `k' >= 4 a^2 eps^2`
    Excitation,
    /// `k' >= -2 ln(2^-5) / T_lmin`
    DwellSettling,
    /// `k' >= 1`
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainDerivation {
    pub k: f64,
    /// Effective `k'`, i.e. `k - gamma a R~`.
    pub k_prime: f64,
    /// The bound that set `k'`; `None` when `k` was fixed by configuration.
    pub active: Option<KPrimeBound>,
    pub bounds: Vec<(KPrimeBound, f64)>,
}

impl GainDerivation {
    /// Bounds the effective `k'` fails to meet.
    pub fn unmet(&self) -> Vec<KPrimeBound> {
        self.bounds
            .iter()
            .filter(|(b, v)| *b != KPrimeBound::UserValue && self.k_prime < *v)
            .map(|(b, _)| *b)
            .collect()
    }
}

/// Controller gain `k = gamma a R~ + k'`.
pub fn derive_control_gain(
    params: &PlantParams,
    cfg: &ControllerConfig,
    gamma: f64,
) -> Result<GainDerivation> {
    if !(gamma >= 1.0) {
        return Err(Error::InvalidConfig(format!("gamma = {gamma} must be >= 1")));
    }
    let a = params.a;
    let eps = cfg.epsilon;
    let base = gamma * a * cfg.r_tilde;

    let user = match cfg.gain {
        GainSpec::Fixed(k) => k - base,
        GainSpec::Derived { k_prime } => k_prime,
    };
    let mut bounds = vec![
        (KPrimeBound::UserValue, user),
        (KPrimeBound::Initialization, 16.0 * a * a * cfg.r_tilde * cfg.r_tilde),
        (KPrimeBound::Invariance, 0.5 * a * a * eps * eps),
        (KPrimeBound::Excitation, 4.0 * a * a * eps * eps),
    ];
    if let Ok(t_lmin) = crate::certificates::dwell_time_floor(params, cfg) {
        bounds.push((KPrimeBound::DwellSettling, -2.0 * 2f64.powi(-5).ln() / t_lmin));
    }
    bounds.push((KPrimeBound::Unit, 1.0));

    match cfg.gain {
        GainSpec::Fixed(k) => Ok(GainDerivation {
            k,
            k_prime: user,
            active: None,
            bounds,
        }),
        GainSpec::Derived { .. } => {
            // first maximum wins so ties report the user value
            let (active, k_prime) = bounds
                .iter()
                .copied()
                .fold((KPrimeBound::UserValue, f64::NEG_INFINITY), |acc, (b, v)| {
                    if v > acc.1 {
                        (b, v)
                    } else {
                        acc
                    }
                });
            Ok(GainDerivation {
                k: base + k_prime,
                k_prime,
                active: Some(active),
                bounds,
            })
        }
    }
}

/// Closed-loop hybrid state `(tau, i, z, z~, z*)` plus the running
/// transition matrix of the current cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridState {
    pub tau: f64,
    pub cycle: u32,
    pub z: Vector2<f64>,
    pub z_tilde: Vector2<f64>,
    pub z_star: f64,
    pub phi: Matrix2<f64>,
}

impl HybridState {
    /// Observer estimate `z^ = z + z~`.
    pub fn z_hat(&self) -> Vector2<f64> {
        self.z + self.z_tilde
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JumpKind {
    WithinCycle,
    NewCycle,
}

/// One point of a hybrid arc at hybrid time `(t, j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub j: u32,
    pub state: HybridState,
}

/// Jump taken at `(t, j)`; the post-jump point has index `j + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRecord {
    pub t: f64,
    pub j: u32,
    pub kind: JumpKind,
    /// Width of the bisection bracket that located the guard crossing.
    pub bracket_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    HorizonReached,
    MaxCycles,
    Converged,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HybridTrajectory {
    pub samples: Vec<Sample>,
    pub jumps: Vec<JumpRecord>,
    pub termination: Option<Termination>,
}

/// Contiguous range of samples belonging to one cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSpan {
    pub cycle: u32,
    /// First sample of the cycle (the post-jump point, or the initial sample).
    pub first: usize,
    /// Last sample of the cycle (the pre-jump point when completed).
    pub last: usize,
    pub completed: bool,
}

impl CycleSpan {
    pub fn samples<'a>(&self, traj: &'a HybridTrajectory) -> &'a [Sample] {
        &traj.samples[self.first..=self.last]
    }
}

impl HybridTrajectory {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn cycle_spans(&self) -> Vec<CycleSpan> {
        let mut spans = Vec::new();
        let Some(first) = self.samples.first() else {
            return spans;
        };
        let mut cur = CycleSpan {
            cycle: first.state.cycle,
            first: 0,
            last: 0,
            completed: false,
        };
        for (idx, s) in self.samples.iter().enumerate().skip(1) {
            if s.state.cycle != cur.cycle {
                cur.completed = true;
                spans.push(cur);
                cur = CycleSpan {
                    cycle: s.state.cycle,
                    first: idx,
                    last: idx,
                    completed: false,
                };
            } else {
                cur.last = idx;
            }
        }
        spans.push(cur);
        spans
    }

    pub fn span_of(&self, cycle: u32) -> Option<CycleSpan> {
        self.cycle_spans().into_iter().find(|s| s.cycle == cycle)
    }

    pub fn final_cycle(&self) -> Option<u32> {
        self.samples.last().map(|s| s.state.cycle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub event_tol: f64,
    pub max_step: f64,
    pub t_end: f64,
    pub zeno_window: f64,
    pub zeno_max_jumps: usize,
    /// Minimum spacing between recorded flow samples; `0` keeps every
    /// accepted step. Jump points and `z1` zero crossings are always kept.
    pub record_interval: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            event_tol: 1e-12,
            max_step: 1e-2,
            t_end: 10.0,
            zeno_window: 1e-6,
            zeno_max_jumps: 8,
            record_interval: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("event_tol", self.event_tol),
            ("max_step", self.max_step),
            ("t_end", self.t_end),
            ("zeno_window", self.zeno_window),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("solver.{name} must be > 0")));
            }
        }
        if !(self.record_interval.is_finite() && self.record_interval >= 0.0) {
            return Err(Error::InvalidConfig("solver.record_interval must be >= 0".into()));
        }
        if self.zeno_max_jumps < 2 {
            return Err(Error::InvalidConfig("solver.zeno_max_jumps must be >= 2".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(h: HSchedule) -> ControllerConfig {
        ControllerConfig {
            z_star_init: 75.0,
            gain: GainSpec::Fixed(500.0),
            epsilon: 0.01,
            r: 15.0,
            r_tilde: 0.5,
            h_schedule: h,
            max_cycles: 12,
        }
    }

    #[test]
    fn g_of_examples() {
        assert_eq!(g_of(&cfg(HSchedule::PaperV), 0), 1.0);
        assert_eq!(g_of(&cfg(HSchedule::Constant(0.5)), 3), 0.125);
        // loop oracle over the literal h values
        let mut expected = 1.0;
        for j in 1..=2 {
            expected *= 1.0 / (1.0 + 1.0 / 4f64.powi(j));
        }
        let g2 = g_of(&cfg(HSchedule::PaperV), 2);
        assert!((g2 - expected).abs() < 1e-15);
        assert!((g2 - 0.752_941_176_470_588).abs() < 1e-12);
    }

    #[test]
    fn reference_values() {
        let c = cfg(HSchedule::PaperV);
        assert_eq!(reference_set_value(&c, 0, 1), 75.0);
        assert_eq!(reference_set_value(&c, 5, 1), 2.34375);
        assert_eq!(reference_set_value(&c, 1, -1), -37.5);
    }

    #[test]
    fn paper_schedule_tail() {
        let h = HSchedule::PaperV;
        assert_eq!(h.h(8), 1.0 / (1.0 + 4f64.powi(-8)));
        assert_eq!(h.h(9), 0.5);
        assert_eq!(h.h(40), 0.5);
        assert!(h.g_converges_to_zero());
        assert!(!HSchedule::InvOnePlusPow(4.0).g_converges_to_zero());
    }

    #[test]
    fn schedule_parsing() {
        let h: HSchedule = serde_json::from_str("\"constant:0.5\"").unwrap();
        assert_eq!(h, HSchedule::Constant(0.5));
        let h: HSchedule = serde_json::from_str("[0.9, 0.8]").unwrap();
        assert_eq!(h.h(1), 0.9);
        assert_eq!(h.h(7), 0.8);
        assert!(serde_json::from_str::<HSchedule>("\"linear\"").is_err());
        assert!(HSchedule::Constant(1.0).validate(3).is_err());
    }

    #[test]
    fn gain_fixed_and_zero_radius() {
        let p = PlantParams::new(375.0, 24.0, 12.5).unwrap();
        let mut c = cfg(HSchedule::PaperV);
        assert_eq!(derive_control_gain(&p, &c, 29.3).unwrap().k, 500.0);

        c.gain = GainSpec::Derived { k_prime: 500.0 };
        c.r_tilde = 0.0;
        c.epsilon = 1e-4;
        let g = derive_control_gain(&p, &c, 1.0).unwrap();
        // a^2 eps^2 bounds are ~5.6 and the dwell bound is ~ -2 ln(2^-5)/5.5e-4
        let dwell = -2.0 * 2f64.powi(-5).ln() / ((12.5 / 24.0 - 1e-4) / (12.5 * 75.0));
        assert!((g.k - dwell.max(500.0)).abs() < 1e-9);
    }

    #[test]
    fn gain_initialization_bound_active() {
        // plant chosen so the dwell-settling bound stays small
        let p = PlantParams::new(2.0, 1.0, 1.0).unwrap();
        let c = ControllerConfig {
            z_star_init: 0.1,
            gain: GainSpec::Derived { k_prime: 64.0 },
            epsilon: 0.1,
            r: 1.0,
            r_tilde: 1.0,
            h_schedule: HSchedule::Constant(0.5),
            max_cycles: 4,
        };
        let g = derive_control_gain(&p, &c, 1.0).unwrap();
        let bounds: Vec<f64> = g.bounds.iter().map(|b| b.1).collect();
        // T_lmin = (d/c - eps)/(d z*) = 9, dwell bound = 10 ln 2 / 9
        assert!((bounds[4] - 10.0 * 2f64.ln() / 9.0).abs() < 1e-12);
        assert_eq!(g.k, 66.0);
        assert_eq!(g.k_prime, 64.0);
        assert_eq!(g.active, Some(KPrimeBound::UserValue));
        assert!(derive_control_gain(&p, &c, 0.5).is_err());
    }

    #[test]
    fn h0_rules() {
        let mut c = cfg(HSchedule::PaperV);
        assert!((c.h(0, 2.0) - 0.01).abs() < 1e-15);
        c.r_tilde = 0.0;
        assert_eq!(c.h0(2.0), 1.0);
    }

    #[test]
    fn plant_validation() {
        assert!(PlantParams::new(0.0, 1.0, 1.0).is_err());
        assert!(PlantParams::new(1.0, -1.0, 1.0).is_err());
        assert!(PlantParams::new(1.0, 1.0, f64::NAN).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn g_strictly_decreasing(v in 0.01f64..0.99, i in 0u32..40) {
                let c = cfg(HSchedule::Constant(v));
                prop_assert!(g_of(&c, i + 1) < g_of(&c, i));
                let p = cfg(HSchedule::PaperV);
                prop_assert!(g_of(&p, i + 1) < g_of(&p, i));
            }

            #[test]
            fn reference_halves(i in 0u32..60, pos in any::<bool>()) {
                let c = cfg(HSchedule::PaperV);
                let s = if pos { 1 } else { -1 };
                prop_assert_eq!(reference_set_value(&c, i + 1, s), reference_set_value(&c, i, s) / 2.0);
            }

            #[test]
            fn gain_monotone(
                a in 0.1f64..10.0, rt in 0.0f64..2.0, gamma in 1.0f64..30.0,
                kp in 0.1f64..100.0, bump in 0.0f64..1.0,
            ) {
                let p = PlantParams::new(a, 1.0, 1.0).unwrap();
                let c = ControllerConfig {
                    z_star_init: 1.0, gain: GainSpec::Derived { k_prime: kp }, epsilon: 0.1,
                    r: 1.0, r_tilde: rt, h_schedule: HSchedule::Constant(0.5), max_cycles: 3,
                };
                let k0 = derive_control_gain(&p, &c, gamma).unwrap().k;
                let pa = PlantParams::new(a + bump, 1.0, 1.0).unwrap();
                prop_assert!(derive_control_gain(&pa, &c, gamma).unwrap().k >= k0);
                prop_assert!(derive_control_gain(&p, &c, gamma + bump).unwrap().k >= k0);
                let mut c2 = c.clone();
                c2.r_tilde += bump;
                prop_assert!(derive_control_gain(&p, &c2, gamma).unwrap().k >= k0);
                c2 = c.clone();
                c2.gain = GainSpec::Derived { k_prime: kp + bump };
                prop_assert!(derive_control_gain(&p, &c2, gamma).unwrap().k >= k0);
            }
        }
    }
}
