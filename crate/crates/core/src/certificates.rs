//! Observer gain completion, the common Lyapunov matrix, and the
//! constructive constants behind the convergence and dwell-time arguments.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{from_rows, log_add_exp, spectral_norm, to_rows};
use crate::model::{g_of, ControllerConfig, ObserverGains, PlantParams};

/// Absolute bound on `|A_i^T P + P A_i + C^T C|_2`.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-9;

/// Completes `(k1-, k2-)` from `(k1+, k2+)` so that both modes share a
/// quadratic Lyapunov function, then checks the four Hurwitz conditions.
pub fn complete_gains(params: &PlantParams, k1_plus: f64, k2_plus: f64) -> Result<ObserverGains> {
    params.validate()?;
    let (a, c) = (params.a, params.c);
    let k1_minus = 2.0 * c - k1_plus;
    let k2_minus = (c * k1_plus + a * k2_plus - c * k1_minus) / a;

    let mut failed = Vec::new();
    if !(k1_plus > c) {
        failed.push(format!("k1+ = {k1_plus} must exceed c = {c}"));
    }
    if !(k2_plus < -(c / a) * k1_plus) {
        failed.push(format!("k2+ = {k2_plus} must be below -(c/a) k1+ = {}", -(c / a) * k1_plus));
    }
    if !(k1_minus < c) {
        failed.push(format!("k1- = {k1_minus} must be below c = {c}"));
    }
    if !(k2_minus < -(c / a) * k1_minus) {
        failed.push(format!("k2- = {k2_minus} must be below -(c/a) k1- = {}", -(c / a) * k1_minus));
    }
    if !failed.is_empty() {
        return Err(Error::InvalidGains(failed.join("; ")));
    }
    Ok(ObserverGains {
        a,
        c,
        k1_plus,
        k1_minus,
        k2_plus,
        k2_minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovCertificate {
    pub p: [[f64; 2]; 2],
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `sqrt(lambda_max / lambda_min)`
    pub gamma: f64,
    pub residual_1: f64,
    pub residual_2: f64,
}

impl LyapunovCertificate {
    pub fn p(&self) -> Matrix2<f64> {
        from_rows(self.p)
    }

    /// `V_obs(z~) = z~^T P z~`
    pub fn v_obs(&self, z_tilde: &Vector2<f64>) -> f64 {
        (z_tilde.transpose() * self.p() * z_tilde)[(0, 0)]
    }
}

/// `|A^T P + P A + C^T C|_2`
pub fn lyapunov_residual(a: &Matrix2<f64>, p: &Matrix2<f64>) -> f64 {
    let ctc = Matrix2::new(1.0, 0.0, 0.0, 0.0);
    spectral_norm(&(a.transpose() * p + p * a + ctc))
}

/// Solves `A_1^T P + P A_1 = -C^T C` for the symmetric `P` as a 3x3 linear
/// system in `(p11, p12, p22)` and checks that the same `P` works for `A_2`.
pub fn solve_common_lyapunov(gains: &ObserverGains) -> Result<LyapunovCertificate> {
    let a1 = gains.a1();
    let (a11, a12, a21, a22) = (a1[(0, 0)], a1[(0, 1)], a1[(1, 0)], a1[(1, 1)]);
    // rows: (1,1), (1,2) and (2,2) entries of A^T P + P A
    let m = Matrix3::new(
        2.0 * a11, 2.0 * a21, 0.0,
        a12, a11 + a22, a21,
        0.0, 2.0 * a12, 2.0 * a22,
    );
    let rhs = Vector3::new(-1.0, 0.0, 0.0);
    let sol = m
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::NoCertificate("singular Lyapunov system".into()))?;
    let p = Matrix2::new(sol[0], sol[1], sol[1], sol[2]);

    let eig = p.symmetric_eigen();
    let lambda_min = eig.eigenvalues.min();
    let lambda_max = eig.eigenvalues.max();
    if !(lambda_min > 0.0) {
        return Err(Error::NoCertificate(format!(
            "P is not positive definite (lambda_min = {lambda_min})"
        )));
    }
    let residual_1 = lyapunov_residual(&a1, &p);
    let residual_2 = lyapunov_residual(&gains.a2(), &p);
    if residual_1 > LYAPUNOV_RESIDUAL_TOL || residual_2 > LYAPUNOV_RESIDUAL_TOL {
        return Err(Error::NoCertificate(format!(
            "residuals {residual_1:e}, {residual_2:e} exceed {LYAPUNOV_RESIDUAL_TOL:e}"
        )));
    }
    Ok(LyapunovCertificate {
        p: to_rows(&p),
        lambda_min,
        lambda_max,
        gamma: (lambda_max / lambda_min).sqrt(),
        residual_1,
        residual_2,
    })
}

/// Closed-form lower bound on the flow time between two within-cycle jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DwellBound {
    pub cycle: u32,
    /// `sigma_i = (d/c - eps) / 2^(i-1)`
    pub sigma: f64,
    pub t_lower: f64,
    /// Uniform bound over all cycles (the `i -> infinity` limit).
    pub t_lmin: f64,
}

fn check_band(params: &PlantParams, cfg: &ControllerConfig) -> Result<()> {
    let ratio = params.ratio();
    if !(cfg.epsilon < ratio) {
        return Err(Error::DegenerateBand {
            epsilon: cfg.epsilon,
            ratio,
        });
    }
    Ok(())
}

/// `T_li >= 2^(i-1) / (2 c z*_in) ln(1 + 2 sigma_i / (d/c - sigma_i))`.
///
/// The bound decreases in `i`, so `T_lmin` is its limit
/// `(d/c - eps) / (d z*_in)`.
pub fn dwell_time_lower_bound(
    params: &PlantParams,
    cfg: &ControllerConfig,
    cycle: u32,
) -> Result<DwellBound> {
    check_band(params, cfg)?;
    if cycle == 0 {
        return Err(Error::InvalidConfig("dwell bound is defined for cycles i >= 1".into()));
    }
    let ratio = params.ratio();
    let scale = 2f64.powi(cycle as i32 - 1);
    let sigma = (ratio - cfg.epsilon) / scale;
    let t_lower =
        scale / (2.0 * params.c * cfg.z_star_init) * (2.0 * sigma / (ratio - sigma)).ln_1p();
    Ok(DwellBound {
        cycle,
        sigma,
        t_lower,
        t_lmin: dwell_time_floor(params, cfg)?,
    })
}

/// `T_lmin = (d/c - eps) / (d z*_in)`.
pub fn dwell_time_floor(params: &PlantParams, cfg: &ControllerConfig) -> Result<f64> {
    check_band(params, cfg)?;
    Ok((params.ratio() - cfg.epsilon) / (params.d * cfg.z_star_init))
}

/// Per-cycle excitation constants `(tau_d, tau_s, z_low, z_high)` that make
/// the dwell assumption hold by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DwellTimeCertificate {
    pub cycle: u32,
    pub sigma: f64,
    pub t_li_lower: f64,
    pub t_lmin: f64,
    /// Upper bound on the half-period; `None` when the comparison flow
    /// never reaches its target.
    pub t_ui: Option<f64>,
    pub tau_d: f64,
    pub tau_s: Option<f64>,
    pub z_high: f64,
    pub z_low: f64,
}

/// Largest `|z1|` inside the attractive set of cycle `i`:
/// `(z*_in / 2^(i-1)) (1 + g(i-1))`.
pub fn attractive_radius(cfg: &ControllerConfig, cycle: u32) -> f64 {
    let base = cfg.z_star_init / 2f64.powi(cycle as i32 - 1);
    base * (1.0 + g_of(cfg, cycle.saturating_sub(1)))
}

pub fn dwell_time_certificate(
    params: &PlantParams,
    cfg: &ControllerConfig,
    cycle: u32,
) -> Result<DwellTimeCertificate> {
    let bound = dwell_time_lower_bound(params, cfg, cycle)?;
    let c = params.c;
    let ratio = params.ratio();
    let scale = 2f64.powi(cycle as i32 - 1);
    let z_high = attractive_radius(cfg, cycle);
    let z_star = cfg.z_star_init / 2f64.powi(cycle as i32);
    let z_low = z_star / 2.0;
    let half = bound.t_lower / 2.0;

    // growth phase at |z1| = z_high, then decay at |z1| = |z*|/2
    let z2_start = (ratio + cfg.epsilon) / scale;
    let z2_mid = (z2_start + ratio) * (c * z_high * half).exp() - ratio;
    let target = -(ratio + cfg.epsilon) / scale;
    let t_ui = if target > -ratio {
        Some(half + ((z2_mid + ratio) / (target + ratio)).ln() / (c * z_low))
    } else {
        None
    };
    Ok(DwellTimeCertificate {
        cycle,
        sigma: bound.sigma,
        t_li_lower: bound.t_lower,
        t_lmin: bound.t_lmin,
        t_ui,
        tau_d: half,
        tau_s: t_ui.map(|t| t - half),
        z_high,
        z_low,
    })
}

/// Excitation quantities `(tau_d, tau_s, z_low, z_high)` of the dwell
/// assumption, in original time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcitationAssumption {
    pub tau_d: f64,
    pub tau_s: f64,
    pub z_low: f64,
    pub z_high: f64,
}

/// Constants of the exponential estimation-error envelope.
///
/// `c_bar`, `k_bar` and `kappa1` can be astronomically large for realistic
/// excitation data; their logarithms are the primary representation and the
/// plain values saturate to infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCertificate {
    pub lambda: f64,
    pub ln_c_bar: f64,
    pub c_bar: f64,
    /// Injected gains, one column vector per mode.
    pub k1: [f64; 2],
    pub k2: [f64; 2],
    pub k_norm: f64,
    pub ln_k_bar: f64,
    pub k_bar: f64,
    /// `p_M / p_m` for the certified `P`.
    pub p_ratio: f64,
    pub l_window: f64,
    pub rho: f64,
    pub one_minus_rho: f64,
    pub ln_kappa1: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// Worst observed `sup c_bar |e^{(A_i + K_i C) tau}| e^{2 lambda (tau - tau_0)}`
    /// in log form; must be `<= 0`.
    pub envelope_log_margin: f64,
    /// Excitation rate; filled in from a trajectory.
    pub mu: Option<f64>,
    /// Delay after which the envelope applies; filled in from a trajectory.
    pub t_activation: Option<f64>,
}

/// Place both eigenvalues of `A + K C` at `-pole`; `C = [1 0]`.
pub fn place_output_injection(a: &Matrix2<f64>, pole: f64) -> Vector2<f64> {
    let (a11, a12, a21, a22) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let k1 = -2.0 * pole - a11 - a22;
    let k2 = ((a11 + k1) * a22 - pole * pole) / a12 - a21;
    Vector2::new(k1, k2)
}

/// `ln |e^{M tau}|_2` for `M` with a double eigenvalue `-pole`, using
/// `e^{M tau} = e^{-pole tau} (I + (M + pole I) tau)`.
pub fn ln_norm_exp_double_pole(m: &Matrix2<f64>, pole: f64, tau: f64) -> f64 {
    let n = m + Matrix2::identity() * pole;
    -pole * tau + spectral_norm(&(Matrix2::identity() + n * tau)).ln()
}

/// `rho = (2 gamma c_bar^2 e^{-2 lambda L} + k_bar) / (1 + k_bar)`
pub fn contraction_factor(p_ratio: f64, c_bar: f64, lambda: f64, k_bar: f64, l: f64) -> f64 {
    (2.0 * p_ratio * c_bar * c_bar * (-2.0 * lambda * l).exp() + k_bar) / (1.0 + k_bar)
}

const LAMBDA_GRID: (f64, f64, usize) = (1e-3, 1e8, 10);
const TAU_SAMPLES: usize = 400;

/// Builds the decay constants for the switched error system.
///
/// `c_bar = exp(max|A_i| z_high tau_s)`; output injections `K_i` place a
/// double pole at `-3 lambda` and are accepted when the sampled
/// `|e^{(A_i + K_i C) tau}|` stays under `(1/c_bar) e^{-2 lambda (tau - tau_0)}`
/// for `tau >= tau_0 = tau_d z_low / 2`. The window `L` is the smallest one
/// reaching `rho = 0.9`, or `rho = (0.5 + k_bar)/(1 + k_bar)` when `k_bar >= 4`.
/// Among admissible `lambda` on a log grid the one maximizing `kappa2` wins.
pub fn decay_certificate(
    gains: &ObserverGains,
    cert: &LyapunovCertificate,
    assumption: &ExcitationAssumption,
) -> Result<DecayCertificate> {
    let ExcitationAssumption {
        tau_d,
        tau_s,
        z_low,
        z_high,
    } = *assumption;
    if !(tau_d > 0.0 && tau_s >= 0.0 && z_low > 0.0 && z_high >= z_low) {
        return Err(Error::PlacementFailed(format!(
            "assumption quantities must be positive: {assumption:?}"
        )));
    }
    let modes = [gains.a1(), gains.a2()];
    let a_norm = modes.iter().map(spectral_norm).fold(0.0, f64::max);
    let ln_c_bar = a_norm * z_high * tau_s;
    let tau0 = tau_d * z_low / 2.0;
    let p_ratio = cert.lambda_max / cert.lambda_min;
    let ln_pm = cert.lambda_max.ln();

    let (lo, hi, per_decade) = LAMBDA_GRID;
    let decades = (hi / lo).log10().round() as usize;
    let mut best: Option<DecayCertificate> = None;
    for step in 0..=decades * per_decade {
        let lambda = lo * 10f64.powf(step as f64 / per_decade as f64);
        let pole = 3.0 * lambda;
        let ks: Vec<Vector2<f64>> = modes.iter().map(|a| place_output_injection(a, pole)).collect();

        // sample tau - tau0 on [0, 20/lambda] plus a geometric tail
        let mut worst = f64::NEG_INFINITY;
        for (a, k) in modes.iter().zip(&ks) {
            let closed = a + k * nalgebra::RowVector2::new(1.0, 0.0);
            for n in 0..=TAU_SAMPLES {
                let s = 20.0 / lambda * n as f64 / TAU_SAMPLES as f64;
                let v = ln_norm_exp_double_pole(&closed, pole, tau0 + s) + ln_c_bar
                    + 2.0 * lambda * s;
                worst = worst.max(v);
            }
            for n in 0..40 {
                let s = 20.0 / lambda * 1.5f64.powi(n);
                let v = ln_norm_exp_double_pole(&closed, pole, tau0 + s) + ln_c_bar
                    + 2.0 * lambda * s;
                worst = worst.max(v);
            }
        }
        if !(worst <= 0.0) {
            continue;
        }

        let k_norm = ks.iter().map(|k| k.norm()).fold(0.0, f64::max);
        let ln_k_bar = ln_pm + 2.0 * ln_c_bar + 2.0 * k_norm.ln() - lambda.ln();
        let k_bar = ln_k_bar.exp();
        let x = if k_bar < 4.0 { 0.9 - 0.1 * k_bar } else { 0.5 };
        // 2 p_ratio c_bar^2 e^{-2 lambda L} = x
        let l_window = ((2.0 * p_ratio).ln() + 2.0 * ln_c_bar - x.ln()) / (2.0 * lambda);
        let ln_one_plus_k_bar = log_add_exp(0.0, ln_k_bar);
        let one_minus_rho = ((1.0 - x).ln() - ln_one_plus_k_bar).exp();
        if !(one_minus_rho > 0.0) {
            continue;
        }
        let rho = 1.0 - one_minus_rho;
        let ln_rho = (-one_minus_rho).ln_1p();
        let kappa2 = -ln_rho / l_window;
        if !(kappa2 > 0.0 && kappa2.is_finite()) {
            continue;
        }
        let ln_kappa1 = p_ratio.ln()
            + log_add_exp(ln_k_bar, 2f64.ln() + 2.0 * ln_c_bar + p_ratio.ln())
            - ln_rho
            - ln_one_plus_k_bar;
        let candidate = DecayCertificate {
            lambda,
            ln_c_bar,
            c_bar: ln_c_bar.exp(),
            k1: [ks[0][0], ks[0][1]],
            k2: [ks[1][0], ks[1][1]],
            k_norm,
            ln_k_bar,
            k_bar,
            p_ratio,
            l_window,
            rho,
            one_minus_rho,
            ln_kappa1,
            kappa1: ln_kappa1.exp(),
            kappa2,
            envelope_log_margin: worst,
            mu: None,
            t_activation: None,
        };
        if best.as_ref().map_or(true, |b| candidate.kappa2 > b.kappa2) {
            best = Some(candidate);
        }
    }
    best.ok_or_else(|| {
        Error::PlacementFailed(format!(
            "no lambda in [{lo:e}, {hi:e}] satisfies the envelope with rho < 1"
        ))
    })
}
