//! Right-hand sides and guards of the closed-loop hybrid system.
//!
//! The observer is realized through its error `z~ = z^ - z`, integrated next
//! to the true plant; the estimate is recovered as `z + z~`.

use nalgebra::{Matrix2, Vector2};

use crate::certificates::LyapunovCertificate;
use crate::error::{Error, Result};
use crate::linalg::sym_max_eig;
use crate::model::{ControllerConfig, HybridState, JumpKind, ObserverGains, PlantParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowDerivative {
    pub d_tau: f64,
    pub d_z: Vector2<f64>,
    pub d_z_tilde: Vector2<f64>,
    pub d_phi: Matrix2<f64>,
}

/// Certainty-equivalence law `u = a z1 z^2 - k (z1 - z*)`.
pub fn control_input(params: &PlantParams, k: f64, state: &HybridState) -> f64 {
    let z1 = state.z[0];
    params.a * z1 * state.z_hat()[1] - k * (z1 - state.z_star)
}

pub fn flow_map(
    params: &PlantParams,
    gains: &ObserverGains,
    k: f64,
    state: &HybridState,
) -> Result<FlowDerivative> {
    let (z1, z2) = (state.z[0], state.z[1]);
    if !(z2 > params.z2_floor()) {
        return Err(Error::StateOutOfDomain {
            t: f64::NAN,
            z2,
            floor: params.z2_floor(),
        });
    }
    let u = control_input(params, k, state);
    // z1 M(z1) = |z1| A(sign z1)
    let switched = gains.mode(z1) * z1.abs();
    Ok(FlowDerivative {
        d_tau: z1.abs(),
        d_z: Vector2::new(-params.a * z1 * z2 + u, (params.c * z2 + params.d) * z1),
        d_z_tilde: switched * state.z_tilde,
        d_phi: switched * state.phi,
    })
}

/// Observer written on the estimate itself:
///
/// ```text
/// z^1' = -a z1 z^2 + u + k1(z1) z1 (z1 - z^1)
/// z^2' =  c z1 z^2 + d z1 + k2(z1) z1 (z1 - z^1)
/// ```
///
/// Its error obeys the same law as the `z~` rows of [`flow_map`].
pub fn observer_rhs(
    params: &PlantParams,
    gains: &ObserverGains,
    z1: f64,
    u: f64,
    z_hat: &Vector2<f64>,
) -> Vector2<f64> {
    let innovation = z1 * (z1 - z_hat[0]);
    Vector2::new(
        -params.a * z1 * z_hat[1] + u + gains.k1(z1) * innovation,
        params.c * z1 * z_hat[1] + params.d * z1 + gains.k2(z1) * innovation,
    )
}

/// Difference between the simulated `z1e'` and the closed form
/// `-(k + a z~2) z1e + a z* z~2`. Diagnostic only; the two differ by
/// `2 a z~2 z1e` when the control law is substituted directly.
pub fn tracking_error_residual(params: &PlantParams, k: f64, state: &HybridState) -> f64 {
    let z1e = state.z[0] - state.z_star;
    let zt2 = state.z_tilde[1];
    let u = control_input(params, k, state);
    let simulated = -params.a * state.z[0] * state.z[1] + u;
    let closed_form = -(k + params.a * zt2) * z1e + params.a * state.z_star * zt2;
    simulated - closed_form
}

/// Switching band `d |z*| / (c z*_in)`.
pub fn switching_threshold(params: &PlantParams, cfg: &ControllerConfig, z_star: f64) -> f64 {
    params.d * z_star.abs() / (params.c * cfg.z_star_init)
}

/// Within-cycle jump set: `|z^2| >= band` and `z^2 z* >= 0`.
pub fn in_dc(params: &PlantParams, cfg: &ControllerConfig, state: &HybridState) -> bool {
    let zh2 = state.z_hat()[1];
    zh2.abs() >= switching_threshold(params, cfg, state.z_star) && zh2 * state.z_star >= 0.0
}

/// `|Phi^T P Phi|^(1/2)`
pub fn phi_weighted_norm(cert: &LyapunovCertificate, phi: &Matrix2<f64>) -> f64 {
    sym_max_eig(&(phi.transpose() * cert.p() * phi)).max(0.0).sqrt()
}

/// Cycle-advance jump set: `|z^2| <= band`, `z^2 z* <= 0` and
/// `|Phi^T P Phi|^(1/2) <= lambda_min(P)^(1/2) h(i)`.
pub fn in_dnc(
    params: &PlantParams,
    cfg: &ControllerConfig,
    cert: &LyapunovCertificate,
    state: &HybridState,
) -> bool {
    let zh2 = state.z_hat()[1];
    zh2.abs() <= switching_threshold(params, cfg, state.z_star)
        && zh2 * state.z_star <= 0.0
        && phi_weighted_norm(cert, &state.phi)
            <= cert.lambda_min.sqrt() * cfg.h(state.cycle, cert.gamma)
}

/// Jump map without guard checks.
pub fn apply_jump(state: &HybridState, which: JumpKind) -> HybridState {
    let mut next = *state;
    match which {
        JumpKind::WithinCycle => next.z_star = -state.z_star,
        JumpKind::NewCycle => {
            next.tau = 0.0;
            next.cycle = state.cycle + 1;
            next.z_star = state.z_star / 2.0;
            next.phi = Matrix2::identity();
        }
    }
    next
}

/// Jump map; the state must lie in the jump set selected by `which`.
pub fn jump_map(
    params: &PlantParams,
    cfg: &ControllerConfig,
    cert: &LyapunovCertificate,
    state: &HybridState,
    which: JumpKind,
) -> Result<HybridState> {
    let allowed = match which {
        JumpKind::WithinCycle => in_dc(params, cfg, state),
        JumpKind::NewCycle => in_dnc(params, cfg, cert, state),
    };
    if !allowed {
        return Err(Error::IllegalJump(format!(
            "{which:?} requested outside its jump set (cycle {}, z^2 = {}, z* = {})",
            state.cycle,
            state.z_hat()[1],
            state.z_star
        )));
    }
    Ok(apply_jump(state, which))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{complete_gains, solve_common_lyapunov};
    use crate::model::{GainSpec, HSchedule};
    use proptest::prelude::*;

    fn plant() -> PlantParams {
        PlantParams::new(375.0, 24.0, 12.5).unwrap()
    }

    fn gains() -> ObserverGains {
        complete_gains(&plant(), 40.0, -3.0).unwrap()
    }

    fn cfg() -> ControllerConfig {
        ControllerConfig {
            z_star_init: 75.0,
            gain: GainSpec::Fixed(500.0),
            epsilon: 0.01,
            r: 15.0,
            r_tilde: 0.5,
            h_schedule: HSchedule::PaperV,
            max_cycles: 10,
        }
    }

    fn state(z: [f64; 2], zt: [f64; 2], z_star: f64) -> HybridState {
        HybridState {
            tau: 0.0,
            cycle: 1,
            z: Vector2::new(z[0], z[1]),
            z_tilde: Vector2::new(zt[0], zt[1]),
            z_star,
            phi: Matrix2::identity(),
        }
    }

    #[test]
    fn control_examples() {
        let p = plant();
        assert_eq!(control_input(&p, 500.0, &state([3.0, 0.0], [0.0, 0.0], 3.0)), 0.0);
        assert_eq!(control_input(&p, 500.0, &state([0.0, 0.2], [0.0, 0.0], 37.5)), 18750.0);
        let u = control_input(&p, 500.0, &state([1.0, 0.25], [0.0, 0.25], 1.0));
        assert_eq!(u, 187.5);
    }

    #[test]
    fn flow_examples() {
        let (p, g) = (plant(), gains());
        let f = flow_map(&p, &g, 500.0, &state([1.0, 0.0], [0.0, 0.0], 1.0)).unwrap();
        assert_eq!(f.d_z, Vector2::new(0.0, 12.5));
        assert_eq!(f.d_z_tilde, Vector2::zeros());
        assert_eq!(f.d_tau, 1.0);

        let f = flow_map(&p, &g, 500.0, &state([0.0, 0.3], [0.1, -0.2], 5.0)).unwrap();
        assert_eq!(f.d_tau, 0.0);
        assert_eq!(f.d_z[1], 0.0);
        assert_eq!(f.d_z_tilde, Vector2::zeros());
        assert_eq!(f.d_phi, Matrix2::zeros());

        let err = flow_map(&p, &g, 500.0, &state([1.0, -0.6], [0.0, 0.0], 1.0)).unwrap_err();
        assert_eq!(err.kind(), "StateOutOfDomain");
    }

    #[test]
    fn dc_examples() {
        let (p, c) = (plant(), cfg());
        let thr = switching_threshold(&p, &c, 37.5);
        assert!((thr - 0.260_416_666_666).abs() < 1e-10);
        assert!(in_dc(&p, &c, &state([1.0, 0.3], [0.0, 0.0], 37.5)));
        assert!(!in_dc(&p, &c, &state([1.0, 0.0], [0.0, 0.0], 37.5)));
        assert!(!in_dc(&p, &c, &state([1.0, -0.3], [0.0, 0.0], 37.5)));
    }

    #[test]
    fn dnc_examples() {
        let (p, c) = (plant(), cfg());
        let cert = solve_common_lyapunov(&gains()).unwrap();
        let mut s = state([1.0, -0.1], [0.0, 0.0], 37.5);
        assert!(!in_dnc(&p, &c, &cert, &s));
        s.phi = Matrix2::zeros();
        assert!(in_dnc(&p, &c, &cert, &s));
        s.z_star = -37.5;
        assert!(!in_dnc(&p, &c, &cert, &s));
    }

    #[test]
    fn jump_examples() {
        let (p, c) = (plant(), cfg());
        let cert = solve_common_lyapunov(&gains()).unwrap();
        let mut s = state([1.0, 0.3], [0.01, -0.02], 37.5);
        s.tau = 3.2;
        let w = jump_map(&p, &c, &cert, &s, JumpKind::WithinCycle).unwrap();
        assert_eq!((w.tau, w.cycle, w.z_star), (3.2, 1, -37.5));
        assert_eq!((w.z, w.z_tilde), (s.z, s.z_tilde));

        let mut s = state([1.0, 0.1], [0.01, -0.02], -37.5);
        s.tau = 3.2;
        s.phi = Matrix2::zeros();
        let n = jump_map(&p, &c, &cert, &s, JumpKind::NewCycle).unwrap();
        assert_eq!((n.tau, n.cycle, n.z_star), (0.0, 2, -18.75));
        assert_eq!(n.phi, Matrix2::identity());
        assert_eq!((n.z, n.z_tilde), (s.z, s.z_tilde));

        let bad = jump_map(&p, &c, &cert, &state([1.0, 0.0], [0.0, 0.0], 1.0), JumpKind::WithinCycle);
        assert_eq!(bad.unwrap_err().kind(), "IllegalJump");
    }

    #[test]
    fn tracking_residual_is_sign_discrepancy() {
        let p = plant();
        let s = state([2.0, 0.1], [0.0, 0.05], 1.0);
        let r = tracking_error_residual(&p, 500.0, &s);
        assert!((r - 2.0 * p.a * 0.05 * 1.0).abs() < 1e-9);
    }

    fn any_state() -> impl Strategy<Value = HybridState> {
        (
            -50.0f64..50.0,
            -0.5f64..5.0,
            -1.0f64..1.0,
            -1.0f64..1.0,
            prop_oneof![Just(1i8), Just(-1i8)],
            0u32..8,
        )
            .prop_map(|(z1, z2, t1, t2, s, i)| HybridState {
                tau: 0.0,
                cycle: i,
                z: Vector2::new(z1, z2),
                z_tilde: Vector2::new(t1, t2),
                z_star: f64::from(s) * 75.0 / 2f64.powi(i as i32),
                phi: Matrix2::identity(),
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn jump_sets_disjoint(mut s in any_state(), zh2 in -1.0f64..1.0, scale in 0.0f64..1.0) {
            let (p, c) = (plant(), cfg());
            let cert = solve_common_lyapunov(&gains()).unwrap();
            s.z[1] = zh2 - s.z_tilde[1];
            s.phi = Matrix2::identity() * scale;
            prop_assert!(!(in_dc(&p, &c, &s) && in_dnc(&p, &c, &cert, &s)));
        }

        #[test]
        fn error_flow_linear(s in any_state(), alpha in -10.0f64..10.0) {
            let (p, g) = (plant(), gains());
            let f = flow_map(&p, &g, 500.0, &s).unwrap();
            let mut scaled = s;
            scaled.z_tilde *= alpha;
            // keep z^2 fixed is not required: the z~ rows do not depend on u
            let fs = flow_map(&p, &g, 500.0, &scaled).unwrap();
            prop_assert!((fs.d_z_tilde - f.d_z_tilde * alpha).norm() <= 1e-9 * (1.0 + f.d_z_tilde.norm() * alpha.abs()));
            prop_assert!(f.d_tau >= 0.0);
        }

        #[test]
        fn vobs_decreases_along_flow(s in any_state()) {
            let (p, g) = (plant(), gains());
            let cert = solve_common_lyapunov(&g).unwrap();
            let f = flow_map(&p, &g, 500.0, &s).unwrap();
            let pm = cert.p();
            let v_dot = 2.0 * (s.z_tilde.transpose() * pm * f.d_z_tilde)[(0, 0)];
            let expected = -s.z[0].abs() * s.z_tilde[0] * s.z_tilde[0];
            prop_assert!((v_dot - expected).abs() <= 1e-8 * (1.0 + s.z[0].abs()));
            prop_assert!(v_dot <= 1e-8 * (1.0 + s.z[0].abs()));
        }

        #[test]
        fn mirrored_error_flow(s in any_state()) {
            let (p, g) = (plant(), gains());
            // z1 M(z1) equals |z1| A_1 on one side and |z1| A_2 on the other
            let f = flow_map(&p, &g, 500.0, &s).unwrap();
            let z1 = s.z[0];
            let expected = if z1 > 0.0 {
                g.a1() * s.z_tilde * z1
            } else if z1 < 0.0 {
                g.a2() * s.z_tilde * (-z1)
            } else {
                Vector2::zeros()
            };
            prop_assert!((f.d_z_tilde - expected).norm() <= 1e-9 * (1.0 + expected.norm()));
            let mut m = s;
            m.z[0] = -z1;
            let fm = flow_map(&p, &g, 500.0, &m).unwrap();
            let mirrored = if z1 > 0.0 {
                g.a2() * s.z_tilde * z1
            } else if z1 < 0.0 {
                g.a1() * s.z_tilde * (-z1)
            } else {
                Vector2::zeros()
            };
            prop_assert!((fm.d_z_tilde - mirrored).norm() <= 1e-9 * (1.0 + mirrored.norm()));
        }

        #[test]
        fn observer_forms_agree(s in any_state()) {
            let (p, g) = (plant(), gains());
            let u = control_input(&p, 500.0, &s);
            let f = flow_map(&p, &g, 500.0, &s).unwrap();
            let zh_dot = observer_rhs(&p, &g, s.z[0], u, &s.z_hat());
            let err = zh_dot - f.d_z - f.d_z_tilde;
            prop_assert!(err.norm() <= 1e-9 * (1.0 + zh_dot.norm()));
        }
    }
}
