//! Static normal loads, slip quantities, magic-formula steady-state forces and
//! first-order relaxation of the longitudinal / lateral tire forces.

use nalgebra::Vector4;

use crate::error::{Error, Result};
use crate::params::{LateralRelaxationSpeed, MagicFormula, ParameterSet, SlipChannel};
use crate::state::{gen, Vector7};

/// Slip denominators are clamped to this speed (m/s).
pub const V_EPS: f64 = 0.5;

/// `(F_fz, F_rz)` from the static weight distribution.
pub fn static_loads(p: &ParameterSet) -> Result<(f64, f64)> {
    let w = p.total_mass() * p.g;
    let wheelbase = p.l_r + p.l_f;
    let front = w * (p.l_r + p.l_m) / wheelbase;
    let rear = w * (p.l_f - p.l_m) / wheelbase;
    if !(front > 0.0 && rear > 0.0) {
        return Err(Error::InvalidParameters(vec![format!(
            "static loads must be positive (F_fz = {front}, F_rz = {rear}); check l_m against l_f, l_r"
        )]));
    }
    Ok((front, rear))
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SlipState {
    pub kappa_f: f64,
    pub kappa_r: f64,
    pub alpha_f: f64,
    pub alpha_r: f64,
    pub gamma_f: f64,
    pub gamma_r: f64,
    /// Set when `|v_x^V| < V_EPS`; slips are computed with clamped
    /// denominators and should not be trusted.
    pub low_speed: bool,
}

/// Vehicle-frame velocity `(v_x^V, v_y^V)` from the inertial components.
pub fn vehicle_frame_velocity(psi: f64, vx: f64, vy: f64) -> (f64, f64) {
    let (s, c) = psi.sin_cos();
    (c * vx + s * vy, -s * vx + c * vy)
}

fn clamped(v: f64) -> f64 {
    if v.abs() >= V_EPS {
        v
    } else if v < 0.0 {
        -V_EPS
    } else {
        V_EPS
    }
}

/// Slip ratios, side-slip angles and camber angles.
///
/// Camber is measured like the roll angle: positive when the wheel top leans
/// toward −y. Steering to the left tilts the front wheel toward +y about the
/// raked axis, hence `gamma_f = phi − delta·sin(eps)`.
pub fn slip_state(q: &Vector7, v: &Vector7, p: &ParameterSet) -> SlipState {
    let (vx, vy) = vehicle_frame_velocity(q[gen::PSI], v[0], v[1]);
    let dpsi = v[gen::PSI];
    let phi = q[gen::PHI];
    let delta = q[gen::DELTA];
    let vden = clamped(vx);
    let kden = vx.abs().max(V_EPS);
    let (se, ce) = p.eps.sin_cos();
    SlipState {
        kappa_f: (p.r_f * v[gen::THETA_F] - vx) / kden,
        kappa_r: (p.r_r * v[gen::THETA_R] - vx) / kden,
        alpha_f: delta * ce - ((vy + p.l_f * dpsi) / vden).atan(),
        alpha_r: -((vy - p.l_r * dpsi) / vden).atan(),
        gamma_f: phi - delta * se,
        gamma_r: phi,
        low_speed: vx.abs() < V_EPS,
    }
}

/// `D sin(C atan(Bμ − E(Bμ − atan(Bμ))))`
pub fn magic_formula(c: &MagicFormula, mu: f64) -> f64 {
    let bm = c.b * mu;
    c.d * (c.c * (bm - c.e * (bm - bm.atan())).atan()).sin()
}

/// Steady-state forces `[F_fx0, F_rx0, F_fy0, F_ry0]`.
///
/// Lateral force is the side-slip channel plus the camber channel; camber
/// thrust points toward the side the wheel leans, i.e. −y for positive
/// camber.
pub fn steady_state_forces(slips: &SlipState, loads: (f64, f64), p: &ParameterSet) -> Vector4<f64> {
    let (fz_f, fz_r) = loads;
    let (tf, tr) = (&p.tire_front, &p.tire_rear);
    let mf = |t: &crate::params::TireCoefficients, ch, fz, mu| magic_formula(&t.at_load(ch, fz), mu);
    Vector4::new(
        mf(tf, SlipChannel::Longitudinal, fz_f, slips.kappa_f),
        mf(tr, SlipChannel::Longitudinal, fz_r, slips.kappa_r),
        mf(tf, SlipChannel::SideSlip, fz_f, slips.alpha_f) - mf(tf, SlipChannel::Camber, fz_f, slips.gamma_f),
        mf(tr, SlipChannel::SideSlip, fz_r, slips.alpha_r) - mf(tr, SlipChannel::Camber, fz_r, slips.gamma_r),
    )
}

/// Time derivative of the instantaneous forces `[F_fx, F_rx, F_fy, F_ry]`.
pub fn relaxation_rhs(
    forces: &Vector4<f64>,
    steady: &Vector4<f64>,
    vx_v: f64,
    vy_v: f64,
    p: &ParameterSet,
) -> Vector4<f64> {
    let speed = vx_v.abs();
    let lateral = match p.options.lateral_relaxation_speed {
        LateralRelaxationSpeed::Longitudinal => speed,
        LateralRelaxationSpeed::Lateral => vy_v,
    };
    let rates = Vector4::new(
        speed / p.sigma_fx,
        speed / p.sigma_rx,
        lateral / p.sigma_fy,
        lateral / p.sigma_ry,
    );
    rates.component_mul(&(steady - forces))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ParameterSet {
        ParameterSet::gsxr1000()
    }

    #[test]
    fn static_loads_balance_weight() {
        let p = params();
        let (f, r) = static_loads(&p).unwrap();
        assert!(f > 0.0 && r > 0.0);
        let w = 303.0 * 9.81;
        assert!(((f + r) - w).abs() / w < 1e-12);
        assert!((w - 2972.43).abs() < 1e-9);
    }

    #[test]
    fn zero_offset_splits_by_wheelbase() {
        let mut p = params();
        p.l_m = 0.0;
        let (f, r) = static_loads(&p).unwrap();
        assert!((f / r - 0.643 / 0.727).abs() < 1e-14);
    }

    #[test]
    fn degenerate_offset_rejected() {
        let mut p = params();
        p.l_m = p.l_f;
        assert!(static_loads(&p).is_err());
    }

    fn rolling(v: f64, p: &ParameterSet) -> Vector7 {
        let mut vel = Vector7::zeros();
        vel[0] = v;
        vel[gen::THETA_F] = v / p.r_f;
        vel[gen::THETA_R] = v / p.r_r;
        vel
    }

    #[test]
    fn pure_rolling_has_no_slip() {
        let p = params();
        let s = slip_state(&Vector7::zeros(), &rolling(20.0, &p), &p);
        assert!(s.kappa_f.abs() < 1e-15 && s.kappa_r.abs() < 1e-15);
        assert_eq!((s.alpha_f, s.alpha_r, s.gamma_f, s.gamma_r), (0.0, 0.0, 0.0, 0.0));
        assert!(!s.low_speed);
    }

    #[test]
    fn locked_front_wheel() {
        let p = params();
        let mut v = rolling(20.0, &p);
        v[gen::THETA_F] = 0.0;
        assert_eq!(slip_state(&Vector7::zeros(), &v, &p).kappa_f, -1.0);
    }

    #[test]
    fn camber_follows_roll() {
        let p = params();
        let mut q = Vector7::zeros();
        q[gen::PHI] = 0.1;
        let s = slip_state(&q, &rolling(20.0, &p), &p);
        assert_eq!(s.gamma_f, 0.1);
        assert_eq!(s.gamma_r, 0.1);
    }

    #[test]
    fn low_speed_is_flagged() {
        let p = params();
        let s = slip_state(&Vector7::zeros(), &rolling(0.1, &p), &p);
        assert!(s.low_speed);
        assert!(s.kappa_f.is_finite());
    }

    #[test]
    fn magic_formula_basics() {
        let c = MagicFormula::new(10.0, 1.6, 1000.0, 0.5);
        assert_eq!(magic_formula(&c, 0.0), 0.0);
        let h = 1e-6;
        let slope = (magic_formula(&c, h) - magic_formula(&c, -h)) / (2.0 * h);
        assert!((slope - c.b * c.c * c.d).abs() / (c.b * c.c * c.d) < 1e-6);

        let c0 = MagicFormula::new(10.0, 1.6, 1000.0, 0.0);
        let limit = c0.d * (c0.c * std::f64::consts::FRAC_PI_2).sin();
        assert!((magic_formula(&c0, 1e9) - limit).abs() < 1e-4);
    }

    #[test]
    fn zero_slips_give_zero_forces() {
        let p = params();
        let loads = static_loads(&p).unwrap();
        assert_eq!(steady_state_forces(&SlipState::default(), loads, &p), Vector4::zeros());
    }

    #[test]
    fn rear_drive_slip_isolated() {
        let p = params();
        let loads = static_loads(&p).unwrap();
        let s = SlipState {
            kappa_r: 0.05,
            ..Default::default()
        };
        let f = steady_state_forces(&s, loads, &p);
        assert!(f[1] > 0.0);
        assert_eq!((f[0], f[2], f[3]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn linear_load_scaling_doubles_small_slip_force() {
        let p = params();
        let (f, r) = static_loads(&p).unwrap();
        let s = SlipState {
            kappa_r: 1e-7,
            ..Default::default()
        };
        let single = steady_state_forces(&s, (f, r), &p)[1];
        let double = steady_state_forces(&s, (f, 2.0 * r), &p)[1];
        assert!((double / single - 2.0).abs() < 1e-6);
    }

    #[test]
    fn relaxation_cases() {
        let mut p = params();
        let f = Vector4::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(relaxation_rhs(&f, &f, 25.0, 0.0, &p), Vector4::zeros());

        p.sigma_fx = 0.025;
        let d = relaxation_rhs(&Vector4::zeros(), &Vector4::new(10.0, 0.0, 0.0, 0.0), 25.0, 0.0, &p);
        assert!((d[0] - 10_000.0).abs() < 1e-9);

        let d = relaxation_rhs(&Vector4::zeros(), &Vector4::repeat(10.0), 0.0, 0.0, &p);
        assert_eq!(d, Vector4::zeros());
    }

    #[test]
    fn lateral_speed_rate_freezes_at_zero_lateral_speed() {
        let mut p = params();
        p.options.lateral_relaxation_speed = LateralRelaxationSpeed::Lateral;
        let d = relaxation_rhs(&Vector4::zeros(), &Vector4::repeat(10.0), 25.0, 0.0, &p);
        assert!(d[0] > 0.0 && d[1] > 0.0);
        assert_eq!((d[2], d[3]), (0.0, 0.0));
    }
}
