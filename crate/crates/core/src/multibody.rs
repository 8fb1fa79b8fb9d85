//! Generalized mass matrix and effort vectors of the four-body system,
//! projected onto the partial velocities (virtual power).
//!
//! `M v̇ = Q_a − Q_r` with
//!
//! * `M   = Σ m Jvᵀ Jv + Jwᵀ J̃ Jw`
//! * `Q_a = Σ Jvᵀ F + Jwᵀ M_ext`
//! * `Q_r = Σ m Jvᵀ a_res + Jwᵀ (J̃ g_res + ω × J̃ ω)`
//!
//! where `J̃ = R J Rᵀ` is the body inertia in the inertial frame.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::{all_body_kinematics, rot_x, rot_y, rot_z, Body, BodyKinematics};
use crate::params::ParameterSet;
use crate::state::{check_roll, gen, InputVector, Vector7};
use crate::tire::vehicle_frame_velocity;

pub type Matrix7 = SMatrix<f64, 7, 7>;

/// Condition numbers above this are treated as a degenerate configuration.
pub const MAX_CONDITION: f64 = 1e12;

/// Force and moment acting on one body, inertial frame.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

/// Instantaneous longitudinal / lateral tire forces (vehicle frame) and the
/// static normal loads, in newtons.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TireForceState {
    pub fx_f: f64,
    pub fx_r: f64,
    pub fy_f: f64,
    pub fy_r: f64,
    pub fz_f: f64,
    pub fz_r: f64,
}

impl TireForceState {
    /// Only the normal loads.
    pub fn static_only(loads: (f64, f64)) -> Self {
        Self {
            fz_f: loads.0,
            fz_r: loads.1,
            ..Default::default()
        }
    }

    fn front(&self) -> Vector3<f64> {
        Vector3::new(self.fx_f, self.fy_f, self.fz_f)
    }

    fn rear(&self) -> Vector3<f64> {
        Vector3::new(self.fx_r, self.fy_r, self.fz_r)
    }
}

/// `J̃ = R_Oi J_i R_Oiᵀ`
pub fn world_inertia(body: Body, q: &Vector7, p: &ParameterSet) -> Matrix3<f64> {
    let (_, rot) = crate::kinematics::body_pose_world(body, q, p);
    rot.0 * p.inertia(body) * rot.0.transpose()
}

/// Aerodynamic drag magnitude along −x of the vehicle frame at speed `vx_v`.
pub fn drag_force(vx_v: f64, p: &ParameterSet) -> f64 {
    0.5 * p.rho_air * p.c_d * p.a_v * vx_v * vx_v.abs()
}

/// Forces and moments on each body, in [`Body::ALL`] order.
pub fn applied_wrenches(
    q: &Vector7,
    v: &Vector7,
    tires: &TireForceState,
    u: &InputVector,
    p: &ParameterSet,
) -> [Wrench; 4] {
    let r_ov = rot_z(q[gen::PSI]).0;
    let r_phi = rot_x(q[gen::PHI]).0;
    let r_delta = rot_z(q[gen::DELTA]).0;
    let (vx_v, _) = vehicle_frame_velocity(q[gen::PSI], v[0], v[1]);
    let gravity = |m: f64| Vector3::new(0.0, 0.0, -m * p.g);

    let drag = Vector3::new(-drag_force(vx_v, p), 0.0, 0.0);
    let rear_body = Wrench {
        force: r_ov * (gravity(p.m_gr) + drag),
        moment: Vector3::zeros(),
    };

    let f_rear = tires.rear();
    let rear_arm = r_phi * Vector3::new(0.0, 0.0, -p.r_r);
    let rear_wheel = Wrench {
        force: r_ov * (gravity(p.m_rr) + f_rear),
        moment: r_ov * (Vector3::new(0.0, u.drive() + u.brake_rear(), 0.0) + rear_arm.cross(&f_rear)),
    };

    let front_body = Wrench {
        force: r_ov * gravity(p.m_gf),
        moment: r_ov * Vector3::new(0.0, 0.0, u.steering() - p.k_delta * v[gen::DELTA]),
    };

    let f_front = tires.front();
    let front_frame = if p.options.front_arm_caster {
        r_phi * rot_y(p.eps).0 * r_delta
    } else {
        r_phi * r_delta
    };
    let front_arm = front_frame * Vector3::new(0.0, 0.0, -p.r_f);
    let front_wheel = Wrench {
        force: r_ov * (gravity(p.m_rf) + f_front),
        moment: r_ov * (Vector3::new(0.0, u.brake_front(), 0.0) + front_arm.cross(&f_front)),
    };

    let mut out = [Wrench::default(); 4];
    for (slot, b) in out.iter_mut().zip(Body::ALL) {
        *slot = match b {
            Body::RearBody => rear_body,
            Body::FrontBody => front_body,
            Body::FrontWheel => front_wheel,
            Body::RearWheel => rear_wheel,
        };
    }
    out
}

fn world_inertia_of(k: &BodyKinematics, p: &ParameterSet) -> Matrix3<f64> {
    let r = k.rotation.0;
    r * p.inertia(k.body) * r.transpose()
}

fn raw_mass_matrix(kin: &[BodyKinematics; 4], p: &ParameterSet) -> Matrix7 {
    let mut m = Matrix7::zeros();
    for k in kin {
        let jt = world_inertia_of(k, p);
        m += p.mass(k.body) * k.jv.transpose() * k.jv + k.jw.transpose() * jt * k.jw;
    }
    m
}

fn symmetrized(m: Matrix7) -> Matrix7 {
    (m + m.transpose()) * 0.5
}

fn applied_efforts_from(kin: &[BodyKinematics; 4], wrenches: &[Wrench; 4]) -> Vector7 {
    kin.iter()
        .zip(wrenches)
        .map(|(k, w)| k.jv.transpose() * w.force + k.jw.transpose() * w.moment)
        .sum()
}

fn residual_efforts_from(kin: &[BodyKinematics; 4], p: &ParameterSet) -> Vector7 {
    kin.iter()
        .map(|k| {
            let jt = world_inertia_of(k, p);
            let w = k.w_world;
            p.mass(k.body) * k.jv.transpose() * k.a_res + k.jw.transpose() * (jt * k.g_res + w.cross(&(jt * w)))
        })
        .sum()
}

/// 1-norm condition number of a 7×7 matrix, or `None` when singular.
fn condition_number(m: &Matrix7) -> Option<f64> {
    let inv = m.lu().try_inverse()?;
    let norm1 = |a: &Matrix7| a.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    Some(norm1(m) * norm1(&inv))
}

fn checked(m: Matrix7) -> Result<Matrix7> {
    match condition_number(&m) {
        Some(c) if c <= MAX_CONDITION => Ok(m),
        Some(c) => Err(Error::DegenerateConfiguration(c)),
        None => Err(Error::DegenerateConfiguration(f64::INFINITY)),
    }
}

pub fn mass_matrix(q: &Vector7, p: &ParameterSet) -> Result<Matrix7> {
    check_roll(q[gen::PHI])?;
    let kin = all_body_kinematics(q, &Vector7::zeros(), p);
    checked(symmetrized(raw_mass_matrix(&kin, p)))
}

pub fn applied_efforts(
    q: &Vector7,
    v: &Vector7,
    tires: &TireForceState,
    u: &InputVector,
    p: &ParameterSet,
) -> Vector7 {
    let kin = all_body_kinematics(q, v, p);
    applied_efforts_from(&kin, &applied_wrenches(q, v, tires, u, p))
}

pub fn residual_efforts(q: &Vector7, v: &Vector7, p: &ParameterSet) -> Vector7 {
    residual_efforts_from(&all_body_kinematics(q, v, p), p)
}

/// Everything the equations of motion need at one state.
#[derive(Clone, Copy, Debug)]
pub struct Assembly {
    pub mass: Matrix7,
    pub applied: Vector7,
    pub residual: Vector7,
}

pub fn assemble(
    q: &Vector7,
    v: &Vector7,
    tires: &TireForceState,
    u: &InputVector,
    p: &ParameterSet,
) -> Result<Assembly> {
    check_roll(q[gen::PHI])?;
    let kin = all_body_kinematics(q, v, p);
    Ok(Assembly {
        mass: symmetrized(raw_mass_matrix(&kin, p)),
        applied: applied_efforts_from(&kin, &applied_wrenches(q, v, tires, u, p)),
        residual: residual_efforts_from(&kin, p),
    })
}

impl Assembly {
    /// Solves `M v̇ = Q_a − Q_r` by LU with partial pivoting.
    pub fn solve(&self) -> Result<Vector7> {
        let lu = self.mass.lu();
        let inv = lu.try_inverse().ok_or(Error::DegenerateConfiguration(f64::INFINITY))?;
        let norm1 = |a: &Matrix7| a.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
        let cond = norm1(&self.mass) * norm1(&inv);
        if !(cond <= MAX_CONDITION) {
            return Err(Error::DegenerateConfiguration(cond));
        }
        let rhs = self.applied - self.residual;
        lu.solve(&rhs).ok_or(Error::DegenerateConfiguration(f64::INFINITY))
    }
}

/// Generalized acceleration `v̇` solving `M v̇ = Q_a − Q_r`.
pub fn generalized_accel(
    q: &Vector7,
    v: &Vector7,
    tires: &TireForceState,
    u: &InputVector,
    p: &ParameterSet,
) -> Result<Vector7> {
    assemble(q, v, tires, u, p)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tire::static_loads;

    fn params() -> ParameterSet {
        ParameterSet::gsxr1000()
    }

    #[test]
    fn upright_inertia_unrotated() {
        let p = params();
        assert_eq!(world_inertia(Body::RearWheel, &Vector7::zeros(), &p), p.j_rr);
    }

    #[test]
    fn yawed_inertia_matches_explicit_product() {
        let p = params();
        let mut q = Vector7::zeros();
        q[gen::PSI] = std::f64::consts::FRAC_PI_2;
        let r = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let expected = r * p.j_gr * r.transpose();
        assert!((world_inertia(Body::RearBody, &q, &p) - expected).abs().max() < 1e-13);
    }

    #[test]
    fn mass_matrix_upright() {
        let p = params();
        let kin = all_body_kinematics(&Vector7::zeros(), &Vector7::zeros(), &p);
        let raw = raw_mass_matrix(&kin, &p);
        assert!((raw - raw.transpose()).abs().max() < 1e-10);
        let m = mass_matrix(&Vector7::zeros(), &p).unwrap();
        assert!((m[(0, 0)] - 303.0).abs() < 1e-9);
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn static_upright_equilibrium() {
        let p = params();
        let tires = TireForceState::static_only(static_loads(&p).unwrap());
        let q = Vector7::zeros();
        let v = Vector7::zeros();
        let qa = applied_efforts(&q, &v, &tires, &InputVector::zeros(), &p);
        for ch in [0, 1, gen::PSI, gen::PHI, gen::DELTA] {
            assert!(qa[ch].abs() < 1e-9, "channel {ch}: {}", qa[ch]);
        }
        let vdot = generalized_accel(&q, &v, &tires, &InputVector::zeros(), &p).unwrap();
        assert!(vdot.abs().max() < 1e-8, "{vdot}");
    }

    #[test]
    fn drive_torque_on_rear_wheel() {
        let p = params();
        let tires = TireForceState::static_only(static_loads(&p).unwrap());
        let u = InputVector::new(0.0, 100.0, 0.0, 0.0);
        let w = applied_wrenches(&Vector7::zeros(), &Vector7::zeros(), &tires, &u, &p);
        // the vertical load has no moment arm about the upright contact point
        assert!((w[3].moment - Vector3::new(0.0, 100.0, 0.0)).abs().max() < 1e-12);
    }

    #[test]
    fn drag_at_100_kph() {
        let p = params();
        let v = 27.78;
        let expected = 0.5 * 1.206 * 0.52 * 0.6 * v * v;
        assert!((drag_force(v, &p) - expected).abs() < 1e-12);
        assert!((expected - 145.18).abs() < 0.01);

        let mut vel = Vector7::zeros();
        vel[0] = v;
        let qa = applied_efforts(&Vector7::zeros(), &vel, &TireForceState::default(), &InputVector::zeros(), &p);
        assert!((qa[0] + expected).abs() < 1e-9);
    }

    #[test]
    fn steering_torque_projection() {
        let p = params();
        let u = InputVector::new(1.0, 0.0, 0.0, 0.0);
        let qa = applied_efforts(&Vector7::zeros(), &Vector7::zeros(), &TireForceState::default(), &u, &p);
        let gravity_only = applied_efforts(
            &Vector7::zeros(),
            &Vector7::zeros(),
            &TireForceState::default(),
            &InputVector::zeros(),
            &p,
        );
        let d = qa - gravity_only;
        assert!((d[gen::DELTA] - p.eps.cos()).abs() < 1e-14);
        assert!((d[gen::PSI] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn residuals_vanish_without_rotation() {
        let p = params();
        assert_eq!(residual_efforts(&Vector7::zeros(), &Vector7::zeros(), &p), Vector7::zeros());
        let mut v = Vector7::zeros();
        v[0] = 20.0;
        assert_eq!(residual_efforts(&Vector7::zeros(), &v, &p), Vector7::zeros());
    }

    #[test]
    fn gyroscopic_term_of_front_wheel() {
        // roll rate 1 and front spin 50 at upright: only the front wheel spins,
        // its gyroscopic moment is ω × J̃ω with ω = (1, 50, 0).
        let p = params();
        let mut v = Vector7::zeros();
        v[gen::PHI] = 1.0;
        v[gen::THETA_F] = 50.0;
        let q = Vector7::zeros();
        let kin = all_body_kinematics(&q, &v, &p);
        let k = &kin[2];
        assert_eq!(k.body, Body::FrontWheel);
        let w = Vector3::new(1.0, 50.0, 0.0);
        assert!((k.w_world - w).abs().max() < 1e-12);
        let jt = world_inertia(Body::FrontWheel, &q, &p);
        let gyro = w.cross(&(jt * w));
        // J_Rf is diag(0, I, 0), so J̃ω = (0, 50 I, 0) and ω × J̃ω = (0, 0, 50 I)
        assert!((gyro - Vector3::new(0.0, 0.0, 50.0 * 0.484)).abs().max() < 1e-12);

        let mut v_no_spin = v;
        v_no_spin[gen::THETA_F] = 0.0;
        let with = residual_efforts(&q, &v, &p);
        let without = residual_efforts(&q, &v_no_spin, &p);
        let diff = with - without;
        // J̃ g_res has no spin part because Ṙ e_y θ̇ lies along z, outside the
        // wheel's inertia; the whole difference is the gyroscopic moment along z.
        assert!((diff[gen::PSI] - 50.0 * 0.484).abs() < 1e-9, "{diff}");
    }
}
