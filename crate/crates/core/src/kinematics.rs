//! Frame chain of the four bodies and their velocity kinematics.
//!
//! Poses are written once, generically over [`Real`], and differentiated with
//! hyper-dual numbers: first-order seeds give the velocity Jacobians, a
//! doubled seed along `v` gives the residual (velocity-product) accelerations.
//! Residuals follow the decomposition `a = Jv·v̇ + a_res`,
//! `gamma = Jw·v̇ + g_res`.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::dual::{HyperDual, Real};
use crate::error::{Error, Result};
use crate::params::ParameterSet;
use crate::state::{gen, Vector7};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Body {
    /// `G_r`: frame, engine, tank, swinging arm and rider.
    RearBody,
    /// `G_f`: steering assembly and front suspension.
    FrontBody,
    /// `R_f`
    FrontWheel,
    /// `R_r`
    RearWheel,
}

impl Body {
    pub const ALL: [Body; 4] = [Body::RearBody, Body::FrontBody, Body::FrontWheel, Body::RearWheel];

    pub fn name(self) -> &'static str {
        match self {
            Body::RearBody => "G_r",
            Body::FrontBody => "G_f",
            Body::FrontWheel => "R_f",
            Body::RearWheel => "R_r",
        }
    }

    /// Index of the body's own spin coordinate, for wheels.
    fn spin_index(self) -> Option<usize> {
        match self {
            Body::FrontWheel => Some(gen::THETA_F),
            Body::RearWheel => Some(gen::THETA_R),
            _ => None,
        }
    }
}

type V3<T> = [T; 3];
type M3<T> = [[T; 3]; 3];

fn mat_mul<T: Real>(a: &M3<T>, b: &M3<T>) -> M3<T> {
    let mut out = [[T::cst(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

fn mat_vec<T: Real>(a: &M3<T>, v: &V3<T>) -> V3<T> {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

fn add<T: Real>(a: &V3<T>, b: &V3<T>) -> V3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn cst3<T: Real>(v: [f64; 3]) -> V3<T> {
    [T::cst(v[0]), T::cst(v[1]), T::cst(v[2])]
}

pub(crate) fn rot_x_t<T: Real>(a: T) -> M3<T> {
    let (s, c, o, z) = (a.sin(), a.cos(), T::cst(1.0), T::cst(0.0));
    [[o, z, z], [z, c, -s], [z, s, c]]
}

pub(crate) fn rot_y_t<T: Real>(a: T) -> M3<T> {
    let (s, c, o, z) = (a.sin(), a.cos(), T::cst(1.0), T::cst(0.0));
    [[c, z, -s], [z, o, z], [s, z, c]]
}

pub(crate) fn rot_z_t<T: Real>(a: T) -> M3<T> {
    let (s, c, o, z) = (a.sin(), a.cos(), T::cst(1.0), T::cst(0.0));
    [[c, -s, z], [s, c, z], [z, z, o]]
}

fn to_matrix(m: &M3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
    )
}

/// A proper rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(pub Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// `‖RᵀR − I‖∞`
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).abs().max()
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// Roll rotation about the x axis.
pub fn rot_x(angle: f64) -> Rotation {
    Rotation(to_matrix(&rot_x_t(angle)))
}

/// Caster rotation about the y axis with layout
/// `[[c, 0, -s], [0, 1, 0], [s, 0, c]]`: a positive angle tilts +x toward +z.
pub fn rot_y(angle: f64) -> Rotation {
    Rotation(to_matrix(&rot_y_t(angle)))
}

/// Yaw / steer rotation about the z axis.
pub fn rot_z(angle: f64) -> Rotation {
    Rotation(to_matrix(&rot_z_t(angle)))
}

/// Extracts `(W32, W13, W21)` from a skew-symmetric matrix.
pub fn skew_to_vector(w: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let asym = (w + w.transpose()).abs().max();
    if !(asym < 1e-9) {
        return Err(Error::InvalidState(format!(
            "matrix is not skew-symmetric (max |W + W^T| = {asym:.3e})"
        )));
    }
    Ok(Vector3::new(w[(2, 1)], w[(0, 2)], w[(1, 0)]))
}

/// vee(A·Bᵀ) without forming the product.
fn vee_abt<T: Real>(a: &M3<T>, b: &M3<T>) -> V3<T> {
    let e = |i: usize, j: usize| a[i][0] * b[j][0] + a[i][1] * b[j][1] + a[i][2] * b[j][2];
    [e(2, 1), e(0, 2), e(1, 0)]
}

/// Body pose relative to V in frame V, as a function of roll and steer.
fn pose_v<T: Real>(body: Body, phi: T, delta: T, p: &ParameterSet) -> (V3<T>, M3<T>) {
    let r_phi = rot_x_t(phi);
    match body {
        Body::RearBody => (mat_vec(&r_phi, &cst3([0.0, 0.0, p.h])), r_phi),
        Body::RearWheel => (mat_vec(&r_phi, &cst3([-p.l_r, 0.0, p.r_r])), r_phi),
        Body::FrontBody | Body::FrontWheel => {
            let offset = if body == Body::FrontBody {
                [p.e, 0.0, p.f]
            } else {
                [p.c, 0.0, -p.s]
            };
            let r_eps = rot_y_t(T::cst(p.eps));
            let r_delta = rot_z_t(delta);
            let r_pe = mat_mul(&r_phi, &r_eps);
            let local = add(&cst3([p.a, 0.0, 0.0]), &mat_vec(&r_delta, &cst3(offset)));
            (mat_vec(&r_pe, &local), mat_mul(&r_pe, &r_delta))
        }
    }
}

fn pose_world<T: Real>(body: Body, q: &[T; 5], p: &ParameterSet) -> (V3<T>, M3<T>) {
    let [x, y, psi, phi, delta] = *q;
    let (r_v, rot_v) = pose_v(body, phi, delta, p);
    let r_ov = rot_z_t(psi);
    let r = mat_vec(&r_ov, &r_v);
    ([x + r[0], y + r[1], r[2]], mat_mul(&r_ov, &rot_v))
}

/// `(r_Vi^V, R_Vi)` at the coordinates `q`.
pub fn body_pose_v(body: Body, q: &Vector7, p: &ParameterSet) -> (Vector3<f64>, Rotation) {
    let (r, rot) = pose_v(body, q[gen::PHI], q[gen::DELTA], p);
    (Vector3::from(r), Rotation(to_matrix(&rot)))
}

/// `(r_Oi^O, R_Oi)` at the coordinates `q`.
pub fn body_pose_world(body: Body, q: &Vector7, p: &ParameterSet) -> (Vector3<f64>, Rotation) {
    let q5 = [q[0], q[1], q[2], q[3], q[4]];
    let (r, rot) = pose_world(body, &q5, p);
    (Vector3::from(r), Rotation(to_matrix(&rot)))
}

/// Pose, velocities, velocity Jacobians and residual accelerations of one
/// body, all in the inertial frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyKinematics {
    pub body: Body,
    pub r_world: Vector3<f64>,
    pub rotation: Rotation,
    pub v_world: Vector3<f64>,
    pub w_world: Vector3<f64>,
    /// `∂v_Oi/∂v`
    pub jv: SMatrix<f64, 3, 7>,
    /// `∂ω_Oi/∂v`
    pub jw: SMatrix<f64, 3, 7>,
    pub a_res: Vector3<f64>,
    pub g_res: Vector3<f64>,
}

fn spin_vector(body: Body, v: &Vector7) -> [f64; 3] {
    match body.spin_index() {
        Some(k) => [0.0, v[k], 0.0],
        None => [0.0; 3],
    }
}

pub fn body_kinematics(body: Body, q: &Vector7, v: &Vector7, p: &ParameterSet) -> BodyKinematics {
    let mut jv = SMatrix::<f64, 3, 7>::zeros();
    let mut jw = SMatrix::<f64, 3, 7>::zeros();
    let mut rot = [[0.0; 3]; 3];
    let mut r0 = [0.0; 3];

    // Jacobian columns for the five pose coordinates.
    for j in 0..5 {
        let qd: [HyperDual; 5] =
            std::array::from_fn(|k| HyperDual::first(q[k], if k == j { 1.0 } else { 0.0 }));
        let (r, rm) = pose_world(body, &qd, p);
        let rot_f: M3<f64> = std::array::from_fn(|a| std::array::from_fn(|b| rm[a][b].re));
        let drot: M3<f64> = std::array::from_fn(|a| std::array::from_fn(|b| rm[a][b].e1));
        for i in 0..3 {
            jv[(i, j)] = r[i].e1;
        }
        let w = vee_abt(&drot, &rot_f);
        for i in 0..3 {
            jw[(i, j)] = w[i];
        }
        if j == 0 {
            rot = rot_f;
            r0 = [r[0].re, r[1].re, r[2].re];
        }
    }
    // Own spin about the local y axis.
    if let Some(k) = body.spin_index() {
        for i in 0..3 {
            jw[(i, k)] = rot[i][1];
        }
    }

    // Second directional derivative along v for the residual terms.
    let qd: [HyperDual; 5] = std::array::from_fn(|k| HyperDual::both(q[k], v[k]));
    let (r, rm) = pose_world(body, &qd, p);
    let rdot: M3<f64> = std::array::from_fn(|a| std::array::from_fn(|b| rm[a][b].e1));
    let rddot: M3<f64> = std::array::from_fn(|a| std::array::from_fn(|b| rm[a][b].e12));
    let a_res = Vector3::new(r[0].e12, r[1].e12, r[2].e12);
    let g1 = vee_abt(&rddot, &rot);
    let g2 = vee_abt(&rdot, &rdot);
    let g3 = mat_vec(&rdot, &spin_vector(body, v));
    let g_res = Vector3::new(g1[0] + g2[0] + g3[0], g1[1] + g2[1] + g3[1], g1[2] + g2[2] + g3[2]);

    BodyKinematics {
        body,
        r_world: Vector3::from(r0),
        rotation: Rotation(to_matrix(&rot)),
        v_world: jv * v,
        w_world: jw * v,
        jv,
        jw,
        a_res,
        g_res,
    }
}

/// Kinematics of all four bodies, in [`Body::ALL`] order.
pub fn all_body_kinematics(q: &Vector7, v: &Vector7, p: &ParameterSet) -> [BodyKinematics; 4] {
    Body::ALL.map(|b| body_kinematics(b, q, v, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn params() -> ParameterSet {
        ParameterSet::gsxr1000()
    }

    #[test]
    fn elementary_rotations() {
        assert_eq!(rot_z(0.0).0, Matrix3::identity());
        let y = rot_x(FRAC_PI_2).0 * Vector3::new(0.0, 1.0, 0.0);
        assert!((y - Vector3::new(0.0, 0.0, 1.0)).abs().max() < 1e-15);
        let eps = 24f64.to_radians();
        let id = (rot_y(eps) * rot_y(-eps)).0;
        assert!((id - Matrix3::identity()).abs().max() < 1e-15);
        // caster layout: -sin in row 1, column 3
        assert!((rot_y(eps).0[(0, 2)] + eps.sin()).abs() < 1e-16);
        assert!((rot_y(eps).0[(2, 0)] - eps.sin()).abs() < 1e-16);
    }

    #[test]
    fn upright_poses() {
        let p = params();
        let q = Vector7::zeros();
        let (r, rot) = body_pose_v(Body::RearBody, &q, &p);
        assert_eq!(r, Vector3::new(0.0, 0.0, 0.5712));
        assert_eq!(rot.0, Matrix3::identity());
        let (r, _) = body_pose_v(Body::RearWheel, &q, &p);
        assert_eq!(r, Vector3::new(-0.643, 0.0, 0.297));
    }

    #[test]
    fn front_wheel_chain_matches_explicit_product() {
        let p = params();
        let (r, _) = body_pose_v(Body::FrontWheel, &Vector7::zeros(), &p);
        let (se, ce) = p.eps.sin_cos();
        // R_eps [a + c, 0, -s], written out by hand
        let x = ce * (p.a + p.c) + se * p.s;
        let z = se * (p.a + p.c) - ce * p.s;
        assert!((r - Vector3::new(x, 0.0, z)).abs().max() < 1e-15);
        // The chain lands the front wheel centre above the front contact point.
        assert!((r[0] - p.l_f).abs() < 1e-3, "{}", r[0]);
        assert!((r[2] - p.r_f).abs() < 1e-3, "{}", r[2]);
    }

    #[test]
    fn world_pose_translation_and_yaw() {
        let p = params();
        let mut q = Vector7::zeros();
        q[gen::X] = 1.0;
        q[gen::Y] = 2.0;
        let (r, _) = body_pose_world(Body::RearBody, &q, &p);
        assert_eq!(r, Vector3::new(1.0, 2.0, 0.5712));

        let mut q = Vector7::zeros();
        q[gen::PSI] = FRAC_PI_2;
        let (r, _) = body_pose_world(Body::RearWheel, &q, &p);
        let expected = rot_z(FRAC_PI_2).0 * Vector3::new(-p.l_r, 0.0, p.r_r);
        assert!((r - expected).abs().max() < 1e-15);
        assert!((r - Vector3::new(0.0, -0.643, 0.297)).abs().max() < 1e-15);
    }

    #[test]
    fn pure_translation() {
        let p = params();
        let mut v = Vector7::zeros();
        v[0] = 10.0;
        let k = body_kinematics(Body::RearBody, &Vector7::zeros(), &v, &p);
        assert_eq!(k.v_world, Vector3::new(10.0, 0.0, 0.0));
        assert_eq!(k.w_world, Vector3::zeros());
        assert_eq!(k.a_res, Vector3::zeros());
    }

    #[test]
    fn roll_rate_on_rear_body() {
        let p = params();
        let mut v = Vector7::zeros();
        v[gen::PHI] = 1.0;
        let k = body_kinematics(Body::RearBody, &Vector7::zeros(), &v, &p);
        assert!((k.w_world - Vector3::new(1.0, 0.0, 0.0)).abs().max() < 1e-15);
        assert!((k.v_world - Vector3::new(0.0, -0.5712, 0.0)).abs().max() < 1e-15);
    }

    #[test]
    fn rear_wheel_spin() {
        let p = params();
        let mut v = Vector7::zeros();
        v[gen::THETA_R] = 5.0;
        let k = body_kinematics(Body::RearWheel, &Vector7::zeros(), &v, &p);
        assert_eq!(k.w_world, Vector3::new(0.0, 5.0, 0.0));
        assert_eq!(k.v_world, Vector3::zeros());
    }

    #[test]
    fn skew_extraction() {
        assert_eq!(skew_to_vector(&Matrix3::zeros()).unwrap(), Vector3::zeros());
        let w = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(skew_to_vector(&w.cross_matrix()).unwrap(), w);
        assert!(skew_to_vector(&Matrix3::identity()).is_err());

        // R = rot_x(phi(t)) with phi' = 2: dR/dt Rᵀ = vee^-1 (2, 0, 0)
        let phi: f64 = 0.3;
        let dphi = 2.0;
        let (s, c) = phi.sin_cos();
        let rdot = Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s) * dphi;
        let w = skew_to_vector(&(rdot * rot_x(phi).0.transpose())).unwrap();
        assert!((w - Vector3::new(2.0, 0.0, 0.0)).abs().max() < 1e-15);
    }

    #[test]
    fn upright_poses_lie_in_symmetry_plane() {
        let p = params();
        for b in Body::ALL {
            let (r, _) = body_pose_world(b, &Vector7::zeros(), &p);
            assert_eq!(r[1], 0.0, "{}", b.name());
        }
    }
}
