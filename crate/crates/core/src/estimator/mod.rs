//! Rectilinear trim, linearization, IMU measurement model, LQR observer gain
//! and the Luenberger observer.

mod measurement;
mod observer;
mod riccati;

use nalgebra::{Complex, SMatrix, Vector4, Vector5};

use crate::error::{Error, Result};
use crate::params::ParameterSet;
use crate::simulator::extended_rhs;
use crate::state::{ext, ExtendedState, InputVector, Vector14};

pub use measurement::{
    measurements_table, read_measurements, synthesize_measurements, write_measurements, Measurement, NoiseSpec,
    CSV_HEADER as MEASUREMENT_HEADER,
};
pub use observer::{no_slippage_estimate, observer_step, run_observer, DiscreteObserver, Estimate};
pub use riccati::{
    care, check_detectability, design_gain, design_gain_with, designed_abscissa, residual_tolerance, GainDesign,
    RESIDUAL_TOLERANCE, UnobservableModes,
};

pub type Matrix14 = SMatrix<f64, 14, 14>;
pub type Matrix14x4 = SMatrix<f64, 14, 4>;
pub type Matrix4x14 = SMatrix<f64, 4, 14>;
pub type Matrix2x14 = SMatrix<f64, 2, 14>;
pub type Matrix4 = nalgebra::Matrix4<f64>;

/// Trim speeds accepted by [`find_trim`], m/s.
pub const TRIM_SPEED_RANGE: (f64, f64) = (5.0, 60.0);
pub const TRIM_TOLERANCE: f64 = 1e-8;
pub const TRIM_MAX_ITERATIONS: usize = 50;

/// Rectilinear equilibrium `(X*, u*)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrimPoint {
    pub x_star: ExtendedState,
    pub u_star: InputVector,
    pub residual_norm: f64,
    pub iterations: usize,
}

impl TrimPoint {
    pub fn speed(&self) -> f64 {
        self.x_star.0[ext::VX]
    }
}

const UNKNOWNS: [usize; 4] = [ext::DTHETA_F, ext::DTHETA_R, ext::FFX, ext::FRX];
const RESIDUALS: [usize; 5] = [ext::VX, ext::DTHETA_F, ext::DTHETA_R, ext::FFX, ext::FRX];

fn trim_point(v: f64, z: &Vector5<f64>) -> (ExtendedState, InputVector) {
    let mut x = ExtendedState::zeros();
    x.0[ext::VX] = v;
    for (i, &k) in UNKNOWNS.iter().enumerate() {
        x.0[k] = z[i];
    }
    (x, InputVector::new(0.0, z[4], 0.0, 0.0))
}

fn trim_residual(v: f64, z: &Vector5<f64>, p: &ParameterSet) -> Result<(Vector5<f64>, Vector14)> {
    let (x, u) = trim_point(v, z);
    let h = extended_rhs(&x, &u, p)?;
    Ok((Vector5::from_fn(|i, _| h[RESIDUALS[i]]), h))
}

/// Newton iteration on `(θ̇_f, θ̇_r, F_fx, F_rx, τ_D)` with `v_x = v_target`
/// and every lateral entry pinned at zero, started from pure rolling.
pub fn find_trim(v_target: f64, p: &ParameterSet) -> Result<TrimPoint> {
    find_trim_logged(v_target, p, |_, _| {})
}

/// [`find_trim`], reporting `(iteration, ‖h‖∞)` before every Newton step.
pub fn find_trim_logged(v_target: f64, p: &ParameterSet, mut log: impl FnMut(usize, f64)) -> Result<TrimPoint> {
    let (lo, hi) = TRIM_SPEED_RANGE;
    if !(v_target >= lo && v_target <= hi) {
        return Err(Error::SpeedOutOfRange(v_target));
    }
    let drag = crate::multibody::drag_force(v_target, p);
    let mut z = Vector5::new(v_target / p.r_f, v_target / p.r_r, 0.0, drag, p.r_r * drag);

    let mut last = f64::INFINITY;
    for it in 0..=TRIM_MAX_ITERATIONS {
        let (r, h) = trim_residual(v_target, &z, p)?;
        let norm = h.amax();
        log(it, norm);
        last = norm;
        if norm < TRIM_TOLERANCE {
            let (x_star, u_star) = trim_point(v_target, &z);
            return Ok(TrimPoint {
                x_star,
                u_star,
                residual_norm: norm,
                iterations: it,
            });
        }
        if it == TRIM_MAX_ITERATIONS {
            break;
        }
        let mut jac = SMatrix::<f64, 5, 5>::zeros();
        for j in 0..5 {
            let step = 1e-6 * z[j].abs().max(1.0);
            let mut zp = z;
            let mut zm = z;
            zp[j] += step;
            zm[j] -= step;
            let col = (trim_residual(v_target, &zp, p)?.0 - trim_residual(v_target, &zm, p)?.0) / (2.0 * step);
            jac.set_column(j, &col);
        }
        let dz = jac.lu().solve(&(-r)).ok_or(Error::SingularJacobian("trim Newton step"))?;
        z += dz;
        if !z.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(Error::TrimNoConvergence {
        iterations: TRIM_MAX_ITERATIONS,
        residual: last,
    })
}

/// Relative tolerance between the full- and half-step difference columns.
pub const LINEARIZATION_CHECK: f64 = 1e-4;

fn central_column(
    tp: &TrimPoint,
    p: &ParameterSet,
    perturb: impl Fn(&mut ExtendedState, &mut InputVector, f64),
    step: f64,
) -> Result<Vector14> {
    let (mut xp, mut up) = (tp.x_star, tp.u_star);
    let (mut xm, mut um) = (tp.x_star, tp.u_star);
    perturb(&mut xp, &mut up, step);
    perturb(&mut xm, &mut um, -step);
    Ok((extended_rhs(&xp, &up, p)? - extended_rhs(&xm, &um, p)?) / (2.0 * step))
}

fn validated_column(
    tp: &TrimPoint,
    p: &ParameterSet,
    column: usize,
    base: f64,
    perturb: impl Fn(&mut ExtendedState, &mut InputVector, f64) + Copy,
) -> Result<Vector14> {
    let step = 1e-6 * base.abs().max(1.0);
    let full = central_column(tp, p, perturb, step)?;
    let half = central_column(tp, p, perturb, 0.5 * step)?;
    let deviation = (full - half).amax() / full.amax().max(1.0);
    if deviation > LINEARIZATION_CHECK {
        return Err(Error::Linearization { column, deviation });
    }
    Ok(full)
}

/// `A = ∂h/∂X`, `B = ∂h/∂u` at the trim by central differences. The copy
/// rows of `A` are set exactly.
pub fn linearize(tp: &TrimPoint, p: &ParameterSet) -> Result<(Matrix14, Matrix14x4)> {
    let mut a = Matrix14::zeros();
    for j in 0..14 {
        let col = validated_column(tp, p, j, tp.x_star.0[j], move |x, _, s| x.0[j] += s)?;
        a.set_column(j, &col);
    }
    let mut b = Matrix14x4::zeros();
    for j in 0..4 {
        let col = validated_column(tp, p, 14 + j, tp.u_star.0[j], move |_, u, s| u.0[j] += s)?;
        b.set_column(j, &col);
    }
    for (row, col) in [(ext::PSI, ext::DPSI), (ext::PHI, ext::DPHI), (ext::DELTA, ext::DDELTA)] {
        a.row_mut(row).fill(0.0);
        a[(row, col)] = 1.0;
        b.row_mut(row).fill(0.0);
    }
    Ok((a, b))
}

/// `H` picks `(v_x, v_y)` out of the extended state.
pub fn selector_h() -> Matrix2x14 {
    let mut h = Matrix2x14::zeros();
    h[(0, ext::VX)] = 1.0;
    h[(1, ext::VY)] = 1.0;
    h
}

/// `F` picks `(ψ̇, φ̇)` out of the extended state.
pub fn selector_f() -> Matrix2x14 {
    let mut f = Matrix2x14::zeros();
    f[(0, ext::DPSI)] = 1.0;
    f[(1, ext::DPHI)] = 1.0;
    f
}

/// `C = [H A; F]`, `D = [H B; 0]`. Rows are ordered `(v̇_x, v̇_y, ψ̇, φ̇)`.
pub fn measurement_model(a: &Matrix14, b: &Matrix14x4) -> (Matrix4x14, Matrix4) {
    let h = selector_h();
    let mut c = Matrix4x14::zeros();
    c.fixed_rows_mut::<2>(0).copy_from(&(h * a));
    c.fixed_rows_mut::<2>(2).copy_from(&selector_f());
    let mut d = Matrix4::zeros();
    d.fixed_rows_mut::<2>(0).copy_from(&(h * b));
    (c, d)
}

/// Everything needed to run the observer around one trim.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearObserverDesign {
    pub trim: TrimPoint,
    pub a: Matrix14,
    pub b: Matrix14x4,
    pub c: Matrix4x14,
    pub d: Matrix4,
    pub g: Matrix14x4,
    pub h: Matrix2x14,
    pub f: Matrix2x14,
    pub q_w: Matrix14,
    pub r_w: Matrix4,
    /// Filter Riccati solution.
    pub p: Matrix14,
    pub closed_loop_spectrum: Vec<Complex<f64>>,
    pub riccati_residual: f64,
    pub riccati_tolerance: f64,
    /// Unobservable eigenvalues of `A` left out of the gain design.
    pub excluded_modes: Vec<Complex<f64>>,
    /// Measurement at the trim, subtracted before the innovation.
    pub s_star: Vector4<f64>,
}

/// Trim-to-gain pipeline at one speed.
pub fn design_observer(
    tp: &TrimPoint,
    p: &ParameterSet,
    q_w: &Matrix14,
    r_w: &Matrix4,
    unobservable: UnobservableModes,
) -> Result<LinearObserverDesign> {
    let (a, b) = linearize(tp, p)?;
    let (c, d) = measurement_model(&a, &b);
    let gain = design_gain_with(&a, &c, q_w, r_w, unobservable)?;
    let h = extended_rhs(&tp.x_star, &tp.u_star, p)?;
    let s_star = Vector4::new(h[ext::VX], h[ext::VY], tp.x_star.0[ext::DPSI], tp.x_star.0[ext::DPHI]);
    Ok(LinearObserverDesign {
        trim: *tp,
        a,
        b,
        c,
        d,
        g: gain.g,
        h: selector_h(),
        f: selector_f(),
        q_w: *q_w,
        r_w: *r_w,
        p: gain.p,
        closed_loop_spectrum: gain.spectrum,
        riccati_residual: gain.residual,
        riccati_tolerance: gain.tolerance,
        excluded_modes: gain.excluded,
        s_star,
    })
}

impl LinearObserverDesign {
    /// `A − G C`
    pub fn closed_loop(&self) -> Matrix14 {
        self.a - self.g * self.c
    }

    /// Largest real part of `eig(A − G C)`, excluded modes included.
    pub fn max_real_eigenvalue(&self) -> f64 {
        self.closed_loop_spectrum.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest real part over the designed part of the spectrum.
    pub fn designed_abscissa(&self) -> f64 {
        designed_abscissa(&self.closed_loop_spectrum, &self.excluded_modes)
    }
}
