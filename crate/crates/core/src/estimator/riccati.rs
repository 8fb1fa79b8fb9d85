//! Continuous algebraic Riccati equation by the matrix sign function, polished
//! with Newton-Kleinman steps, plus the detectability test.

use nalgebra::{Complex, DMatrix, DVector, SMatrix};

use crate::error::{Error, Result};

const SIGN_MAX_ITERATIONS: usize = 100;
const SIGN_TOLERANCE: f64 = 1e-12;
const NEWTON_MAX_ITERATIONS: usize = 20;
/// Riccati residual target relative to `‖Q‖∞`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;
/// Relative singular-value floor of the PBH test.
const RANK_TOLERANCE: f64 = 1e-10;
/// Eigenvalues with `|Re λ|` below this times `max(1, ‖A‖∞)` are marginal.
const MARGINAL_TOLERANCE: f64 = 1e-10;

fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Compensated accumulator: exact products, error-tracked sums.
#[derive(Clone, Copy, Default)]
struct Accumulator {
    hi: f64,
    lo: f64,
}

impl Accumulator {
    fn add(&mut self, v: f64) {
        let s = self.hi + v;
        let bb = s - self.hi;
        self.lo += (self.hi - (s - bb)) + (v - bb);
        self.hi = s;
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.add(a.mul_add(b, -p));
    }

    fn add_triple(&mut self, a: f64, b: f64, c: f64) {
        let p = a * b;
        let e = a.mul_add(b, -p);
        self.add_product(p, c);
        self.add(e * c);
    }

    fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// `Aᵀ X + X A − X S X + Q`, evaluated with compensated sums so that the
/// result is limited by the accuracy of `X`, not by cancellation.
fn residual(a: &DMatrix<f64>, s: &DMatrix<f64>, q: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let mut acc = Accumulator::default();
        acc.add(q[(i, j)]);
        for k in 0..n {
            acc.add_product(a[(k, i)], x[(k, j)]);
            acc.add_product(x[(i, k)], a[(k, j)]);
            for l in 0..n {
                acc.add_triple(-x[(i, k)], s[(k, l)], x[(l, j)]);
            }
        }
        acc.value()
    })
}

/// Solves `Aᵀ X + X A + W = 0` through the Kronecker form.
fn lyapunov(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let lhs = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-w).as_slice());
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Riccati("singular Lyapunov operator".into()))?;
    Ok(symmetrize(&DMatrix::from_column_slice(n, n, sol.as_slice())))
}

fn log_abs_det(lu_diag: impl Iterator<Item = f64>) -> f64 {
    lu_diag.map(|d| d.abs().ln()).sum()
}

/// Sign of the Hamiltonian `[A −S; −Q −Aᵀ]` by the scaled Newton iteration.
fn sign_function(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.nrows() as f64;
    let mut z = h.clone();
    let mut previous = f64::INFINITY;
    for _ in 0..SIGN_MAX_ITERATIONS {
        let lu = z.clone().lu();
        let c = (log_abs_det(lu.u().diagonal().iter().copied()) / n).exp();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::Riccati("Hamiltonian has eigenvalues on the imaginary axis".into()))?;
        let next = (&z / c + inv * c) * 0.5;
        let change = norm_inf(&(&next - &z)) / norm_inf(&next);
        z = next;
        if !change.is_finite() {
            break;
        }
        // converged, or rounding has stalled the quadratic phase
        if change <= SIGN_TOLERANCE || (change < 1e-6 && change >= previous) {
            return Ok(z);
        }
        previous = change;
    }
    Err(Error::Riccati("sign-function iteration did not converge".into()))
}

fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    m.clone().complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Stabilizing solution of `Aᵀ X + X A − X B R⁻¹ Bᵀ X + Q = 0`.
pub fn care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let r_inv = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Riccati("R_w is not symmetric positive definite".into()))?
        .inverse();
    let s = symmetrize(&(b * r_inv * b.transpose()));

    let mut ham = DMatrix::<f64>::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(a);
    ham.view_mut((0, n), (n, n)).copy_from(&(-&s));
    ham.view_mut((n, 0), (n, n)).copy_from(&(-q));
    ham.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let w = sign_function(&ham)?;

    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::<f64>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::<f64>::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(w.view((0, 0), (n, n)) + &eye));
    rhs.view_mut((n, 0), (n, n)).copy_from(&w.view((n, 0), (n, n)));
    let x = symmetrize(
        &-lhs
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::Riccati(e.to_string()))?,
    );

    newton_kleinman(a, &s, q, x)
}

/// Newton refinement of a stabilizing `x0` in correction form,
/// `(A − S X)ᵀ Δ + Δ (A − S X) = −Res(X)`; returns the iterate with the
/// smallest residual.
fn newton_kleinman(a: &DMatrix<f64>, s: &DMatrix<f64>, q: &DMatrix<f64>, x0: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut x = x0;
    let mut res = residual(a, s, q, &x);
    let mut best = norm_inf(&res);
    let mut current = x.clone();
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let ak = a - s * &current;
        if spectral_abscissa(&ak) >= 0.0 {
            break;
        }
        current = symmetrize(&(&current + lyapunov(&ak, &res)?));
        res = residual(a, s, q, &current);
        let norm = norm_inf(&res);
        if norm < best {
            let gain = best / norm;
            best = norm;
            x = current.clone();
            if gain < 1.01 {
                break;
            }
        } else if norm > 10.0 * best {
            break;
        }
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Riccati("non-finite Riccati solution".into()));
    }
    Ok(x)
}

/// Residual accepted for a design: `1e-6 ‖Q‖∞`, or the rounding floor
/// `4 ε ‖A‖∞ ‖P‖∞` of a double-precision `P` when that is larger.
pub fn residual_tolerance(q_norm: f64, a_norm: f64, p_norm: f64) -> f64 {
    (RESIDUAL_TOLERANCE * q_norm).max(4.0 * f64::EPSILON * a_norm * p_norm)
}

/// What to do with unobservable modes on the imaginary axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum UnobservableModes {
    /// Fail with [`Error::NotDetectable`].
    #[default]
    Reject,
    /// Design on the complement of the marginal unobservable subspace. Those
    /// modes keep their eigenvalue in `A − G C`; unstable unobservable modes
    /// are still rejected.
    Exclude,
}

/// Gain, Riccati solution and closed-loop spectrum of one design.
#[derive(Clone, Debug, PartialEq)]
pub struct GainDesign<const N: usize, const M: usize> {
    pub g: SMatrix<f64, N, M>,
    pub p: SMatrix<f64, N, N>,
    /// Eigenvalues of `A − G C`.
    pub spectrum: Vec<Complex<f64>>,
    /// `‖A P + P Aᵀ − P Cᵀ R⁻¹ C P + Q‖∞` in the coordinates of the designed
    /// (detectable) subspace; the full space when nothing is excluded.
    pub residual: f64,
    /// Tolerance the residual was checked against, see [`residual_tolerance`].
    pub tolerance: f64,
    /// Unobservable eigenvalues left out of the design.
    pub excluded: Vec<Complex<f64>>,
}

impl<const N: usize, const M: usize> GainDesign<N, M> {
    /// Largest real part over the spectrum without the excluded modes.
    pub fn designed_abscissa(&self) -> f64 {
        designed_abscissa(&self.spectrum, &self.excluded)
    }
}

/// Largest real part of `spectrum` once each of `excluded` has been removed
/// (matched to the nearest remaining eigenvalue).
pub fn designed_abscissa(spectrum: &[Complex<f64>], excluded: &[Complex<f64>]) -> f64 {
    let mut rest = spectrum.to_vec();
    for z in excluded {
        if let Some((i, _)) = rest
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - z).norm().total_cmp(&(b.1 - z).norm()))
        {
            rest.remove(i);
        }
    }
    rest.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

fn to_dyn<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

/// Real parts below `−margin` count as strictly stable.
pub fn stability_margin(a: &DMatrix<f64>) -> f64 {
    MARGINAL_TOLERANCE * norm_inf(a).max(1.0)
}

struct UnobservableMode {
    lambda: Complex<f64>,
    vector: DVector<Complex<f64>>,
}

/// Modes with `Re λ ≥ −margin` that `C` cannot see (PBH rank test).
fn weakly_stable_unobservable(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Vec<UnobservableMode> {
    let (n, m) = (a.nrows(), c.nrows());
    let margin = stability_margin(a);
    let mut out = Vec::new();
    for lambda in a.clone().complex_eigenvalues().iter() {
        if lambda.re < -margin || lambda.im < 0.0 {
            continue;
        }
        let pbh = DMatrix::<Complex<f64>>::from_fn(n + m, n, |i, j| {
            if i < n {
                Complex::new(a[(i, j)], 0.0) - if i == j { *lambda } else { Complex::new(0.0, 0.0) }
            } else {
                Complex::new(c[(i - n, j)], 0.0)
            }
        });
        let svd = pbh.svd(false, true);
        let (k, lo) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, v)| (k, *v))
            .unwrap_or((0, 0.0));
        if lo <= RANK_TOLERANCE * svd.singular_values.max() {
            let v_t = svd.v_t.expect("requested");
            let vector = v_t.row(k).adjoint();
            out.push(UnobservableMode { lambda: *lambda, vector });
        }
    }
    out
}

/// Fails with [`Error::NotDetectable`] if a mode that is not strictly stable
/// is invisible to `C` (Popov-Belevitch-Hautus test). Real parts within
/// [`stability_margin`] of the imaginary axis count as not strictly stable.
pub fn check_detectability<const N: usize, const M: usize>(
    a: &SMatrix<f64, N, N>,
    c: &SMatrix<f64, M, N>,
) -> Result<()> {
    match weakly_stable_unobservable(&to_dyn(a), &to_dyn(c)).first() {
        Some(mode) => Err(Error::NotDetectable {
            re: mode.lambda.re,
            im: mode.lambda.im,
        }),
        None => Ok(()),
    }
}

/// Orthonormal basis of the complement of the real span of `modes`.
fn complement_basis(n: usize, modes: &[UnobservableMode]) -> DMatrix<f64> {
    let mut span: Vec<DVector<f64>> = Vec::new();
    for mode in modes {
        for part in [mode.vector.map(|z| z.re), mode.vector.map(|z| z.im)] {
            let mut v = part;
            for u in &span {
                let d = u.dot(&v);
                v -= u * d;
            }
            let norm = v.norm();
            if norm > 1e-8 {
                span.push(v / norm);
            }
        }
    }
    if span.is_empty() {
        return DMatrix::identity(n, n);
    }
    let mut projector = DMatrix::<f64>::identity(n, n);
    for u in &span {
        projector -= u * u.transpose();
    }
    let eig = nalgebra::SymmetricEigen::new(projector);
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    DMatrix::from_fn(n, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])])
}

/// Power-of-two diagonal scaling `d` such that `D⁻¹ A D` has comparable
/// row and column norms.
fn balancing(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut d = vec![1.0; n];
    let mut m = a.clone();
    for _ in 0..100 {
        let mut done = true;
        for i in 0..n {
            let c: f64 = (0..n).filter(|&k| k != i).map(|k| m[(k, i)].abs()).sum();
            let r: f64 = (0..n).filter(|&k| k != i).map(|k| m[(i, k)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let f = (r / c).sqrt().log2().round().exp2();
            if f != 1.0 && (c * f + r / f) < 0.95 * (c + r) {
                done = false;
                d[i] *= f;
                for k in 0..n {
                    m[(k, i)] *= f;
                    m[(i, k)] /= f;
                }
            }
        }
        if done {
            break;
        }
    }
    d
}

/// `G = P Cᵀ R_w⁻¹` with `P` the stabilizing solution of
/// `A P + P Aᵀ − P Cᵀ R_w⁻¹ C P + Q_w = 0`.
pub fn design_gain<const N: usize, const M: usize>(
    a: &SMatrix<f64, N, N>,
    c: &SMatrix<f64, M, N>,
    q_w: &SMatrix<f64, N, N>,
    r_w: &SMatrix<f64, M, M>,
) -> Result<GainDesign<N, M>> {
    design_gain_with(a, c, q_w, r_w, UnobservableModes::Reject)
}

pub fn design_gain_with<const N: usize, const M: usize>(
    a: &SMatrix<f64, N, N>,
    c: &SMatrix<f64, M, N>,
    q_w: &SMatrix<f64, N, N>,
    r_w: &SMatrix<f64, M, M>,
    policy: UnobservableModes,
) -> Result<GainDesign<N, M>> {
    if (q_w - q_w.transpose()).amax() > 1e-12 * q_w.amax().max(1.0) || q_w.cholesky().is_none() {
        return Err(Error::Riccati("Q_w is not symmetric positive definite".into()));
    }
    let r_inv = r_w
        .cholesky()
        .ok_or_else(|| Error::Riccati("R_w is not symmetric positive definite".into()))?
        .inverse();
    let (ad, cd) = (to_dyn(a), to_dyn(c));
    let margin = stability_margin(&ad);
    let modes = weakly_stable_unobservable(&ad, &cd);
    if let Some(mode) = modes
        .iter()
        .find(|m| policy == UnobservableModes::Reject || m.lambda.re > margin)
    {
        return Err(Error::NotDetectable {
            re: mode.lambda.re,
            im: mode.lambda.im,
        });
    }

    // x = T_o z on the detectable complement, then balanced z = diag(t) w
    let t_o = complement_basis(N, &modes);
    let k = t_o.ncols();
    let a_o = t_o.transpose() * &ad * &t_o;
    let c_o = &cd * &t_o;
    let q_o = t_o.transpose() * to_dyn(q_w) * &t_o;
    let t = balancing(&a_o);
    let a_s = DMatrix::from_fn(k, k, |i, j| a_o[(i, j)] * t[j] / t[i]);
    let c_s = DMatrix::from_fn(M, k, |i, j| c_o[(i, j)] * t[j]);
    let q_s = DMatrix::from_fn(k, k, |i, j| q_o[(i, j)] / (t[i] * t[j]));
    let ps = care(&a_s.transpose(), &c_s.transpose(), &q_s, &to_dyn(r_w))?;
    let p_o = DMatrix::from_fn(k, k, |i, j| ps[(i, j)] * t[i] * t[j]);
    let s_o = symmetrize(&(c_o.transpose() * to_dyn(&r_inv) * &c_o));
    let p_o = newton_kleinman(&a_o.transpose(), &s_o, &q_o, p_o)?;
    let pd = &t_o * &p_o * t_o.transpose();
    let p = SMatrix::<f64, N, N>::from_fn(|i, j| 0.5 * (pd[(i, j)] + pd[(j, i)]));

    let g = p * c.transpose() * r_inv;
    // residual of the equation actually solved, in the designed coordinates
    let residual = norm_inf(&residual(&a_o.transpose(), &s_o, &q_o, &p_o));
    let tolerance = residual_tolerance(norm_inf(&q_o), norm_inf(&a_o), norm_inf(&p_o));
    if !(residual < tolerance) {
        return Err(Error::Riccati(format!(
            "residual {residual:.3e} above tolerance {tolerance:.3e}"
        )));
    }
    let spectrum: Vec<Complex<f64>> = to_dyn(&(a - g * c)).complex_eigenvalues().iter().copied().collect();
    let mut excluded = Vec::new();
    for m in &modes {
        excluded.push(m.lambda);
        if m.lambda.im > 0.0 {
            excluded.push(m.lambda.conj());
        }
    }
    let design = GainDesign {
        g,
        p,
        spectrum,
        residual,
        tolerance,
        excluded,
    };
    let abscissa = design.designed_abscissa();
    if !(abscissa < 0.0) {
        return Err(Error::NotHurwitz(abscissa));
    }
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix1, Matrix2};

    #[test]
    fn scalar_hand_case() {
        let one = Matrix1::new(1.0);
        let d = design_gain(&Matrix1::new(-1.0), &one, &one, &one).unwrap();
        let expected = 2f64.sqrt() - 1.0;
        assert!((d.p[0] - expected).abs() < 1e-12);
        assert!((d.g[0] - expected).abs() < 1e-12);
        assert!((d.spectrum[0].re + 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unstable_scalar_plant() {
        // p² − 2p − 1 = 0 → p = 1 + √2
        let one = Matrix1::new(1.0);
        let d = design_gain(&Matrix1::new(1.0), &one, &one, &one).unwrap();
        assert!((d.p[0] - (1.0 + 2f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn double_integrator_closed_form() {
        // position measured, unit weights: b² = 1, a² = 2b + 1, c = ab
        // gives P = [[√3, 1], [1, √3]]
        let a = Matrix2::new(0.0, 1.0, 0.0, 0.0);
        let c = nalgebra::RowVector2::new(1.0, 0.0);
        let d = design_gain(&a, &c, &Matrix2::identity(), &Matrix1::new(1.0)).unwrap();
        let s3 = 3f64.sqrt();
        assert!((d.p - Matrix2::new(s3, 1.0, 1.0, s3)).amax() < 1e-10, "{}", d.p);
    }

    #[test]
    fn undetectable_mode_rejected() {
        let a = Matrix2::new(1.0, 0.0, 0.0, -1.0);
        let c = nalgebra::RowVector2::new(0.0, 1.0);
        let err = design_gain(&a, &c, &Matrix2::identity(), &Matrix1::new(1.0)).unwrap_err();
        assert!(matches!(err, Error::NotDetectable { re, .. } if (re - 1.0).abs() < 1e-12));
    }

    #[test]
    fn stable_unobservable_mode_accepted() {
        let a = Matrix2::new(-1.0, 0.0, 0.0, -2.0);
        let c = nalgebra::RowVector2::new(1.0, 0.0);
        assert!(design_gain(&a, &c, &Matrix2::identity(), &Matrix1::new(1.0)).is_ok());
    }

    #[test]
    fn marginal_unobservable_mode() {
        let a = Matrix2::new(0.0, 0.0, 0.0, -1.0);
        let c = nalgebra::RowVector2::new(0.0, 1.0);
        let (q, r) = (Matrix2::identity(), Matrix1::new(1.0));
        assert!(matches!(design_gain(&a, &c, &q, &r), Err(Error::NotDetectable { .. })));
        let d = design_gain_with(&a, &c, &q, &r, UnobservableModes::Exclude).unwrap();
        assert_eq!(d.excluded.len(), 1);
        assert!(d.excluded[0].norm() < 1e-12);
        // the second coordinate is the scalar hand case
        assert!((d.p[(1, 1)] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert_eq!(d.g[(0, 0)], 0.0);
        assert!((d.designed_abscissa() + 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unstable_unobservable_mode_never_excluded() {
        let a = Matrix2::new(0.5, 0.0, 0.0, -1.0);
        let c = nalgebra::RowVector2::new(0.0, 1.0);
        let r = design_gain_with(&a, &c, &Matrix2::identity(), &Matrix1::new(1.0), UnobservableModes::Exclude);
        assert!(matches!(r, Err(Error::NotDetectable { .. })));
    }

    #[test]
    fn lyapunov_scalar() {
        let x = lyapunov(&DMatrix::from_element(1, 1, -2.0), &DMatrix::from_element(1, 1, 4.0)).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14);
    }
}
