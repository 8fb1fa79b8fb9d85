//! Randomized invariants of the kinematics, inertia and tire models.

use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use ptw_core::kinematics::{body_pose_v, body_pose_world, rot_x, rot_y, rot_z, Body};
use ptw_core::multibody::mass_matrix;
use ptw_core::params::MagicFormula;
use ptw_core::tire::{magic_formula, static_loads};
use ptw_core::{ParameterSet, Vector7};

fn configuration() -> impl Strategy<Value = Vector7> {
    (
        -5.0..5.0f64,
        -5.0..5.0f64,
        -3.2..3.2f64,
        -1.3..1.3f64,
        -0.6..0.6f64,
        -10.0..10.0f64,
        -10.0..10.0f64,
    )
        .prop_map(|(x, y, psi, phi, delta, tf, tr)| Vector7::from_column_slice(&[x, y, psi, phi, delta, tf, tr]))
}

fn coefficients() -> impl Strategy<Value = MagicFormula> {
    (0.1..30.0f64, 0.3..2.5f64, -5000.0..5000.0f64, -3.0..1.0f64)
        .prop_map(|(b, c, d, e)| MagicFormula::new(b, c, d, e))
}

proptest! {
    #[test]
    fn elementary_rotations_are_orthonormal(angle in -10.0..10.0f64) {
        for r in [rot_x(angle), rot_y(angle), rot_z(angle)] {
            prop_assert!(r.orthonormality_error() < 1e-14);
            prop_assert!((r.matrix().determinant() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn body_orientations_are_proper_rotations(q in configuration()) {
        let p = ParameterSet::gsxr1000();
        for b in Body::ALL {
            let (_, r) = body_pose_world(b, &q, &p);
            prop_assert!(r.orthonormality_error() < 1e-14, "{}", b.name());
            prop_assert!((r.matrix().determinant() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn mass_matrix_is_symmetric_positive_definite(q in configuration(), scale in 0.5..2.0f64) {
        let p = ParameterSet::gsxr1000().with_rider_mass_scale(scale).unwrap();
        let m = mass_matrix(&q, &p).unwrap();
        let asym = (m - m.transpose()).abs().max();
        prop_assert!(asym <= 1e-12 * m.abs().max(), "asymmetry {asym:e}");
        let eig = SymmetricEigen::new(m);
        prop_assert!(eig.eigenvalues.min() > 0.0, "{}", eig.eigenvalues);
    }

    #[test]
    fn magic_formula_is_odd_and_bounded(mf in coefficients(), mu in -20.0..20.0f64) {
        let y = magic_formula(&mf, mu);
        prop_assert!(y.abs() <= mf.d.abs() * (1.0 + 1e-15));
        prop_assert!((magic_formula(&mf, -mu) + y).abs() <= 1e-12 * mf.d.abs());
    }

    #[test]
    fn magic_formula_slope_at_origin_is_bcd(mf in coefficients()) {
        let h = 1e-7;
        let slope = (magic_formula(&mf, h) - magic_formula(&mf, -h)) / (2.0 * h);
        let bcd = mf.b * mf.c * mf.d;
        prop_assert!((slope - bcd).abs() <= 1e-5 * bcd.abs().max(1.0), "{slope} vs {bcd}");
    }

    #[test]
    fn static_loads_balance_weight_and_moment(
        masses in prop::array::uniform4(0.5..2.0f64),
        stretch in 0.9..1.2f64,
    ) {
        let mut p = ParameterSet::gsxr1000();
        p.m_gr *= masses[0];
        p.m_gf *= masses[1];
        p.m_rf *= masses[2];
        p.m_rr *= masses[3];
        p.l_f *= stretch;
        p.l_r *= stretch;
        p.l_m = p.derived_l_m();
        let (front, rear) = static_loads(&p).unwrap();
        let w = p.total_mass() * p.g;
        prop_assert!(((front + rear) - w).abs() <= 1e-12 * w);
        // moments about the rear contact, centres of mass taken from the body poses
        let q = Vector7::zeros();
        let moment: f64 = Body::ALL
            .iter()
            .map(|&b| p.mass(b) * p.g * (body_pose_v(b, &q, &p).0.x + p.l_r))
            .sum();
        let lever = p.l_r + p.l_f;
        prop_assert!((front * lever - moment).abs() <= 1e-9 * w * lever, "{} vs {}", front * lever, moment);
    }
}
