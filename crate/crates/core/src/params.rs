//! Vehicle parameters and their TOML front-end.

use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{body_pose_v, Body};
use crate::state::Vector7;

/// Built-in parameter file for the reference motorcycle.
pub const GSXR1000_TOML: &str = include_str!("../data/gsxr1000.toml");

/// The four coefficients of one magic-formula channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagicFormula {
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "E")]
    pub e: f64,
}

impl MagicFormula {
    pub const fn new(b: f64, c: f64, d: f64, e: f64) -> Self {
        Self { b, c, d, e }
    }

    fn check(&self, name: &str, errors: &mut Vec<String>) {
        let all_finite = [self.b, self.c, self.d, self.e].iter().all(|x| x.is_finite());
        if !all_finite {
            errors.push(format!("{name}: coefficients must be finite"));
            return;
        }
        if self.b <= 0.0 {
            errors.push(format!("{name}.B must be > 0 (got {})", self.b));
        }
        if !(self.c > 0.0 && self.c <= 3.0) {
            errors.push(format!("{name}.C must lie in (0, 3] (got {})", self.c));
        }
        if self.d <= 0.0 {
            errors.push(format!("{name}.D must be > 0 (got {})", self.d));
        }
        if self.e > 1.0 {
            errors.push(format!("{name}.E must be <= 1 (got {})", self.e));
        }
    }
}

/// How the peak factor D depends on the wheel's normal load.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadScaling {
    /// D is a friction coefficient; the peak force is `D * F_z`.
    Linear,
    /// D is already a force in newtons.
    None,
}

/// Which slip quantity a magic-formula channel maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlipChannel {
    Longitudinal,
    SideSlip,
    Camber,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TireCoefficients {
    pub longitudinal: MagicFormula,
    pub side_slip: MagicFormula,
    pub camber: MagicFormula,
    pub load_scaling: LoadScaling,
}

impl TireCoefficients {
    pub fn channel(&self, channel: SlipChannel) -> &MagicFormula {
        match channel {
            SlipChannel::Longitudinal => &self.longitudinal,
            SlipChannel::SideSlip => &self.side_slip,
            SlipChannel::Camber => &self.camber,
        }
    }

    /// Coefficients of `channel` with D scaled to the normal load `fz`.
    pub fn at_load(&self, channel: SlipChannel, fz: f64) -> MagicFormula {
        let mut mf = *self.channel(channel);
        if self.load_scaling == LoadScaling::Linear {
            mf.d *= fz;
        }
        mf
    }
}

/// Rate used by the lateral tire-force relaxation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LateralRelaxationSpeed {
    /// `|v_x^V| / sigma_y`
    #[default]
    Longitudinal,
    /// `v_y^V / sigma_y`
    Lateral,
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelOptions {
    #[serde(default)]
    pub lateral_relaxation_speed: LateralRelaxationSpeed,
    /// Insert the caster rotation into the front-wheel contact arm.
    #[serde(default)]
    pub front_arm_caster: bool,
}

/// Geometry, inertia, aerodynamic and tire constants of the motorcycle.
///
/// Angles are stored in radians. `l_m` is the longitudinal offset of the
/// whole-vehicle centre of mass ahead of the reference point V; unless
/// `l_m_override` is set it is recomputed from the body centres of mass
/// whenever the masses change.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    pub l_f: f64,
    pub l_r: f64,
    pub l_m: f64,
    pub l_m_override: Option<f64>,
    pub h: f64,
    pub r_f: f64,
    pub r_r: f64,
    pub s: f64,
    pub e: f64,
    pub f: f64,
    pub a: f64,
    pub c: f64,
    pub eps: f64,
    pub m_gr: f64,
    pub m_gf: f64,
    pub m_rf: f64,
    pub m_rr: f64,
    pub j_gr: Matrix3<f64>,
    pub j_gf: Matrix3<f64>,
    pub j_rf: Matrix3<f64>,
    pub j_rr: Matrix3<f64>,
    pub sigma_fx: f64,
    pub sigma_rx: f64,
    pub sigma_fy: f64,
    pub sigma_ry: f64,
    pub c_d: f64,
    pub a_v: f64,
    pub rho_air: f64,
    pub k_delta: f64,
    pub g: f64,
    pub tire_front: TireCoefficients,
    pub tire_rear: TireCoefficients,
    pub options: ModelOptions,
}

impl ParameterSet {
    /// The built-in reference motorcycle.
    pub fn gsxr1000() -> Self {
        Self::from_toml_str(GSXR1000_TOML, "built-in gsxr1000").expect("built-in parameters are valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn from_toml_str(text: &str, context: &str) -> Result<Self> {
        let raw: RawParams = toml::from_str(text).map_err(|e| Error::parse(context, e))?;
        raw.into_params()
    }

    /// Serializes to the same TOML dialect `load` reads. The caster angle is
    /// written in radians (`eps`) so that the round trip is exact.
    pub fn to_toml_string(&self) -> String {
        let raw = RawParams::from_params(self);
        toml::to_string(&raw).expect("parameter serialization cannot fail")
    }

    pub fn total_mass(&self) -> f64 {
        self.m_gr + self.m_gf + self.m_rf + self.m_rr
    }

    pub fn mass(&self, body: Body) -> f64 {
        match body {
            Body::RearBody => self.m_gr,
            Body::FrontBody => self.m_gf,
            Body::FrontWheel => self.m_rf,
            Body::RearWheel => self.m_rr,
        }
    }

    pub fn inertia(&self, body: Body) -> &Matrix3<f64> {
        match body {
            Body::RearBody => &self.j_gr,
            Body::FrontBody => &self.j_gf,
            Body::FrontWheel => &self.j_rf,
            Body::RearWheel => &self.j_rr,
        }
    }

    /// Mass-weighted mean longitudinal position of the four body centres of
    /// mass at the upright configuration, measured from V.
    pub fn derived_l_m(&self) -> f64 {
        let q = Vector7::zeros();
        let moment: f64 = Body::ALL
            .iter()
            .map(|&b| self.mass(b) * body_pose_v(b, &q, self).0[0])
            .sum();
        moment / self.total_mass()
    }

    /// Copy with the rear-body (rider) mass scaled by `scale`. Geometry is
    /// left untouched; a derived `l_m` is recomputed.
    pub fn with_rider_mass_scale(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameters(vec![format!(
                "rider mass scale must be > 0 (got {scale})"
            )]));
        }
        let mut p = self.clone();
        p.m_gr *= scale;
        p.refresh_derived();
        p.validate()?;
        Ok(p)
    }

    pub(crate) fn refresh_derived(&mut self) {
        self.l_m = self.l_m_override.unwrap_or_else(|| self.derived_l_m());
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        let positive = [
            ("m_Gr", self.m_gr),
            ("m_Gf", self.m_gf),
            ("m_Rf", self.m_rf),
            ("m_Rr", self.m_rr),
            ("R_f", self.r_f),
            ("R_r", self.r_r),
            ("sigma_fx", self.sigma_fx),
            ("sigma_rx", self.sigma_rx),
            ("sigma_fy", self.sigma_fy),
            ("sigma_ry", self.sigma_ry),
            ("rho_air", self.rho_air),
            ("A_v", self.a_v),
            ("g", self.g),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                errors.push(format!("{name} must be > 0 (got {v})"));
            }
        }
        let finite = [
            ("l_f", self.l_f),
            ("l_r", self.l_r),
            ("l_m", self.l_m),
            ("h", self.h),
            ("s", self.s),
            ("e", self.e),
            ("f", self.f),
            ("a", self.a),
            ("c", self.c),
            ("eps", self.eps),
            ("C_d", self.c_d),
            ("K_delta", self.k_delta),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                errors.push(format!("{name} must be finite (got {v})"));
            }
        }
        if self.c_d < 0.0 {
            errors.push(format!("C_d must be >= 0 (got {})", self.c_d));
        }
        for (name, j) in [
            ("J_Gr", &self.j_gr),
            ("J_Gf", &self.j_gf),
            ("J_Rf", &self.j_rf),
            ("J_Rr", &self.j_rr),
        ] {
            if j.iter().any(|x| !x.is_finite()) {
                errors.push(format!("{name} must be finite"));
                continue;
            }
            let asym = (j - j.transpose()).abs().max();
            if asym >= 1e-12 {
                errors.push(format!("{name} is not symmetric (max |J - J^T| = {asym:.3e})"));
            }
            if (0..3).any(|i| j[(i, i)] < 0.0) {
                errors.push(format!("{name} has a negative diagonal entry"));
            }
        }
        if !(self.l_f + self.l_r > 0.0) {
            errors.push(format!("l_f + l_r must be > 0 (got {})", self.l_f + self.l_r));
        }
        if !(self.l_m.abs() < self.l_f) {
            errors.push(format!("|l_m| must be < l_f (l_m = {}, l_f = {})", self.l_m, self.l_f));
        }
        for (wheel, t) in [("tire.front", &self.tire_front), ("tire.rear", &self.tire_rear)] {
            t.longitudinal.check(&format!("{wheel}.longitudinal"), &mut errors);
            t.side_slip.check(&format!("{wheel}.side_slip"), &mut errors);
            t.camber.check(&format!("{wheel}.camber"), &mut errors);
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameters(errors))
        }
    }
}

// ---------------------------------------------------------------------------
// File layout

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    l_f: Option<f64>,
    l_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l_m: Option<f64>,
    h: Option<f64>,
    #[serde(rename = "R_r")]
    r_r: Option<f64>,
    #[serde(rename = "R_f")]
    r_f: Option<f64>,
    s: Option<f64>,
    e: Option<f64>,
    f: Option<f64>,
    a: Option<f64>,
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps_deg: Option<f64>,
    sigma_fx: Option<f64>,
    sigma_rx: Option<f64>,
    sigma_fy: Option<f64>,
    sigma_ry: Option<f64>,
    #[serde(rename = "m_Gr")]
    m_gr: Option<f64>,
    #[serde(rename = "m_Gf")]
    m_gf: Option<f64>,
    #[serde(rename = "m_Rf")]
    m_rf: Option<f64>,
    #[serde(rename = "m_Rr")]
    m_rr: Option<f64>,
    #[serde(rename = "C_d")]
    c_d: Option<f64>,
    #[serde(rename = "A_v")]
    a_v: Option<f64>,
    rho_air: Option<f64>,
    #[serde(rename = "K_delta")]
    k_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g: Option<f64>,
    #[serde(rename = "J_Rr")]
    j_rr: Option<Vec<f64>>,
    #[serde(rename = "J_Gr")]
    j_gr: Option<Vec<f64>>,
    #[serde(rename = "J_Rf")]
    j_rf: Option<Vec<f64>>,
    #[serde(rename = "J_Gf")]
    j_gf: Option<Vec<f64>>,
    #[serde(default)]
    options: ModelOptions,
    tire: Option<RawTires>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTires {
    front: Option<RawTire>,
    rear: Option<RawTire>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTire {
    load_scaling: Option<LoadScaling>,
    longitudinal: Option<RawMagic>,
    side_slip: Option<RawMagic>,
    camber: Option<RawMagic>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMagic {
    #[serde(rename = "B")]
    b: Option<f64>,
    #[serde(rename = "C")]
    c: Option<f64>,
    #[serde(rename = "D")]
    d: Option<f64>,
    #[serde(rename = "E")]
    e: Option<f64>,
}

fn take(missing: &mut Vec<String>, name: &str, v: Option<f64>) -> f64 {
    v.unwrap_or_else(|| {
        missing.push(format!("missing key `{name}`"));
        f64::NAN
    })
}

fn tensor(errors: &mut Vec<String>, name: &str, v: &Option<Vec<f64>>) -> Matrix3<f64> {
    match v {
        None => {
            errors.push(format!("missing key `{name}`"));
            Matrix3::from_element(f64::NAN)
        }
        Some(x) if x.len() != 9 => {
            errors.push(format!("`{name}` must hold 9 row-major numbers (got {})", x.len()));
            Matrix3::from_element(f64::NAN)
        }
        Some(x) => Matrix3::from_row_slice(x),
    }
}

fn tensor_row_major(j: &Matrix3<f64>) -> Vec<f64> {
    j.transpose().iter().copied().collect()
}

impl RawMagic {
    fn resolve(&self, errors: &mut Vec<String>, name: &str) -> MagicFormula {
        MagicFormula {
            b: take(errors, &format!("{name}.B"), self.b),
            c: take(errors, &format!("{name}.C"), self.c),
            d: take(errors, &format!("{name}.D"), self.d),
            e: take(errors, &format!("{name}.E"), self.e),
        }
    }

    fn from(mf: &MagicFormula) -> Self {
        Self {
            b: Some(mf.b),
            c: Some(mf.c),
            d: Some(mf.d),
            e: Some(mf.e),
        }
    }
}

impl RawTire {
    fn resolve(&self, errors: &mut Vec<String>, name: &str) -> TireCoefficients {
        let mut channel = |ch: &Option<RawMagic>, ch_name: &str| {
            let full = format!("{name}.{ch_name}");
            match ch {
                Some(m) => m.resolve(errors, &full),
                None => {
                    errors.push(format!("missing section `{full}`"));
                    MagicFormula::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN)
                }
            }
        };
        let longitudinal = channel(&self.longitudinal, "longitudinal");
        let side_slip = channel(&self.side_slip, "side_slip");
        let camber = channel(&self.camber, "camber");
        TireCoefficients {
            longitudinal,
            side_slip,
            camber,
            load_scaling: self.load_scaling.unwrap_or(LoadScaling::Linear),
        }
    }

    fn from(t: &TireCoefficients) -> Self {
        Self {
            load_scaling: Some(t.load_scaling),
            longitudinal: Some(RawMagic::from(&t.longitudinal)),
            side_slip: Some(RawMagic::from(&t.side_slip)),
            camber: Some(RawMagic::from(&t.camber)),
        }
    }
}

impl RawParams {
    fn into_params(self) -> Result<ParameterSet> {
        let mut errors = Vec::new();
        let eps = match (self.eps, self.eps_deg) {
            (Some(_), Some(_)) => {
                errors.push("give either `eps` (rad) or `eps_deg`, not both".to_string());
                f64::NAN
            }
            (Some(r), None) => r,
            (None, Some(d)) => d.to_radians(),
            (None, None) => {
                errors.push("missing key `eps_deg`".to_string());
                f64::NAN
            }
        };
        let tires = self.tire.unwrap_or_default();
        let mut tire = |t: Option<RawTire>, name: &str| match t {
            Some(t) => t.resolve(&mut errors, name),
            None => {
                errors.push(format!("missing section `{name}`"));
                RawTire::default().resolve(&mut Vec::new(), name)
            }
        };
        let tire_front = tire(tires.front, "tire.front");
        let tire_rear = tire(tires.rear, "tire.rear");

        let e = &mut errors;
        let mut p = ParameterSet {
            l_f: take(e, "l_f", self.l_f),
            l_r: take(e, "l_r", self.l_r),
            l_m: f64::NAN,
            l_m_override: self.l_m,
            h: take(e, "h", self.h),
            r_f: take(e, "R_f", self.r_f),
            r_r: take(e, "R_r", self.r_r),
            s: take(e, "s", self.s),
            e: take(e, "e", self.e),
            f: take(e, "f", self.f),
            a: take(e, "a", self.a),
            c: take(e, "c", self.c),
            eps,
            m_gr: take(e, "m_Gr", self.m_gr),
            m_gf: take(e, "m_Gf", self.m_gf),
            m_rf: take(e, "m_Rf", self.m_rf),
            m_rr: take(e, "m_Rr", self.m_rr),
            j_gr: tensor(e, "J_Gr", &self.j_gr),
            j_gf: tensor(e, "J_Gf", &self.j_gf),
            j_rf: tensor(e, "J_Rf", &self.j_rf),
            j_rr: tensor(e, "J_Rr", &self.j_rr),
            sigma_fx: take(e, "sigma_fx", self.sigma_fx),
            sigma_rx: take(e, "sigma_rx", self.sigma_rx),
            sigma_fy: take(e, "sigma_fy", self.sigma_fy),
            sigma_ry: take(e, "sigma_ry", self.sigma_ry),
            c_d: take(e, "C_d", self.c_d),
            a_v: take(e, "A_v", self.a_v),
            rho_air: take(e, "rho_air", self.rho_air),
            k_delta: take(e, "K_delta", self.k_delta),
            g: self.g.unwrap_or(9.81),
            tire_front,
            tire_rear,
            options: self.options,
        };
        if !errors.is_empty() {
            return Err(Error::InvalidParameters(errors));
        }
        p.refresh_derived();
        p.validate()?;
        Ok(p)
    }

    fn from_params(p: &ParameterSet) -> Self {
        Self {
            l_f: Some(p.l_f),
            l_r: Some(p.l_r),
            l_m: p.l_m_override,
            h: Some(p.h),
            r_r: Some(p.r_r),
            r_f: Some(p.r_f),
            s: Some(p.s),
            e: Some(p.e),
            f: Some(p.f),
            a: Some(p.a),
            c: Some(p.c),
            eps: Some(p.eps),
            eps_deg: None,
            sigma_fx: Some(p.sigma_fx),
            sigma_rx: Some(p.sigma_rx),
            sigma_fy: Some(p.sigma_fy),
            sigma_ry: Some(p.sigma_ry),
            m_gr: Some(p.m_gr),
            m_gf: Some(p.m_gf),
            m_rf: Some(p.m_rf),
            m_rr: Some(p.m_rr),
            c_d: Some(p.c_d),
            a_v: Some(p.a_v),
            rho_air: Some(p.rho_air),
            k_delta: Some(p.k_delta),
            g: Some(p.g),
            j_rr: Some(tensor_row_major(&p.j_rr)),
            j_gr: Some(tensor_row_major(&p.j_gr)),
            j_rf: Some(tensor_row_major(&p.j_rf)),
            j_gf: Some(tensor_row_major(&p.j_gf)),
            options: p.options,
            tire: Some(RawTires {
                front: Some(RawTire::from(&p.tire_front)),
                rear: Some(RawTire::from(&p.tire_rear)),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let p = ParameterSet::gsxr1000();
        assert_eq!(p.l_f, 0.727);
        assert_eq!(p.r_r, 0.297);
        assert_eq!(p.k_delta, 12.6738);
        assert!((p.eps - 24.0_f64.to_radians()).abs() < 1e-15);
        assert!((p.total_mass() - 303.0).abs() < 1e-9);
    }

    #[test]
    fn total_mass_cases() {
        let mut p = ParameterSet::gsxr1000();
        p.m_gr = 1.0;
        p.m_gf = 1.0;
        p.m_rf = 1.0;
        p.m_rr = 1.0;
        assert_eq!(p.total_mass(), 4.0);

        let heavy = ParameterSet::gsxr1000().with_rider_mass_scale(1.3).unwrap();
        assert!((heavy.total_mass() - 380.118).abs() < 1e-9);
    }

    #[test]
    fn negative_mass_is_named() {
        let text = GSXR1000_TOML.replace("m_Gf = 24.24", "m_Gf = -1");
        let err = ParameterSet::from_toml_str(&text, "test").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("m_Gf"), "{msg}");
    }

    #[test]
    fn every_violation_is_reported() {
        let text = GSXR1000_TOML
            .replace("m_Gf = 24.24", "m_Gf = -1")
            .replace("J_Gf = [1.965, 0.0, -0.270", "J_Gf = [1.965, 0.5, -0.270")
            .replace("l_r = 0.643\n", "");
        let err = ParameterSet::from_toml_str(&text, "test").unwrap_err();
        let msg = err.to_string();
        // missing keys are reported before range checks
        assert!(msg.contains("missing key `l_r`"), "{msg}");

        let text = GSXR1000_TOML
            .replace("m_Gf = 24.24", "m_Gf = -1")
            .replace("J_Gf = [1.965, 0.0, -0.270", "J_Gf = [1.965, 0.5, -0.270");
        let msg = ParameterSet::from_toml_str(&text, "test").unwrap_err().to_string();
        assert!(msg.contains("m_Gf"), "{msg}");
        assert!(msg.contains("J_Gf is not symmetric"), "{msg}");
    }

    #[test]
    fn tire_coefficient_limits() {
        let text = GSXR1000_TOML.replace(
            "camber = { B = 0.75, C = 1.5, D = 0.9, E = 0.0 }",
            "camber = { B = 0.75, C = 3.5, D = 0.9, E = 1.5 }",
        );
        let msg = ParameterSet::from_toml_str(&text, "test").unwrap_err().to_string();
        assert!(msg.contains("tire.front.camber.C"), "{msg}");
        assert!(msg.contains("tire.front.camber.E"), "{msg}");
    }

    #[test]
    fn l_m_override_is_kept() {
        let text = format!("l_m = 0.01\n{GSXR1000_TOML}");
        let p = ParameterSet::from_toml_str(&text, "test").unwrap();
        assert_eq!(p.l_m, 0.01);
        let heavy = p.with_rider_mass_scale(1.3).unwrap();
        assert_eq!(heavy.l_m, 0.01);
    }

    #[test]
    fn degenerate_l_m_rejected() {
        let text = format!("l_m = 0.727\n{GSXR1000_TOML}");
        let msg = ParameterSet::from_toml_str(&text, "test").unwrap_err().to_string();
        assert!(msg.contains("l_m"), "{msg}");
    }

    #[test]
    fn serialization_round_trip() {
        let p = ParameterSet::gsxr1000();
        let text = p.to_toml_string();
        let q = ParameterSet::from_toml_str(&text, "round trip").unwrap();
        assert_eq!(p, q);
    }
}
