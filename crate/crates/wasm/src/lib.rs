//! Browser bindings: tire curves, trim and observer spectrum, and a short
//! plant + observer run.

use ptw_core::estimator::{find_trim, Matrix14, Matrix4, NoiseSpec, UnobservableModes};
use ptw_core::export::is_excluded;
use ptw_core::params::SlipChannel;
use ptw_core::scenario::{run_scenario, InitialRule, InputSource, ObserverWeights, Scenario, KPH};
use ptw_core::state::ext;
use ptw_core::tire::{magic_formula, static_loads};
use ptw_core::ParameterSet;
use wasm_bindgen::prelude::*;

fn js_error(e: ptw_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Measurement weights matching an IMU with 0.05 m/s² and 0.005 rad/s noise.
const IMU_R_W: [f64; 4] = [2.5e-3, 2.5e-3, 2.5e-5, 2.5e-5];

/// Steady-state force of the front (`front = true`) or rear tire at its static
/// load, sampled at `n` slip values evenly spread over `[lo, hi]`.
/// `channel` is `"longitudinal"`, `"side_slip"` or `"camber"`.
#[wasm_bindgen]
pub fn tire_curve(channel: &str, front: bool, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, JsError> {
    let channel = match channel {
        "longitudinal" => SlipChannel::Longitudinal,
        "side_slip" => SlipChannel::SideSlip,
        "camber" => SlipChannel::Camber,
        other => return Err(JsError::new(&format!("unknown slip channel '{other}'"))),
    };
    if n < 2 || !(hi > lo) {
        return Err(JsError::new("need n >= 2 and hi > lo"));
    }
    let p = ParameterSet::gsxr1000();
    let (fz_f, fz_r) = static_loads(&p).map_err(js_error)?;
    let (tire, fz) = if front { (&p.tire_front, fz_f) } else { (&p.tire_rear, fz_r) };
    let mf = tire.at_load(channel, fz);
    Ok((0..n)
        .map(|k| magic_formula(&mf, lo + (hi - lo) * k as f64 / (n - 1) as f64))
        .collect())
}

/// Trim and observer design at one speed.
#[wasm_bindgen]
pub struct DesignSummary {
    trim: Vec<f64>,
    drive_torque: f64,
    residual: f64,
    re: Vec<f64>,
    im: Vec<f64>,
    excluded: Vec<u8>,
}

#[wasm_bindgen]
impl DesignSummary {
    /// Extended trim state, 14 entries.
    #[wasm_bindgen(getter)]
    pub fn trim(&self) -> Vec<f64> {
        self.trim.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn drive_torque(&self) -> f64 {
        self.drive_torque
    }
    #[wasm_bindgen(getter)]
    pub fn riccati_residual(&self) -> f64 {
        self.residual
    }
    /// Real parts of eig(A − G C).
    #[wasm_bindgen(getter)]
    pub fn re(&self) -> Vec<f64> {
        self.re.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn im(&self) -> Vec<f64> {
        self.im.clone()
    }
    /// 1 where the eigenvalue belongs to an unobservable mode left undesigned.
    #[wasm_bindgen(getter)]
    pub fn excluded(&self) -> Vec<u8> {
        self.excluded.clone()
    }
}

/// Trims at `speed_kph` and designs the observer with `Q_w = q_scale I` and
/// the IMU measurement weights scaled by `r_scale`.
#[wasm_bindgen]
pub fn design(speed_kph: f64, q_scale: f64, r_scale: f64) -> Result<DesignSummary, JsError> {
    let p = ParameterSet::gsxr1000();
    let tp = find_trim(speed_kph * KPH, &p).map_err(js_error)?;
    let q_w = Matrix14::identity() * q_scale;
    let r_w = Matrix4::from_diagonal(&IMU_R_W.into()) * r_scale;
    let d = ptw_core::estimator::design_observer(&tp, &p, &q_w, &r_w, UnobservableModes::Exclude)
        .map_err(js_error)?;
    Ok(DesignSummary {
        trim: tp.x_star.0.iter().copied().collect(),
        drive_torque: tp.u_star.drive(),
        residual: d.riccati_residual,
        re: d.closed_loop_spectrum.iter().map(|z| z.re).collect(),
        im: d.closed_loop_spectrum.iter().map(|z| z.im).collect(),
        excluded: d.closed_loop_spectrum.iter().map(|z| u8::from(is_excluded(z, &d.excluded_modes))).collect(),
    })
}

/// Plant and estimate traces of one run, decimated for plotting.
#[wasm_bindgen]
pub struct RunTraces {
    t: Vec<f64>,
    plant: Vec<Vec<f64>>,
    estimate: Vec<Vec<f64>>,
}

#[wasm_bindgen]
impl RunTraces {
    #[wasm_bindgen(getter)]
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }
    /// Plant channel by name (`vx`, `dthf`, `Frx`, ...).
    pub fn plant(&self, channel: &str) -> Result<Vec<f64>, JsError> {
        Ok(self.plant[index(channel)?].clone())
    }
    /// Observer estimate of the same channel.
    pub fn estimate(&self, channel: &str) -> Result<Vec<f64>, JsError> {
        Ok(self.estimate[index(channel)?].clone())
    }
}

fn index(channel: &str) -> Result<usize, JsError> {
    ext::NAMES
        .iter()
        .position(|n| *n == channel)
        .ok_or_else(|| JsError::new(&format!("unknown channel '{channel}'")))
}

/// Straight-running plant at `plant_kph` started `vx_offset` m/s off trim,
/// observed by a design at `observer_kph`; noisy sensors when `noise` is set.
#[wasm_bindgen]
pub fn run(
    plant_kph: f64,
    observer_kph: f64,
    vx_offset: f64,
    rider_mass_scale: f64,
    duration: f64,
    noise: bool,
) -> Result<RunTraces, JsError> {
    let scenario = Scenario {
        name: "demo".into(),
        speed_kph: plant_kph,
        duration,
        dt: 1e-3,
        observer_speed_kph: observer_kph,
        params: ParameterSet::gsxr1000(),
        rider_mass_scale,
        initial: InitialRule::Trim,
        offsets: vec![(ext::VX, vx_offset)],
        input: InputSource::Trim,
        weights: ObserverWeights {
            q_w: Matrix14::identity(),
            r_w: Matrix4::from_diagonal(&IMU_R_W.into()),
            unobservable: UnobservableModes::Exclude,
        },
        noise: noise.then_some(NoiseSpec {
            std: [0.05, 0.05, 0.005, 0.005],
            seed: 1,
        }),
    };
    let r = run_scenario(&scenario).map_err(js_error)?;
    let every = 10;
    let pick = |k: &usize| k.is_multiple_of(every);
    Ok(RunTraces {
        t: r.plant.times.iter().enumerate().filter(|(k, _)| pick(k)).map(|(_, t)| *t).collect(),
        plant: (0..14)
            .map(|i| r.plant.channel(i).into_iter().enumerate().filter(|(k, _)| pick(k)).map(|(_, v)| v).collect())
            .collect(),
        estimate: (0..14)
            .map(|i| r.estimate.channel(i).into_iter().enumerate().filter(|(k, _)| pick(k)).map(|(_, v)| v).collect())
            .collect(),
    })
}
