//! Scenario files and the plant + observer co-simulation they describe.
//!
//! ```toml
//! name = "rectilinear-100"
//! speed_kph = 100.0
//! duration = 10.0
//! dt = 0.001
//! observer_speed_kph = 100.0   # defaults to speed_kph
//! params = "bike.toml"         # defaults to the built-in parameter set
//! rider_mass_scale = 1.0       # plant only
//!
//! [initial]
//! rule = "trim"                # trim | no_slippage | explicit
//! offsets = { vx = 1.0 }
//!
//! [input]
//! source = "trim"              # trim | constant | csv | doublet
//!
//! [observer]
//! q_w = 1.0                    # scalar (times I) or 14 diagonal entries
//! r_w = [2.5e-3, 2.5e-3, 2.5e-5, 2.5e-5]
//! unobservable = "exclude"     # exclude | reject
//!
//! [noise]
//! ax = 0.05
//! seed = 7
//! ```
//!
//! Relative paths are resolved against the scenario file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimator::{
    design_observer, find_trim, measurements_table, no_slippage_estimate, run_observer, synthesize_measurements, Estimate,
    LinearObserverDesign, Matrix14, Matrix4, Measurement, NoiseSpec, TrimPoint, UnobservableModes,
};
use crate::io::Table;
use crate::params::ParameterSet;
use crate::simulator::{simulate, step_count, InputTrace, Trajectory, MAX_DT};
use crate::state::{ext, ExtendedState, InputVector, Vector14};

pub const KPH: f64 = 1.0 / 3.6;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialRule {
    Trim,
    NoSlippage,
    Explicit(Vector14),
}

#[derive(Clone, Debug, PartialEq)]
pub enum InputSource {
    /// Trim input of the plant, held.
    Trim,
    Constant(InputVector),
    Csv(PathBuf),
    /// One sine period of steering torque on top of the trim drive torque.
    Doublet { amplitude: f64, start: f64, period: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObserverWeights {
    pub q_w: Matrix14,
    pub r_w: Matrix4,
    pub unobservable: UnobservableModes,
}

impl Default for ObserverWeights {
    fn default() -> Self {
        Self {
            q_w: Matrix14::identity(),
            r_w: Matrix4::identity(),
            unobservable: UnobservableModes::Exclude,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub speed_kph: f64,
    pub duration: f64,
    pub dt: f64,
    pub observer_speed_kph: f64,
    pub params: ParameterSet,
    pub rider_mass_scale: f64,
    pub initial: InitialRule,
    pub offsets: Vec<(usize, f64)>,
    pub input: InputSource,
    pub weights: ObserverWeights,
    pub noise: Option<NoiseSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    speed_kph: f64,
    duration: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    observer_speed_kph: Option<f64>,
    params: Option<PathBuf>,
    #[serde(default = "one")]
    rider_mass_scale: f64,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    input: RawInput,
    #[serde(default)]
    observer: RawObserver,
    noise: Option<RawNoise>,
}

fn default_dt() -> f64 {
    1e-3
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    #[serde(default)]
    rule: RawRule,
    state: Option<Vec<f64>>,
    #[serde(default)]
    offsets: BTreeMap<String, f64>,
}

#[derive(Deserialize, Default, PartialEq)]
#[serde(rename_all = "snake_case")]
enum RawRule {
    #[default]
    Trim,
    NoSlippage,
    Explicit,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawInput {
    #[serde(default)]
    source: RawSource,
    torques: Option<[f64; 4]>,
    path: Option<PathBuf>,
    amplitude: Option<f64>,
    start: Option<f64>,
    period: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "snake_case")]
enum RawSource {
    #[default]
    Trim,
    Constant,
    Csv,
    Doublet,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Weight {
    Scalar(f64),
    Diagonal(Vec<f64>),
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawObserver {
    q_w: Option<Weight>,
    r_w: Option<Weight>,
    unobservable: Option<RawUnobservable>,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawUnobservable {
    Exclude,
    Reject,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    #[serde(default)]
    ax: f64,
    #[serde(default)]
    ay: f64,
    #[serde(default)]
    dpsi: f64,
    #[serde(default)]
    dphi: f64,
    #[serde(default)]
    seed: u64,
}

fn diagonal<const N: usize>(w: Option<Weight>, what: &str) -> Result<nalgebra::SMatrix<f64, N, N>> {
    let d: Vec<f64> = match w {
        None => vec![1.0; N],
        Some(Weight::Scalar(s)) => vec![s; N],
        Some(Weight::Diagonal(v)) if v.len() == N => v,
        Some(Weight::Diagonal(v)) => {
            return Err(Error::InvalidScenario(format!("{what} needs 1 or {N} entries, got {}", v.len())))
        }
    };
    if let Some(bad) = d.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidScenario(format!("{what} entries must be > 0 (got {bad})")));
    }
    Ok(nalgebra::SMatrix::<f64, N, N>::from_diagonal(&nalgebra::SVector::<f64, N>::from_column_slice(&d)))
}

fn state_index(name: &str) -> Result<usize> {
    ext::NAMES
        .iter()
        .position(|n| *n == name)
        .ok_or_else(|| Error::InvalidScenario(format!("unknown state '{name}' (expected one of {:?})", ext::NAMES)))
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base, &path.display().to_string())
    }

    /// Parses scenario text; relative paths are taken from `base`.
    pub fn from_toml_str(text: &str, base: &Path, context: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::parse(context, e))?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let params = match &raw.params {
            Some(p) => ParameterSet::load(resolve(p))?,
            None => ParameterSet::gsxr1000(),
        };
        let initial = match raw.initial.rule {
            RawRule::Trim => InitialRule::Trim,
            RawRule::NoSlippage => InitialRule::NoSlippage,
            RawRule::Explicit => {
                let v = raw
                    .initial
                    .state
                    .clone()
                    .ok_or_else(|| Error::InvalidScenario("initial.rule = \"explicit\" needs initial.state".into()))?;
                InitialRule::Explicit(ExtendedState::from_slice(&v)?.0)
            }
        };
        if raw.initial.rule != RawRule::Explicit && raw.initial.state.is_some() {
            return Err(Error::InvalidScenario("initial.state is only used with rule = \"explicit\"".into()));
        }
        let offsets = raw
            .initial
            .offsets
            .iter()
            .map(|(k, v)| Ok((state_index(k)?, *v)))
            .collect::<Result<Vec<_>>>()?;
        let need = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| Error::InvalidScenario(format!("input.source needs input.{what}")))
        };
        let input = match raw.input.source {
            RawSource::Trim => InputSource::Trim,
            RawSource::Constant => {
                let t = raw
                    .input
                    .torques
                    .ok_or_else(|| Error::InvalidScenario("input.source = \"constant\" needs input.torques".into()))?;
                InputSource::Constant(InputVector::new(t[0], t[1], t[2], t[3]))
            }
            RawSource::Csv => InputSource::Csv(resolve(
                raw.input
                    .path
                    .as_deref()
                    .ok_or_else(|| Error::InvalidScenario("input.source = \"csv\" needs input.path".into()))?,
            )),
            RawSource::Doublet => InputSource::Doublet {
                amplitude: need(raw.input.amplitude, "amplitude")?,
                start: need(raw.input.start, "start")?,
                period: need(raw.input.period, "period")?,
            },
        };
        let weights = ObserverWeights {
            q_w: diagonal::<14>(raw.observer.q_w, "observer.q_w")?,
            r_w: diagonal::<4>(raw.observer.r_w, "observer.r_w")?,
            unobservable: match raw.observer.unobservable {
                None | Some(RawUnobservable::Exclude) => UnobservableModes::Exclude,
                Some(RawUnobservable::Reject) => UnobservableModes::Reject,
            },
        };
        let noise = raw.noise.map(|n| NoiseSpec {
            std: [n.ax, n.ay, n.dpsi, n.dphi],
            seed: n.seed,
        });
        let s = Scenario {
            name: raw.name,
            speed_kph: raw.speed_kph,
            duration: raw.duration,
            dt: raw.dt,
            observer_speed_kph: raw.observer_speed_kph.unwrap_or(raw.speed_kph),
            params,
            rider_mass_scale: raw.rider_mass_scale,
            initial,
            offsets,
            input,
            weights,
            noise,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            errors.push(format!("duration must be > 0 (got {})", self.duration));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            errors.push(format!("dt must be in (0, {MAX_DT}] (got {})", self.dt));
        }
        if !(self.rider_mass_scale > 0.0 && self.rider_mass_scale.is_finite()) {
            errors.push(format!("rider_mass_scale must be > 0 (got {})", self.rider_mass_scale));
        }
        for (what, v) in [("speed_kph", self.speed_kph), ("observer_speed_kph", self.observer_speed_kph)] {
            if !(v > 0.0 && v.is_finite()) {
                errors.push(format!("{what} must be > 0 (got {v})"));
            }
        }
        if let InputSource::Doublet { period, .. } = self.input {
            if !(period > 0.0) {
                errors.push(format!("input.period must be > 0 (got {period})"));
            }
        }
        if let Some(n) = &self.noise {
            if n.std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                errors.push(format!("noise standard deviations must be >= 0 (got {:?})", n.std));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(errors.join("; ")))
        }
    }

    pub fn plant_params(&self) -> Result<ParameterSet> {
        self.params.with_rider_mass_scale(self.rider_mass_scale)
    }
}

/// Everything one scenario run produces.
#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub plant_trim: TrimPoint,
    pub design: LinearObserverDesign,
    pub plant: Trajectory,
    pub measurements: Vec<Measurement>,
    pub estimate: Estimate,
    pub metrics: Vec<ChannelMetrics>,
}

/// No-slip rolling at speed `v`, all other entries zero.
pub fn no_slippage_state(v: f64, p: &ParameterSet) -> ExtendedState {
    let mut x = ExtendedState::zeros();
    x.0[ext::VX] = v;
    x.0[ext::DTHETA_F] = v / p.r_f;
    x.0[ext::DTHETA_R] = v / p.r_r;
    x
}

fn input_trace(s: &Scenario, trim: &TrimPoint) -> Result<InputTrace> {
    match &s.input {
        InputSource::Trim => Ok(InputTrace::constant(trim.u_star)),
        InputSource::Constant(u) => Ok(InputTrace::constant(*u)),
        InputSource::Csv(path) => read_input_trace(path),
        InputSource::Doublet {
            amplitude,
            start,
            period,
        } => {
            let (a, t0, tp) = (*amplitude, *start, *period);
            let drive = trim.u_star.drive();
            InputTrace::sampled(s.dt, step_count(s.duration, s.dt), move |t| {
                let tau = if t >= t0 && t < t0 + tp {
                    a * (2.0 * std::f64::consts::PI * (t - t0) / tp).sin()
                } else {
                    0.0
                };
                InputVector::new(tau, drive, 0.0, 0.0)
            })
        }
    }
}

/// Column names of an input-trace file.
pub const INPUT_HEADER: [&str; 5] = ["t", "tau", "tau_D", "tau_Bf", "tau_Br"];

pub fn read_input_trace(path: &Path) -> Result<InputTrace> {
    let table = Table::read(path)?;
    let cols = INPUT_HEADER
        .iter()
        .map(|c| table.index(c))
        .collect::<Result<Vec<_>>>()?;
    let times = table.rows.iter().map(|r| r[cols[0]]).collect();
    let values = table
        .rows
        .iter()
        .map(|r| InputVector::new(r[cols[1]], r[cols[2]], r[cols[3]], r[cols[4]]))
        .collect();
    InputTrace::new(times, values)
}

/// Trims plant and observer, simulates the plant, synthesizes measurements and
/// runs the observer.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioResult> {
    s.validate()?;
    let plant_params = s.plant_params()?;
    let plant_speed = s.speed_kph * KPH;
    let plant_trim = find_trim(plant_speed, &plant_params)?;
    let observer_trim = find_trim(s.observer_speed_kph * KPH, &s.params)?;
    let design = design_observer(
        &observer_trim,
        &s.params,
        &s.weights.q_w,
        &s.weights.r_w,
        s.weights.unobservable,
    )?;

    let mut x0 = match &s.initial {
        InitialRule::Trim => plant_trim.x_star,
        InitialRule::NoSlippage => no_slippage_state(plant_speed, &plant_params),
        InitialRule::Explicit(x) => ExtendedState(*x),
    };
    for &(i, v) in &s.offsets {
        x0.0[i] += v;
    }
    let inputs = input_trace(s, &plant_trim)?;
    let plant = simulate(&x0, &inputs, s.dt, s.duration, &plant_params)?.into_result()?;
    let measurements = synthesize_measurements(&plant, s.noise.as_ref())?;
    let x_hat0 = no_slippage_estimate(&design, plant_speed, &s.params);
    let estimate = run_observer(&measurements, &plant.inputs, &design, &x_hat0, s.dt)?;
    let metrics = state_metrics(&plant, &estimate);
    Ok(ScenarioResult {
        plant_trim,
        design,
        plant,
        measurements,
        estimate,
        metrics,
    })
}

/// Fraction of the run, at its end, over which static errors are averaged.
pub const STATIC_WINDOW: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMetrics {
    pub channel: String,
    /// Root-mean-square of `estimate − reference` over the whole run.
    pub rms: f64,
    /// Mean of `estimate − reference` over the final window.
    pub static_error: f64,
    /// `static_error` relative to the reference mean over the window, percent.
    /// NaN when that mean is zero.
    pub static_error_pct: f64,
    pub reference_mean: f64,
}

pub fn channel_metrics(name: &str, reference: &[f64], estimate: &[f64]) -> ChannelMetrics {
    let n = reference.len().min(estimate.len());
    let err: Vec<f64> = (0..n).map(|k| estimate[k] - reference[k]).collect();
    let rms = if n == 0 {
        0.0
    } else {
        (err.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt()
    };
    let window = ((n as f64 * STATIC_WINDOW).ceil() as usize).clamp(n.min(1), n.max(1));
    let start = n.saturating_sub(window);
    let count = (n - start).max(1) as f64;
    let static_error = err[start..].iter().sum::<f64>() / count;
    let reference_mean = reference[start..n].iter().sum::<f64>() / count;
    let static_error_pct = if reference_mean == 0.0 {
        f64::NAN
    } else {
        100.0 * static_error.abs() / reference_mean.abs()
    };
    ChannelMetrics {
        channel: name.to_string(),
        rms,
        static_error,
        static_error_pct,
        reference_mean,
    }
}

/// Metrics for all fourteen extended-state channels.
pub fn state_metrics(plant: &Trajectory, estimate: &Estimate) -> Vec<ChannelMetrics> {
    ext::NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| channel_metrics(name, &plant.channel(i), &estimate.channel(i)))
        .collect()
}

pub fn metrics_csv(metrics: &[ChannelMetrics]) -> String {
    use crate::io::fmt9;
    let mut out = String::from("channel,rms,static_error,static_error_pct,reference_mean\n");
    for m in metrics {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            m.channel,
            fmt9(m.rms),
            fmt9(m.static_error),
            fmt9(m.static_error_pct),
            fmt9(m.reference_mean)
        ));
    }
    out
}

/// Result of comparing an estimate file against a reference file.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub metrics: Vec<ChannelMetrics>,
    /// Set when the estimate had to be resampled onto the reference grid.
    pub resampled: bool,
}

/// Per-channel metrics for every non-time column of `estimate`; each must
/// also be present in `reference`. Mismatched time grids are bridged by
/// zero-order hold of the estimate.
pub fn compare(reference: &Table, estimate: &Table) -> Result<Comparison> {
    let t_ref = reference.column("t")?;
    let t_est = estimate.column("t")?;
    let same_grid = t_ref.len() == t_est.len()
        && t_ref
            .iter()
            .zip(&t_est)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    let mut metrics = Vec::new();
    for name in estimate.headers.iter().filter(|h| h.as_str() != "t") {
        let r = reference.column(name)?;
        let e = estimate.column(name)?;
        let e = if same_grid { e } else { hold_onto(&t_est, &e, &t_ref) };
        metrics.push(channel_metrics(name, &r, &e));
    }
    Ok(Comparison {
        metrics,
        resampled: !same_grid,
    })
}

fn hold_onto(times: &[f64], values: &[f64], grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&t| {
            let idx = times.partition_point(|&tk| tk <= t + 1e-9 * (1.0 + t.abs()));
            values[idx.saturating_sub(1).min(values.len().saturating_sub(1))]
        })
        .collect()
}

/// File name and contents of every output of a run.
pub fn result_files(r: &ScenarioResult) -> Vec<(&'static str, String)> {
    vec![
        ("plant.csv", trajectory_table(&r.plant).to_csv_string()),
        ("measurements.csv", measurements_table(&r.measurements).to_csv_string()),
        ("estimate.csv", estimate_table(&r.estimate).to_csv_string()),
        ("metrics.csv", metrics_csv(&r.metrics)),
    ]
}

/// Column names of a trajectory file.
pub fn trajectory_header() -> Vec<String> {
    std::iter::once("t")
        .chain(ext::NAMES)
        .chain(["ax", "ay"])
        .map(str::to_string)
        .collect()
}

pub fn trajectory_table(traj: &Trajectory) -> Table {
    let mut t = Table::new(trajectory_header());
    t.rows = (0..traj.len())
        .map(|k| {
            let mut row = Vec::with_capacity(17);
            row.push(traj.times[k]);
            row.extend(traj.states[k].0.iter());
            row.push(traj.accelerations[k].0);
            row.push(traj.accelerations[k].1);
            row
        })
        .collect();
    t
}

pub fn estimate_table(est: &Estimate) -> Table {
    let mut t = Table::new(std::iter::once("t").chain(ext::NAMES).map(str::to_string).collect());
    t.rows = est
        .times
        .iter()
        .zip(&est.states)
        .map(|(&time, x)| std::iter::once(time).chain(x.0.iter().copied()).collect())
        .collect();
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_of_identical_series() {
        let r = [1.0, 2.0, 3.0, 4.0, 5.0];
        let m = channel_metrics("x", &r, &r);
        assert_eq!((m.rms, m.static_error, m.static_error_pct), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_offset() {
        let r: Vec<f64> = (0..100).map(|k| 27.0 + 0.01 * k as f64).collect();
        let e: Vec<f64> = r.iter().map(|x| x + 0.5).collect();
        let m = channel_metrics("vx", &r, &e);
        assert!((m.static_error - 0.5).abs() < 1e-12);
        assert!((m.rms - 0.5).abs() < 1e-12);
    }

    #[test]
    fn window_is_final_fifth() {
        let r = vec![0.0; 10];
        let e = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 3.0];
        assert_eq!(channel_metrics("x", &r, &e).static_error, 2.0);
    }

    #[test]
    fn minimal_scenario_defaults() {
        let s = Scenario::from_toml_str("name = \"a\"\nspeed_kph = 80.0\nduration = 1.0\n", Path::new("."), "inline").unwrap();
        assert_eq!(s.dt, 1e-3);
        assert_eq!(s.observer_speed_kph, 80.0);
        assert_eq!(s.initial, InitialRule::Trim);
        assert_eq!(s.input, InputSource::Trim);
        assert_eq!(s.weights.q_w, Matrix14::identity());
        assert!(s.noise.is_none());
    }

    #[test]
    fn scenario_rejections() {
        let parse = |t: &str| Scenario::from_toml_str(t, Path::new("."), "inline");
        assert!(parse("name = \"a\"\nspeed_kph = 80.0\nduration = 0.0\n").is_err());
        assert!(parse("name = \"a\"\nspeed_kph = 80.0\nduration = 1.0\ndt = 0.02\n").is_err());
        assert!(parse("name = \"a\"\nspeed_kph = 80.0\nduration = 1.0\nrider_mass_scale = -1.0\n").is_err());
        assert!(parse("name = \"a\"\nspeed_kph = 80.0\nduration = 1.0\n[initial]\noffsets = { bogus = 1.0 }\n").is_err());
        assert!(parse("name = \"a\"\nspeed_kph = 80.0\nduration = 1.0\nunknown = 1\n").is_err());
        assert!(parse("name = \"a\"\nspeed_kph = 80.0\nduration = 1.0\n[observer]\nr_w = [1.0, 2.0]\n").is_err());
    }

    #[test]
    fn doublet_is_one_sine_period() {
        let s = Scenario::from_toml_str(
            "name = \"d\"\nspeed_kph = 80.0\nduration = 4.0\n[input]\nsource = \"doublet\"\namplitude = 5.0\nstart = 1.0\nperiod = 2.0\n",
            Path::new("."),
            "inline",
        )
        .unwrap();
        let trim = find_trim(80.0 * KPH, &s.params).unwrap();
        let trace = input_trace(&s, &trim).unwrap();
        assert_eq!(trace.at(0.5).steering(), 0.0);
        assert!((trace.at(1.5).steering() - 5.0).abs() < 1e-9);
        assert!((trace.at(2.5).steering() + 5.0).abs() < 1e-9);
        assert_eq!(trace.at(3.5).steering(), 0.0);
        assert_eq!(trace.at(3.5).drive(), trim.u_star.drive());
    }
}
