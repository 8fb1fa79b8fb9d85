//! Extended model `Ẋ_ext = h(X_ext, u)` and its fixed-step RK4 integration.

use nalgebra::Vector4;

use crate::error::{Error, Result};
use crate::multibody::{assemble, TireForceState};
use crate::params::ParameterSet;
use crate::state::{ext, ExtendedState, InputVector, Vector14};
use crate::tire::{relaxation_rhs, slip_state, static_loads, steady_state_forces, vehicle_frame_velocity};

/// Largest accepted integration step, s.
pub const MAX_DT: f64 = 0.01;

/// Right-hand side plus the quantities an IMU would report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhsOutput {
    pub xdot: Vector14,
    pub low_speed: bool,
}

impl RhsOutput {
    /// `(v̇_x, v̇_y)` in the inertial frame.
    pub fn accelerations(&self) -> (f64, f64) {
        (self.xdot[ext::VX], self.xdot[ext::VY])
    }
}

/// `h(X, u)`.
pub fn extended_rhs(x: &ExtendedState, u: &InputVector, p: &ParameterSet) -> Result<Vector14> {
    Ok(extended_rhs_full(x, u, p)?.xdot)
}

pub fn extended_rhs_full(x: &ExtendedState, u: &InputVector, p: &ParameterSet) -> Result<RhsOutput> {
    let loads = static_loads(p)?;
    let q = x.reduced_coordinates();
    let v = x.velocity();
    let f = x.tire_forces();
    let tires = TireForceState {
        fx_f: f[0],
        fx_r: f[1],
        fy_f: f[2],
        fy_r: f[3],
        fz_f: loads.0,
        fz_r: loads.1,
    };
    let vdot = assemble(&q, &v, &tires, u, p)?.solve()?;

    let slips = slip_state(&q, &v, p);
    let steady = steady_state_forces(&slips, loads, p);
    let (vx_v, vy_v) = vehicle_frame_velocity(x.psi(), v[0], v[1]);
    let fdot = relaxation_rhs(&f, &steady, vx_v, vy_v, p);

    let mut xdot = Vector14::zeros();
    xdot[ext::PSI] = x.0[ext::DPSI];
    xdot[ext::PHI] = x.0[ext::DPHI];
    xdot[ext::DELTA] = x.0[ext::DDELTA];
    xdot.fixed_rows_mut::<7>(ext::VELOCITY).copy_from(&vdot);
    xdot.fixed_rows_mut::<4>(ext::FORCES).copy_from(&fdot);
    Ok(RhsOutput {
        xdot,
        low_speed: slips.low_speed,
    })
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt <= MAX_DT {
        Ok(())
    } else {
        Err(Error::InvalidScenario(format!("dt = {dt} s outside (0, {MAX_DT}]")))
    }
}

/// Classical fourth-order Runge-Kutta step of any autonomous-in-step system.
pub fn rk4_step<const N: usize, F>(
    x: &nalgebra::SVector<f64, N>,
    dt: f64,
    mut f: F,
) -> Result<nalgebra::SVector<f64, N>>
where
    F: FnMut(&nalgebra::SVector<f64, N>) -> Result<nalgebra::SVector<f64, N>>,
{
    let k1 = f(x)?;
    rk4_finish(x, dt, k1, f)
}

fn rk4_finish<const N: usize, F>(
    x: &nalgebra::SVector<f64, N>,
    dt: f64,
    k1: nalgebra::SVector<f64, N>,
    mut f: F,
) -> Result<nalgebra::SVector<f64, N>>
where
    F: FnMut(&nalgebra::SVector<f64, N>) -> Result<nalgebra::SVector<f64, N>>,
{
    let k2 = f(&(x + k1 * (0.5 * dt)))?;
    let k3 = f(&(x + k2 * (0.5 * dt)))?;
    let k4 = f(&(x + k3 * dt))?;
    Ok(x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
}

/// One RK4 step of the extended model with the input held over the step.
pub fn step(x: &ExtendedState, u: &InputVector, dt: f64, p: &ParameterSet) -> Result<ExtendedState> {
    check_dt(dt)?;
    let next = rk4_step(&x.0, dt, |y| extended_rhs(&ExtendedState(*y), u, p))?;
    finite_or_dump(ExtendedState(next), f64::NAN)
}

fn finite_or_dump(x: ExtendedState, t: f64) -> Result<ExtendedState> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite { t, state: x.to_string() })
    }
}

/// Piecewise-constant input samples `(t_k, u_k)`; `u_k` holds on `[t_k, t_{k+1})`
/// and the last sample holds indefinitely.
#[derive(Clone, Debug, PartialEq)]
pub struct InputTrace {
    times: Vec<f64>,
    values: Vec<InputVector>,
}

impl InputTrace {
    pub fn constant(u: InputVector) -> Self {
        Self {
            times: vec![0.0],
            values: vec![u],
        }
    }

    pub fn new(times: Vec<f64>, values: Vec<InputVector>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::TraceMismatch(format!(
                "{} input times for {} input samples",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidScenario("input trace times must be finite and strictly increasing".into()));
        }
        if times[0] > 1e-12 {
            return Err(Error::InvalidScenario(format!("input trace starts at {} s, after t = 0", times[0])));
        }
        if let Some(u) = values.iter().find(|u| !u.is_finite()) {
            return Err(Error::InvalidScenario(format!("non-finite input sample {:?}", u.0)));
        }
        Ok(Self { times, values })
    }

    /// Samples `f` on the grid `k·dt`, `k = 0..=n`.
    pub fn sampled(dt: f64, n: usize, f: impl Fn(f64) -> InputVector) -> Result<Self> {
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[InputVector] {
        &self.values
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Zero-order-hold value at `t`.
    pub fn at(&self, t: f64) -> InputVector {
        let tol = 1e-9 * (1.0 + t.abs());
        let idx = self.times.partition_point(|&tk| tk <= t + tol);
        self.values[idx.saturating_sub(1)]
    }
}

/// Why a run stopped early.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationFailure {
    pub t: f64,
    pub message: String,
}

/// Uniformly sampled simulation output.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<ExtendedState>,
    pub inputs: Vec<InputVector>,
    /// `(v̇_x, v̇_y)` at each recorded state.
    pub accelerations: Vec<(f64, f64)>,
    pub low_speed: Vec<bool>,
    pub failure: Option<SimulationFailure>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&ExtendedState> {
        self.states.last()
    }

    /// Time series of one extended-state entry.
    pub fn channel(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|x| x.0[index]).collect()
    }

    /// Turns a recorded failure into an error.
    pub fn into_result(self) -> Result<Self> {
        match &self.failure {
            None => Ok(self),
            Some(f) => Err(Error::NonFinite {
                t: f.t,
                state: f.message.clone(),
            }),
        }
    }
}

/// Number of steps covering `[0, duration]`.
pub fn step_count(duration: f64, dt: f64) -> usize {
    (duration / dt - 1e-9).ceil().max(0.0) as usize
}

/// Integrates from `x0` over `[0, duration]`. A failure mid-run truncates the
/// trajectory and is recorded in [`Trajectory::failure`].
pub fn simulate(
    x0: &ExtendedState,
    inputs: &InputTrace,
    dt: f64,
    duration: f64,
    p: &ParameterSet,
) -> Result<Trajectory> {
    check_dt(dt)?;
    if !(duration >= 0.0) {
        return Err(Error::InvalidScenario(format!("duration {duration} s must be >= 0")));
    }
    if !x0.is_finite() {
        return Err(Error::InvalidState(format!("non-finite initial state: {x0}")));
    }
    let n = step_count(duration, dt);
    let mut traj = Trajectory {
        dt,
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        inputs: Vec::with_capacity(n + 1),
        accelerations: Vec::with_capacity(n + 1),
        low_speed: Vec::with_capacity(n + 1),
        failure: None,
    };

    let mut x = *x0;
    for k in 0..=n {
        let t = k as f64 * dt;
        let u = inputs.at(t);
        let head = match extended_rhs_full(&x, &u, p) {
            Ok(h) if h.xdot.iter().all(|v| v.is_finite()) => h,
            Ok(h) => {
                traj.failure = Some(SimulationFailure {
                    t,
                    message: format!("non-finite derivative {:?} at state {x}", h.xdot.as_slice()),
                });
                break;
            }
            Err(e) => {
                traj.failure = Some(SimulationFailure {
                    t,
                    message: format!("{e} at state {x}"),
                });
                break;
            }
        };
        traj.times.push(t);
        traj.states.push(x);
        traj.inputs.push(u);
        traj.accelerations.push(head.accelerations());
        traj.low_speed.push(head.low_speed);
        if k == n {
            break;
        }
        let next = rk4_finish(&x.0, dt, head.xdot, |y| extended_rhs(&ExtendedState(*y), &u, p));
        match next.and_then(|y| finite_or_dump(ExtendedState(y), t + dt)) {
            Ok(y) => x = y,
            Err(e) => {
                traj.failure = Some(SimulationFailure {
                    t: t + dt,
                    message: e.to_string(),
                });
                break;
            }
        }
    }
    Ok(traj)
}

/// Kinetic energy `½ vᵀ M v` of the generalized velocity block.
pub fn kinetic_energy(x: &ExtendedState, p: &ParameterSet) -> Result<f64> {
    let m = crate::multibody::mass_matrix(&x.reduced_coordinates(), p)?;
    let v = x.velocity();
    Ok(0.5 * v.dot(&(m * v)))
}

/// Steady-state tire forces consistent with `x`'s slips, `[F_fx0, F_rx0, F_fy0, F_ry0]`.
pub fn steady_forces_at(x: &ExtendedState, p: &ParameterSet) -> Result<Vector4<f64>> {
    let slips = slip_state(&x.reduced_coordinates(), &x.velocity(), p);
    Ok(steady_state_forces(&slips, static_loads(p)?, p))
}
