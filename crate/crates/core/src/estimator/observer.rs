//! Luenberger observer `ẋ̂ = (A − GC) x̂ + G s + (B − GD) u` in deviation
//! coordinates, discretized exactly for inputs held over each step.

use nalgebra::{DMatrix, Vector4};

use super::{LinearObserverDesign, Matrix14, Matrix14x4, Measurement};
use crate::error::{Error, Result};
use crate::params::ParameterSet;
use crate::state::{ext, ExtendedState, InputVector, Vector14};

/// Zero-order-hold discretization of one design at a fixed step.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteObserver {
    pub dt: f64,
    pub phi: Matrix14,
    pub gamma_s: Matrix14x4,
    pub gamma_u: Matrix14x4,
    pub x_star: ExtendedState,
    pub u_star: InputVector,
    pub s_star: Vector4<f64>,
}

impl DiscreteObserver {
    pub fn new(design: &LinearObserverDesign, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidScenario(format!("observer step {dt} must be positive")));
        }
        let a_cl = design.closed_loop();
        let b_u = design.b - design.g * design.d;
        let mut aug = DMatrix::<f64>::zeros(22, 22);
        aug.view_mut((0, 0), (14, 14)).copy_from(&(a_cl * dt));
        aug.view_mut((0, 14), (14, 4)).copy_from(&(design.g * dt));
        aug.view_mut((0, 18), (14, 4)).copy_from(&(b_u * dt));
        let e = aug.exp();
        let disc = Self {
            dt,
            phi: Matrix14::from_fn(|i, j| e[(i, j)]),
            gamma_s: Matrix14x4::from_fn(|i, j| e[(i, 14 + j)]),
            gamma_u: Matrix14x4::from_fn(|i, j| e[(i, 18 + j)]),
            x_star: design.trim.x_star,
            u_star: design.trim.u_star,
            s_star: design.s_star,
        };
        if !disc.phi.iter().chain(disc.gamma_s.iter()).chain(disc.gamma_u.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                t: 0.0,
                state: "observer discretization".into(),
            });
        }
        Ok(disc)
    }

    /// Advances the deviation `x̂` by one step using absolute `s` and `u`.
    pub fn step(&self, x_hat: &Vector14, s: &Vector4<f64>, u: &InputVector) -> Vector14 {
        self.phi * x_hat + self.gamma_s * (s - self.s_star) + self.gamma_u * (u.0 - self.u_star.0)
    }

    pub fn absolute(&self, x_hat: &Vector14) -> ExtendedState {
        ExtendedState(self.x_star.0 + x_hat)
    }
}

/// One observer step. Builds the discretization on every call; use
/// [`DiscreteObserver`] for runs.
pub fn observer_step(
    x_hat: &Vector14,
    s: &Vector4<f64>,
    u: &InputVector,
    design: &LinearObserverDesign,
    dt: f64,
) -> Result<Vector14> {
    let next = DiscreteObserver::new(design, dt)?.step(x_hat, s, u);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::NonFinite {
            t: dt,
            state: format!("{:?}", next.as_slice()),
        })
    }
}

/// Observer output: deviations and absolute estimates on the measurement grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub times: Vec<f64>,
    pub deviations: Vec<Vector14>,
    pub states: Vec<ExtendedState>,
}

impl Estimate {
    pub fn channel(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|x| x.0[index]).collect()
    }
}

/// Deviation that starts the observer as if the wheels rolled without slip at
/// speed `v`: `v̂_x = v`, `θ̂̇ = v/R`, everything else at the trim value.
pub fn no_slippage_estimate(design: &LinearObserverDesign, v: f64, p: &ParameterSet) -> Vector14 {
    let x_star = &design.trim.x_star.0;
    let mut dev = Vector14::zeros();
    dev[ext::VX] = v - x_star[ext::VX];
    dev[ext::DTHETA_F] = v / p.r_f - x_star[ext::DTHETA_F];
    dev[ext::DTHETA_R] = v / p.r_r - x_star[ext::DTHETA_R];
    dev
}

/// Runs the observer over aligned measurement and input samples. Estimate `k`
/// uses measurements `0..k`.
pub fn run_observer(
    measurements: &[Measurement],
    inputs: &[InputVector],
    design: &LinearObserverDesign,
    x_hat0: &Vector14,
    dt: f64,
) -> Result<Estimate> {
    if measurements.len() != inputs.len() {
        return Err(Error::TraceMismatch(format!(
            "{} measurements for {} input samples",
            measurements.len(),
            inputs.len()
        )));
    }
    if let Some(w) = measurements.windows(2).find(|w| ((w[1].t - w[0].t) - dt).abs() > 1e-6 * dt) {
        return Err(Error::TraceMismatch(format!(
            "measurement spacing {} s at t = {} differs from dt = {dt}",
            w[1].t - w[0].t,
            w[0].t
        )));
    }
    let obs = DiscreteObserver::new(design, dt)?;
    let n = measurements.len();
    let mut est = Estimate {
        times: Vec::with_capacity(n),
        deviations: Vec::with_capacity(n),
        states: Vec::with_capacity(n),
    };
    let mut x_hat = *x_hat0;
    for (k, (m, u)) in measurements.iter().zip(inputs).enumerate() {
        est.times.push(m.t);
        est.deviations.push(x_hat);
        est.states.push(obs.absolute(&x_hat));
        if k + 1 < n {
            x_hat = obs.step(&x_hat, &m.s, u);
            if !x_hat.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    t: m.t + dt,
                    state: format!("observer deviation {:?}", x_hat.as_slice()),
                });
            }
        }
    }
    Ok(est)
}
