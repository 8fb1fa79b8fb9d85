//! State and input containers.

use std::fmt;

use nalgebra::{SVector, Vector4};

use crate::error::{Error, Result};

pub type Vector7 = SVector<f64, 7>;
pub type Vector14 = SVector<f64, 14>;

/// Indices into the generalized coordinate / velocity vectors.
pub mod gen {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const PSI: usize = 2;
    pub const PHI: usize = 3;
    pub const DELTA: usize = 4;
    pub const THETA_F: usize = 5;
    pub const THETA_R: usize = 6;
}

/// Indices into the 14-entry extended state.
pub mod ext {
    pub const PSI: usize = 0;
    pub const PHI: usize = 1;
    pub const DELTA: usize = 2;
    pub const VX: usize = 3;
    pub const VY: usize = 4;
    pub const DPSI: usize = 5;
    pub const DPHI: usize = 6;
    pub const DDELTA: usize = 7;
    pub const DTHETA_F: usize = 8;
    pub const DTHETA_R: usize = 9;
    pub const FFX: usize = 10;
    pub const FRX: usize = 11;
    pub const FFY: usize = 12;
    pub const FRY: usize = 13;

    /// Offset of the generalized-velocity block.
    pub const VELOCITY: usize = 3;
    /// Offset of the tire-force block.
    pub const FORCES: usize = 10;

    pub const NAMES: [&str; 14] = [
        "psi", "phi", "delta", "vx", "vy", "dpsi", "dphi", "ddelta", "dthf", "dthr", "Ffx", "Frx",
        "Ffy", "Fry",
    ];

    pub const LONGITUDINAL: [usize; 5] = [VX, DTHETA_F, DTHETA_R, FFX, FRX];
    pub const LATERAL: [usize; 9] = [PSI, PHI, DELTA, VY, DPSI, DPHI, DDELTA, FFY, FRY];
}

/// Generalized coordinates `[x, y, psi, phi, delta, theta_f, theta_r]` and
/// velocities `[v_x, v_y, dpsi, dphi, ddelta, dtheta_f, dtheta_r]`.
///
/// `v_x`, `v_y` are inertial-frame components (`v = dq/dt`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralizedState {
    pub q: Vector7,
    pub v: Vector7,
}

impl GeneralizedState {
    pub fn new(q: Vector7, v: Vector7) -> Result<Self> {
        let s = Self { q, v };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if self.q.iter().chain(self.v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidState("non-finite generalized state".into()));
        }
        check_roll(self.q[gen::PHI])
    }
}

pub(crate) fn check_roll(phi: f64) -> Result<()> {
    if phi.abs() >= std::f64::consts::FRAC_PI_2 {
        Err(Error::RollOutOfRange(phi))
    } else {
        Ok(())
    }
}

/// `[psi, phi, delta, v (7), F_fx, F_rx, F_fy, F_ry]`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtendedState(pub Vector14);

impl ExtendedState {
    pub fn zeros() -> Self {
        Self(Vector14::zeros())
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != 14 {
            return Err(Error::InvalidState(format!("extended state needs 14 entries, got {}", x.len())));
        }
        Ok(Self(Vector14::from_column_slice(x)))
    }

    pub fn psi(&self) -> f64 {
        self.0[ext::PSI]
    }
    pub fn phi(&self) -> f64 {
        self.0[ext::PHI]
    }
    pub fn delta(&self) -> f64 {
        self.0[ext::DELTA]
    }

    /// Generalized velocity block.
    pub fn velocity(&self) -> Vector7 {
        self.0.fixed_rows::<7>(ext::VELOCITY).into_owned()
    }

    /// `[F_fx, F_rx, F_fy, F_ry]`
    pub fn tire_forces(&self) -> Vector4<f64> {
        self.0.fixed_rows::<4>(ext::FORCES).into_owned()
    }

    /// Generalized coordinates with `x = y = theta_f = theta_r = 0`; the
    /// dynamics do not depend on those four.
    pub fn reduced_coordinates(&self) -> Vector7 {
        let mut q = Vector7::zeros();
        q[gen::PSI] = self.psi();
        q[gen::PHI] = self.phi();
        q[gen::DELTA] = self.delta();
        q
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl fmt::Display for ExtendedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, v)) in ext::NAMES.iter().zip(self.0.iter()).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}={v:.6e}")?;
        }
        Ok(())
    }
}

/// Inputs `[tau, tau_D, tau_Bf, tau_Br]` in N·m: steering torque, drive
/// torque, front and rear braking torques. Braking torques are signed like
/// the drive torque, so a torque opposing forward wheel spin is negative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputVector(pub Vector4<f64>);

impl InputVector {
    pub const NAMES: [&'static str; 4] = ["tau", "tau_D", "tau_Bf", "tau_Br"];

    pub fn zeros() -> Self {
        Self(Vector4::zeros())
    }

    pub fn new(tau: f64, tau_d: f64, tau_bf: f64, tau_br: f64) -> Self {
        Self(Vector4::new(tau, tau_d, tau_bf, tau_br))
    }

    pub fn steering(&self) -> f64 {
        self.0[0]
    }
    pub fn drive(&self) -> f64 {
        self.0[1]
    }
    pub fn brake_front(&self) -> f64 {
        self.0[2]
    }
    pub fn brake_rear(&self) -> f64 {
        self.0[3]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Braking torques must not push the wheels forward.
    pub fn check_braking(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidState("non-finite input".into()));
        }
        if self.brake_front() > 0.0 || self.brake_rear() > 0.0 {
            return Err(Error::InvalidState(format!(
                "braking torques must be <= 0 (got tau_Bf = {}, tau_Br = {})",
                self.brake_front(),
                self.brake_rear()
            )));
        }
        Ok(())
    }
}
