//! Four-rigid-body motorcycle model with relaxed magic-formula tires and a
//! linear state observer designed by LQR duality.

pub mod dual;
pub mod error;
pub mod estimator;
pub mod export;
pub mod io;
pub mod kinematics;
pub mod multibody;
pub mod params;
pub mod scenario;
pub mod simulator;
pub mod state;
pub mod tire;

pub use error::{Error, Result};
pub use kinematics::Body;
pub use params::ParameterSet;
pub use state::{ExtendedState, GeneralizedState, InputVector, Vector14, Vector7};
