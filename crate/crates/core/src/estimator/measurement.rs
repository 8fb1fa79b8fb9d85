//! Idealized IMU measurements and their CSV form.

use std::path::Path;

use nalgebra::Vector4;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::io::Table;
use crate::simulator::Trajectory;
use crate::state::ext;

/// Measurement `s` at time `t`, in the row order of `C`:
/// `(v̇_x, v̇_y, ψ̇, φ̇)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub t: f64,
    pub s: Vector4<f64>,
}

/// Column order of the measurement file.
pub const CSV_HEADER: [&str; 5] = ["t", "ax", "ay", "dphi", "dpsi"];

/// Additive white Gaussian noise, standard deviations in `C` row order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub std: [f64; 4],
    pub seed: u64,
}

/// Reads `v̇_x, v̇_y` and `ψ̇, φ̇` from a simulated trajectory.
pub fn synthesize_measurements(traj: &Trajectory, noise: Option<&NoiseSpec>) -> Result<Vec<Measurement>> {
    let mut out: Vec<Measurement> = traj
        .times
        .iter()
        .zip(&traj.states)
        .zip(&traj.accelerations)
        .map(|((&t, x), &(ax, ay))| Measurement {
            t,
            s: Vector4::new(ax, ay, x.0[ext::DPSI], x.0[ext::DPHI]),
        })
        .collect();
    if let Some(n) = noise {
        let mut rng = ChaCha8Rng::seed_from_u64(n.seed);
        let dists = n
            .std
            .iter()
            .map(|&sd| Normal::new(0.0, sd).map_err(|e| Error::InvalidScenario(format!("noise std {sd}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        for m in &mut out {
            for (i, d) in dists.iter().enumerate() {
                m.s[i] += d.sample(&mut rng);
            }
        }
    }
    Ok(out)
}

pub fn measurements_table(data: &[Measurement]) -> Table {
    let mut t = Table::new(CSV_HEADER.iter().map(|s| s.to_string()).collect());
    t.rows = data
        .iter()
        .map(|m| vec![m.t, m.s[0], m.s[1], m.s[3], m.s[2]])
        .collect();
    t
}

pub fn write_measurements(path: impl AsRef<Path>, data: &[Measurement]) -> Result<()> {
    measurements_table(data).write(path)
}

/// Loads a `t,ax,ay,dphi,dpsi` file and reorders it to `(v̇_x, v̇_y, ψ̇, φ̇)`.
pub fn read_measurements(path: impl AsRef<Path>) -> Result<Vec<Measurement>> {
    let table = Table::read(path)?;
    let cols = CSV_HEADER
        .iter()
        .map(|c| table.index(c))
        .collect::<Result<Vec<usize>>>()?;
    Ok(table
        .rows
        .iter()
        .map(|r| Measurement {
            t: r[cols[0]],
            s: Vector4::new(r[cols[1]], r[cols[2]], r[cols[4]], r[cols[3]]),
        })
        .collect())
}
