//! File forms of trims and observer designs.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Complex, Dim, Matrix, RawStorage};

use crate::error::{Error, Result};
use crate::estimator::{LinearObserverDesign, TrimPoint, MEASUREMENT_HEADER};
use crate::io::fmt9;
use crate::state::{ext, InputVector};

/// Columns of a trim file.
pub fn trim_header() -> Vec<String> {
    ["speed_kph"]
        .into_iter()
        .chain(ext::NAMES)
        .chain(InputVector::NAMES)
        .chain(["residual", "iterations"])
        .map(str::to_string)
        .collect()
}

pub fn trim_csv(tp: &TrimPoint) -> String {
    let mut row = vec![tp.speed() * 3.6];
    row.extend(tp.x_star.0.iter());
    row.extend(tp.u_star.0.iter());
    row.push(tp.residual_norm);
    row.push(tp.iterations as f64);
    let cells: Vec<String> = row.into_iter().map(fmt9).collect();
    format!("{}\n{}\n", trim_header().join(","), cells.join(","))
}

pub fn trim_report(tp: &TrimPoint) -> String {
    let x = &tp.x_star.0;
    let mut out = String::new();
    let _ = writeln!(out, "trim at {:.3} kph", tp.speed() * 3.6);
    let _ = writeln!(out, "  v_x*      = {:.3} m/s", x[ext::VX]);
    let _ = writeln!(out, "  dtheta_f* = {:.6} rad/s", x[ext::DTHETA_F]);
    let _ = writeln!(out, "  dtheta_r* = {:.6} rad/s", x[ext::DTHETA_R]);
    let _ = writeln!(out, "  F_fx*     = {:.6} N", x[ext::FFX]);
    let _ = writeln!(out, "  F_rx*     = {:.6} N", x[ext::FRX]);
    let _ = writeln!(out, "  tau_D*    = {:.6} N m", tp.u_star.drive());
    let _ = writeln!(out, "  residual  = {:.3e} after {} Newton steps", tp.residual_norm, tp.iterations);
    out
}

/// Full-precision CSV of a matrix with the given column names.
pub fn matrix_csv<R: Dim, C: Dim, S: RawStorage<f64, R, C>>(m: &Matrix<f64, R, C, S>, columns: &[&str]) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Whether `z` matches one of the `excluded` eigenvalues.
pub fn is_excluded(z: &Complex<f64>, excluded: &[Complex<f64>]) -> bool {
    excluded.iter().any(|e| (e - z).norm() <= 1e-6 * (1.0 + e.norm()))
}

pub fn spectrum_csv(design: &LinearObserverDesign) -> String {
    let mut eig = design.closed_loop_spectrum.clone();
    eig.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let mut out = String::from("re,im,excluded\n");
    for z in &eig {
        let _ = writeln!(out, "{:e},{:e},{}", z.re, z.im, u8::from(is_excluded(z, &design.excluded_modes)));
    }
    out
}

fn diagonal(m: impl Iterator<Item = f64>) -> String {
    let d: Vec<String> = m.map(|v| format!("{v:e}")).collect();
    format!("[{}]", d.join(", "))
}

pub fn design_manifest(design: &LinearObserverDesign) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "speed_kph = {:e}", design.trim.speed() * 3.6);
    let _ = writeln!(out, "states = {:?}", ext::NAMES);
    let _ = writeln!(out, "inputs = {:?}", InputVector::NAMES);
    let _ = writeln!(out, "measurements = {:?}", ["ax", "ay", "dpsi", "dphi"]);
    let _ = writeln!(out, "q_w_diagonal = {}", diagonal(design.q_w.diagonal().iter().copied()));
    let _ = writeln!(out, "r_w_diagonal = {}", diagonal(design.r_w.diagonal().iter().copied()));
    let _ = writeln!(out, "riccati_residual = {:e}", design.riccati_residual);
    let _ = writeln!(out, "riccati_tolerance = {:e}", design.riccati_tolerance);
    let _ = writeln!(out, "max_real_eigenvalue = {:e}", design.max_real_eigenvalue());
    let _ = writeln!(out, "designed_abscissa = {:e}", design.designed_abscissa());
    let excluded: Vec<String> = design
        .excluded_modes
        .iter()
        .map(|z| format!("[{:e}, {:e}]", z.re, z.im))
        .collect();
    let _ = writeln!(out, "excluded_modes = [{}]", excluded.join(", "));
    let _ = writeln!(
        out,
        "files = {{ A = \"A.csv\", B = \"B.csv\", C = \"C.csv\", D = \"D.csv\", G = \"G.csv\", P = \"P.csv\", spectrum = \"spectrum.csv\", trim = \"trim.csv\" }}"
    );
    out
}

/// File name and contents of every member of a design bundle.
pub fn design_bundle(design: &LinearObserverDesign) -> Vec<(&'static str, String)> {
    let measurements: Vec<&str> = MEASUREMENT_HEADER[1..].to_vec();
    let c_order = [measurements[0], measurements[1], measurements[3], measurements[2]];
    vec![
        ("A.csv", matrix_csv(&design.a, &ext::NAMES)),
        ("B.csv", matrix_csv(&design.b, &InputVector::NAMES)),
        ("C.csv", matrix_csv(&design.c, &ext::NAMES)),
        ("D.csv", matrix_csv(&design.d, &InputVector::NAMES)),
        ("G.csv", matrix_csv(&design.g, &c_order)),
        ("P.csv", matrix_csv(&design.p, &ext::NAMES)),
        ("spectrum.csv", spectrum_csv(design)),
        ("trim.csv", trim_csv(&design.trim)),
        ("manifest.toml", design_manifest(design)),
    ]
}

/// Writes `files` into `dir`, creating it if needed.
pub fn write_files(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
