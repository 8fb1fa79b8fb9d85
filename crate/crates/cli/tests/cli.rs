use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ptw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptw")).args(args).output().expect("spawn ptw")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
        .display()
        .to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn field(path: &Path, row: usize, column: &str) -> String {
    let (header, rows) = read_csv(path);
    let i = header.iter().position(|h| h == column).unwrap();
    rows[row][i].clone()
}

fn metric(path: &Path, channel: &str, column: &str) -> f64 {
    let (header, rows) = read_csv(path);
    let i = header.iter().position(|h| h == column).unwrap();
    rows.iter().find(|r| r[0] == channel).unwrap()[i].parse().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn trim_at_100_kph() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trim");
    let o = ptw(&["trim", "--speed-kph", "100", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("v_x*      = 27.778 m/s"));
    let residual: f64 = field(&out.join("trim.csv"), 0, "residual").parse().unwrap();
    assert!(residual < 1e-8);
    assert!(std::fs::read_to_string(out.join("trim_report.txt")).unwrap().contains("iteration"));
}

#[test]
fn trim_below_speed_floor_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trim");
    let o = ptw(&["trim", "--speed-kph", "0.1", "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("outside the supported trim range"));
    assert!(!out.exists());
}

#[test]
fn drive_torque_grows_with_speed() {
    let dir = tempfile::tempdir().unwrap();
    let tau: Vec<f64> = ["50", "80", "100"]
        .iter()
        .map(|v| {
            let out = dir.path().join(v);
            assert_eq!(code(&ptw(&["trim", "--speed-kph", v, "--out", s(&out)])), 0);
            field(&out.join("trim.csv"), 0, "tau_D").parse().unwrap()
        })
        .collect();
    assert!(tau[0] < tau[1] && tau[1] < tau[2], "{tau:?}");
}

fn designed_spectrum(dir: &Path) -> Vec<(f64, bool)> {
    let (_, rows) = read_csv(&dir.join("spectrum.csv"));
    rows.iter().map(|r| (r[0].parse().unwrap(), r[2] == "1")).collect()
}

#[test]
fn design_bundle_at_100_kph() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("design");
    let o = ptw(&["design", "--speed-kph", "100", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out.join("A.csv"));
    assert_eq!((header.len(), rows.len()), (14, 14));
    for (name, cols) in [("B.csv", 4), ("C.csv", 14), ("D.csv", 4), ("G.csv", 4)] {
        let (header, rows) = read_csv(&out.join(name));
        assert_eq!(header.len(), cols, "{name}");
        assert!(rows.iter().all(|r| r.len() == cols));
    }
    let spectrum = designed_spectrum(&out);
    assert_eq!(spectrum.len(), 14);
    assert!(spectrum.iter().filter(|(_, excluded)| !excluded).all(|(re, _)| *re < 0.0));
    assert_eq!(spectrum.iter().filter(|(_, excluded)| *excluded).count(), 1);
}

#[test]
fn scaled_process_noise_changes_gain() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&ptw(&["design", "--speed-kph", "100", "--out", s(&a)])), 0);
    assert_eq!(code(&ptw(&["design", "--speed-kph", "100", "--qw", "10", "--out", s(&b)])), 0);
    let ga = std::fs::read_to_string(a.join("G.csv")).unwrap();
    let gb = std::fs::read_to_string(b.join("G.csv")).unwrap();
    assert_ne!(ga, gb);
    assert!(designed_spectrum(&b).iter().filter(|(_, e)| !e).all(|(re, _)| *re < 0.0));
}

#[test]
fn strict_detectability_fails_with_design_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("design");
    let o = ptw(&["design", "--speed-kph", "100", "--unobservable", "reject", "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not detectable"));
    assert!(!out.exists());
}

#[test]
fn malformed_params_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("design");
    let missing = dir.path().join("missing.toml");
    let o = ptw(&["design", "--params", s(&missing), "--speed-kph", "100", "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(!out.exists());

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "m_gf = [").unwrap();
    let o = ptw(&["design", "--params", s(&bad), "--speed-kph", "100", "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(!out.exists());
}

#[test]
fn bad_weights_are_configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("design");
    for rw in ["--rw=1,2", "--rw=-1", "--rw=x", "--bogus"] {
        let o = ptw(&["design", "--speed-kph", "100", rw, "--out", s(&out)]);
        assert_eq!(code(&o), 1, "{rw}");
    }
}

#[test]
fn rectilinear_100_converges_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let sc = scenario("rectilinear-100.toml");
    assert_eq!(code(&ptw(&["run", "--scenario", &sc, "--out", s(&a)])), 0);
    assert_eq!(code(&ptw(&["run", "--scenario", &sc, "--out", s(&b)])), 0);
    for channel in ["vx", "dthf", "dthr"] {
        let pct = metric(&a.join("metrics.csv"), channel, "static_error_pct");
        assert!(pct < 1.0, "{channel}: {pct}%");
    }
    for name in ["plant.csv", "measurements.csv", "estimate.csv", "metrics.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let (header, rows) = read_csv(&a.join("plant.csv"));
    assert_eq!(header.len(), 17);
    assert_eq!(rows.len(), 10_001);
    let (header, _) = read_csv(&a.join("measurements.csv"));
    assert_eq!(header, ["t", "ax", "ay", "dphi", "dpsi"]);
}

#[test]
fn cross_speed_error_is_larger_at_low_speed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cross");
    let o = ptw(&[
        "run",
        "--scenario",
        &scenario("cross-speed-50.toml"),
        "--scenario",
        &scenario("cross-speed-100.toml"),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let e50 = metric(&out.join("cross-speed-50/metrics.csv"), "vx", "static_error").abs();
    let e100 = metric(&out.join("cross-speed-100/metrics.csv"), "vx", "static_error").abs();
    assert!(e50 > e100, "{e50} vs {e100}");
}

#[test]
fn mass_robustness_reports_offsets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mass");
    let o = ptw(&["run", "--scenario", &scenario("mass-robustness.toml"), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_csv(&out.join("metrics.csv"));
    assert_eq!(rows.len(), 14);
    for r in &rows {
        let rms: f64 = r[1].parse().unwrap();
        let offset: f64 = r[2].parse().unwrap();
        assert!(rms.is_finite() && offset.is_finite(), "{r:?}");
    }
}

#[test]
fn overtaking_scenarios_run() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["overtaking.toml", "overtaking-trace.toml"] {
        let out = dir.path().join(name);
        let o = ptw(&["run", "--scenario", &scenario(name), "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let peak_roll = read_csv(&out.join("plant.csv"))
            .1
            .iter()
            .map(|r| r[2].parse::<f64>().unwrap().abs())
            .fold(0.0, f64::max);
        assert!(peak_roll > 0.05, "{name}: no lane change ({peak_roll} rad)");
    }
}

#[test]
fn invalid_scenario_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("bad.toml");
    std::fs::write(&sc, "name = \"bad\"\nspeed_kph = 100.0\nduration = 1.0\ndt = 0.05\n").unwrap();
    let o = ptw(&["run", "--scenario", s(&sc), "--out", s(&dir.path().join("out"))]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt must be in"));
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn compare_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let r = write(dir.path(), "ref.csv", "t,vx,vy\n0,27,0\n0.5,27.5,0.1\n1,28,0.2\n");
    let out = dir.path().join("m.csv");
    let o = ptw(&["compare", "--ref", s(&r), "--est", s(&r), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    for channel in ["vx", "vy"] {
        assert_eq!(metric(&out, channel, "rms"), 0.0);
        assert_eq!(metric(&out, channel, "static_error"), 0.0);
    }
}

#[test]
fn compare_constant_offset() {
    let dir = tempfile::tempdir().unwrap();
    let r = write(dir.path(), "ref.csv", "t,vx\n0,27\n1,27.25\n2,27.5\n3,28\n4,29\n");
    let e = write(dir.path(), "est.csv", "t,vx\n0,27.5\n1,27.75\n2,28\n3,28.5\n4,29.5\n");
    let out = dir.path().join("m.csv");
    assert_eq!(code(&ptw(&["compare", "--ref", s(&r), "--est", s(&e), "--out", s(&out)])), 0);
    assert_eq!(metric(&out, "vx", "static_error"), 0.5);
    assert_eq!(metric(&out, "vx", "rms"), 0.5);
}

#[test]
fn compare_missing_reference_column() {
    let dir = tempfile::tempdir().unwrap();
    let r = write(dir.path(), "ref.csv", "t,vx\n0,27\n1,28\n");
    let e = write(dir.path(), "est.csv", "t,vx,dthf\n0,27,1\n1,28,1\n");
    let out = dir.path().join("m.csv");
    let o = ptw(&["compare", "--ref", s(&r), "--est", s(&e), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing column 'dthf'"));
    assert!(!out.exists());
}

#[test]
fn compare_resamples_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let r = write(dir.path(), "ref.csv", "t,vx\n0,1\n0.5,1\n1,1\n1.5,1\n2,1\n");
    let e = write(dir.path(), "est.csv", "t,vx\n0,1\n1,2\n");
    let out = dir.path().join("m.csv");
    let o = ptw(&["compare", "--ref", s(&r), "--est", s(&e), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("zero-order hold"));
    assert_eq!(metric(&out, "vx", "static_error"), 1.0);
}

#[test]
fn help_documents_flags() {
    let o = ptw(&["design", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in ["--params", "--speed-kph", "--qw", "--rw", "--unobservable", "--out"] {
        assert!(text.contains(flag), "{flag}");
    }
    let o = ptw(&["run", "--help"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("--scenario"));
}
