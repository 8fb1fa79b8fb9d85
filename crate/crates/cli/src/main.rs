//! `ptw`: trim, observer design, scenario runs and trace comparison.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ptw_core::estimator::{design_observer, find_trim_logged, Matrix14, Matrix4, UnobservableModes};
use ptw_core::export::{design_bundle, trim_csv, trim_report, write_files};
use ptw_core::io::{fmt9, Table};
use ptw_core::scenario::{compare, metrics_csv, result_files, run_scenario, ChannelMetrics, Scenario, KPH};
use ptw_core::{Error, ParameterSet};

#[derive(Parser)]
#[command(name = "ptw", version, about = "Motorcycle dynamics, trim and state-observer runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the rectilinear trim and write trim.csv plus a residual report.
    Trim(TrimArgs),
    /// Linearize at a trim and design the observer gain; writes A, B, C, D, G,
    /// P, the closed-loop spectrum and a manifest.
    Design(DesignArgs),
    /// Run one or more scenario files (plant, measurements, observer, metrics).
    Run(RunArgs),
    /// Per-channel error metrics of an estimate file against a reference file.
    Compare(CompareArgs),
}

#[derive(Args)]
struct ParamsArg {
    /// Parameter file (TOML); the built-in GSX-R 1000 set when omitted.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args)]
struct TrimArgs {
    #[command(flatten)]
    params: ParamsArg,
    /// Trim speed in km/h.
    #[arg(long)]
    speed_kph: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Unobservable {
    /// Design on the detectable complement of marginal unobservable modes.
    Exclude,
    /// Fail when (A, C) is not detectable.
    Reject,
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    params: ParamsArg,
    /// Trim speed in km/h.
    #[arg(long)]
    speed_kph: f64,
    /// Process-noise weight: one scale for the identity, or 14 comma-separated
    /// diagonal entries.
    #[arg(long, default_value = "1")]
    qw: String,
    /// Measurement-noise weight: one scale for the identity, or 4
    /// comma-separated diagonal entries in the order ax, ay, dpsi, dphi.
    #[arg(long, default_value = "1")]
    rw: String,
    /// Treatment of unobservable modes on the imaginary axis.
    #[arg(long, value_enum, default_value = "exclude")]
    unobservable: Unobservable,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML); repeat to run several concurrently.
    #[arg(long, required = true)]
    scenario: Vec<PathBuf>,
    /// Output directory; one sub-directory per scenario name when several
    /// scenarios are given.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Reference trace (CSV with a `t` column).
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Estimate trace; every non-time column must also be in the reference.
    #[arg(long)]
    est: PathBuf,
    /// Metrics file to write.
    #[arg(long)]
    out: PathBuf,
}

/// Exit codes: 1 I/O or configuration, 2 trim, 3 design, 4 numerics at run time.
#[derive(Clone, Copy)]
enum Stage {
    Trim = 2,
    Design = 3,
    Run = 4,
}

struct Failure {
    code: u8,
    error: Error,
}

fn is_config(e: &Error) -> bool {
    matches!(
        e,
        Error::Io { .. }
            | Error::Parse { .. }
            | Error::InvalidParameters(_)
            | Error::InvalidScenario(_)
            | Error::InvalidState(_)
            | Error::SpeedOutOfRange(_)
            | Error::TraceMismatch(_)
            | Error::MissingColumn { .. }
    )
}

fn at(stage: Stage) -> impl Fn(Error) -> Failure {
    move |error| Failure {
        code: if is_config(&error) { 1 } else { stage as u8 },
        error,
    }
}

fn config(error: Error) -> Failure {
    Failure { code: 1, error }
}

fn load_params(arg: &ParamsArg) -> Result<ParameterSet, Failure> {
    match &arg.params {
        Some(p) => ParameterSet::load(p).map_err(config),
        None => Ok(ParameterSet::gsxr1000()),
    }
}

fn parse_weight<const N: usize>(text: &str, what: &str) -> Result<nalgebra::SMatrix<f64, N, N>, Failure> {
    let bad = |msg: String| config(Error::InvalidScenario(format!("{what}: {msg}")));
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad(format!("'{s}' is not a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    let diag = match values.len() {
        1 => vec![values[0]; N],
        n if n == N => values,
        n => return Err(bad(format!("expected 1 or {N} values, got {n}"))),
    };
    if diag.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(bad("entries must be positive".into()));
    }
    Ok(nalgebra::SMatrix::<f64, N, N>::from_diagonal(
        &nalgebra::SVector::<f64, N>::from_column_slice(&diag),
    ))
}

fn cmd_trim(args: &TrimArgs) -> Result<(), Failure> {
    let p = load_params(&args.params)?;
    let mut log = String::new();
    let tp = find_trim_logged(args.speed_kph * KPH, &p, |it, r| {
        log.push_str(&format!("  iteration {it:2}: |h| = {r:.3e}\n"));
    })
    .map_err(|e| {
        eprint!("{log}");
        at(Stage::Trim)(e)
    })?;
    let report = trim_report(&tp);
    write_files(
        &args.out,
        &[("trim.csv", trim_csv(&tp)), ("trim_report.txt", format!("{report}{log}"))],
    )
    .map_err(config)?;
    print!("{report}");
    Ok(())
}

fn cmd_design(args: &DesignArgs) -> Result<(), Failure> {
    let p = load_params(&args.params)?;
    let q_w: Matrix14 = parse_weight(&args.qw, "--qw")?;
    let r_w: Matrix4 = parse_weight(&args.rw, "--rw")?;
    let tp = find_trim_logged(args.speed_kph * KPH, &p, |_, _| {}).map_err(at(Stage::Trim))?;
    let policy = match args.unobservable {
        Unobservable::Exclude => UnobservableModes::Exclude,
        Unobservable::Reject => UnobservableModes::Reject,
    };
    let design = design_observer(&tp, &p, &q_w, &r_w, policy).map_err(at(Stage::Design))?;
    write_files(&args.out, &design_bundle(&design)).map_err(config)?;
    println!("design at {:.3} kph", args.speed_kph);
    println!("  riccati residual   = {:.3e}", design.riccati_residual);
    println!("  designed abscissa  = {:.6e}", design.designed_abscissa());
    println!("  max Re eig(A - GC) = {:.6e}", design.max_real_eigenvalue());
    for z in &design.excluded_modes {
        println!("  excluded mode        {:+.3e}{:+.3e}i", z.re, z.im);
    }
    Ok(())
}

fn print_metrics(title: &str, metrics: &[ChannelMetrics]) {
    println!("{title}");
    println!("  {:8} {:>14} {:>14} {:>10}", "channel", "rms", "static", "static %");
    for m in metrics {
        println!(
            "  {:8} {:>14} {:>14} {:>10}",
            m.channel,
            fmt9(m.rms),
            fmt9(m.static_error),
            if m.static_error_pct.is_nan() {
                "-".to_string()
            } else {
                format!("{:.4}", m.static_error_pct)
            }
        );
    }
}

fn run_one(path: &Path, out: &Path) -> Result<Vec<ChannelMetrics>, Failure> {
    let scenario = Scenario::load(path).map_err(config)?;
    let result = run_scenario(&scenario).map_err(|e| {
        let code = match &e {
            Error::TrimNoConvergence { .. } | Error::SingularJacobian(_) => Stage::Trim,
            Error::NotDetectable { .. } | Error::Riccati(_) | Error::NotHurwitz(_) | Error::Linearization { .. } => {
                Stage::Design
            }
            _ => Stage::Run,
        };
        let e = match e {
            Error::NonFinite { t, state } => Error::NonFinite {
                t,
                state: format!("scenario '{}': {state}", scenario.name),
            },
            other => other,
        };
        at(code)(e)
    })?;
    write_files(out, &result_files(&result)).map_err(config)?;
    Ok(result.metrics)
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    if let [single] = args.scenario.as_slice() {
        let metrics = run_one(single, &args.out)?;
        print_metrics(&format!("{}", single.display()), &metrics);
        return Ok(());
    }
    let names = args
        .scenario
        .iter()
        .map(|p| Scenario::load(p).map(|s| s.name).map_err(config))
        .collect::<Result<Vec<_>, _>>()?;
    let mut unique = names.clone();
    unique.sort();
    if let Some(w) = unique.windows(2).find(|w| w[0] == w[1]) {
        return Err(config(Error::InvalidScenario(format!(
            "two scenarios are named '{}'; names select the output sub-directories",
            w[0]
        ))));
    }
    let results: Vec<Result<Vec<ChannelMetrics>, Failure>> = std::thread::scope(|scope| {
        let handles: Vec<_> = args
            .scenario
            .iter()
            .zip(&names)
            .map(|(path, name)| {
                let out = args.out.join(name);
                scope.spawn(move || run_one(path, &out))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread")).collect()
    });
    let mut first_failure = None;
    for ((path, name), result) in args.scenario.iter().zip(&names).zip(results) {
        match result {
            Ok(metrics) => print_metrics(&format!("{name} ({})", path.display()), &metrics),
            Err(f) => {
                eprintln!("error: {}: {}", path.display(), f.error);
                first_failure.get_or_insert(f);
            }
        }
    }
    first_failure.map_or(Ok(()), Err)
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Failure> {
    let reference = Table::read(&args.reference).map_err(config)?;
    let estimate = Table::read(&args.est).map_err(config)?;
    let cmp = compare(&reference, &estimate).map_err(config)?;
    if cmp.resampled {
        eprintln!(
            "warning: time grids differ; {} resampled onto the reference grid by zero-order hold",
            args.est.display()
        );
    }
    std::fs::write(&args.out, metrics_csv(&cmp.metrics)).map_err(|e| {
        config(Error::Io {
            path: args.out.clone(),
            source: e,
        })
    })?;
    print_metrics(&format!("{} vs {}", args.est.display(), args.reference.display()), &cmp.metrics);
    Ok(())
}

fn main() -> ExitCode {
    // usage errors share the configuration exit code
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Trim(a) => cmd_trim(a),
        Command::Design(a) => cmd_design(a),
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
