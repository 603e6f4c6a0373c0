//! `mckean`: spectral data of `(y''+py)'+py'+qy = lambda y` with 1-periodic
//! coefficients, and of the associated energy-dependent Hill equation.
//!
//! Exit codes: 0 success (for `verify`, every identity passes), 1 usage or
//! input error, 2 numeric regime error or failed identity.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mckean::SpectralError;

use crate::config::{RunConfig, Scalar, TraceKind};
use crate::output::{emit, to_json};

#[derive(Parser, Debug)]
#[command(name = "mckean", version, about = "Periodic spectral data of a third-order operator and its Hill transform")]
struct Cli {
    /// TOML run configuration; defaults to p = q = 0.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    n_max: Option<i64>,
    /// Minimum RK4 steps per unit length.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Default identity tolerance.
    #[arg(long, global = true)]
    tol_default: Option<f64>,
    /// Per-identity tolerance, `NAME=VALUE`; repeatable.
    #[arg(long = "tol-identity", global = true, value_parser = parse_tol)]
    tol_identity: Vec<(String, f64)>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CSV samples of rho, the three-point determinant, the Lyapunov
    /// function, or the potential at one energy.
    Trace {
        #[arg(long, value_enum)]
        what: Option<TraceKind>,
        /// Segment start, `re` or `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        from: Option<Scalar>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<Scalar>,
        #[arg(long)]
        points: Option<usize>,
        /// Energy for `--what potential`.
        #[arg(long, allow_hyphen_values = true)]
        energy: Option<Scalar>,
    },
    /// Monodromy matrix, invariants and multipliers at one lambda.
    Monodromy {
        #[arg(long, allow_hyphen_values = true)]
        lambda: Scalar,
    },
    /// Ramifications r_n^+- for 0 <= |n| <= n_max.
    Ramifications,
    /// Three-point eigenvalues of the direct and transpose problems.
    ThreePoint,
    /// Periodic and Dirichlet spectra of the Hill equation.
    Schrodinger,
    /// Full report with identity residuals.
    Verify,
    /// Winding of mu_n under translation of the coefficients.
    Winding {
        #[arg(long, allow_hyphen_values = true)]
        n: Option<i64>,
        /// Number of translation steps over one period.
        #[arg(long)]
        translations: Option<usize>,
    },
}

fn parse_tol(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let v = v.parse::<f64>().map_err(|e| format!("bad tolerance {v:?}: {e}"))?;
    Ok((k.to_string(), v))
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Numeric(anyhow::Error),
    Identities,
}

fn classify(e: anyhow::Error) -> Failure {
    match e.downcast_ref::<SpectralError>() {
        Some(s) if s.is_regime_error() => Failure::Numeric(e),
        _ => Failure::Usage(e),
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.n_max {
        cfg.n_max = n;
    }
    if let Some(s) = cli.steps {
        cfg.numerics.min_steps = s;
    }
    if let Some(t) = cli.tol_default {
        cfg.tolerances.default = t;
    }
    for (k, v) in &cli.tol_identity {
        cfg.tolerances.per_identity.insert(k.clone(), *v);
    }
    match &cli.command {
        Command::Trace {
            what,
            from,
            to,
            points,
            energy,
        } => {
            let t = &mut cfg.trace;
            t.what = what.unwrap_or(t.what);
            t.from = from.unwrap_or(t.from);
            t.to = to.unwrap_or(t.to);
            t.points = points.unwrap_or(t.points);
            t.energy = energy.unwrap_or(t.energy);
        }
        Command::Winding { n, translations } => {
            let w = &mut cfg.winding;
            w.n = n.unwrap_or(w.n);
            w.translations = translations.unwrap_or(w.translations);
        }
        _ => {}
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    let cfg = load(cli).map_err(Failure::Usage)?;
    let out = |default: &Option<PathBuf>| cli.out.clone().or_else(|| default.clone());
    let report_path = out(&cfg.output.report);
    let emit_json = |text: Result<String>| -> std::result::Result<(), Failure> {
        let text = text.map_err(classify)?;
        emit(report_path.as_deref(), &text).map_err(Failure::Usage)
    };
    match &cli.command {
        Command::Trace { .. } => {
            let text = commands::trace(&cfg).map_err(classify)?;
            emit(out(&cfg.output.trace).as_deref(), &text).map_err(Failure::Usage)
        }
        Command::Monodromy { lambda } => {
            emit_json(commands::monodromy(&cfg, lambda.value()).and_then(|r| to_json(&r)))
        }
        Command::Ramifications => emit_json(commands::ramifications(&cfg).and_then(|r| to_json(&r))),
        Command::ThreePoint => emit_json(commands::three_point(&cfg).and_then(|r| to_json(&r))),
        Command::Schrodinger => emit_json(commands::schrodinger(&cfg).and_then(|r| to_json(&r))),
        Command::Verify => {
            let report = commands::verify(&cfg).map_err(classify)?;
            emit_json(to_json(&report))?;
            for (name, ok) in &report.pass {
                if !ok {
                    eprintln!(
                        "identity {name} failed: residual {:.3e} > {:.3e}",
                        report.residuals[name], report.tolerances[name]
                    );
                }
            }
            if report.all_pass {
                Ok(())
            } else {
                Err(Failure::Identities)
            }
        }
        Command::Winding { .. } => emit_json(commands::winding(&cfg).and_then(|r| to_json(&r))),
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MCKEAN_THREADS") {
        let n: usize = v.parse().with_context(|| format!("MCKEAN_THREADS={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("numeric regime error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Identities) => ExitCode::from(2),
    }
}
