//! `windlab`: Monte Carlo experiments on the winding number of planar
//! Gaussian processes.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use winding_core::covmodel::{CovarianceModel, ModelSpec};
use winding_core::harness::{
    moments_summary, run, simulate_paths, ExperimentConfig, ExperimentKind, Metadata, Outcome, PathFormat, RunOptions,
};
use winding_core::pathgen::io;
use winding_core::winding::{count_windings, smoothed_winding};
use winding_core::Error;

#[derive(Parser)]
#[command(
    name = "windlab",
    version,
    about = "Winding number experiments for planar Gaussian processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Theoretical moments of the configured model.
    Moments(Common),
    /// Monte Carlo mean of N_W against the Kac-Rice rate.
    Expectation(Common),
    /// Monte Carlo Var(N_W)/T against the limit variance.
    Variance(Common),
    /// Normality of the standardized winding number.
    Clt(Common),
    /// Oracle checks of the Gaussian algebra.
    Check(Common),
    /// Winding of convolution-smoothed paths of a non-differentiable model.
    Smooth(Common),
    /// Write sample paths to disk with their winding counts.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Path file encoding.
        #[arg(long, value_enum, default_value_t = PathEncoding::Csv)]
        paths: PathEncoding,
    },
    /// Count the windings of a stored path.
    Winding {
        /// Path file (`.csv` or binary).
        file: PathBuf,
        /// Also count after smoothing at these bandwidths.
        #[arg(long, value_delimiter = ',')]
        epsilons: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON). `moments` also accepts a bare model spec.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; the report goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PathEncoding {
    Csv,
    Binary,
}

/// Failure with its exit code.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(2, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(2, e.to_string())
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Moments(c) => moments(&c),
        Command::Expectation(c) => experiment(&c, ExperimentKind::Expectation),
        Command::Variance(c) => experiment(&c, ExperimentKind::Variance),
        Command::Clt(c) => experiment(&c, ExperimentKind::Clt),
        Command::Check(c) => experiment(&c, ExperimentKind::LemmaCheck),
        Command::Smooth(c) => experiment(&c, ExperimentKind::Smoothing),
        Command::Simulate { common, paths } => simulate(&common, paths),
        Command::Winding { file, epsilons } => winding(&file, &epsilons),
    }
}

fn load(c: &Common, kind: ExperimentKind) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    cfg.kind = kind;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn options(c: &Common) -> RunOptions {
    RunOptions { workers: c.workers }
}

/// Write `body` to `<out>/<name>` or stdout.
fn emit(out: Option<&Path>, name: &str, body: &str) -> Result<(), Failure> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), body)?;
        }
        None => println!("{body}"),
    }
    Ok(())
}

fn write_metadata(c: &Common, cfg: &ExperimentConfig, start: Instant) -> Result<(), Failure> {
    if let Some(dir) = &c.out {
        Metadata::new(cfg, start.elapsed().as_secs_f64(), options(c).effective_workers())
            .write(&dir.join("metadata.json"))?;
    }
    Ok(())
}

fn experiment(c: &Common, kind: ExperimentKind) -> Result<u8, Failure> {
    let start = Instant::now();
    let cfg = load(c, kind)?;
    let report = run(&cfg, options(c))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let out = c.out.as_deref();
    match c.format {
        Format::Json => emit(out, "report.json", &report.to_json())?,
        Format::Csv => emit(out, "report.csv", report.to_csv().trim_end())?,
    }
    if let Some(p) = &cfg.outputs.report {
        std::fs::write(p, report.to_json())?;
    }
    write_metadata(c, &cfg, start)?;
    let verdict = match report.passed {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "not judged",
    };
    eprintln!("{kind:?}: {verdict}");
    Ok(report.exit_code() as u8)
}

fn moments(c: &Common) -> Result<u8, Failure> {
    let start = Instant::now();
    let text = std::fs::read_to_string(&c.config)?;
    let cfg = match ExperimentConfig::from_json(&text) {
        Ok(cfg) => cfg,
        Err(e) => {
            // a bare model spec gets a single unit horizon
            let spec = ModelSpec::from_json(&text).map_err(|_| Failure(2, e.to_string()))?;
            ExperimentConfig::new(ExperimentKind::Variance, spec, vec![1.0], 0.01, 1, 0)
        }
    };
    let model = CovarianceModel::from_spec(&cfg.model)?;
    let summary = moments_summary(&model, &cfg);
    let body = match c.format {
        Format::Json => serde_json::to_string_pretty(&summary).map_err(Error::from)?,
        Format::Csv => {
            let mut s = String::from("horizon,expectation,V_T,err\n");
            for h in &summary.horizons {
                let (v, e) = match &h.general {
                    Outcome::Value(r) => (r.v_t.map_or(String::new(), |x| x.to_string()), r.err.to_string()),
                    _ => (String::new(), String::new()),
                };
                let ex = h.expectation.map_or(String::new(), |x| x.to_string());
                s.push_str(&format!("{},{ex},{v},{e}\n", h.horizon));
            }
            s.trim_end().to_string()
        }
    };
    let name = if c.format == Format::Json {
        "moments.json"
    } else {
        "moments.csv"
    };
    emit(c.out.as_deref(), name, &body)?;
    write_metadata(c, &cfg, start)?;
    Ok(0)
}

fn simulate(c: &Common, enc: PathEncoding) -> Result<u8, Failure> {
    let start = Instant::now();
    let cfg = load(c, ExperimentKind::Expectation)?;
    let dir = cfg
        .outputs
        .paths_dir
        .clone()
        .or_else(|| c.out.as_ref().map(|o| o.join("paths")))
        .ok_or_else(|| Failure(2, "simulate needs --out or outputs.paths_dir".into()))?;
    let format = match enc {
        PathEncoding::Csv => PathFormat::Csv,
        PathEncoding::Binary => PathFormat::Binary,
    };
    let paths = simulate_paths(&cfg, &dir, format, options(c))?;
    let body = match c.format {
        Format::Json => serde_json::to_string_pretty(&paths).map_err(Error::from)?,
        Format::Csv => {
            let mut s = String::from("replication,file,n_w,delta_arg,error\n");
            for p in &paths {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    p.replication,
                    p.file,
                    p.n_w.map_or(String::new(), |x| x.to_string()),
                    p.delta_arg.map_or(String::new(), |x| x.to_string()),
                    p.error.clone().unwrap_or_default()
                ));
            }
            s.trim_end().to_string()
        }
    };
    let name = if c.format == Format::Json {
        "index.json"
    } else {
        "index.csv"
    };
    emit(c.out.as_deref(), name, &body)?;
    write_metadata(c, &cfg, start)?;
    eprintln!("wrote {} paths to {}", paths.len(), dir.display());
    Ok(0)
}

fn winding(file: &Path, epsilons: &[f64]) -> Result<u8, Failure> {
    let bytes = std::fs::read(file)?;
    let path = match io::read_binary(bytes.as_slice()) {
        Ok(p) => p,
        Err(_) => io::read_csv(bytes.as_slice())?,
    };
    let mut out = serde_json::json!({ "winding": count_windings(&path)? });
    if !epsilons.is_empty() {
        out["smoothed"] = serde_json::to_value(smoothed_winding(&path, epsilons)?).map_err(Error::from)?;
    }
    println!("{}", serde_json::to_string_pretty(&out).map_err(Error::from)?);
    Ok(0)
}
