#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use nullwave::diagnostics::fit_decay;
use nullwave::error::Error;
use nullwave::harness::output::read_column;
use nullwave::harness::{run_scenario, validate_config, RunConfig};
use nullwave::theory::{kernel_a1, predict_bound, verify_linear_growth, ForcingDecay, DEFAULT_SLACK};

/// Exit status for configuration and input errors.
const EXIT_CONFIG: u8 = 1;
/// Exit status of `verify-linear` when the measured series leaves the slack band.
const EXIT_UNBOUNDED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "nullwave",
    version,
    about = "Semilinear wave systems with null-form nonlinearities in 2+1 dimensions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write series, snapshots and report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List every violation in a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tabulate the A1 kernel as `t,kernel_a1,kernel_a1/log(2+t)`.
    Kernel {
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
        t_list: Vec<f64>,
    },
    /// Fit `y ~ C (1+t)^p log^s(2+t)` to one column of a CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        t_min: f64,
        #[arg(long, default_value = "sup_u")]
        column: String,
        /// Component to keep when the file has a `comp` column.
        #[arg(long, default_value_t = 0)]
        comp: usize,
    },
    /// Check a measured L2 series against the predicted linear growth bound.
    VerifyLinear {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        w0_norm: f64,
        #[arg(long)]
        w1_norm: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        c_f: f64,
        /// Column summed over components.
        #[arg(long, default_value = "l2_u")]
        column: String,
        #[arg(long, default_value_t = 5.0)]
        t_min: f64,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_SLACK)]
        slack: f64,
    },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("NULLWAVE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("NULLWAVE_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("NULLWAVE_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    RunConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn run(config: &Path, out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let mut cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return Ok(code),
    };
    if out.is_some() {
        cfg.output_dir = out;
    }
    match run_scenario(&cfg, true) {
        Ok(report) => {
            match report.t_blowup {
                Some(t) => println!("{}: {:?} at t = {t:.6}", report.scenario, report.status),
                None => println!("{}: {:?} at t = {:.6}", report.scenario, report.status, report.t_end),
            }
            println!("report: {}", cfg.output_dir().join("report.json").display());
            Ok(ExitCode::from(report.exit_code as u8))
        }
        Err(e @ Error::InvalidConfig(_)) => {
            eprintln!("error: {e}");
            Ok(ExitCode::from(EXIT_CONFIG))
        }
        Err(e) => Err(e.into()),
    }
}

fn validate(config: &Path) -> ExitCode {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let problems = validate_config(&cfg);
    if problems.is_empty() {
        println!("ok");
        ExitCode::SUCCESS
    } else {
        for p in &problems {
            println!("{p}");
        }
        ExitCode::from(EXIT_CONFIG)
    }
}

fn kernel(ts: &[f64]) -> anyhow::Result<()> {
    if ts.iter().any(|&t| !(t >= 0.0)) {
        bail!("kernel times must be >= 0");
    }
    println!("t,kernel_a1,ratio");
    for &t in ts {
        let k = kernel_a1(t);
        println!("{t},{k:.12e},{:.12e}", k / (2.0 + t).ln());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Validate { config } => Ok(validate(&config)),
        Command::Kernel { t_list } => kernel(&t_list).map(|_| ExitCode::SUCCESS),
        Command::Fit {
            input,
            t_min,
            column,
            comp,
        } => (|| {
            let series = read_column(&input, &column, Some(comp))?;
            let fit = fit_decay(&series, t_min)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(ExitCode::SUCCESS)
        })(),
        Command::VerifyLinear {
            input,
            w0_norm,
            w1_norm,
            beta,
            c_f,
            column,
            t_min,
            t_max,
            slack,
        } => (|| {
            let series = read_column(&input, &column, None)?;
            let t_max = t_max.unwrap_or_else(|| series.last().map_or(t_min, |s| s.0));
            let prediction = predict_bound(ForcingDecay::pointwise(c_f, beta), w0_norm, w1_norm)?;
            let report = verify_linear_growth(&series, &prediction, t_min, t_max, slack)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.bounded {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_UNBOUNDED)
            })
        })(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
