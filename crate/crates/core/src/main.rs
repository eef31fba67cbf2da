use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fksim::exec::with_workers;
use fksim::harness::{self, ExperimentConfig, Level, Operation, RunReport, SuiteOptions};
use fksim::{Error, FieldError};

#[derive(Parser)]
#[command(
    name = "fksim",
    version,
    about = "Feynman-Kac Monte Carlo for 1D random Schrodinger operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Root seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output directory for report.json and CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a kernel K(t; x, y).
    Kernel(RunArgs),
    /// Estimate traces or Laplace-transform moments.
    Trace(RunArgs),
    /// Eigenvalues of the discretized operator.
    Spectrum(RunArgs),
    /// Run an identity or oracle check.
    Check(RunArgs),
    /// Run a config once per value of a numeric field.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Dotted field path, e.g. `mollifier.epsilon`.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Run the validation suite.
    Validate {
        #[arg(long, value_enum, default_value_t = LevelArg::Fast)]
        level: LevelArg,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

fn load(args: &RunArgs, allowed: &[Operation]) -> Result<ExperimentConfig, Error> {
    let mut c = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.common.seed {
        c.seed = s;
    }
    if let Some(o) = &args.common.out {
        c.output.dir = Some(o.clone());
    }
    if !allowed.is_empty() && !allowed.contains(&c.operation) {
        let names: Vec<&str> = allowed.iter().map(|o| o.name()).collect();
        return Err(Error::Validation(vec![FieldError::new(
            "operation",
            format!(
                "`{}` is not accepted here (expected one of {})",
                c.operation.name(),
                names.join(", ")
            ),
        )]));
    }
    Ok(c)
}

fn emit(report: &RunReport, dir: Option<&Path>) -> Result<(), Error> {
    for v in &report.payload.verdicts {
        eprintln!("{}", v.line());
    }
    for w in &report.payload.warnings {
        eprintln!("warning: {w}");
    }
    match dir {
        Some(d) => {
            report.write(d)?;
            for r in &report.payload.records {
                println!("{} {}: {} +- {}", r.operation, r.label, r.mean, r.stderr);
            }
        }
        None => println!("{}", serde_json::to_string_pretty(report)?),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool, Error> {
    let single = |args: &RunArgs, allowed: &[Operation]| -> Result<bool, Error> {
        let c = load(args, allowed)?;
        let report = with_workers(args.common.workers, || harness::run(&c))?;
        emit(&report, c.output.dir.as_deref())?;
        Ok(report.passed())
    };
    match cli.command {
        Command::Kernel(a) => single(&a, &[Operation::Kernel]),
        Command::Trace(a) => single(&a, &[Operation::Trace, Operation::Laplace]),
        Command::Spectrum(a) => single(&a, &[Operation::Spectrum]),
        Command::Check(a) => single(
            &a,
            &[
                Operation::HsNorm,
                Operation::Semigroup,
                Operation::OracleEquivalence,
                Operation::EpsilonConvergence,
            ],
        ),
        Command::Sweep { run, axis, values } => {
            let c = load(&run, &[])?;
            let reports = with_workers(run.common.workers, || harness::sweep(&c, &axis, &values))?;
            let csv = harness::sweep_csv(&axis, &values, &reports);
            match c.output.dir.as_deref() {
                Some(d) => {
                    for (i, r) in reports.iter().enumerate() {
                        r.write(&d.join(format!("{i:03}")))?;
                    }
                    harness::write_atomic(&d.join("sweep.csv"), csv.as_bytes())?;
                }
                None => print!("{csv}"),
            }
            for r in &reports {
                for v in &r.payload.verdicts {
                    eprintln!("{}", v.line());
                }
            }
            Ok(reports.iter().all(|r| r.passed()))
        }
        Command::Validate { level, common } => {
            let mut opts = SuiteOptions::default();
            if let Some(s) = common.seed {
                opts.seed = s;
            }
            let level = match level {
                LevelArg::Fast => Level::Fast,
                LevelArg::Full => Level::Full,
            };
            let report = with_workers(common.workers, || harness::validate_suite(level, &opts))?;
            emit(&report, common.out.as_deref())?;
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Validation(_) | Error::Toml(_) | Error::InvalidInput(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
