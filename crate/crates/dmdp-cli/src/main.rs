//! `dmdp`: reproduces the reference counter-examples, runs bound-checking
//! campaigns and the learning experiments, and writes the results as CSV.
//!
//! Exit codes: 0 on success, 1 when a check fails, 2 on bad configuration
//! or any other error.

// NaN must fail bound checks, so `!(a <= b)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Dense tabular kernels read best with explicit indices.
#![allow(clippy::needless_range_loop)]

mod config;
mod experiments;
mod suites;

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{pick, Settings};
use experiments::{Comparison, MazeParams, PolisEnvKind, PolisParams, COUNTEREXAMPLE_TOL};
use suites::{Suite, SuiteParams};

/// Directory for output files when `--output` is not given.
const OUT_DIR_ENV: &str = "DMDP_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] delayed_mdp::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Violation(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Violation(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dmdp",
    version,
    about = "Delayed MDP experiments and bound verification"
)]
struct Cli {
    /// TOML settings file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; defaults to `$DMDP_OUT_DIR/<command>.csv`, else stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CounterexampleKind {
    Belief,
    Mtd,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recompute a counter-example and compare with its reference values.
    Counterexample {
        kind: CounterexampleKind,
        /// Undelayed share of the mixed delay (mtd only).
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Check an identity or bound on random instances.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Confidence level of the coverage suite.
        #[arg(long)]
        delta: Option<f64>,
        /// Monte Carlo replications per trial (estimator suites).
        #[arg(long)]
        reps: Option<usize>,
    },
    /// UCRL2 regret on the delayed maze, one curve per lag distribution.
    MazeUcrl2 {
        /// Lag distribution such as `0.5,0.5`; repeatable.
        #[arg(long = "lambda", value_parser = parse_vector)]
        lambdas: Vec<Vec<f64>>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Record the regret every this many steps.
        #[arg(long)]
        every: Option<u64>,
    },
    /// Lifelong hyper-policy training on a non-stationary environment.
    Polis {
        #[arg(value_enum)]
        env: PolisEnvKind,
        #[arg(long)]
        delay: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lambda_reg: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
}

fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect()
}

fn fmt_vector(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Opens the destination: `--output`, then the output directory, then stdout.
fn open_output(explicit: Option<PathBuf>, stem: &str) -> Result<Box<dyn Write>, CliError> {
    let path = explicit.or_else(|| {
        std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(format!("{stem}.csv")))
    });
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(io::BufWriter::new(File::create(&p)?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn write_comparisons(out: Box<dyn Write>, rows: &[Comparison]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quantity", "value", "expected", "abs_error"])?;
    for c in rows {
        w.write_record([
            c.quantity.to_string(),
            c.value.to_string(),
            c.expected.to_string(),
            c.error().to_string(),
        ])?;
    }
    w.flush()?;
    let bad: Vec<String> = rows
        .iter()
        .filter(|c| !(c.error() <= COUNTEREXAMPLE_TOL))
        .map(|c| format!("{} = {} (expected {})", c.quantity, c.value, c.expected))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(format!("mismatch: {}", bad.join("; "))))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let Format::Csv = cli.format;
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Counterexample { kind, epsilon } => {
            let sec = settings.section("counterexample", &["epsilon"])?;
            let output = cli.output.or(sec.string("output")?.map(PathBuf::from));
            let (rows, stem) = match kind {
                CounterexampleKind::Belief => {
                    (experiments::belief_comparison()?, "counterexample-belief")
                }
                CounterexampleKind::Mtd => {
                    let eps = pick(epsilon, sec.f64("epsilon")?, 0.1);
                    (
                        experiments::mtd_comparison(eps).map_err(config_error)?,
                        "counterexample-mtd",
                    )
                }
            };
            write_comparisons(open_output(output, stem)?, &rows)
        }
        Command::Verify {
            suite,
            trials,
            seed,
            delta,
            reps,
        } => {
            let sec = settings.section("verify", &["trials", "delta", "reps"])?;
            let output = cli.output.or(sec.string("output")?.map(PathBuf::from));
            let trials = pick(trials, sec.usize("trials")?, suite.default_trials());
            let params = SuiteParams {
                seed: pick(seed, sec.u64("seed")?, 0),
                delta: pick(delta, sec.f64("delta")?, 0.2),
                reps: pick(reps, sec.usize("reps")?, suite.default_reps()),
            };
            if !(params.delta > 0.0 && params.delta < 1.0) || params.reps < 2 {
                return Err(CliError::Config("need 0 < delta < 1 and reps >= 2".into()));
            }
            let rows = suites::run_suite(suite, trials, &params)?;
            let mut w =
                csv::Writer::from_writer(open_output(output, &format!("verify-{}", suite.name()))?);
            w.write_record(["suite", "trial", "lhs", "rhs", "slack", "violated"])?;
            for r in &rows {
                w.write_record([
                    suite.name().to_string(),
                    r.trial.to_string(),
                    r.lhs.to_string(),
                    r.rhs.to_string(),
                    r.slack.to_string(),
                    u8::from(r.violated).to_string(),
                ])?;
            }
            w.flush()?;
            let violations = rows.iter().filter(|r| r.violated).count();
            let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
            eprintln!(
                "{}: {} trials, {violations} violations, min slack {min_slack}",
                suite.name(),
                rows.len()
            );
            if violations > 0 {
                return Err(CliError::Violation(format!(
                    "{violations} of {} trials violated",
                    rows.len()
                )));
            }
            Ok(())
        }
        Command::MazeUcrl2 {
            lambdas,
            steps,
            seeds,
            seed,
            every,
        } => {
            let sec = settings.section("maze-ucrl2", &["lambdas", "steps", "seeds", "every"])?;
            let output = cli.output.or(sec.string("output")?.map(PathBuf::from));
            let lambdas = if lambdas.is_empty() {
                sec.vectors("lambdas")?
            } else {
                Some(lambdas)
            };
            let params = MazeParams {
                lambdas: lambdas.unwrap_or_else(|| vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
                steps: pick(steps, sec.u64("steps")?, 100_000),
                seeds: pick(seeds, sec.usize("seeds")?, 10),
                seed: pick(seed, sec.u64("seed")?, 0),
                every: pick(every, sec.u64("every")?, 1000),
            };
            if params.steps == 0 || params.seeds == 0 {
                return Err(CliError::Config("steps and seeds must be positive".into()));
            }
            let (points, finals) = experiments::maze_ucrl2(&params).map_err(config_error)?;
            let mut w = csv::Writer::from_writer(open_output(output, "maze-ucrl2")?);
            w.write_record(["lambda", "step", "mean_regret", "std"])?;
            for p in &points {
                w.write_record([
                    fmt_vector(&p.lambda),
                    p.step.to_string(),
                    p.mean_regret.to_string(),
                    p.std.to_string(),
                ])?;
            }
            w.flush()?;
            for (lambda, f) in params.lambdas.iter().zip(&finals) {
                let (m, s) = experiments::mean_std(f);
                eprintln!(
                    "lambda {}: final regret {m} +- {s} over {} seeds",
                    fmt_vector(lambda),
                    f.len()
                );
            }
            Ok(())
        }
        Command::Polis {
            env,
            delay,
            seeds,
            seed,
            lambda_reg,
            steps,
        } => {
            let sec = settings.section("polis", &["delay", "seeds", "lambda_reg", "steps"])?;
            let output = cli.output.or(sec.string("output")?.map(PathBuf::from));
            let params = PolisParams {
                env,
                delay: pick(delay, sec.usize("delay")?, 0),
                seeds: pick(seeds, sec.usize("seeds")?, 3),
                seed: pick(seed, sec.u64("seed")?, 0),
                lambda_reg: pick(lambda_reg, sec.f64("lambda_reg")?, env.default_lambda_reg()),
                steps: pick(steps, sec.usize("steps")?, 2000),
            };
            let runs = experiments::polis_runs(&params).map_err(config_error)?;
            let dim = runs
                .first()
                .and_then(|r| r.run.rows.first())
                .map_or(0, |row| row.theta.len());
            let mut w =
                csv::Writer::from_writer(open_output(output, &format!("polis-{}", env.name()))?);
            let mut header = vec!["seed".to_string(), "t".to_string()];
            header.extend((0..dim).map(|i| format!("theta_{i}")));
            header.extend(
                ["reward", "retrain_flag", "surrogate_value", "bound_value"].map(String::from),
            );
            w.write_record(&header)?;
            for r in &runs {
                for row in &r.run.rows {
                    let mut rec = vec![r.seed.to_string(), row.t.to_string()];
                    rec.extend(row.theta.iter().map(|x| x.to_string()));
                    rec.push(row.reward.to_string());
                    rec.push(u8::from(row.retrain).to_string());
                    rec.push(fmt_opt(row.surrogate_value));
                    rec.push(fmt_opt(row.bound_value));
                    w.write_record(&rec)?;
                }
            }
            w.flush()?;
            for r in &runs {
                eprintln!(
                    "seed {}: cumulative reward {}, amplitude {} -> {}",
                    r.seed,
                    r.run.cumulative_reward(),
                    r.initial_amplitude,
                    r.run.hp.amplitude()
                );
            }
            Ok(())
        }
    }
}

/// Parameter errors raised while building an experiment are configuration errors.
fn config_error(e: delayed_mdp::Error) -> CliError {
    match e {
        delayed_mdp::Error::InvalidParameter(m) => CliError::Config(m),
        delayed_mdp::Error::WindowTooShort { needed, have } => {
            CliError::Config(format!("window of {have} steps too short, need {needed}"))
        }
        other => CliError::Library(other),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dmdp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
