//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on bad input, 2 when a report assertion fails.

pub mod config;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{parse_model_string, ModelConfig, RunConfig, Task};
pub use run::{run, Manifest, RunOptions, OUTPUT_ENV};

use crate::error::{Error, Result};
use crate::estimation::ConstantKind;
use config::{CheckConstant, DecayCheckConfig, Format, InitialFunction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "entropy-decay", version, about = "Entropy decay constants of reversible Markov chains")]
struct Cli {
    /// Output directory (overrides the environment and the config file).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Base seed for randomized steps.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated report formats (json, csv).
    #[arg(long, global = true, value_delimiter = ',')]
    format: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ModelArg {
    /// Model as `name:key=value,...`, arrays separated by `/`.
    #[arg(long)]
    model: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certified lower bound on the convexity constant, with structural checks.
    Certify(ModelArg),
    /// Numerical estimate of gap, lsi, mlsi or kappa.
    Estimate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Entropy trajectory of the semigroup.
    Evolve {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// random[:spread], gap-mode[:amplitude] or exp:slope
        #[arg(long, default_value = "random")]
        f0: String,
        /// Decay check `mlsi=C` or `kappa=C`, with C a number or `certified`.
        #[arg(long)]
        check: Vec<String>,
    },
    /// Three-site zero-range chain with rates (c1, 1, 1).
    Counterexample {
        #[arg(long)]
        c1: f64,
        #[arg(long)]
        epsilon: f64,
    },
    /// Smooth the death rates of a birth-death model and transfer the constant.
    Smooth {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        n0: usize,
    },
    /// Certificate and estimate across values of one model parameter.
    Sweep {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        parameter: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value = "mlsi")]
        kind: String,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        parallel_sweep: bool,
    },
    /// Run every task of a TOML config.
    Report {
        config: PathBuf,
        #[arg(long)]
        parallel_sweep: bool,
    },
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(m) => m.exit_code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn execute(cli: Cli) -> Result<Manifest> {
    let mut opts = RunOptions { output: cli.output.clone(), parallel_sweep: false };
    let (mut cfg, text) = match cli.command {
        Command::Report { config, parallel_sweep } => {
            opts.parallel_sweep = parallel_sweep;
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
            let cfg = RunConfig::from_toml(&text)?;
            if cli.seed.is_none() && cli.format.is_empty() {
                return run(&cfg, &text, &opts);
            }
            (cfg, None)
        }
        other => {
            if let Command::Sweep { parallel_sweep, .. } = &other {
                opts.parallel_sweep = *parallel_sweep;
            }
            (single_task(other)?, None::<String>)
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if !cli.format.is_empty() {
        cfg.formats = cli.format.iter().map(|f| parse_format(f)).collect::<Result<_>>()?;
    }
    cfg.validate()?;
    let text = match text {
        Some(t) => t,
        None => cfg.to_toml()?,
    };
    run(&cfg, &text, &opts)
}

fn parse_format(s: &str) -> Result<Format> {
    match s.trim() {
        "json" => Ok(Format::Json),
        "csv" => Ok(Format::Csv),
        other => Err(Error::Config(format!("unknown format `{other}` (expected json or csv)"))),
    }
}

fn single_task(cmd: Command) -> Result<RunConfig> {
    let with = |m: &ModelArg, task: Task| -> Result<RunConfig> {
        Ok(RunConfig {
            seed: 0,
            output: None,
            formats: vec![Format::Json, Format::Csv],
            model: Some(parse_model_string(&m.model)?),
            tasks: vec![task],
        })
    };
    match cmd {
        Command::Certify(m) => with(&m, Task::Certify),
        Command::Estimate { model, kind, restarts } => {
            with(&model, Task::Estimate { kind: kind.parse()?, restarts })
        }
        Command::Evolve { model, t_max, points, f0, check } => {
            let f0 = parse_initial(&f0)?;
            let check = check.iter().map(|c| parse_check(c)).collect::<Result<_>>()?;
            with(&model, Task::Evolve { f0, t_max, points, check })
        }
        Command::Counterexample { c1, epsilon } => Ok(RunConfig {
            seed: 0,
            output: None,
            formats: vec![Format::Json],
            model: None,
            tasks: vec![Task::Counterexample { c1, epsilon }],
        }),
        Command::Smooth { model, n0 } => with(&model, Task::Smooth { n0 }),
        Command::Sweep { model, parameter, values, kind, restarts, .. } => {
            let values = values
                .iter()
                .map(|v| {
                    let t = format!("v = {v}");
                    toml::from_str::<toml::Table>(&t)
                        .ok()
                        .and_then(|mut t| t.remove("v"))
                        .ok_or_else(|| Error::Config(format!("sweep value `{v}` is not a TOML scalar")))
                })
                .collect::<Result<_>>()?;
            let kind: ConstantKind = kind.parse()?;
            with(&model, Task::Sweep { parameter, values, kind, restarts })
        }
        Command::Report { .. } => unreachable!("handled by the caller"),
    }
}

fn parse_initial(s: &str) -> Result<InitialFunction> {
    let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
    let num = |d: f64| -> Result<f64> {
        arg.map_or(Ok(d), |a| a.parse().map_err(|_| Error::Config(format!("bad number in --f0 `{s}`"))))
    };
    match name {
        "random" => Ok(InitialFunction::Random { spread: num(1.0)? }),
        "gap-mode" | "gap_mode" => Ok(InitialFunction::GapMode { amplitude: num(0.5)? }),
        "exp" if arg.is_some() => Ok(InitialFunction::Exponential { slope: num(0.0)? }),
        _ => Err(Error::Config(format!(
            "unknown --f0 `{s}` (expected random[:spread], gap-mode[:amplitude] or exp:slope)"
        ))),
    }
}

fn parse_check(s: &str) -> Result<DecayCheckConfig> {
    let (kind, c) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--check `{s}` is not kind=constant")))?;
    let kind = match kind {
        "mlsi" => crate::evolution::DecayKind::Mlsi,
        "kappa" => crate::evolution::DecayKind::Kappa,
        other => return Err(Error::Config(format!("unknown check kind `{other}` (mlsi or kappa)"))),
    };
    let constant = match c.parse::<f64>() {
        Ok(v) => CheckConstant::Value(v),
        Err(_) => CheckConstant::Named(c.to_string()),
    };
    Ok(DecayCheckConfig { kind, constant })
}
