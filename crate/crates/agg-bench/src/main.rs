use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use agg_bench::experiment::{self, Loaded};
use agg_bench::{BenchError, ExperimentConfig};
use agg_datagen::{Dataset, DatasetSpec, Distribution, KeyStyle};
use agg_ops::{select_algorithm, SelectorInput};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aggbench", about = "Aggregation operator benchmarks and cost-model validation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a dataset file and its ground-truth summary.
    Gen {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        m: u64,
        #[arg(long, default_value = "uniform")]
        distribution: Distribution,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "ipv6")]
        key_style: KeyStyle,
        #[arg(long, default_value_t = agg_core::DEFAULT_FRAME_SIZE)]
        frame_size: usize,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth file; defaults to OUT with a `.truth` suffix.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run operators and emit one metrics row per cell and repetition.
    Run(Experiment),
    /// Emit model predictions in the metrics schema.
    Model(Experiment),
    /// Run and predict every cell and report relative errors.
    Validate {
        #[command(flatten)]
        exp: Experiment,
        /// Fail when a frames_read or frames_written error exceeds this.
        #[arg(long)]
        max_io_error: Option<f64>,
        /// Fail when a comparisons error exceeds this.
        #[arg(long)]
        max_cpu_error: Option<f64>,
    },
    /// Print the recommended algorithm for a workload.
    Select {
        #[arg(long)]
        sorted: bool,
        #[arg(long)]
        skewed: bool,
        /// The output size estimate is trusted.
        #[arg(long)]
        confident: bool,
        #[arg(long, default_value_t = 0.0)]
        g_estimate: f64,
    },
}

#[derive(Args)]
struct Experiment {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides one configuration key, e.g. `-s memory=8,64`.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Experiment {
    fn config(&self) -> Result<ExperimentConfig, BenchError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::parse(&std::fs::read_to_string(p)?)?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| BenchError::Config(format!("expected KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if self.out.is_some() {
            cfg.output = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn sink(cfg: &ExperimentConfig) -> Result<Box<dyn Write>, BenchError> {
    Ok(match &cfg.output {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("aggbench: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, BenchError> {
    match cli.cmd {
        Cmd::Gen { n, m, distribution, seed, key_style, frame_size, out, truth } => {
            let spec = DatasetSpec::new(n, m, distribution, seed).key_style(key_style);
            let ds = Dataset::generate(&spec)?;
            let frames = ds.write(&out, frame_size)?;
            let truth = truth.unwrap_or_else(|| {
                let mut name = out.clone().into_os_string();
                name.push(".truth");
                PathBuf::from(name)
            });
            ds.write_truth(&truth)?;
            eprintln!("{frames} frames to {}, truth in {}", out.display(), truth.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Run(exp) => {
            let cfg = exp.config()?;
            let data = Loaded::from_config(&cfg)?;
            let rows = experiment::run(&cfg, &data)?;
            experiment::write_runs(sink(&cfg)?, &cfg, &data, &rows)?;
            let bad: Vec<_> = rows.iter().filter(|r| r.outcome.verdict.is_err()).collect();
            for r in &bad {
                eprintln!("{} M={}: {}", r.cell.algorithm, r.cell.memory, r.outcome.verdict.as_ref().unwrap_err());
            }
            Ok(if bad.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Model(exp) => {
            let cfg = exp.config()?;
            let data = Loaded::from_config(&cfg)?;
            let reports = experiment::model(&cfg, &data)?;
            experiment::write_models(sink(&cfg)?, &cfg, &data, &reports)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Validate { exp, max_io_error, max_cpu_error } => {
            let cfg = exp.config()?;
            let data = Loaded::from_config(&cfg)?;
            let rows = experiment::validate(&cfg, &data)?;
            experiment::write_validation(sink(&cfg)?, &rows)?;
            let mut ok = true;
            for r in &rows {
                if let Err(e) = &r.verdict {
                    eprintln!("{} M={}: {e}", r.algorithm, r.memory);
                    ok = false;
                }
            }
            let worst = |i: usize| rows.iter().map(|r| r.errors[i]).fold(0.0, f64::max);
            let (cpu, io) = (worst(0), worst(1).max(worst(2)));
            eprintln!("max comparisons error {cpu:.4}, max I/O error {io:.4}");
            ok &= max_io_error.is_none_or(|t| io <= t) && max_cpu_error.is_none_or(|t| cpu <= t);
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Select { sorted, skewed, confident, g_estimate } => {
            let a = select_algorithm(&SelectorInput { sorted, skewed, cardinality_confident: confident, g_estimate });
            println!("{a}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
