//! `taskrisk`: simulate scenarios, run the risk detector, benchmark a corpus.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use taskrisk::harness::{emit_report, load_config, load_scenario, run_specs, write_trace, ReportFormat};
use taskrisk::sim::{run_scenario, Monitors};
use taskrisk::{dkw_epsilon, CostMetric, DetectorKind, DetectorParams, Error, RunConfig};

#[derive(Parser)]
#[command(name = "taskrisk", version, about = "Task-level risk monitoring for perception faults")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario without monitors and write one JSON step record per line
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run one detector on one scenario and print a JSON summary
    Detect {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Detector::Rsr)]
        detector: Detector,
        #[arg(long, value_enum)]
        cost: Option<Cost>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Base configuration; flags above override it
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write per-step bounds as JSON lines
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Benchmark detectors over a directory of scenarios
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        csv: PathBuf,
        /// Detectors to score; defaults to all
        #[arg(long, value_enum)]
        detector: Vec<Detector>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fill the runtime columns (wall clock, not reproducible)
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print one line per scenario
        #[arg(long, short)]
        verbose: bool,
    },
    /// Print the DKW half-width for confidence 1 - alpha and n samples
    Epsilon {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Detector {
    Rsr,
    CollisionProb,
}

impl From<Detector> for DetectorKind {
    fn from(d: Detector) -> Self {
        match d {
            Detector::Rsr => DetectorKind::Rsr,
            Detector::CollisionProb => DetectorKind::CollisionProb,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Cost {
    Msd,
    Ttc,
}

/// Error plus the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_validation() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

fn base_config(path: Option<&Path>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => load_config(p),
        None => Ok(RunConfig::default()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            scenario,
            seed,
            out,
            config,
        } => {
            let config = base_config(config.as_deref())?;
            let spec = load_scenario(&scenario)?;
            let log = run_scenario(&spec, &config, Monitors::NONE, seed)?;
            let mut w = create(&out)?;
            for step in &log.steps {
                serde_json::to_writer(&mut w, step).map_err(Error::from)?;
                w.write_all(b"\n").map_err(|e| io_failure(&out, e))?;
            }
            w.flush().map_err(|e| io_failure(&out, e))?;
            eprintln!(
                "{}: {} steps, first collision {}",
                spec.name,
                log.steps.len(),
                log.first_collision_time
                    .map(|t| format!("at {t:.1} s"))
                    .unwrap_or_else(|| "none".into())
            );
        }
        Command::Detect {
            scenario,
            detector,
            cost,
            p,
            gamma,
            alpha,
            n,
            seed,
            config,
            trace,
        } => {
            let mut config = base_config(config.as_deref())?;
            let d = config.detector;
            config.detector = DetectorParams::new(
                p.unwrap_or(d.p()),
                gamma.unwrap_or(d.gamma()),
                alpha.unwrap_or(d.alpha()),
                n.unwrap_or(d.n()),
            )?
            .with_tail(d.tail());
            let kind = DetectorKind::from(detector);
            if kind == DetectorKind::CollisionProb {
                if let Some(g) = gamma {
                    config.baseline.gamma = g;
                }
                if let Some(n) = n {
                    config.baseline.n = n;
                }
            }
            if let Some(c) = cost {
                config.cost.metric = match c {
                    Cost::Msd => CostMetric::Msd,
                    Cost::Ttc => CostMetric::Ttc,
                };
            }
            let spec = load_scenario(&scenario)?;
            let results = run_specs(vec![(Some(scenario.clone()), Ok(spec))], &config, &[kind], seed)?;
            let outcome = &results[0].scenarios[0];
            if let Some(path) = trace {
                write_trace(&results, create(&path)?)?;
            }
            let summary = serde_json::json!({
                "scenario": outcome.name,
                "detector": kind,
                "alarm": outcome.predicted,
                "first_alarm": outcome.first_alarm,
                "collision": outcome.truth,
                "first_collision": outcome.first_collision,
                "fault_coverage": outcome.fault_coverage,
            });
            println!("{summary}");
        }
        Command::Bench {
            corpus,
            config,
            csv,
            detector,
            seed,
            timing,
            trace,
            verbose,
        } => {
            let config = base_config(config.as_deref())?;
            let kinds: Vec<DetectorKind> = if detector.is_empty() {
                DetectorKind::ALL.to_vec()
            } else {
                detector.into_iter().map(Into::into).collect()
            };
            let specs = taskrisk::harness::load_corpus(&corpus)?
                .into_iter()
                .map(|(p, s)| (Some(p), s))
                .collect();
            let results = run_specs(specs, &config, &kinds, seed)?;
            for r in &results {
                for s in r.failures() {
                    eprintln!("skipped {}: {}", s.name, s.error.as_deref().unwrap_or_default());
                }
                if verbose {
                    for s in r.scenarios.iter().filter(|s| s.error.is_none()) {
                        let t = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into());
                        eprintln!(
                            "  {:<40} collision {:>5}  alarm {:>5}  first alarm {:>5}  first collision {:>5}",
                            s.name,
                            s.truth,
                            s.predicted,
                            t(s.first_alarm),
                            t(s.first_collision)
                        );
                    }
                }
                let m = &r.metrics;
                eprintln!(
                    "{} [{}]: F1 {:.3}, precision {:.3}, recall {:.3} ({} scenarios)",
                    r.algorithm,
                    r.detector,
                    m.f1,
                    m.precision,
                    m.recall,
                    m.confusion.total()
                );
            }
            emit_report(&results, ReportFormat::Csv, &csv, timing)?;
            if let Some(path) = trace {
                emit_report(&results, ReportFormat::Trace, &path, timing)?;
            }
        }
        Command::Epsilon { alpha, n } => {
            println!("{}", dkw_epsilon(alpha, n)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
