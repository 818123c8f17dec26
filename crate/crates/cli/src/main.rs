use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blockcount::blockage::{detect_blockages, detect_windows, DetectorParams};
use blockcount::eval::{
    check_sweep_values, eval_windows, evaluate, run_pipeline, sweep_tau, sweep_window, Experiment,
    SweepParam,
};
use blockcount::io::{
    atomic_write, read_crossing_log, read_dataset, read_rss_trace, read_sequences, sweep_csv,
    write_crossing_log, write_dataset, write_rss_trace, write_sequences, CrossingLog,
};
use blockcount::nn::{load_model, save_model, train_with, training_accuracy, Architecture, TrainHyper};
use blockcount::sim::{generate_ground_truth, SimScenario};
use blockcount::synthesis::{build_dataset, SynthesisPlan};
use blockcount::{split_into_windows, Error, Result, SystemConfig};

/// Device-free people counting from WiFi line-of-sight blockages.
#[derive(Debug, Parser)]
#[command(name = "blockcount", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Named parameter preset used when no config file is given.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Master random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override one config key; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Blockage threshold in dBm.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Counting window length in minutes.
    #[arg(long, global = true)]
    window_minutes: Option<f64>,
    /// Simulator scenario file (key=value).
    #[arg(long, global = true, value_name = "FILE")]
    scenario: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate walkers and write the RSS trace they produce.
    Simulate {
        #[arg(long)]
        agents: Option<usize>,
        /// Seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// RSS trace output.
        #[arg(long)]
        out: PathBuf,
        /// Also write the merged LoS crossing log.
        #[arg(long)]
        crossings: Option<PathBuf>,
    },
    /// Turn an RSS trace into one blockage sequence per window.
    Detect {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Label written in front of every sequence.
        #[arg(long, default_value_t = 1)]
        label: usize,
    },
    /// Build a balanced multi-class training set from single-person data.
    Synthesize {
        /// Crossing log of one walker.
        #[arg(long, conflicts_with = "sequences", required_unless_present = "sequences")]
        crossings: Option<PathBuf>,
        /// Already detected single-person sequences (`label,bits`).
        #[arg(long)]
        sequences: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the sequence classifier.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the number of people in one RSS window.
    Count {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Count simulated windows of known size and report the errors.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// CSV report (`real,estimated,error`).
        #[arg(long)]
        out: PathBuf,
        /// Human-readable report; printed to stdout when omitted.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        windows_per_class: usize,
    },
    /// Absolute counting error as one parameter varies.
    Sweep {
        /// `tau` or `window_minutes`.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// CSV output (`value,epsilon`).
        #[arg(long)]
        out: PathBuf,
        /// Fixed model for a threshold sweep; trained on simulated data if omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        windows_per_class: usize,
        /// Length of the simulated single-walker training recording.
        #[arg(long, default_value_t = 100.0)]
        training_minutes: f64,
    },
}

impl Common {
    /// Config file or preset, then `--set` pairs, then dedicated flags.
    fn config(&self, fallback: Option<SystemConfig>) -> Result<SystemConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => SystemConfig::load(path)?,
            (None, Some(name)) => SystemConfig::preset(name)?,
            (None, None) => fallback.unwrap_or_default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set(k, v)?;
        }
        if let Some(seed) = self.seed {
            cfg.rng_seed = seed;
        }
        if let Some(tau) = self.tau {
            cfg.tau = tau;
        }
        if let Some(m) = self.window_minutes {
            cfg.window_minutes = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn scenario(&self) -> Result<SimScenario> {
        match &self.scenario {
            Some(path) => SimScenario::load(path),
            None => Ok(SimScenario::default()),
        }
    }
}

/// Error category, stable exit code, and tag for the error line.
fn classify(err: &Error) -> (u8, &'static str) {
    match err {
        Error::Config(_) | Error::Scenario(_) | Error::InfeasibleClass { .. } => (3, "config"),
        Error::Io { .. } => (4, "io"),
        Error::Parse { .. }
        | Error::InvalidTrace(_)
        | Error::EmptyTrace
        | Error::TimestampOutOfRange { .. }
        | Error::DurationTooShort { .. }
        | Error::LabelOutOfRange { .. }
        | Error::EmptyDataset => (5, "input"),
        Error::ModelVersion { .. } | Error::CorruptModel(_) => (6, "model"),
        Error::WindowMismatch { .. } | Error::LengthMismatch { .. } => (7, "mismatch"),
        Error::NonFinite(_) => (8, "numeric"),
        Error::EmptySuperposition | Error::EmptyPairs => (9, "internal"),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, text.as_bytes())
}

fn detector_for_model(cfg: &SystemConfig, w: usize, slot: f64) -> Result<DetectorParams> {
    DetectorParams::new(cfg.tau, cfg.detector_mode, slot, w)
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match cli.command {
        Command::Simulate {
            agents,
            duration,
            out,
            crossings,
        } => {
            let cfg = common.config(None)?;
            let mut scenario = common.scenario()?;
            if let Some(a) = agents {
                scenario.agents = a;
            }
            if let Some(d) = duration {
                scenario.duration = d;
            }
            if common.seed.is_some() || common.scenario.is_none() {
                scenario.rng_seed = cfg.rng_seed;
            }
            let truth = generate_ground_truth(&scenario, cfg.slot_duration)?;
            write_rss_trace(&out, &truth.trace)?;
            if let Some(path) = crossings {
                let mut times: Vec<f64> = truth.crossings.iter().flatten().copied().collect();
                times.sort_by(f64::total_cmp);
                write_crossing_log(
                    &path,
                    &CrossingLog {
                        duration: scenario.duration,
                        times,
                    },
                )?;
            }
            println!(
                "{} readings, {} crossings",
                truth.trace.len(),
                truth.crossings.iter().map(Vec::len).sum::<usize>()
            );
        }
        Command::Detect { trace, out, label } => {
            let cfg = common.config(None)?;
            let trace = read_rss_trace(&trace)?;
            let seqs = detect_windows(&trace, &DetectorParams::from_config(&cfg)?)?;
            write_sequences(&out, seqs.iter().map(|s| (label, s)))?;
            println!("{} windows", seqs.len());
        }
        Command::Synthesize {
            crossings,
            sequences,
            out,
        } => {
            let cfg = common.config(None)?;
            let w = cfg.w()?;
            let originals = match (crossings, sequences) {
                (Some(path), _) => {
                    let log = read_crossing_log(&path)?;
                    split_into_windows(&log.times, log.duration, cfg.window_minutes, cfg.slot_duration)?
                }
                (None, Some(path)) => {
                    let rows = read_sequences(&path, cfg.slot_duration)?;
                    if let Some((_, s)) = rows.iter().find(|(_, s)| s.len() != w) {
                        return Err(Error::LengthMismatch {
                            expected: w,
                            actual: s.len(),
                        });
                    }
                    rows.into_iter().map(|(_, s)| s).collect()
                }
                (None, None) => unreachable!("clap requires one input"),
            };
            let plan = SynthesisPlan::new(originals.len(), cfg.max_count, w, cfg.synthesis_seed())?;
            let ds = build_dataset(&originals, &plan)?;
            write_dataset(&out, &ds)?;
            println!(
                "{} originals -> {} samples over {} classes ({} per class)",
                originals.len(),
                ds.len(),
                ds.num_classes(),
                plan.target_per_class()
            );
        }
        Command::Train { dataset, out } => {
            let cfg = common.config(None)?;
            let ds = read_dataset(&dataset, cfg.slot_duration)?;
            let arch = Architecture::new(cfg.lstm_hidden, ds.num_classes())?;
            let hyper = TrainHyper::from_config(&cfg);
            let (model, log) = train_with(&ds, arch, &hyper, Some(cfg.clone()), |e, l| {
                log::info!("epoch {e}/{}: loss {l:.5}", hyper.epochs)
            })?;
            save_model(&model, &out)?;
            println!(
                "final loss {:.5}, training accuracy {:.4}",
                log.epoch_losses.last().copied().unwrap_or(f64::NAN),
                training_accuracy(&model, &ds)?
            );
        }
        Command::Count { model, trace } => {
            let model = load_model(&model)?;
            let cfg = common.config(model.config.clone())?;
            let trace = read_rss_trace(&trace)?;
            let detector = detector_for_model(&cfg, model.w, model.slot_duration)?;
            let seq = detect_blockages(&trace, &detector)?;
            println!("{}", model.predict(&seq)?);
        }
        Command::Evaluate {
            model,
            out,
            table,
            windows_per_class,
        } => {
            let model = load_model(&model)?;
            let cfg = common.config(model.config.clone())?;
            let mut plan =
                Experiment::standard(common.scenario()?, model.classes() - 1, cfg.rng_seed).eval;
            plan.windows_per_class = windows_per_class;
            let detector = detector_for_model(&cfg, model.w, model.slot_duration)?;
            let windows = eval_windows(&plan, detector.window_seconds())?;
            let report = evaluate(&model, &windows, &detector)?;
            write_text(&out, &report.to_csv())?;
            match table {
                Some(path) => write_text(&path, &report.to_table())?,
                None => print!("{}", report.to_table()),
            }
        }
        Command::Sweep {
            param,
            values,
            out,
            model,
            windows_per_class,
            training_minutes,
        } => {
            check_sweep_values(param, &values)?;
            let model = match (param, model) {
                (SweepParam::Tau, Some(path)) => Some(load_model(&path)?),
                (SweepParam::WindowMinutes, Some(_)) => {
                    return Err(Error::Config(
                        "a window sweep retrains per value and cannot reuse --model".into(),
                    ))
                }
                (_, None) => None,
            };
            let cfg = common.config(model.as_ref().and_then(|m| m.config.clone()))?;
            let mut exp = Experiment::standard(common.scenario()?, cfg.max_count, cfg.rng_seed);
            exp.eval.windows_per_class = windows_per_class;
            exp.training.duration = training_minutes * 60.0;
            let rows = match (param, model) {
                (SweepParam::Tau, Some(model)) => {
                    exp.eval.max_count = model.classes() - 1;
                    let windows =
                        eval_windows(&exp.eval, model.w as f64 * model.slot_duration)?;
                    sweep_tau(&model, &windows, &cfg, &values)?
                }
                (SweepParam::Tau, None) => {
                    let run = run_pipeline(&cfg, &exp)?;
                    sweep_tau(&run.model, &run.windows, &cfg, &values)?
                }
                (SweepParam::WindowMinutes, _) => sweep_window(&cfg, &exp, &values)?,
            };
            let csv = sweep_csv(&rows);
            write_text(&out, &csv)?;
            print!("{csv}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = classify(&err);
            eprintln!("error[{kind}]: {err}");
            ExitCode::from(code)
        }
    }
}
