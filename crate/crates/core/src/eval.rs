//! End-to-end runs on simulated data: training-set collection, evaluation
//! windows, and parameter sweeps.

use std::fmt;
use std::str::FromStr;

use crate::blockage::{detect_blockages, detect_windows, DetectorParams};
use crate::config::{SystemConfig, TAU_RANGE, WINDOW_MINUTES_RANGE};
use crate::error::{Error, Result};
use crate::metrics::{CountPair, EvalReport};
use crate::nn::{train_with, Architecture, LstmModel, TrainHyper, TrainLog};
use crate::sim::{derive_seed, simulate_walk, synthesize_rss, SimScenario};
use crate::synthesis::{build_dataset, SynthesisPlan};
use crate::types::{BlockageSequence, LabeledDataset, RssTrace};

/// How evaluation windows are generated: `windows_per_class` fresh runs
/// for every head count `0..=max_count`, each one window long.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPlan {
    /// Room, link and RSS model; `agents`, `duration` and `rng_seed` are
    /// set per window.
    pub scenario: SimScenario,
    pub windows_per_class: usize,
    pub max_count: usize,
    pub seed: u64,
}

/// One labeled evaluation window.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalWindow {
    pub count: usize,
    pub trace: RssTrace,
}

/// Simulates the evaluation windows of `plan` for a given window length.
pub fn eval_windows(plan: &EvalPlan, window_seconds: f64) -> Result<Vec<EvalWindow>> {
    let mut out = Vec::with_capacity((plan.max_count + 1) * plan.windows_per_class);
    for count in 0..=plan.max_count {
        for k in 0..plan.windows_per_class {
            let scenario = SimScenario {
                agents: count,
                duration: window_seconds,
                rng_seed: derive_seed(plan.seed, count as u64, k as u64),
                ..plan.scenario
            };
            scenario.validate()?;
            let trace = synthesize_rss(&simulate_walk(&scenario)?, &scenario)?;
            out.push(EvalWindow { count, trace });
        }
    }
    Ok(out)
}

/// Detects and classifies every window.
pub fn evaluate(
    model: &LstmModel,
    windows: &[EvalWindow],
    detector: &DetectorParams,
) -> Result<EvalReport> {
    let pairs = windows
        .iter()
        .map(|win| {
            let seq = detect_blockages(&win.trace, detector)?;
            Ok(CountPair::new(win.count, model.predict(&seq)?))
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_pairs(pairs)
}

/// Single-walker recording cut into windows and run through the detector:
/// the simulated counterpart of collecting the original training sequences.
pub fn collect_originals(
    walker: &SimScenario,
    detector: &DetectorParams,
) -> Result<Vec<BlockageSequence>> {
    if walker.agents != 1 {
        return Err(Error::Scenario(format!(
            "training recording needs exactly one walker, got {}",
            walker.agents
        )));
    }
    walker.validate()?;
    let trace = synthesize_rss(&simulate_walk(walker)?, walker)?;
    detect_windows(&trace, detector)
}

/// Simulated training recording plus evaluation plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experiment {
    /// One walker; `duration` is the total recording length.
    pub training: SimScenario,
    pub eval: EvalPlan,
}

impl Experiment {
    /// 100 minutes of one walker in the scenario's room; 20 windows per class.
    pub fn standard(scenario: SimScenario, max_count: usize, seed: u64) -> Self {
        Self {
            training: SimScenario {
                agents: 1,
                duration: 6000.0,
                rng_seed: derive_seed(seed, 0x7261_696e, 0),
                ..scenario
            },
            eval: EvalPlan {
                scenario,
                windows_per_class: 20,
                max_count,
                seed: derive_seed(seed, 0x6576_616c, 0),
            },
        }
    }
}

/// Every artifact of one end-to-end run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub originals: Vec<BlockageSequence>,
    pub dataset: LabeledDataset,
    pub model: LstmModel,
    pub log: TrainLog,
    pub windows: Vec<EvalWindow>,
    pub report: EvalReport,
}

/// Collect, synthesize, train, and evaluate with one configuration.
pub fn run_pipeline(cfg: &SystemConfig, exp: &Experiment) -> Result<PipelineRun> {
    cfg.validate()?;
    let detector = DetectorParams::from_config(cfg)?;
    let w = detector.w;
    let originals = collect_originals(&exp.training, &detector)?;
    let plan = SynthesisPlan::new(originals.len(), cfg.max_count, w, cfg.synthesis_seed())?;
    let dataset = build_dataset(&originals, &plan)?;
    log::info!(
        "training on {} samples ({} originals, w={w})",
        dataset.len(),
        originals.len()
    );
    let arch = Architecture::new(cfg.lstm_hidden, cfg.max_count + 1)?;
    let hyper = TrainHyper::from_config(cfg);
    let (model, log) = train_with(&dataset, arch, &hyper, Some(cfg.clone()), |e, l| {
        log::info!("epoch {e}/{}: loss {l:.4}", hyper.epochs)
    })?;
    let eval_plan = EvalPlan {
        max_count: cfg.max_count,
        ..exp.eval
    };
    let windows = eval_windows(&eval_plan, cfg.window_seconds())?;
    let report = evaluate(&model, &windows, &detector)?;
    Ok(PipelineRun {
        originals,
        dataset,
        model,
        log,
        windows,
        report,
    })
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Tau,
    WindowMinutes,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau" => Ok(Self::Tau),
            "window" | "window_minutes" => Ok(Self::WindowMinutes),
            other => Err(Error::Config(format!(
                "unknown sweep parameter '{other}' (expected tau or window_minutes)"
            ))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tau => "tau",
            Self::WindowMinutes => "window_minutes",
        })
    }
}

/// Rejects values outside the configurable range before any work is done.
pub fn check_sweep_values(param: SweepParam, values: &[f64]) -> Result<()> {
    let (lo, hi) = match param {
        SweepParam::Tau => TAU_RANGE,
        SweepParam::WindowMinutes => WINDOW_MINUTES_RANGE,
    };
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    for &v in values {
        if !(v >= lo && v <= hi) {
            return Err(Error::Config(format!(
                "{param}={v} is outside the allowed range [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

/// Re-detects the same windows at each threshold with a fixed model.
pub fn sweep_tau(
    model: &LstmModel,
    windows: &[EvalWindow],
    cfg: &SystemConfig,
    values: &[f64],
) -> Result<Vec<(f64, usize)>> {
    check_sweep_values(SweepParam::Tau, values)?;
    values
        .iter()
        .map(|&tau| {
            let detector = DetectorParams::from_config(&SystemConfig {
                tau,
                ..cfg.clone()
            })?;
            Ok((tau, evaluate(model, windows, &detector)?.epsilon))
        })
        .collect()
}

/// Reruns the whole pipeline for each window length.
pub fn sweep_window(
    cfg: &SystemConfig,
    exp: &Experiment,
    values: &[f64],
) -> Result<Vec<(f64, usize)>> {
    check_sweep_values(SweepParam::WindowMinutes, values)?;
    values
        .iter()
        .map(|&minutes| {
            let run = run_pipeline(
                &SystemConfig {
                    window_minutes: minutes,
                    ..cfg.clone()
                },
                exp,
            )?;
            Ok((minutes, run.report.epsilon))
        })
        .collect()
}
