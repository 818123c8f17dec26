//! Trained classifier, prediction, and the JSON model file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::io::atomic_write;
use crate::nn::lstm::forward;
use crate::nn::optim::TrainHyper;
use crate::nn::params::{Architecture, LstmParams};
use crate::types::BlockageSequence;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Learned weights plus the input geometry they were trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub params: LstmParams,
    /// Slots per input sequence.
    pub w: usize,
    pub slot_duration: f64,
    pub hyper: TrainHyper,
    /// Pipeline settings used to produce the training data, if known.
    pub config: Option<SystemConfig>,
}

impl LstmModel {
    pub fn arch(&self) -> Architecture {
        self.params.arch()
    }

    pub fn classes(&self) -> usize {
        self.params.classes()
    }

    fn check_len(&self, sequence: &BlockageSequence) -> Result<()> {
        if sequence.len() != self.w {
            return Err(Error::LengthMismatch {
                expected: self.w,
                actual: sequence.len(),
            });
        }
        Ok(())
    }

    pub fn probabilities(&self, sequence: &BlockageSequence) -> Result<Vec<f64>> {
        self.check_len(sequence)?;
        forward(sequence, &self.params)
    }

    /// Count estimate: most probable class, ties to the smaller count.
    pub fn predict(&self, sequence: &BlockageSequence) -> Result<usize> {
        let probs = self.probabilities(sequence)?;
        Ok(argmax(&probs))
    }

    pub fn to_json(&self) -> Result<String> {
        let (h, k) = (self.params.hidden(), self.params.classes());
        let gates = |v: &[f64]| v.chunks_exact(h).map(<[f64]>::to_vec).collect::<Vec<_>>();
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            architecture: ArchFile {
                hidden: h,
                classes: k,
                w: self.w,
                slot_duration: self.slot_duration,
            },
            training: self.hyper,
            config: self.config.clone(),
            weights: WeightsFile {
                input_weights: gates(&self.params.input_weights),
                recurrent_weights: self
                    .params
                    .recurrent_weights
                    .chunks_exact(h * h)
                    .map(gates)
                    .collect(),
                gate_biases: gates(&self.params.gate_biases),
                dense_weights: gates(&self.params.dense_weights),
                dense_bias: self.params.dense_bias.clone(),
            },
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::CorruptModel(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::CorruptModel("missing format_version".into()))?;
        if version != MODEL_FORMAT_VERSION as u64 {
            return Err(Error::ModelVersion {
                found: version as u32,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| Error::CorruptModel(e.to_string()))?;
        let a = file.architecture;
        let arch = Architecture::new(a.hidden, a.classes)
            .map_err(|e| Error::CorruptModel(e.to_string()))?;
        let wt = file.weights;
        let flat = |name: &str, rows: Vec<Vec<f64>>, n_rows: usize, n_cols: usize| {
            if rows.len() != n_rows || rows.iter().any(|r| r.len() != n_cols) {
                return Err(Error::CorruptModel(format!(
                    "{name} is not {n_rows} x {n_cols}"
                )));
            }
            Ok(rows.into_iter().flatten().collect::<Vec<f64>>())
        };
        let (h, k) = (a.hidden, a.classes);
        let input = flat("input_weights", wt.input_weights, 4, h)?;
        if wt.recurrent_weights.len() != 4 {
            return Err(Error::CorruptModel("recurrent_weights needs 4 gates".into()));
        }
        let mut recurrent = Vec::with_capacity(4 * h * h);
        for g in wt.recurrent_weights {
            recurrent.extend(flat("recurrent_weights", g, h, h)?);
        }
        let biases = flat("gate_biases", wt.gate_biases, 4, h)?;
        let dense = flat("dense_weights", wt.dense_weights, k, h)?;
        let params = LstmParams::from_parts(arch, input, recurrent, biases, dense, wt.dense_bias)?;
        if !params.is_finite() {
            return Err(Error::CorruptModel("non-finite weight".into()));
        }
        if a.w == 0 || !(a.slot_duration.is_finite() && a.slot_duration > 0.0) {
            return Err(Error::CorruptModel("invalid input geometry".into()));
        }
        Ok(Self {
            params,
            w: a.w,
            slot_duration: a.slot_duration,
            hyper: file.training,
            config: file.config,
        })
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn save_model(model: &LstmModel, path: &Path) -> Result<()> {
    atomic_write(path, model.to_json()?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<LstmModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LstmModel::from_json(&text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    architecture: ArchFile,
    training: TrainHyper,
    config: Option<SystemConfig>,
    weights: WeightsFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchFile {
    hidden: usize,
    classes: usize,
    w: usize,
    slot_duration: f64,
}

/// Gate-indexed nested arrays: `[gate][unit]`, `[gate][unit][unit]`,
/// `[class][unit]`, `[class]`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    input_weights: Vec<Vec<f64>>,
    recurrent_weights: Vec<Vec<Vec<f64>>>,
    gate_biases: Vec<Vec<f64>>,
    dense_weights: Vec<Vec<f64>>,
    dense_bias: Vec<f64>,
}
