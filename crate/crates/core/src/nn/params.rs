use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// LSTM gates in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    /// Candidate cell value.
    Cell = 2,
    Output = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Cell, Gate::Output];

    pub fn name(self) -> &'static str {
        match self {
            Gate::Input => "input gate",
            Gate::Forget => "forget gate",
            Gate::Cell => "cell candidate",
            Gate::Output => "output gate",
        }
    }

    pub(crate) fn from_row(row: usize, hidden: usize) -> Gate {
        Gate::ALL[row / hidden]
    }
}

/// Network shape: one scalar input per step, `hidden` LSTM units, and a
/// dense softmax layer over `classes` count classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: usize,
    pub classes: usize,
}

impl Architecture {
    pub fn new(hidden: usize, classes: usize) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Config("hidden layer needs at least one unit".into()));
        }
        if classes < 2 {
            return Err(Error::Config(format!(
                "need at least two classes, got {classes}"
            )));
        }
        Ok(Self { hidden, classes })
    }
}

/// All learned weights. Gradients and optimizer velocity share this shape.
///
/// Gate rows are stacked `[input, forget, cell, output]`, so row `g*H + u`
/// belongs to unit `u` of gate `g`. Matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    hidden: usize,
    classes: usize,
    /// `4H x 1`
    pub input_weights: Vec<f64>,
    /// `4H x H`
    pub recurrent_weights: Vec<f64>,
    /// `4H`
    pub gate_biases: Vec<f64>,
    /// `K x H`
    pub dense_weights: Vec<f64>,
    /// `K`
    pub dense_bias: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(arch: Architecture) -> Self {
        let Architecture { hidden, classes } = arch;
        Self {
            hidden,
            classes,
            input_weights: vec![0.0; 4 * hidden],
            recurrent_weights: vec![0.0; 4 * hidden * hidden],
            gate_biases: vec![0.0; 4 * hidden],
            dense_weights: vec![0.0; classes * hidden],
            dense_bias: vec![0.0; classes],
        }
    }

    /// Glorot-uniform weights per gate matrix, forget bias 1, other biases 0.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut p = Self::zeros(arch);
        let h = arch.hidden as f64;
        let input_limit = (6.0 / (1.0 + h)).sqrt();
        let recurrent_limit = (6.0 / (2.0 * h)).sqrt();
        let dense_limit = (6.0 / (h + arch.classes as f64)).sqrt();
        for v in &mut p.input_weights {
            *v = rng.random_range(-input_limit..input_limit);
        }
        for v in &mut p.recurrent_weights {
            *v = rng.random_range(-recurrent_limit..recurrent_limit);
        }
        for v in &mut p.dense_weights {
            *v = rng.random_range(-dense_limit..dense_limit);
        }
        let hu = arch.hidden;
        p.gate_biases[hu..2 * hu].fill(1.0);
        p
    }

    /// Builds parameters from raw buffers, checking every length.
    pub fn from_parts(
        arch: Architecture,
        input_weights: Vec<f64>,
        recurrent_weights: Vec<f64>,
        gate_biases: Vec<f64>,
        dense_weights: Vec<f64>,
        dense_bias: Vec<f64>,
    ) -> Result<Self> {
        let p = Self {
            hidden: arch.hidden,
            classes: arch.classes,
            input_weights,
            recurrent_weights,
            gate_biases,
            dense_weights,
            dense_bias,
        };
        p.check_shape()?;
        Ok(p)
    }

    pub fn check_shape(&self) -> Result<()> {
        let (h, k) = (self.hidden, self.classes);
        let expect = [4 * h, 4 * h * h, 4 * h, k * h, k];
        for ((name, t), want) in Self::NAMES.iter().zip(self.tensors()).zip(expect) {
            if t.len() != want {
                return Err(Error::CorruptModel(format!(
                    "{name} has {} entries, expected {want}",
                    t.len()
                )));
            }
        }
        Ok(())
    }

    pub const NAMES: [&'static str; 5] = [
        "input_weights",
        "recurrent_weights",
        "gate_biases",
        "dense_weights",
        "dense_bias",
    ];

    pub fn arch(&self) -> Architecture {
        Architecture {
            hidden: self.hidden,
            classes: self.classes,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [
            &self.input_weights,
            &self.recurrent_weights,
            &self.gate_biases,
            &self.dense_weights,
            &self.dense_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            &mut self.input_weights,
            &mut self.recurrent_weights,
            &mut self.gate_biases,
            &mut self.dense_weights,
            &mut self.dense_bias,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.tensors().into_iter().flatten()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.tensors_mut().into_iter().flatten()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.iter_mut().for_each(|v| *v = value);
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.arch(), other.arch());
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += alpha * b;
        }
    }
}
