//! System configuration and its flat `key=value` file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::window::slots_per_window;

/// Which RSS excursion counts as a blockage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorMode {
    /// Reading at least `tau` below the window mean.
    #[default]
    Attenuation,
    /// Reading at least `tau` away from the mean in either direction.
    Deviation,
    /// Reading at least `tau` above the mean.
    Elevation,
}

impl FromStr for DetectorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "attenuation" => Ok(Self::Attenuation),
            "deviation" => Ok(Self::Deviation),
            "elevation" => Ok(Self::Elevation),
            other => Err(Error::Config(format!(
                "unknown detector mode '{other}' (expected attenuation, deviation or elevation)"
            ))),
        }
    }
}

impl fmt::Display for DetectorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Attenuation => "attenuation",
            Self::Deviation => "deviation",
            Self::Elevation => "elevation",
        })
    }
}

/// Tunable parameters of the whole counting pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Blockage threshold in dBm.
    pub tau: f64,
    pub window_minutes: f64,
    /// Seconds per slot.
    pub slot_duration: f64,
    /// Largest count class N; classes are `0..=N`.
    pub max_count: usize,
    pub lstm_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub rng_seed: u64,
    pub detector_mode: DetectorMode,
    /// Gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::testbed1()
    }
}

pub const TAU_RANGE: (f64, f64) = (0.0, 10.0);
pub const WINDOW_MINUTES_RANGE: (f64, f64) = (1.0, 5.0);
pub const HIDDEN_RANGE: (usize, usize) = (10, 100);
pub const EPOCHS_RANGE: (usize, usize) = (10, 150);
pub const BATCH_RANGE: (usize, usize) = (1, 30);

const KEYS: &[&str] = &[
    "tau",
    "window_minutes",
    "slot_duration",
    "max_count",
    "lstm_hidden",
    "epochs",
    "batch_size",
    "learning_rate",
    "momentum",
    "rng_seed",
    "detector_mode",
    "grad_clip",
];

impl SystemConfig {
    /// Small controlled room: tau 5 dBm, 120 epochs, batches of 15.
    pub fn testbed1() -> Self {
        Self {
            tau: 5.0,
            window_minutes: 5.0,
            slot_duration: 1.0,
            max_count: 10,
            lstm_hidden: 100,
            epochs: 120,
            batch_size: 15,
            learning_rate: 0.01,
            momentum: 0.9,
            rng_seed: 0,
            detector_mode: DetectorMode::Attenuation,
            grad_clip: 0.0,
        }
    }

    /// Larger multipath-rich hall: tau 5.5 dBm, 150 epochs, batches of 3.
    pub fn testbed2() -> Self {
        Self {
            tau: 5.5,
            epochs: 150,
            batch_size: 3,
            ..Self::testbed1()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "testbed1" => Ok(Self::testbed1()),
            "testbed2" => Ok(Self::testbed2()),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected testbed1 or testbed2)"
            ))),
        }
    }

    /// Seed for training-set synthesis.
    pub fn synthesis_seed(&self) -> u64 {
        crate::sim::derive_seed(self.rng_seed, 1, 0)
    }

    /// Seed for weight initialization and batch shuffling.
    pub fn training_seed(&self) -> u64 {
        crate::sim::derive_seed(self.rng_seed, 2, 0)
    }

    /// Window length in seconds.
    pub fn window_seconds(&self) -> f64 {
        self.window_minutes * 60.0
    }

    /// Slots per counting window.
    pub fn w(&self) -> Result<usize> {
        slots_per_window(self.window_seconds(), self.slot_duration)
    }

    pub fn validate(&self) -> Result<()> {
        fn range<T: PartialOrd + fmt::Display>(name: &str, v: T, (lo, hi): (T, T)) -> Result<()> {
            if v >= lo && v <= hi {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name}={v} is outside the allowed range [{lo}, {hi}]"
                )))
            }
        }
        range("tau", self.tau, TAU_RANGE)?;
        range("window_minutes", self.window_minutes, WINDOW_MINUTES_RANGE)?;
        range("lstm_hidden", self.lstm_hidden, HIDDEN_RANGE)?;
        range("epochs", self.epochs, EPOCHS_RANGE)?;
        range("batch_size", self.batch_size, BATCH_RANGE)?;
        if self.max_count < 1 {
            return Err(Error::Config("max_count must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.grad_clip.is_finite() && self.grad_clip >= 0.0) {
            return Err(Error::Config(format!(
                "grad_clip must be non-negative, got {}",
                self.grad_clip
            )));
        }
        self.w()?;
        Ok(())
    }

    /// Applies one `key=value` assignment. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
        }
        let key = key.trim();
        match key {
            "tau" => self.tau = num(key, value)?,
            "window_minutes" => self.window_minutes = num(key, value)?,
            "slot_duration" => self.slot_duration = num(key, value)?,
            "max_count" => self.max_count = num(key, value)?,
            "lstm_hidden" => self.lstm_hidden = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "momentum" => self.momentum = num(key, value)?,
            "rng_seed" => self.rng_seed = num(key, value)?,
            "detector_mode" => self.detector_mode = value.parse()?,
            "grad_clip" => self.grad_clip = num(key, value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown key '{other}' (known keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Parses a config document on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| at_line(origin, n + 1, "expected key=value".into()))?;
            cfg.set(k, v)
                .map_err(|e| {
                    let msg = match e {
                        Error::Config(m) => m,
                        other => other.to_string(),
                    };
                    at_line(origin, n + 1, msg)
                })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Renders the config in the same format `parse` reads.
    pub fn to_text(&self) -> String {
        format!(
            "tau={}\nwindow_minutes={}\nslot_duration={}\nmax_count={}\nlstm_hidden={}\n\
             epochs={}\nbatch_size={}\nlearning_rate={}\nmomentum={}\nrng_seed={}\n\
             detector_mode={}\ngrad_clip={}\n",
            self.tau,
            self.window_minutes,
            self.slot_duration,
            self.max_count,
            self.lstm_hidden,
            self.epochs,
            self.batch_size,
            self.learning_rate,
            self.momentum,
            self.rng_seed,
            self.detector_mode,
            self.grad_clip
        )
    }
}

/// A config error located at `path:line`.
fn at_line(path: &Path, line: usize, msg: String) -> Error {
    Error::Config(format!("{}:{line}: {msg}", path.display()))
}
