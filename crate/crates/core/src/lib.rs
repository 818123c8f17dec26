//! Device-free crowd counting from the line-of-sight blockage pattern of a
//! single WiFi link.
//!
//! The pipeline has four stages:
//!
//! - [`blockage`]: threshold a window of RSS readings against its mean and
//!   emit one bit per time slot (1 = link blocked).
//! - [`synthesis`]: turn a handful of single-person sequences into a
//!   balanced multi-class training set by superposition and bit-flip noising.
//! - [`nn`]: an LSTM classifier over blockage sequences, trained from scratch.
//! - [`metrics`] and [`eval`]: counting-error statistics and sweeps.
//!
//! [`sim`] provides a deterministic walker and RSS simulator for producing
//! labeled data without hardware.

pub mod blockage;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod sim;
pub mod synthesis;
pub mod types;
pub mod window;

pub use blockage::{detect_blockages, mean_rss, DetectorParams};
pub use config::{DetectorMode, SystemConfig};
pub use error::{Error, Result};
pub use metrics::{CountPair, EvalReport};
pub use nn::{LstmModel, TrainHyper};
pub use sim::SimScenario;
pub use synthesis::{build_dataset, SynthesisPlan};
pub use types::{BlockageSequence, LabeledDataset, LabeledSample, Origin, RssReading, RssTrace};
pub use window::{split_into_windows, timestamps_to_sequence};
