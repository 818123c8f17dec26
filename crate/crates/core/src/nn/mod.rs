//! LSTM count classifier trained from scratch.
//!
//! One binary input per time step feeds a single LSTM layer; the last
//! hidden state goes through a dense softmax layer over count classes.
//! Training is mini-batch SGD with classical momentum on cross-entropy,
//! with gradients from backpropagation through time in `f64`.

pub mod lstm;
pub mod model;
pub mod optim;
pub mod params;
pub mod train;

pub use lstm::{backward, cross_entropy, forward, lstm_step, softmax};
pub use model::{argmax, load_model, save_model, LstmModel, MODEL_FORMAT_VERSION};
pub use optim::{sgdm_step, OptimizerState, TrainHyper};
pub use params::{Architecture, Gate, LstmParams};
pub use train::{train, train_with, training_accuracy, TrainLog};
