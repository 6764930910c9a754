//! Embedding → stacked LSTM → softmax language model with hand-derived
//! truncated BPTT, SGD training and portable checkpoints.
//!
//! Gate rows of every `W`/`U`/`b` are laid out as `[input, forget, cell, output]`,
//! each block `hidden` rows tall.

mod cell;
mod check;
mod checkpoint;
mod network;
mod params;
mod train;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::numerics::NumericsError;

pub use cell::lstm_cell;
pub use check::{GradCheckSetup, gradient_check};
pub use checkpoint::{
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION, Checkpoint, CheckpointError, checkpoint_bytes,
    load_checkpoint, parse_checkpoint, save_checkpoint, stored_width,
};
pub use network::{
    Dropout, HiddenState, forward, loss_and_grads, next_token_log_probs, perplexity, sgd_step,
};
pub use params::{LayerParams, ModelDims, ModelParams};
pub use train::{EpochRecord, Selection, TrainConfig, TrainLog, select_best, train, train_with};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("token id {id} outside vocabulary of {vocab}")]
    InvalidId { id: u32, vocab: usize },
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
