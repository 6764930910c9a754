//! Word-level LSTM language modelling and targeted agreement evaluation.
//!
//! The pipeline runs in five stages, one module each:
//!
//! - [`corpus`]: text normalisation, frequency-capped vocabularies, id
//!   encoding and contiguous BPTT batching.
//! - [`numerics`]: the dense kernel (matrices, softmax, seeded RNG,
//!   finite-difference gradient checking).
//! - [`lstm`]: the embedding → stacked LSTM → softmax model, hand-derived
//!   truncated BPTT, SGD training with clipping and annealing, checkpoints.
//! - [`testgen`]: morphological lexicons and minimal-pair suite generation for
//!   gender-agreement conditions.
//! - [`evaluator`]: pair scoring, accuracy tables and reports.
//!
//! [`cli`] wires them into the `agreeprobe` binary and [`synth`] builds the
//! artificial agreement grammar used for desk-scale end-to-end runs.

pub mod cli;
pub mod corpus;
pub mod evaluator;
pub mod lstm;
pub mod numerics;
pub mod synth;
pub mod testgen;

pub use corpus::{BatchPlan, EncodedCorpus, Split, Vocabulary};
pub use evaluator::{AccuracyTable, PairOutcome};
pub use lstm::{ModelDims, ModelParams, TrainConfig, TrainLog};
pub use numerics::{Matrix, Real, Rng};
pub use testgen::{Condition, Gender, Lexicon, MinimalPair, Number};
