//! The multi-task network: embeddings, a bidirectional LSTM, and detection,
//! language-model and scoring heads.

mod checkpoint;
mod config;
mod network;
mod params;

use std::path::PathBuf;

use crate::autodiff::AutodiffError;

pub use checkpoint::{
    config_pairs, set_config_field, Checkpoint, MANIFEST_FILE, PARAMS_FILE, VOCAB_FILE,
};
pub use config::{LmCombine, ModelConfig};
pub use network::{
    accumulate_gradients, build_graph, build_loss, compute_loss, forward, lm_target, lstm_cell,
    lstm_step, predict, predict_labels, Graph, Heads, LossBreakdown, LossNodes, ModelOutputs,
};
pub use params::{embedding_seed, LstmNodes, LstmWeights, ModelParams, ParamNodes, PARAM_NAMES};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("parameter {name}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("{what} vector has length {found}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("empty token sequence")]
    EmptySequence,
    #[error("token id {id} outside vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },
    #[error("{tokens} tokens but {labels} labels")]
    LengthMismatch { tokens: usize, labels: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error("vocabulary hash mismatch: checkpoint has {expected}, corpus vocabulary has {found}")]
    VocabMismatch { expected: String, found: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
