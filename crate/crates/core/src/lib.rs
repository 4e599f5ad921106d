//! Joint grammatical error detection and essay scoring with a multi-task
//! bidirectional LSTM.

pub mod autodiff;
pub mod corpus;
pub mod metrics;
pub mod model;
pub mod training;
