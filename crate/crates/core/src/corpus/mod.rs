//! Essays, corpus files, vocabularies, embeddings and synthetic data.

mod embeddings;
mod format;
mod score;
mod synthetic;
mod vocab;

use std::fmt;
use std::path::PathBuf;

pub use embeddings::{
    load_embeddings, random_embedding_matrix, random_embeddings, EmbeddingMatrix, RowSource,
    EMBEDDING_INIT_RANGE,
};
pub use format::{
    parse_corpus, parse_corpus_str, parse_raw_corpus, parse_raw_corpus_str, serialize_corpus,
    serialize_raw_corpus, write_corpus, RawEssay,
};
pub use score::{map_exam_score, ExamScore, EXAM_GRADES};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticCorpus};
pub use vocab::{build_vocabulary, Vocabulary, BOUNDARY_ID, BOUNDARY_TOKEN, UNK_ID, UNK_TOKEN};

pub const SCORE_MIN: u8 = 1;
pub const SCORE_MAX: u8 = 20;

/// Gold or predicted token label; `Incorrect` is the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Correct,
    Incorrect,
}

impl Label {
    pub fn as_char(self) -> char {
        match self {
            Label::Correct => 'c',
            Label::Incorrect => 'i',
        }
    }

    pub fn from_code(s: &str) -> Option<Label> {
        match s {
            "c" => Some(Label::Correct),
            "i" => Some(Label::Incorrect),
            _ => None,
        }
    }

    /// Class index used by the detection head.
    pub fn index(self) -> usize {
        match self {
            Label::Correct => 0,
            Label::Incorrect => 1,
        }
    }

    pub fn is_error(self) -> bool {
        self == Label::Incorrect
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// One essay, read as a single token sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Essay {
    pub id: String,
    pub tokens: Vec<String>,
    pub labels: Vec<Label>,
    pub gold_score: u8,
}

impl Essay {
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        labels: Vec<Label>,
        gold_score: u8,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        if tokens.is_empty() {
            return Err(CorpusError::EmptyEssay(id));
        }
        if tokens.len() != labels.len() {
            return Err(CorpusError::LabelCountMismatch {
                id,
                tokens: tokens.len(),
                labels: labels.len(),
            });
        }
        if !(SCORE_MIN..=SCORE_MAX).contains(&gold_score) {
            return Err(CorpusError::ScoreOutOfRange {
                id,
                score: gold_score as i64,
            });
        }
        Ok(Essay {
            id,
            tokens,
            labels,
            gold_score,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn error_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_error()).count()
    }

    pub fn error_fraction(&self) -> f64 {
        self.error_count() as f64 / self.len() as f64
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("essay {id}: {tokens} tokens but {labels} labels")]
    LabelCountMismatch {
        id: String,
        tokens: usize,
        labels: usize,
    },
    #[error("essay {0} has no tokens")]
    EmptyEssay(String),
    #[error("essay {id}: score {score} outside 1..=20")]
    ScoreOutOfRange { id: String, score: i64 },
    #[error("unknown exam grade {0:?}")]
    UnknownGrade(String),
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("min_count must be at least 1")]
    BadMinCount,
    #[error("embedding file line {line}: expected {expected} values, found {found}")]
    EmbeddingDimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding file line {line}: {message}")]
    EmbeddingParse { line: usize, message: String },
    #[error("invalid synthetic config: {0}")]
    BadSyntheticConfig(String),
}
