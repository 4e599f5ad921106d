use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Vocabulary};
use crate::autodiff::Tensor;

/// Rows without a pretrained vector are drawn uniformly from `±EMBEDDING_INIT_RANGE`.
pub const EMBEDDING_INIT_RANGE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSource {
    Pretrained,
    RandomInit,
}

/// `|V| × dim` input-layer weights with the origin of every row.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    pub matrix: Tensor,
    pub sources: Vec<RowSource>,
}

impl EmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn pretrained_rows(&self) -> usize {
        self.sources
            .iter()
            .filter(|s| **s == RowSource::Pretrained)
            .count()
    }
}

/// `rows × dim` values drawn uniformly from `±EMBEDDING_INIT_RANGE`.
pub fn random_embedding_matrix(rows: usize, dim: usize, seed: u64) -> Tensor {
    assert!(rows > 0 && dim > 0, "embedding matrix must be non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * dim)
        .map(|_| rng.gen_range(-EMBEDDING_INIT_RANGE..=EMBEDDING_INIT_RANGE))
        .collect();
    Tensor::matrix(rows, dim, data)
}

pub fn random_embeddings(vocab: &Vocabulary, dim: usize, seed: u64) -> EmbeddingMatrix {
    EmbeddingMatrix {
        matrix: random_embedding_matrix(vocab.len(), dim, seed),
        sources: vec![RowSource::RandomInit; vocab.len()],
    }
}

/// Reads `token v1 … vd` lines (an optional word2vec `count dim` first line
/// is skipped) and copies the vectors of vocabulary tokens into a matrix
/// whose other rows are randomly initialised from `seed`.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_embeddings_str(&text, vocab, dim, seed)
}

pub(crate) fn load_embeddings_str(
    text: &str,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix, CorpusError> {
    let mut emb = random_embeddings(vocab, dim, seed);
    let mut seen_any = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if idx == 0
            && rest.len() == 1
            && token.parse::<usize>().is_ok()
            && rest[0].parse::<usize>().is_ok()
        {
            continue;
        }
        if rest.len() != dim {
            return Err(CorpusError::EmbeddingDimension {
                line: line_no,
                expected: dim,
                found: rest.len(),
            });
        }
        seen_any = true;
        if !vocab.contains(token) {
            continue;
        }
        let row = vocab.id(token);
        let target = &mut emb.matrix.data_mut()[row * dim..(row + 1) * dim];
        for (slot, field) in target.iter_mut().zip(&rest) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CorpusError::EmbeddingParse {
                    line: line_no,
                    message: format!("{field:?} is not a finite number"),
                })?;
        }
        emb.sources[row] = RowSource::Pretrained;
    }
    if !seen_any {
        log::warn!("embedding file has no vectors; every row is randomly initialised");
    }
    Ok(emb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens(["a", "b"]).unwrap()
    }

    #[test]
    fn found_rows_are_pretrained() {
        let emb = load_embeddings_str("a 1 2 3\nzzz 4 5 6\n", &vocab(), 3, 7).unwrap();
        let a = vocab().id("a");
        let b = vocab().id("b");
        assert_eq!(emb.matrix.row_slice(a), &[1.0, 2.0, 3.0]);
        assert_eq!(emb.sources[a], RowSource::Pretrained);
        assert_eq!(emb.sources[b], RowSource::RandomInit);
        assert!(emb
            .matrix
            .row_slice(b)
            .iter()
            .all(|v| v.abs() <= EMBEDDING_INIT_RANGE));
        assert_eq!(emb.pretrained_rows(), 1);
    }

    #[test]
    fn empty_file_is_all_random() {
        let emb = load_embeddings_str("", &vocab(), 4, 7).unwrap();
        assert_eq!(emb.pretrained_rows(), 0);
        assert_eq!(emb.matrix.shape(), &[4, 4]);
        assert_eq!(emb, random_embeddings(&vocab(), 4, 7));
    }

    #[test]
    fn inconsistent_dimension_rejected() {
        let err = load_embeddings_str("a 1 2 3\nb 1 2\n", &vocab(), 3, 0).unwrap_err();
        assert!(matches!(
            err,
            CorpusError::EmbeddingDimension {
                line: 2,
                expected: 3,
                found: 2
            }
        ));
    }

    #[test]
    fn word2vec_header_is_skipped() {
        let emb = load_embeddings_str("2 2\na 0.5 -0.5\nb 1 1\n", &vocab(), 2, 0).unwrap();
        assert_eq!(emb.pretrained_rows(), 2);
    }

    #[test]
    fn full_width_rows() {
        let line: String = std::iter::once("a".to_string())
            .chain((0..300).map(|i| format!("{}", i as f64 / 1000.0)))
            .collect::<Vec<_>>()
            .join(" ");
        let emb = load_embeddings_str(&line, &vocab(), 300, 1).unwrap();
        assert_eq!(emb.matrix.shape(), &[vocab().len(), 300]);
    }
}
