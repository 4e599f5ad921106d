use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelError};
use crate::autodiff::{NodeId, Tape, Tensor};
use crate::corpus::{random_embedding_matrix, EmbeddingMatrix};

/// Gate weights of one LSTM direction. Each matrix maps `[x; h]` of width
/// `embedding_dim + hidden_dim` to `hidden_dim` units.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmWeights {
    pub w_input: Tensor,
    pub w_forget: Tensor,
    pub w_output: Tensor,
    pub w_cell: Tensor,
    pub b_input: Tensor,
    pub b_forget: Tensor,
    pub b_output: Tensor,
    pub b_cell: Tensor,
}

impl LstmWeights {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Tensor::zeros(&[input_dim + hidden_dim, hidden_dim]);
        let b = || Tensor::zeros(&[1, hidden_dim]);
        LstmWeights {
            w_input: w(),
            w_forget: w(),
            w_output: w(),
            w_cell: w(),
            b_input: b(),
            b_forget: b(),
            b_output: b(),
            b_cell: b(),
        }
    }

    fn glorot(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut w = Self::zeros(input_dim, hidden_dim);
        for m in [
            &mut w.w_input,
            &mut w.w_forget,
            &mut w.w_output,
            &mut w.w_cell,
        ] {
            fill_glorot(m, rng);
        }
        w
    }

    pub fn hidden_dim(&self) -> usize {
        self.b_input.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.rows() - self.hidden_dim()
    }

    fn tensors(&self) -> [&Tensor; 8] {
        [
            &self.w_input,
            &self.w_forget,
            &self.w_output,
            &self.w_cell,
            &self.b_input,
            &self.b_forget,
            &self.b_output,
            &self.b_cell,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 8] {
        [
            &mut self.w_input,
            &mut self.w_forget,
            &mut self.w_output,
            &mut self.w_cell,
            &mut self.b_input,
            &mut self.b_forget,
            &mut self.b_output,
            &mut self.b_cell,
        ]
    }
}

fn fill_glorot(m: &mut Tensor, rng: &mut ChaCha8Rng) {
    let (fan_in, fan_out) = (m.rows(), m.cols());
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in m.data_mut() {
        *v = rng.gen_range(-limit..=limit);
    }
}

/// Seed of the embedding stream, kept apart from the weight stream of `seed`.
pub fn embedding_seed(seed: u64) -> u64 {
    seed ^ 0x5EED_E4BE_DD00
}

/// Canonical parameter names, in the order of [`ModelParams::tensors`].
pub const PARAM_NAMES: [&str; 25] = [
    "embedding",
    "lstm_fwd.w_input",
    "lstm_fwd.w_forget",
    "lstm_fwd.w_output",
    "lstm_fwd.w_cell",
    "lstm_fwd.b_input",
    "lstm_fwd.b_forget",
    "lstm_fwd.b_output",
    "lstm_fwd.b_cell",
    "lstm_bwd.w_input",
    "lstm_bwd.w_forget",
    "lstm_bwd.w_output",
    "lstm_bwd.w_cell",
    "lstm_bwd.b_input",
    "lstm_bwd.b_forget",
    "lstm_bwd.b_output",
    "lstm_bwd.b_cell",
    "ged.w",
    "ged.b",
    "lm_fwd.w",
    "lm_fwd.b",
    "lm_bwd.w",
    "lm_bwd.b",
    "aes.w",
    "aes.b",
];

/// Every trainable weight of the multi-task network.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// `|V| × embedding_dim`
    pub embedding: Tensor,
    pub lstm_fwd: LstmWeights,
    pub lstm_bwd: LstmWeights,
    /// `2H × 2`, detection logits from `[h_fwd; h_bwd]`
    pub ged_w: Tensor,
    pub ged_b: Tensor,
    /// `H × |V_lm|`, next-token logits from the forward state
    pub lm_fwd_w: Tensor,
    pub lm_fwd_b: Tensor,
    /// `H × |V_lm|`, previous-token logits from the backward state
    pub lm_bwd_w: Tensor,
    pub lm_bwd_b: Tensor,
    /// `2H × 1` over the time-averaged states
    pub aes_w: Tensor,
    pub aes_b: Tensor,
}

impl ModelParams {
    /// All-zero parameters with the shapes implied by `config`.
    pub fn zeros(config: &ModelConfig, vocab_size: usize) -> Self {
        let (e, h) = (config.embedding_dim, config.hidden_dim);
        let lm = config.lm_classes(vocab_size);
        ModelParams {
            embedding: Tensor::zeros(&[vocab_size, e]),
            lstm_fwd: LstmWeights::zeros(e, h),
            lstm_bwd: LstmWeights::zeros(e, h),
            ged_w: Tensor::zeros(&[2 * h, 2]),
            ged_b: Tensor::zeros(&[1, 2]),
            lm_fwd_w: Tensor::zeros(&[h, lm]),
            lm_fwd_b: Tensor::zeros(&[1, lm]),
            lm_bwd_w: Tensor::zeros(&[h, lm]),
            lm_bwd_b: Tensor::zeros(&[1, lm]),
            aes_w: Tensor::zeros(&[2 * h, 1]),
            aes_b: Tensor::zeros(&[1, 1]),
        }
    }

    /// Seeded initialisation: Glorot-uniform matrices, zero biases, and the
    /// given embedding matrix (or a random one drawn from `seed`).
    pub fn init(
        config: &ModelConfig,
        vocab_size: usize,
        embeddings: Option<EmbeddingMatrix>,
        seed: u64,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ModelParams::zeros(config, vocab_size);
        p.embedding = match embeddings {
            Some(emb) => {
                if emb.matrix.shape() != [vocab_size, config.embedding_dim] {
                    return Err(ModelError::ShapeMismatch {
                        name: "embedding".into(),
                        expected: vec![vocab_size, config.embedding_dim],
                        found: emb.matrix.shape().to_vec(),
                    });
                }
                emb.matrix
            }
            None => random_embedding_matrix(vocab_size, config.embedding_dim, embedding_seed(seed)),
        };
        p.lstm_fwd = LstmWeights::glorot(config.embedding_dim, config.hidden_dim, &mut rng);
        p.lstm_bwd = LstmWeights::glorot(config.embedding_dim, config.hidden_dim, &mut rng);
        for m in [&mut p.ged_w, &mut p.lm_fwd_w, &mut p.lm_bwd_w, &mut p.aes_w] {
            fill_glorot(m, &mut rng);
        }
        Ok(p)
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm_fwd.hidden_dim()
    }

    pub fn lm_classes(&self) -> usize {
        self.lm_fwd_w.cols()
    }

    /// Parameters in [`PARAM_NAMES`] order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.embedding];
        out.extend(self.lstm_fwd.tensors());
        out.extend(self.lstm_bwd.tensors());
        out.extend([
            &self.ged_w,
            &self.ged_b,
            &self.lm_fwd_w,
            &self.lm_fwd_b,
            &self.lm_bwd_w,
            &self.lm_bwd_b,
            &self.aes_w,
            &self.aes_b,
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embedding];
        out.extend(self.lstm_fwd.tensors_mut());
        out.extend(self.lstm_bwd.tensors_mut());
        out.extend([
            &mut self.ged_w,
            &mut self.ged_b,
            &mut self.lm_fwd_w,
            &mut self.lm_fwd_b,
            &mut self.lm_bwd_w,
            &mut self.lm_bwd_b,
            &mut self.aes_w,
            &mut self.aes_b,
        ]);
        out
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &Tensor)> {
        PARAM_NAMES.into_iter().zip(self.tensors())
    }

    /// Rebuilds parameters from tensors in [`PARAM_NAMES`] order, checking
    /// every shape against `config`.
    pub fn from_tensors(
        config: &ModelConfig,
        vocab_size: usize,
        tensors: Vec<Tensor>,
    ) -> Result<Self, ModelError> {
        let mut p = ModelParams::zeros(config, vocab_size);
        if tensors.len() != PARAM_NAMES.len() {
            return Err(ModelError::InvalidConfig(format!(
                "expected {} parameter tensors, got {}",
                PARAM_NAMES.len(),
                tensors.len()
            )));
        }
        for ((slot, t), name) in p.tensors_mut().into_iter().zip(tensors).zip(PARAM_NAMES) {
            if slot.shape() != t.shape() {
                return Err(ModelError::ShapeMismatch {
                    name: name.to_string(),
                    expected: slot.shape().to_vec(),
                    found: t.shape().to_vec(),
                });
            }
            *slot = t;
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn element_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Zero tensors shaped like every parameter, for gradient accumulation.
    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.tensors()
            .iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect()
    }
}

/// Tape leaves of one LSTM direction.
#[derive(Clone, Copy, Debug)]
pub struct LstmNodes {
    pub w_input: NodeId,
    pub w_forget: NodeId,
    pub w_output: NodeId,
    pub w_cell: NodeId,
    pub b_input: NodeId,
    pub b_forget: NodeId,
    pub b_output: NodeId,
    pub b_cell: NodeId,
}

impl LstmNodes {
    fn from_ids(ids: &[NodeId]) -> Self {
        LstmNodes {
            w_input: ids[0],
            w_forget: ids[1],
            w_output: ids[2],
            w_cell: ids[3],
            b_input: ids[4],
            b_forget: ids[5],
            b_output: ids[6],
            b_cell: ids[7],
        }
    }

    pub fn register<'a>(tape: &mut Tape<'a>, w: &'a LstmWeights) -> Self {
        let ids: Vec<NodeId> = w.tensors().into_iter().map(|t| tape.leaf_ref(t)).collect();
        LstmNodes::from_ids(&ids)
    }
}

/// Tape leaves for every parameter.
#[derive(Clone, Debug)]
pub struct ParamNodes {
    pub embedding: NodeId,
    pub lstm_fwd: LstmNodes,
    pub lstm_bwd: LstmNodes,
    pub ged_w: NodeId,
    pub ged_b: NodeId,
    pub lm_fwd_w: NodeId,
    pub lm_fwd_b: NodeId,
    pub lm_bwd_w: NodeId,
    pub lm_bwd_b: NodeId,
    pub aes_w: NodeId,
    pub aes_b: NodeId,
    ids: Vec<NodeId>,
}

impl ParamNodes {
    /// Interprets leaf ids given in [`PARAM_NAMES`] order.
    pub fn from_ids(ids: &[NodeId]) -> Self {
        assert_eq!(ids.len(), PARAM_NAMES.len(), "one node per parameter");
        ParamNodes {
            embedding: ids[0],
            lstm_fwd: LstmNodes::from_ids(&ids[1..9]),
            lstm_bwd: LstmNodes::from_ids(&ids[9..17]),
            ged_w: ids[17],
            ged_b: ids[18],
            lm_fwd_w: ids[19],
            lm_fwd_b: ids[20],
            lm_bwd_w: ids[21],
            lm_bwd_b: ids[22],
            aes_w: ids[23],
            aes_b: ids[24],
            ids: ids.to_vec(),
        }
    }

    /// Borrows every parameter onto `tape` as a leaf.
    pub fn register<'a>(tape: &mut Tape<'a>, params: &'a ModelParams) -> Self {
        let ids: Vec<NodeId> = params
            .tensors()
            .into_iter()
            .map(|t| tape.leaf_ref(t))
            .collect();
        ParamNodes::from_ids(&ids)
    }

    /// Leaf ids in [`PARAM_NAMES`] order.
    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            embedding_dim: 4,
            hidden_dim: 3,
            lm_vocab_cap: Some(5),
            ..Default::default()
        }
    }

    #[test]
    fn shapes_follow_config() {
        let p = ModelParams::init(&cfg(), 9, None, 1).unwrap();
        assert_eq!(p.embedding.shape(), &[9, 4]);
        assert_eq!(p.lstm_fwd.w_input.shape(), &[7, 3]);
        assert_eq!(p.ged_w.shape(), &[6, 2]);
        assert_eq!(p.lm_fwd_w.shape(), &[3, 5]);
        assert_eq!(p.aes_w.shape(), &[6, 1]);
        assert_eq!(p.tensors().len(), PARAM_NAMES.len());
        assert!(p.is_finite());
    }

    #[test]
    fn init_is_seeded_with_zero_biases() {
        let a = ModelParams::init(&cfg(), 9, None, 1).unwrap();
        let b = ModelParams::init(&cfg(), 9, None, 1).unwrap();
        let c = ModelParams::init(&cfg(), 9, None, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.lstm_fwd.b_forget.data().iter().all(|v| *v == 0.0));
        assert!(a.aes_b.data().iter().all(|v| *v == 0.0));
        let limit = (6.0 / 10.0f64).sqrt();
        assert!(a.lstm_fwd.w_cell.data().iter().all(|v| v.abs() <= limit));
        assert!(a.embedding.data().iter().all(|v| v.abs() <= 0.05));
    }

    #[test]
    fn from_tensors_checks_shapes() {
        let p = ModelParams::init(&cfg(), 9, None, 1).unwrap();
        let tensors: Vec<Tensor> = p.tensors().into_iter().cloned().collect();
        assert_eq!(
            ModelParams::from_tensors(&cfg(), 9, tensors.clone()).unwrap(),
            p
        );
        let mut bad = tensors;
        bad[3] = Tensor::zeros(&[2, 2]);
        assert!(ModelParams::from_tensors(&cfg(), 9, bad).is_err());
    }
}
