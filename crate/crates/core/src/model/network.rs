use super::{LstmNodes, LstmWeights, ModelConfig, ModelError, ModelParams, ParamNodes};
use crate::autodiff::{softmax, NodeId, Tape, Tensor};
use crate::corpus::{Essay, Label, UNK_ID};

/// One LSTM step: `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`, with all four gates
/// reading `[x; h]`.
pub fn lstm_step(
    tape: &mut Tape<'_>,
    w: &LstmNodes,
    x: NodeId,
    h: NodeId,
    c: NodeId,
) -> Result<(NodeId, NodeId), ModelError> {
    let xh = tape.concat(&[x, h])?;
    let mut gate = |weights: NodeId, bias: NodeId| -> Result<NodeId, ModelError> {
        let z = tape.matmul(xh, weights)?;
        Ok(tape.add(z, bias)?)
    };
    let zi = gate(w.w_input, w.b_input)?;
    let zf = gate(w.w_forget, w.b_forget)?;
    let zo = gate(w.w_output, w.b_output)?;
    let zg = gate(w.w_cell, w.b_cell)?;
    let i = tape.sigmoid(zi)?;
    let f = tape.sigmoid(zf)?;
    let o = tape.sigmoid(zo)?;
    let g = tape.tanh(zg)?;
    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, g)?;
    let c_next = tape.add(keep, write)?;
    let squashed = tape.tanh(c_next)?;
    let h_next = tape.mul(o, squashed)?;
    Ok((h_next, c_next))
}

/// A single LSTM step on plain vectors.
pub fn lstm_cell(
    x: &[f64],
    h: &[f64],
    c: &[f64],
    weights: &LstmWeights,
) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    let (e, hd) = (weights.input_dim(), weights.hidden_dim());
    for (what, got, want) in [
        ("input", x.len(), e),
        ("hidden", h.len(), hd),
        ("cell", c.len(), hd),
    ] {
        if got != want {
            return Err(ModelError::Dimension {
                what,
                expected: want,
                found: got,
            });
        }
    }
    let mut tape = Tape::new();
    let w = LstmNodes::register(&mut tape, weights);
    let x = tape.leaf(Tensor::row(x.to_vec()));
    let h = tape.leaf(Tensor::row(h.to_vec()));
    let c = tape.leaf(Tensor::row(c.to_vec()));
    let (h2, c2) = lstm_step(&mut tape, &w, x, h, c)?;
    Ok((
        tape.value(h2).data().to_vec(),
        tape.value(c2).data().to_vec(),
    ))
}

/// Which output heads to put on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Heads {
    pub ged: bool,
    pub lm: bool,
}

impl Heads {
    pub const ALL: Heads = Heads {
        ged: true,
        lm: true,
    };
}

/// Node handles of one essay's forward pass.
#[derive(Clone, Debug)]
pub struct Graph {
    pub hidden_fwd: Vec<NodeId>,
    pub hidden_bwd: Vec<NodeId>,
    /// Per token, `[1 × 2]`; empty when the head is off.
    pub ged_logits: Vec<NodeId>,
    /// Positions `0..n-1`, each predicting the next token.
    pub lm_fwd_logits: Vec<NodeId>,
    /// Positions `1..n`, each predicting the previous token.
    pub lm_bwd_logits: Vec<NodeId>,
    /// Pre-sigmoid essay-score activation, `[1 × 1]`.
    pub aes_activation: NodeId,
    /// Scaled essay score, `[1 × 1]`.
    pub score: NodeId,
}

fn check_ids(ids: &[usize], vocab_size: usize) -> Result<(), ModelError> {
    if ids.is_empty() {
        return Err(ModelError::EmptySequence);
    }
    if let Some(&bad) = ids.iter().find(|&&id| id >= vocab_size) {
        return Err(ModelError::TokenOutOfRange {
            id: bad,
            vocab_size,
        });
    }
    Ok(())
}

/// LM target class of a token id; ids beyond the LM cap fall back to UNK.
pub fn lm_target(id: usize, lm_classes: usize) -> usize {
    if id < lm_classes {
        id
    } else {
        UNK_ID
    }
}

/// Records the bidirectional LSTM and the requested heads on `tape`.
pub fn build_graph(
    tape: &mut Tape<'_>,
    nodes: &ParamNodes,
    config: &ModelConfig,
    ids: &[usize],
    heads: Heads,
) -> Result<Graph, ModelError> {
    let vocab_size = tape.value(nodes.embedding).rows();
    check_ids(ids, vocab_size)?;
    let n = ids.len();
    let hidden = config.hidden_dim;

    let inputs: Vec<NodeId> = ids
        .iter()
        .map(|&id| tape.select_row(nodes.embedding, id))
        .collect::<Result<_, _>>()?;

    let zero_h = tape.leaf(Tensor::zeros(&[1, hidden]));
    let zero_c = tape.leaf(Tensor::zeros(&[1, hidden]));

    let mut hidden_fwd = Vec::with_capacity(n);
    let (mut h, mut c) = (zero_h, zero_c);
    for &x in &inputs {
        (h, c) = lstm_step(tape, &nodes.lstm_fwd, x, h, c)?;
        hidden_fwd.push(h);
    }
    let mut hidden_bwd = vec![zero_h; n];
    let (mut h, mut c) = (zero_h, zero_c);
    for t in (0..n).rev() {
        (h, c) = lstm_step(tape, &nodes.lstm_bwd, inputs[t], h, c)?;
        hidden_bwd[t] = h;
    }

    let states: Vec<NodeId> = (0..n)
        .map(|t| tape.concat(&[hidden_fwd[t], hidden_bwd[t]]))
        .collect::<Result<_, _>>()?;

    let mut ged_logits = Vec::new();
    if heads.ged {
        for &s in &states {
            let z = tape.matmul(s, nodes.ged_w)?;
            ged_logits.push(tape.add(z, nodes.ged_b)?);
        }
    }

    let (mut lm_fwd_logits, mut lm_bwd_logits) = (Vec::new(), Vec::new());
    if heads.lm {
        for &h in &hidden_fwd[..n - 1] {
            let z = tape.matmul(h, nodes.lm_fwd_w)?;
            lm_fwd_logits.push(tape.add(z, nodes.lm_fwd_b)?);
        }
        for &h in &hidden_bwd[1..] {
            let z = tape.matmul(h, nodes.lm_bwd_w)?;
            lm_bwd_logits.push(tape.add(z, nodes.lm_bwd_b)?);
        }
    }

    let pooled = tape.mean_time(&states)?;
    let z = tape.matmul(pooled, nodes.aes_w)?;
    let aes_activation = tape.add(z, nodes.aes_b)?;
    let squashed = tape.sigmoid(aes_activation)?;
    let score = tape.scale_shift(
        squashed,
        config.score_max - config.score_min,
        config.score_min,
    )?;

    Ok(Graph {
        hidden_fwd,
        hidden_bwd,
        ged_logits,
        lm_fwd_logits,
        lm_bwd_logits,
        aes_activation,
        score,
    })
}

/// The three task losses and their weighted combination
/// `E = (1 − γ_aes)·(E_ged + γ_lm·E_lm) + γ_aes·E_aes`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub e_ged: f64,
    pub e_lm: f64,
    pub e_aes: f64,
    pub gamma_lm: f64,
    pub gamma_aes: f64,
    pub e: f64,
}

impl LossBreakdown {
    pub fn combine(e_ged: f64, e_lm: f64, e_aes: f64, gamma_lm: f64, gamma_aes: f64) -> Self {
        // Fused so both endpoints are exact: γ_aes = 0 gives the inner sum
        // untouched and γ_aes = 1 gives E_aes.
        let e = gamma_aes.mul_add(e_aes, (1.0 - gamma_aes) * (e_ged + gamma_lm * e_lm));
        LossBreakdown {
            e_ged,
            e_lm,
            e_aes,
            gamma_lm,
            gamma_aes,
            e,
        }
    }
}

/// Loss nodes recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LossNodes {
    pub ged: Option<NodeId>,
    pub lm: Option<NodeId>,
    pub aes: NodeId,
    pub total: NodeId,
}

impl LossNodes {
    /// Loss terms read off the tape; `e` is recombined from them and agrees
    /// with the `total` node up to rounding.
    pub fn breakdown(&self, tape: &Tape<'_>, config: &ModelConfig) -> LossBreakdown {
        let get = |n: Option<NodeId>| n.map_or(0.0, |id| tape.value(id).item());
        LossBreakdown::combine(
            get(self.ged),
            get(self.lm),
            tape.value(self.aes).item(),
            config.gamma_lm,
            config.gamma_aes,
        )
    }
}

/// Records the combined loss of `graph` against an essay's gold annotations.
///
/// A missing head contributes zero to its term, which is only correct when
/// that term carries zero weight.
pub fn build_loss(
    tape: &mut Tape<'_>,
    graph: &Graph,
    config: &ModelConfig,
    ids: &[usize],
    labels: &[Label],
    gold_score: f64,
) -> Result<LossNodes, ModelError> {
    let n = ids.len();
    if labels.len() != n {
        return Err(ModelError::LengthMismatch {
            tokens: n,
            labels: labels.len(),
        });
    }
    let lm_classes = graph
        .lm_fwd_logits
        .first()
        .or(graph.lm_bwd_logits.first())
        .map_or(1, |&z| tape.value(z).cols());

    let ged = if graph.ged_logits.is_empty() {
        None
    } else {
        let terms: Vec<NodeId> = graph
            .ged_logits
            .iter()
            .zip(labels)
            .map(|(&z, l)| tape.softmax_cross_entropy(z, l.index()))
            .collect::<Result<_, _>>()?;
        Some(tape.mean_time(&terms)?)
    };

    let lm = if graph.lm_fwd_logits.is_empty() && graph.lm_bwd_logits.is_empty() {
        None
    } else {
        let fwd: Vec<NodeId> = graph
            .lm_fwd_logits
            .iter()
            .enumerate()
            .map(|(t, &z)| tape.softmax_cross_entropy(z, lm_target(ids[t + 1], lm_classes)))
            .collect::<Result<_, _>>()?;
        let bwd: Vec<NodeId> = graph
            .lm_bwd_logits
            .iter()
            .enumerate()
            .map(|(k, &z)| tape.softmax_cross_entropy(z, lm_target(ids[k], lm_classes)))
            .collect::<Result<_, _>>()?;
        let fwd = tape.mean_time(&fwd)?;
        let bwd = tape.mean_time(&bwd)?;
        let both = tape.mean_time(&[fwd, bwd])?;
        Some(match config.lm_combine {
            super::LmCombine::Mean => both,
            super::LmCombine::Sum => tape.scale_shift(both, 2.0, 0.0)?,
        })
    };

    let gold = tape.leaf(Tensor::matrix(1, 1, vec![gold_score]));
    let aes = tape.squared_error(graph.score, gold)?;

    let zero = || Tensor::scalar(0.0);
    let ged_node = match ged {
        Some(id) => id,
        None => tape.leaf(zero()),
    };
    let lm_node = match lm {
        Some(id) => id,
        None => tape.leaf(zero()),
    };
    let lm_scaled = tape.scale_shift(lm_node, config.gamma_lm, 0.0)?;
    let inner = tape.add(ged_node, lm_scaled)?;
    let left = tape.scale_shift(inner, 1.0 - config.gamma_aes, 0.0)?;
    let right = tape.scale_shift(aes, config.gamma_aes, 0.0)?;
    let total = tape.add(left, right)?;
    Ok(LossNodes {
        ged,
        lm,
        aes,
        total,
    })
}

/// Everything the network emits for one essay.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutputs {
    pub token_ids: Vec<usize>,
    pub ged_logits: Vec<[f64; 2]>,
    /// Per token, `[P(correct), P(incorrect)]`.
    pub ged_probs: Vec<[f64; 2]>,
    pub lm_fwd_logits: Vec<Vec<f64>>,
    pub lm_bwd_logits: Vec<Vec<f64>>,
    pub predicted_score: f64,
}

fn run(
    params: &ModelParams,
    config: &ModelConfig,
    ids: &[usize],
    heads: Heads,
) -> Result<ModelOutputs, ModelError> {
    let mut tape = Tape::new();
    let nodes = ParamNodes::register(&mut tape, params);
    let graph = build_graph(&mut tape, &nodes, config, ids, heads)?;
    let ged_logits: Vec<[f64; 2]> = graph
        .ged_logits
        .iter()
        .map(|&z| {
            let v = tape.value(z).data();
            [v[0], v[1]]
        })
        .collect();
    let ged_probs = ged_logits
        .iter()
        .map(|z| {
            let p = softmax(z);
            [p[0], p[1]]
        })
        .collect();
    let rows = |nodes: &[NodeId]| {
        nodes
            .iter()
            .map(|&z| tape.value(z).data().to_vec())
            .collect()
    };
    Ok(ModelOutputs {
        token_ids: ids.to_vec(),
        ged_logits,
        ged_probs,
        lm_fwd_logits: rows(&graph.lm_fwd_logits),
        lm_bwd_logits: rows(&graph.lm_bwd_logits),
        predicted_score: tape.value(graph.score).item(),
    })
}

/// Full forward pass, including the language-model heads.
pub fn forward(
    params: &ModelParams,
    config: &ModelConfig,
    ids: &[usize],
) -> Result<ModelOutputs, ModelError> {
    run(params, config, ids, Heads::ALL)
}

/// Forward pass without the language-model heads (their logits stay empty).
pub fn predict(
    params: &ModelParams,
    config: &ModelConfig,
    ids: &[usize],
) -> Result<ModelOutputs, ModelError> {
    run(
        params,
        config,
        ids,
        Heads {
            ged: true,
            lm: false,
        },
    )
}

fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - logits[target]
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut m, mut k) = (0.0, 0.0);
    for v in values {
        k += 1.0;
        m += (v - m) / k;
    }
    m
}

/// Loss terms of `outputs` (from [`forward`]) against `essay`.
pub fn compute_loss(
    outputs: &ModelOutputs,
    essay: &Essay,
    config: &ModelConfig,
) -> Result<LossBreakdown, ModelError> {
    let n = outputs.ged_logits.len();
    if essay.len() != n || outputs.token_ids.len() != n {
        return Err(ModelError::LengthMismatch {
            tokens: outputs.token_ids.len(),
            labels: essay.len(),
        });
    }
    let e_ged = mean(
        outputs
            .ged_logits
            .iter()
            .zip(&essay.labels)
            .map(|(z, l)| cross_entropy(z, l.index())),
    );
    let ids = &outputs.token_ids;
    let e_lm = if n < 2 || outputs.lm_fwd_logits.is_empty() {
        0.0
    } else {
        let classes = outputs.lm_fwd_logits[0].len();
        let fwd = mean(
            outputs
                .lm_fwd_logits
                .iter()
                .enumerate()
                .map(|(t, z)| cross_entropy(z, lm_target(ids[t + 1], classes))),
        );
        let bwd = mean(
            outputs
                .lm_bwd_logits
                .iter()
                .enumerate()
                .map(|(k, z)| cross_entropy(z, lm_target(ids[k], classes))),
        );
        let both = mean([fwd, bwd].into_iter());
        match config.lm_combine {
            super::LmCombine::Mean => both,
            super::LmCombine::Sum => 2.0 * both,
        }
    };
    let diff = outputs.predicted_score - essay.gold_score as f64;
    Ok(LossBreakdown::combine(
        e_ged,
        e_lm,
        diff * diff,
        config.gamma_lm,
        config.gamma_aes,
    ))
}

/// `Incorrect` wherever `P(incorrect) ≥ threshold`.
pub fn predict_labels(ged_probs: &[[f64; 2]], threshold: f64) -> Vec<Label> {
    ged_probs
        .iter()
        .map(|p| {
            if p[1] >= threshold {
                Label::Incorrect
            } else {
                Label::Correct
            }
        })
        .collect()
}

/// Adds the gradient of one essay's combined loss to `grads` (in
/// [`super::PARAM_NAMES`] order) and returns its loss terms.
///
/// Heads whose term has zero weight are left off the tape.
pub fn accumulate_gradients(
    params: &ModelParams,
    config: &ModelConfig,
    ids: &[usize],
    essay: &Essay,
    grads: &mut [Tensor],
) -> Result<LossBreakdown, ModelError> {
    let mut tape = Tape::new();
    let nodes = ParamNodes::register(&mut tape, params);
    let heads = Heads {
        ged: config.gamma_aes < 1.0,
        lm: config.gamma_aes < 1.0 && config.gamma_lm > 0.0 && ids.len() > 1,
    };
    let graph = build_graph(&mut tape, &nodes, config, ids, heads)?;
    let loss = build_loss(
        &mut tape,
        &graph,
        config,
        ids,
        &essay.labels,
        essay.gold_score as f64,
    )?;
    let g = tape.backward(loss.total)?;
    for (acc, id) in grads.iter_mut().zip(nodes.ids()) {
        acc.axpy(1.0, g.wrt(*id));
    }
    Ok(loss.breakdown(&tape, config))
}
