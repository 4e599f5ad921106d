use std::borrow::Cow;
use std::collections::BTreeSet;
use std::fmt;

use super::{AutodiffError, Tensor};

/// Index of a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Name of the operation that produced a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimitiveKind {
    Leaf,
    MatMul,
    Add,
    Mul,
    Concat,
    Sigmoid,
    Tanh,
    MeanTime,
    SoftmaxCrossEntropy,
    SquaredError,
    ScaleShift,
    SelectRow,
}

impl PrimitiveKind {
    /// Every differentiable primitive (excludes `Leaf`).
    pub const ALL: [PrimitiveKind; 11] = [
        PrimitiveKind::MatMul,
        PrimitiveKind::Add,
        PrimitiveKind::Mul,
        PrimitiveKind::Concat,
        PrimitiveKind::Sigmoid,
        PrimitiveKind::Tanh,
        PrimitiveKind::MeanTime,
        PrimitiveKind::SoftmaxCrossEntropy,
        PrimitiveKind::SquaredError,
        PrimitiveKind::ScaleShift,
        PrimitiveKind::SelectRow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::Leaf => "leaf",
            PrimitiveKind::MatMul => "matmul",
            PrimitiveKind::Add => "add",
            PrimitiveKind::Mul => "mul",
            PrimitiveKind::Concat => "concat",
            PrimitiveKind::Sigmoid => "sigmoid",
            PrimitiveKind::Tanh => "tanh",
            PrimitiveKind::MeanTime => "mean_time",
            PrimitiveKind::SoftmaxCrossEntropy => "softmax_cross_entropy",
            PrimitiveKind::SquaredError => "squared_error",
            PrimitiveKind::ScaleShift => "scale_shift",
            PrimitiveKind::SelectRow => "select_row",
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A primitive together with its non-differentiable attributes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    /// `[m × k] · [k × n] → [m × n]`
    MatMul,
    Add,
    Mul,
    /// Concatenation along the last axis; leading axes must agree.
    Concat,
    Sigmoid,
    Tanh,
    /// Mean over the input list (the time axis); all inputs share one shape.
    MeanTime,
    /// `-log softmax(logits)[target]`, shape `[1]`.
    SoftmaxCrossEntropy {
        target: usize,
    },
    /// `Σ (prediction − target)²`, shape `[1]`.
    SquaredError,
    /// `scale · x + shift`, elementwise.
    ScaleShift {
        scale: f64,
        shift: f64,
    },
    /// Row `row` of a 2-D matrix as a `[1 × cols]` tensor.
    SelectRow {
        row: usize,
    },
}

impl Primitive {
    pub fn kind(&self) -> PrimitiveKind {
        match self {
            Primitive::MatMul => PrimitiveKind::MatMul,
            Primitive::Add => PrimitiveKind::Add,
            Primitive::Mul => PrimitiveKind::Mul,
            Primitive::Concat => PrimitiveKind::Concat,
            Primitive::Sigmoid => PrimitiveKind::Sigmoid,
            Primitive::Tanh => PrimitiveKind::Tanh,
            Primitive::MeanTime => PrimitiveKind::MeanTime,
            Primitive::SoftmaxCrossEntropy { .. } => PrimitiveKind::SoftmaxCrossEntropy,
            Primitive::SquaredError => PrimitiveKind::SquaredError,
            Primitive::ScaleShift { .. } => PrimitiveKind::ScaleShift,
            Primitive::SelectRow { .. } => PrimitiveKind::SelectRow,
        }
    }
}

/// Sigmoid outputs are kept this far away from 0 and 1.
pub const SIGMOID_MARGIN: f64 = 1e-15;

pub fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(SIGMOID_MARGIN, 1.0 - SIGMOID_MARGIN)
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Concat(Vec<NodeId>),
    Sigmoid(NodeId),
    Tanh(NodeId),
    MeanTime(Vec<NodeId>),
    SoftmaxCrossEntropy {
        logits: NodeId,
        target: usize,
        probs: Vec<f64>,
    },
    SquaredError(NodeId, NodeId),
    ScaleShift {
        input: NodeId,
        scale: f64,
    },
    SelectRow {
        matrix: NodeId,
        row: usize,
    },
}

impl Op {
    fn kind(&self) -> PrimitiveKind {
        match self {
            Op::Leaf => PrimitiveKind::Leaf,
            Op::MatMul(..) => PrimitiveKind::MatMul,
            Op::Add(..) => PrimitiveKind::Add,
            Op::Mul(..) => PrimitiveKind::Mul,
            Op::Concat(_) => PrimitiveKind::Concat,
            Op::Sigmoid(_) => PrimitiveKind::Sigmoid,
            Op::Tanh(_) => PrimitiveKind::Tanh,
            Op::MeanTime(_) => PrimitiveKind::MeanTime,
            Op::SoftmaxCrossEntropy { .. } => PrimitiveKind::SoftmaxCrossEntropy,
            Op::SquaredError(..) => PrimitiveKind::SquaredError,
            Op::ScaleShift { .. } => PrimitiveKind::ScaleShift,
            Op::SelectRow { .. } => PrimitiveKind::SelectRow,
        }
    }
}

struct Node<'a> {
    op: Op,
    value: Cow<'a, Tensor>,
}

/// Define-by-run record of a computation.
///
/// Nodes are appended in evaluation order, so every node's inputs precede
/// it. Leaves may borrow their values (model parameters) for the lifetime
/// `'a` instead of copying them onto the tape.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    fault: Option<(PrimitiveKind, f64)>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            fault: None,
        }
    }

    /// A tape whose reverse rule for `kind` is scaled by `factor`.
    ///
    /// Only meant for negative controls of the gradient checker.
    pub fn with_fault(kind: PrimitiveKind, factor: f64) -> Self {
        Tape {
            nodes: Vec::new(),
            fault: Some((kind, factor)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an owned input tensor.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, Cow::Owned(value))
    }

    /// Records a borrowed input tensor without copying it.
    pub fn leaf_ref(&mut self, value: &'a Tensor) -> NodeId {
        self.push(Op::Leaf, Cow::Borrowed(value))
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn kind(&self, id: NodeId) -> PrimitiveKind {
        self.nodes[id.0].op.kind()
    }

    /// The set of primitive kinds recorded so far.
    pub fn kinds_used(&self) -> BTreeSet<PrimitiveKind> {
        self.nodes
            .iter()
            .map(|n| n.op.kind())
            .filter(|k| *k != PrimitiveKind::Leaf)
            .collect()
    }

    fn push(&mut self, op: Op, value: Cow<'a, Tensor>) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn check_id(&self, id: NodeId) -> Result<(), AutodiffError> {
        if id.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(AutodiffError::UnknownNode(id.0))
        }
    }

    /// Applies `primitive` to `inputs` and appends the result.
    pub fn apply(
        &mut self,
        primitive: Primitive,
        inputs: &[NodeId],
    ) -> Result<NodeId, AutodiffError> {
        for &id in inputs {
            self.check_id(id)?;
        }
        let kind = primitive.kind();
        let arity = |n: usize| {
            if inputs.len() == n {
                Ok(())
            } else {
                Err(AutodiffError::Arity {
                    primitive: kind,
                    expected: n,
                    got: inputs.len(),
                })
            }
        };
        let mismatch = |a: &Tensor, b: &Tensor| AutodiffError::ShapeMismatch {
            primitive: kind,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        };

        match primitive {
            Primitive::MatMul => {
                arity(2)?;
                let (a, b) = (self.value(inputs[0]), self.value(inputs[1]));
                if a.shape().len() != 2 || b.shape().len() != 2 || a.shape()[1] != b.shape()[0] {
                    return Err(mismatch(a, b));
                }
                let out = matmul(a, b);
                Ok(self.push(Op::MatMul(inputs[0], inputs[1]), Cow::Owned(out)))
            }
            Primitive::Add | Primitive::Mul => {
                arity(2)?;
                let (a, b) = (self.value(inputs[0]), self.value(inputs[1]));
                if a.shape() != b.shape() {
                    return Err(mismatch(a, b));
                }
                let data = if primitive == Primitive::Add {
                    a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect()
                } else {
                    a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect()
                };
                let out = Tensor::shaped_like(a, data);
                let op = if primitive == Primitive::Add {
                    Op::Add(inputs[0], inputs[1])
                } else {
                    Op::Mul(inputs[0], inputs[1])
                };
                Ok(self.push(op, Cow::Owned(out)))
            }
            Primitive::Concat => {
                if inputs.is_empty() {
                    return Err(AutodiffError::Arity {
                        primitive: kind,
                        expected: 1,
                        got: 0,
                    });
                }
                let first = self.value(inputs[0]);
                let lead = &first.shape()[..first.shape().len() - 1];
                let mut total = 0;
                for &id in inputs {
                    let t = self.value(id);
                    if &t.shape()[..t.shape().len() - 1] != lead {
                        return Err(mismatch(first, t));
                    }
                    total += t.cols();
                }
                let outer: usize = lead.iter().product();
                let mut data = Vec::with_capacity(outer * total);
                for o in 0..outer {
                    for &id in inputs {
                        data.extend_from_slice(self.value(id).row_slice(o));
                    }
                }
                let mut shape = lead.to_vec();
                shape.push(total);
                let out = Tensor::new(shape, data)?;
                Ok(self.push(Op::Concat(inputs.to_vec()), Cow::Owned(out)))
            }
            Primitive::Sigmoid => {
                arity(1)?;
                let out = self.value(inputs[0]).map(sigmoid);
                Ok(self.push(Op::Sigmoid(inputs[0]), Cow::Owned(out)))
            }
            Primitive::Tanh => {
                arity(1)?;
                let out = self.value(inputs[0]).map(f64::tanh);
                Ok(self.push(Op::Tanh(inputs[0]), Cow::Owned(out)))
            }
            Primitive::MeanTime => {
                if inputs.is_empty() {
                    return Err(AutodiffError::Arity {
                        primitive: kind,
                        expected: 1,
                        got: 0,
                    });
                }
                let first = self.value(inputs[0]);
                // Running mean: a constant sequence stays exactly constant.
                let mut mean = first.clone();
                for (k, &id) in inputs.iter().enumerate().skip(1) {
                    let t = self.value(id);
                    if t.shape() != first.shape() {
                        return Err(mismatch(first, t));
                    }
                    let n = (k + 1) as f64;
                    for (m, x) in mean.data_mut().iter_mut().zip(t.data()) {
                        *m += (x - *m) / n;
                    }
                }
                Ok(self.push(Op::MeanTime(inputs.to_vec()), Cow::Owned(mean)))
            }
            Primitive::SoftmaxCrossEntropy { target } => {
                arity(1)?;
                let logits = self.value(inputs[0]);
                if target >= logits.len() {
                    return Err(AutodiffError::IndexOutOfRange {
                        primitive: kind,
                        index: target,
                        len: logits.len(),
                    });
                }
                let probs = softmax(logits.data());
                let max = logits
                    .data()
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                let lse = max
                    + logits
                        .data()
                        .iter()
                        .map(|v| (v - max).exp())
                        .sum::<f64>()
                        .ln();
                let loss = lse - logits.data()[target];
                Ok(self.push(
                    Op::SoftmaxCrossEntropy {
                        logits: inputs[0],
                        target,
                        probs,
                    },
                    Cow::Owned(Tensor::scalar(loss)),
                ))
            }
            Primitive::SquaredError => {
                arity(2)?;
                let (p, t) = (self.value(inputs[0]), self.value(inputs[1]));
                if p.shape() != t.shape() {
                    return Err(mismatch(p, t));
                }
                let loss = p
                    .data()
                    .iter()
                    .zip(t.data())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                Ok(self.push(
                    Op::SquaredError(inputs[0], inputs[1]),
                    Cow::Owned(Tensor::scalar(loss)),
                ))
            }
            Primitive::ScaleShift { scale, shift } => {
                arity(1)?;
                let out = self.value(inputs[0]).map(|v| scale * v + shift);
                Ok(self.push(
                    Op::ScaleShift {
                        input: inputs[0],
                        scale,
                    },
                    Cow::Owned(out),
                ))
            }
            Primitive::SelectRow { row } => {
                arity(1)?;
                let m = self.value(inputs[0]);
                if m.shape().len() != 2 {
                    return Err(AutodiffError::ShapeMismatch {
                        primitive: kind,
                        left: m.shape().to_vec(),
                        right: vec![row],
                    });
                }
                if row >= m.rows() {
                    return Err(AutodiffError::IndexOutOfRange {
                        primitive: kind,
                        index: row,
                        len: m.rows(),
                    });
                }
                let out = Tensor::row(m.row_slice(row).to_vec());
                Ok(self.push(
                    Op::SelectRow {
                        matrix: inputs[0],
                        row,
                    },
                    Cow::Owned(out),
                ))
            }
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::MatMul, &[a, b])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Add, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Mul, &[a, b])
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Concat, parts)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Sigmoid, &[x])
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::Tanh, &[x])
    }

    pub fn mean_time(&mut self, steps: &[NodeId]) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::MeanTime, steps)
    }

    pub fn softmax_cross_entropy(
        &mut self,
        logits: NodeId,
        target: usize,
    ) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::SoftmaxCrossEntropy { target }, &[logits])
    }

    pub fn squared_error(
        &mut self,
        prediction: NodeId,
        target: NodeId,
    ) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::SquaredError, &[prediction, target])
    }

    pub fn scale_shift(
        &mut self,
        x: NodeId,
        scale: f64,
        shift: f64,
    ) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::ScaleShift { scale, shift }, &[x])
    }

    pub fn select_row(&mut self, matrix: NodeId, row: usize) -> Result<NodeId, AutodiffError> {
        self.apply(Primitive::SelectRow { row }, &[matrix])
    }

    /// Softmax probabilities cached by a cross-entropy node.
    pub fn softmax_probs(&self, id: NodeId) -> Option<&[f64]> {
        match &self.nodes[id.0].op {
            Op::SoftmaxCrossEntropy { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Reverse pass from a scalar loss node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, AutodiffError> {
        self.check_id(loss)?;
        let value = self.value(loss);
        if value.len() != 1 {
            return Err(AutodiffError::NonScalarLoss(value.shape().to_vec()));
        }
        Ok(self.backward_seeded(loss, Tensor::filled(value.shape(), 1.0)))
    }

    /// Vector-Jacobian product of `root` with upstream gradient `seed`.
    pub(crate) fn backward_seeded(&self, root: NodeId, seed: Tensor) -> Gradients {
        debug_assert_eq!(seed.shape(), self.value(root).shape());
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(seed);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match self.fault {
                Some((kind, factor)) if kind == node.op.kind() && kind != PrimitiveKind::Leaf => {
                    let scaled = g.map(|v| v * factor);
                    self.reverse_rule(node, &scaled, &mut grads);
                }
                _ => self.reverse_rule(node, &g, &mut grads),
            }
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        for (slot, node) in grads.iter_mut().zip(&self.nodes) {
            if slot.is_none() && matches!(node.op, Op::Leaf) {
                *slot = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Gradients { grads }
    }

    fn reverse_rule(&self, node: &Node<'a>, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                {
                    let da = slot(grads, *a, av);
                    for i in 0..m {
                        let grow = &gd[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bv.data()[p * n..(p + 1) * n];
                            da[i * k + p] += dot(grow, brow);
                        }
                    }
                }
                let db = slot(grads, *b, bv);
                for i in 0..m {
                    let grow = &gd[i * n..(i + 1) * n];
                    for p in 0..k {
                        let aval = av.data()[i * k + p];
                        if aval == 0.0 {
                            continue;
                        }
                        for (d, gv) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                            *d += aval * gv;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for id in [a, b] {
                    let d = slot(grads, *id, self.value(*id));
                    for (x, gv) in d.iter_mut().zip(gd) {
                        *x += gv;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                {
                    let da = slot(grads, *a, av);
                    for ((x, gv), bvv) in da.iter_mut().zip(gd).zip(bv.data()) {
                        *x += gv * bvv;
                    }
                }
                let db = slot(grads, *b, bv);
                for ((x, gv), avv) in db.iter_mut().zip(gd).zip(av.data()) {
                    *x += gv * avv;
                }
            }
            Op::Concat(parts) => {
                let total = node.value.cols();
                let outer = node.value.len() / total;
                let mut offset = 0;
                for &id in parts {
                    let v = self.value(id);
                    let w = v.cols();
                    let d = slot(grads, id, v);
                    for o in 0..outer {
                        let src = &gd[o * total + offset..o * total + offset + w];
                        for (x, gv) in d[o * w..(o + 1) * w].iter_mut().zip(src) {
                            *x += gv;
                        }
                    }
                    offset += w;
                }
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                let d = slot(grads, *x, self.value(*x));
                for ((dx, gv), yv) in d.iter_mut().zip(gd).zip(y) {
                    *dx += gv * yv * (1.0 - yv);
                }
            }
            Op::Tanh(x) => {
                let y = node.value.data();
                let d = slot(grads, *x, self.value(*x));
                for ((dx, gv), yv) in d.iter_mut().zip(gd).zip(y) {
                    *dx += gv * (1.0 - yv * yv);
                }
            }
            Op::MeanTime(steps) => {
                let inv = 1.0 / steps.len() as f64;
                for &id in steps {
                    let d = slot(grads, id, self.value(id));
                    for (x, gv) in d.iter_mut().zip(gd) {
                        *x += gv * inv;
                    }
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                target,
                probs,
            } => {
                let g0 = gd[0];
                let d = slot(grads, *logits, self.value(*logits));
                for (j, (x, p)) in d.iter_mut().zip(probs).enumerate() {
                    let indicator = if j == *target { 1.0 } else { 0.0 };
                    *x += g0 * (p - indicator);
                }
            }
            Op::SquaredError(p, t) => {
                let g0 = gd[0];
                let (pv, tv) = (self.value(*p), self.value(*t));
                let diff: Vec<f64> = pv
                    .data()
                    .iter()
                    .zip(tv.data())
                    .map(|(a, b)| 2.0 * g0 * (a - b))
                    .collect();
                {
                    let dp = slot(grads, *p, pv);
                    for (x, df) in dp.iter_mut().zip(&diff) {
                        *x += df;
                    }
                }
                let dt = slot(grads, *t, tv);
                for (x, df) in dt.iter_mut().zip(&diff) {
                    *x -= df;
                }
            }
            Op::ScaleShift { input, scale } => {
                let d = slot(grads, *input, self.value(*input));
                for (x, gv) in d.iter_mut().zip(gd) {
                    *x += scale * gv;
                }
            }
            Op::SelectRow { matrix, row } => {
                let mv = self.value(*matrix);
                let cols = mv.cols();
                let d = slot(grads, *matrix, mv);
                for (x, gv) in d[row * cols..(row + 1) * cols].iter_mut().zip(gd) {
                    *x += gv;
                }
            }
        }
    }
}

fn slot<'g>(grads: &'g mut [Option<Tensor>], id: NodeId, like: &Tensor) -> &'g mut [f64] {
    grads[id.0]
        .get_or_insert_with(|| Tensor::zeros(like.shape()))
        .data_mut()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aval = a.data()[i * k + p];
            if aval == 0.0 {
                continue;
            }
            for (o, bv) in orow.iter_mut().zip(&b.data()[p * n..(p + 1) * n]) {
                *o += aval * bv;
            }
        }
    }
    Tensor::matrix(m, n, out)
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Result of a reverse pass: one gradient per leaf.
///
/// Intermediate gradients are dropped as soon as they have been propagated.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of leaf `id` (zero when unreached); `None` for other nodes.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient of leaf `id`, panicking for non-leaf nodes.
    pub fn wrt(&self, id: NodeId) -> &Tensor {
        self.get(id).expect("node has no gradient")
    }
}
