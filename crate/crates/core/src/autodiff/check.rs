use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AutodiffError, NodeId, Primitive, PrimitiveKind, Tape, Tensor};

/// Magnitudes below this are compared absolutely rather than relatively.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// `|a − n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Settings for a central finite-difference comparison.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub tolerance: f64,
    pub step: f64,
    /// Reverse-rule fault injected into the analytic pass, if any.
    pub fault: Option<(PrimitiveKind, f64)>,
}

impl GradCheck {
    pub fn new(tolerance: f64) -> Self {
        GradCheck {
            tolerance,
            step: 1e-5,
            fault: None,
        }
    }

    pub fn with_fault(mut self, kind: PrimitiveKind, factor: f64) -> Self {
        self.fault = Some((kind, factor));
        self
    }

    fn tape<'a>(&self) -> Tape<'a> {
        match self.fault {
            Some((kind, factor)) => Tape::with_fault(kind, factor),
            None => Tape::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    /// Position of the parameter in the checked list.
    pub index: usize,
    pub max_rel_error: f64,
    pub worst_element: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub params: Vec<ParamError>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    /// Primitives whose isolated reverse rule failed; filled only on failure.
    pub suspects: Vec<PrimitiveKind>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// Compares the tape's gradient of a scalar loss with central finite
/// differences for every element of every parameter.
///
/// `build` receives a fresh tape and the leaf ids of `params` (in order) and
/// must return the loss node. It is called once for the analytic pass and
/// twice per parameter element.
pub fn grad_check<F>(
    params: &[Tensor],
    build: F,
    opts: &GradCheck,
) -> Result<GradCheckReport, AutodiffError>
where
    F: for<'t> Fn(&mut Tape<'t>, &[NodeId]) -> Result<NodeId, AutodiffError>,
{
    let mut tape = opts.tape();
    let ids: Vec<NodeId> = params.iter().map(|p| tape.leaf_ref(p)).collect();
    let loss = build(&mut tape, &ids)?;
    let grads = tape.backward(loss)?;

    let eval = |perturbed: &[Tensor]| -> Result<f64, AutodiffError> {
        let mut t = Tape::new();
        let ids: Vec<NodeId> = perturbed.iter().map(|p| t.leaf_ref(p)).collect();
        let loss = build(&mut t, &ids)?;
        Ok(t.value(loss).item())
    };

    let mut work: Vec<Tensor> = params.to_vec();
    let mut report = Vec::with_capacity(params.len());
    let mut overall: f64 = 0.0;
    for (index, id) in ids.iter().enumerate() {
        let analytic = grads.wrt(*id).clone();
        let mut worst = (0.0, 0);
        for e in 0..params[index].len() {
            let orig = params[index].data()[e];
            work[index].data_mut()[e] = orig + opts.step;
            let plus = eval(&work)?;
            work[index].data_mut()[e] = orig - opts.step;
            let minus = eval(&work)?;
            work[index].data_mut()[e] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let err = relative_error(analytic.data()[e], numeric);
            if err > worst.0 {
                worst = (err, e);
            }
        }
        overall = overall.max(worst.0);
        report.push(ParamError {
            index,
            max_rel_error: worst.0,
            worst_element: worst.1,
        });
    }

    let mut suspects = Vec::new();
    if overall > opts.tolerance {
        for kind in tape.kinds_used() {
            let check = check_primitive(kind, 3, 0, opts.fault, opts.step);
            if check.max_rel_error > opts.tolerance {
                suspects.push(kind);
            }
        }
    }

    Ok(GradCheckReport {
        params: report,
        max_rel_error: overall,
        tolerance: opts.tolerance,
        suspects,
    })
}

/// Outcome of checking one primitive's reverse rule in isolation.
#[derive(Debug, Clone)]
pub struct PrimitiveCheck {
    pub kind: PrimitiveKind,
    pub trials: usize,
    pub max_rel_error: f64,
}

/// Checks the vector-Jacobian product of a single primitive against central
/// differences of `⟨seed, f(x)⟩`, over `trials` random instances with inputs
/// drawn uniformly from `[-1, 1]`.
pub fn check_primitive(
    kind: PrimitiveKind,
    trials: usize,
    seed: u64,
    fault: Option<(PrimitiveKind, f64)>,
    step: f64,
) -> PrimitiveCheck {
    let mut max_err: f64 = 0.0;
    for trial in 0..trials {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ trial as u64);
        let (primitive, inputs) = random_instance(kind, &mut rng);
        let mut tape = match fault {
            Some((k, f)) => Tape::with_fault(k, f),
            None => Tape::new(),
        };
        let ids: Vec<NodeId> = inputs.iter().map(|t| tape.leaf_ref(t)).collect();
        let out = tape
            .apply(primitive, &ids)
            .expect("random instance has valid shapes");
        let out_shape = tape.value(out).shape().to_vec();
        let seed_tensor = random_tensor(&out_shape, &mut rng);
        let grads = tape.backward_seeded(out, seed_tensor.clone());

        let project = |vals: &[Tensor]| -> f64 {
            let mut t = Tape::new();
            let ids: Vec<NodeId> = vals.iter().map(|v| t.leaf_ref(v)).collect();
            let out = t.apply(primitive, &ids).expect("valid shapes");
            t.value(out)
                .data()
                .iter()
                .zip(seed_tensor.data())
                .map(|(a, b)| a * b)
                .sum()
        };

        let mut work = inputs.clone();
        for (i, id) in ids.iter().enumerate() {
            let analytic = grads.wrt(*id);
            for e in 0..inputs[i].len() {
                let orig = inputs[i].data()[e];
                work[i].data_mut()[e] = orig + step;
                let plus = project(&work);
                work[i].data_mut()[e] = orig - step;
                let minus = project(&work);
                work[i].data_mut()[e] = orig;
                let numeric = (plus - minus) / (2.0 * step);
                max_err = max_err.max(relative_error(analytic.data()[e], numeric));
            }
        }
    }
    PrimitiveCheck {
        kind,
        trials,
        max_rel_error: max_err,
    }
}

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    Tensor::new(shape.to_vec(), data).expect("non-empty shape")
}

fn random_instance(kind: PrimitiveKind, rng: &mut ChaCha8Rng) -> (Primitive, Vec<Tensor>) {
    let mut dim = || rng.gen_range(1..=4usize);
    let (r, c, k) = (dim(), dim(), dim());
    match kind {
        PrimitiveKind::Leaf => panic!("leaves have no reverse rule"),
        PrimitiveKind::MatMul => (
            Primitive::MatMul,
            vec![random_tensor(&[r, k], rng), random_tensor(&[k, c], rng)],
        ),
        PrimitiveKind::Add | PrimitiveKind::Mul | PrimitiveKind::SquaredError => {
            let p = match kind {
                PrimitiveKind::Add => Primitive::Add,
                PrimitiveKind::Mul => Primitive::Mul,
                _ => Primitive::SquaredError,
            };
            (
                p,
                vec![random_tensor(&[r, c], rng), random_tensor(&[r, c], rng)],
            )
        }
        PrimitiveKind::Concat => {
            let n = rng.gen_range(1..=3);
            let parts = (0..n)
                .map(|_| {
                    let w = rng.gen_range(1..=4);
                    random_tensor(&[r, w], rng)
                })
                .collect();
            (Primitive::Concat, parts)
        }
        PrimitiveKind::Sigmoid => (Primitive::Sigmoid, vec![random_tensor(&[r, c], rng)]),
        PrimitiveKind::Tanh => (Primitive::Tanh, vec![random_tensor(&[r, c], rng)]),
        PrimitiveKind::MeanTime => {
            let n = rng.gen_range(1..=5);
            (
                Primitive::MeanTime,
                (0..n).map(|_| random_tensor(&[r, c], rng)).collect(),
            )
        }
        PrimitiveKind::SoftmaxCrossEntropy => {
            let width = rng.gen_range(2..=6);
            let target = rng.gen_range(0..width);
            (
                Primitive::SoftmaxCrossEntropy { target },
                vec![random_tensor(&[1, width], rng)],
            )
        }
        PrimitiveKind::ScaleShift => {
            let scale = rng.gen_range(-2.0..=2.0);
            let shift = rng.gen_range(-1.0..=1.0);
            (
                Primitive::ScaleShift { scale, shift },
                vec![random_tensor(&[r, c], rng)],
            )
        }
        PrimitiveKind::SelectRow => {
            let row = rng.gen_range(0..r);
            (
                Primitive::SelectRow { row },
                vec![random_tensor(&[r, c], rng)],
            )
        }
    }
}
