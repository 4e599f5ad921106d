use ged_aes::autodiff::{
    check_primitive, grad_check, relative_error, GradCheck, NodeId, PrimitiveKind, Tape, Tensor,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
    )
    .unwrap()
}

#[test]
fn every_primitive_matches_finite_differences() {
    for kind in PrimitiveKind::ALL {
        let check = check_primitive(kind, 100, 17, None, 1e-5);
        assert!(
            check.max_rel_error <= 1e-4,
            "{kind}: max relative error {}",
            check.max_rel_error
        );
    }
}

/// tanh(tanh(x·W1 + b1)·W2 + b2)·W3 against a target, squared error.
fn three_layer<'t>(
    tape: &mut Tape<'t>,
    ids: &[NodeId],
) -> Result<NodeId, ged_aes::autodiff::AutodiffError> {
    let (x, w1, b1, w2, b2, w3, target) = (ids[0], ids[1], ids[2], ids[3], ids[4], ids[5], ids[6]);
    let h = tape.matmul(x, w1)?;
    let h = tape.add(h, b1)?;
    let h = tape.tanh(h)?;
    let h2 = tape.matmul(h, w2)?;
    let h2 = tape.add(h2, b2)?;
    let h2 = tape.sigmoid(h2)?;
    let gate = tape.mul(h2, h2)?;
    let y = tape.matmul(gate, w3)?;
    tape.squared_error(y, target)
}

fn three_layer_params(seed: u64) -> Vec<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        random(&[1, 4], &mut rng),
        random(&[4, 5], &mut rng),
        random(&[1, 5], &mut rng),
        random(&[5, 3], &mut rng),
        random(&[1, 3], &mut rng),
        random(&[3, 2], &mut rng),
        random(&[1, 2], &mut rng),
    ]
}

#[test]
fn random_three_layer_composition_passes() {
    for seed in 0..20 {
        let report = grad_check(
            &three_layer_params(seed),
            three_layer,
            &GradCheck::new(1e-4),
        )
        .unwrap();
        assert!(report.passed(), "seed {seed}: {report:?}");
        assert_eq!(report.params.len(), 7);
    }
}

#[test]
fn single_matmul_layer_passes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = vec![
        random(&[1, 3], &mut rng),
        random(&[3, 2], &mut rng),
        random(&[1, 2], &mut rng),
    ];
    let report = grad_check(
        &params,
        |tape, ids| {
            let y = tape.matmul(ids[0], ids[1])?;
            tape.squared_error(y, ids[2])
        },
        &GradCheck::new(1e-4),
    )
    .unwrap();
    assert!(report.passed(), "{report:?}");
    assert!(report.suspects.is_empty());
}

#[test]
fn corrupted_tanh_gradient_is_named() {
    let opts = GradCheck::new(1e-4).with_fault(PrimitiveKind::Tanh, 1.5);
    let report = grad_check(&three_layer_params(1), three_layer, &opts).unwrap();
    assert!(!report.passed());
    assert_eq!(report.suspects, vec![PrimitiveKind::Tanh]);
}

#[test]
fn backward_is_linear_in_the_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let params = three_layer_params(rng.gen());
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = params.iter().map(|p| tape.leaf_ref(p)).collect();
        let l1 = three_layer(&mut tape, &ids).unwrap();
        let sq = tape.mul(ids[0], ids[0]).unwrap();
        let sq = tape.mean_time(&[sq, ids[0]]).unwrap();
        let zero = tape.leaf(Tensor::zeros(&[1, 4]));
        let l2 = tape.squared_error(sq, zero).unwrap();
        let s1 = tape.scale_shift(l1, a, 0.0).unwrap();
        let s2 = tape.scale_shift(l2, b, 0.0).unwrap();
        let combined = tape.add(s1, s2).unwrap();

        let g = tape.backward(combined).unwrap();
        let g1 = tape.backward(l1).unwrap();
        let g2 = tape.backward(l2).unwrap();
        for id in &ids {
            for ((c, x), y) in g
                .wrt(*id)
                .data()
                .iter()
                .zip(g1.wrt(*id).data())
                .zip(g2.wrt(*id).data())
            {
                assert!(
                    (c - (a * x + b * y)).abs() <= 1e-10,
                    "{c} vs {}",
                    a * x + b * y
                );
            }
        }
    }
}

#[test]
fn relative_error_uses_floor_near_zero() {
    assert_eq!(relative_error(0.0, 0.0), 0.0);
    assert!(relative_error(1e-12, -1e-12) < 1e-5);
    assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
}

proptest! {
    #[test]
    fn outputs_stay_finite_for_bounded_inputs(vals in proptest::collection::vec(-50.0f64..50.0, 1..12)) {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::row(vals.clone()));
        let s = tape.sigmoid(x).unwrap();
        let t = tape.tanh(x).unwrap();
        let m = tape.mul(s, t).unwrap();
        let l = tape.softmax_cross_entropy(m, vals.len() - 1).unwrap();
        let l2 = tape.softmax_cross_entropy(x, 0).unwrap();
        let total = tape.add(l, l2).unwrap();
        prop_assert!(tape.value(total).is_finite());
        let g = tape.backward(total).unwrap();
        prop_assert!(g.wrt(x).is_finite());
    }

    #[test]
    fn concat_is_lexicographic(a in proptest::collection::vec(-1.0f64..1.0, 1..6), b in proptest::collection::vec(-1.0f64..1.0, 1..6)) {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::row(a.clone()));
        let y = tape.leaf(Tensor::row(b.clone()));
        let c = tape.concat(&[x, y]).unwrap();
        let expected: Vec<f64> = a.iter().chain(b.iter()).cloned().collect();
        prop_assert_eq!(tape.value(c).data(), &expected[..]);
    }

    #[test]
    fn mean_of_constant_is_constant(c in -1e6f64..1e6, n in 1usize..40) {
        let mut tape = Tape::new();
        let steps: Vec<_> = (0..n).map(|_| tape.leaf(Tensor::scalar(c))).collect();
        let m = tape.mean_time(&steps).unwrap();
        prop_assert_eq!(tape.value(m).item(), c);
    }
}
