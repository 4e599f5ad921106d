use ged_aes::autodiff::Tensor;
use ged_aes::corpus::{build_vocabulary, generate_synthetic, Essay, SyntheticConfig, Vocabulary};
use ged_aes::model::{compute_loss, forward, ModelConfig, ModelParams};
use ged_aes::training::{
    default_grid, format_sweep, parse_sweep, train, validate_sweep, AdadeltaState, DevEvaluator,
    DevMetrics, EarlyStopping, Selection, StopReason, SweepRow, SweepSummary, TrainConfig,
    TrainError, Trainer,
};

#[test]
fn adadelta_first_step_oracle() {
    let mut p = Tensor::scalar(0.0);
    let mut st = AdadeltaState::for_shapes([vec![1]]);
    st.update(&mut [&mut p], &[Tensor::scalar(1.0)]).unwrap();
    let expected = -(1e-6f64).sqrt() / (0.05f64 + 1e-6).sqrt();
    assert!((p.item() - expected).abs() < 1e-15);
    assert!((p.item() + 4.472e-3).abs() < 1e-6);
}

#[test]
fn adadelta_zero_gradient_decays_accumulators() {
    let mut p = Tensor::row(vec![0.3, -0.7]);
    let mut st = AdadeltaState::for_shapes([vec![1, 2]]);
    st.update(&mut [&mut p], &[Tensor::row(vec![1.0, -2.0])])
        .unwrap();
    let (before, ag, au) = (p.clone(), st.acc_grad[0].clone(), st.acc_update[0].clone());
    st.update(&mut [&mut p], &[Tensor::zeros(&[1, 2])]).unwrap();
    assert_eq!(p, before);
    for (a, b) in st.acc_grad[0].data().iter().zip(ag.data()) {
        assert_eq!(*a, 0.95 * b);
    }
    for (a, b) in st.acc_update[0].data().iter().zip(au.data()) {
        assert_eq!(*a, 0.95 * b);
    }
}

#[test]
fn adadelta_moves_against_the_gradient() {
    let g = [0.5, -3.0, 1e-4, -1e-7, 0.0];
    let mut p = Tensor::zeros(&[1, 5]);
    let mut st = AdadeltaState::for_shapes([vec![1, 5]]);
    for _ in 0..3 {
        let before = p.clone();
        st.update(&mut [&mut p], &[Tensor::row(g.to_vec())])
            .unwrap();
        for ((after, b), gi) in p.data().iter().zip(before.data()).zip(g) {
            let delta = after - b;
            if gi != 0.0 {
                assert_eq!(delta.signum(), -gi.signum());
            } else {
                assert_eq!(delta, 0.0);
            }
        }
    }
}

#[test]
fn adadelta_rejects_non_finite_gradient() {
    let mut p = Tensor::scalar(1.0);
    let mut st = AdadeltaState::for_shapes([vec![1]]);
    let err = st
        .update(&mut [&mut p], &[Tensor::scalar(f64::NAN)])
        .unwrap_err();
    assert!(matches!(err, TrainError::NonFiniteGradient(_)));
    assert_eq!(p.item(), 1.0);
    assert_eq!(st.acc_grad[0].item(), 0.0);
}

#[test]
fn early_stopping_counts_strict_improvements() {
    let mut s = EarlyStopping::new(3);
    assert!(s.observe(1, 0.5));
    assert!(!s.observe(2, 0.5));
    assert!(s.observe(3, 0.6));
    assert!(!s.observe(4, 0.1));
    assert!(!s.observe(5, 0.6));
    assert!(!s.should_stop());
    assert!(!s.observe(6, 0.2));
    assert!(s.should_stop());
    assert_eq!(s.best_epoch(), 3);
}

fn tiny_corpus(train: usize, max_len: usize, seed: u64) -> (Vec<Essay>, Vec<Essay>, Vocabulary) {
    let syn = generate_synthetic(&SyntheticConfig {
        vocab_size: 30,
        train_essays: train,
        dev_essays: 6,
        test_essays: 1,
        min_len: 5,
        max_len,
        seed,
        ..Default::default()
    })
    .unwrap();
    let vocab = build_vocabulary(&syn.train, 1).unwrap();
    (syn.train, syn.dev, vocab)
}

fn tiny_model() -> ModelConfig {
    ModelConfig {
        embedding_dim: 8,
        hidden_dim: 8,
        gamma_aes: 0.5,
        ..Default::default()
    }
}

/// Replays a fixed metric sequence and records the parameters it saw.
struct Scripted {
    values: Vec<f64>,
    seen: Vec<ModelParams>,
}

impl DevEvaluator for Scripted {
    fn evaluate(&mut self, params: &ModelParams, epoch: usize) -> Result<DevMetrics, TrainError> {
        self.seen.push(params.clone());
        let v = self.values[(epoch - 1).min(self.values.len() - 1)];
        Ok(DevMetrics {
            f_half: v,
            qwk: Some(v),
            spearman: None,
        })
    }
}

#[test]
fn plateau_after_three_epochs_stops_at_ten() {
    let (essays, _, vocab) = tiny_corpus(6, 8, 3);
    let cfg = TrainConfig {
        model: tiny_model(),
        ..Default::default()
    };
    let init = ModelParams::init(&cfg.model, vocab.len(), None, 1).unwrap();
    let mut dev = Scripted {
        values: vec![0.1, 0.2, 0.3, 0.3, 0.25, 0.3, 0.1, 0.3, 0.2, 0.3, 0.9],
        seen: Vec::new(),
    };
    let out = train(&cfg, init, &essays, &vocab, &mut dev, &mut |_| {}).unwrap();
    assert_eq!(out.record.epochs.len(), 10);
    assert_eq!(out.record.best_epoch, 3);
    assert_eq!(out.record.stop_reason, StopReason::Patience);
    assert_eq!(out.params, dev.seen[2]);
    assert_ne!(out.params, dev.seen[9]);
    let best = out.record.best().unwrap().selection_value;
    let max = out
        .record
        .epochs
        .iter()
        .map(|e| e.selection_value)
        .fold(f64::MIN, f64::max);
    assert_eq!(best, max);
}

#[test]
fn single_epoch_cap_returns_that_epoch() {
    let (essays, _, vocab) = tiny_corpus(6, 8, 4);
    let cfg = TrainConfig {
        model: tiny_model(),
        max_epochs: 1,
        ..Default::default()
    };
    let init = ModelParams::init(&cfg.model, vocab.len(), None, 1).unwrap();
    let mut dev = Scripted {
        values: vec![0.0],
        seen: Vec::new(),
    };
    let out = train(&cfg, init.clone(), &essays, &vocab, &mut dev, &mut |_| {}).unwrap();
    assert_eq!(out.record.epochs.len(), 1);
    assert_eq!(out.record.stop_reason, StopReason::MaxEpochs);
    assert_eq!(out.params, dev.seen[0]);
    assert_ne!(out.params, init);
}

#[test]
fn training_is_deterministic() {
    let (essays, dev_essays, vocab) = tiny_corpus(12, 10, 5);
    let cfg = TrainConfig {
        model: tiny_model(),
        max_epochs: 4,
        seed: 9,
        ..Default::default()
    };
    let run = || {
        let init = ModelParams::init(&cfg.model, vocab.len(), None, cfg.seed).unwrap();
        let mut dev = ged_aes::training::CorpusEvaluator::new(&cfg.model, &dev_essays, &vocab);
        train(&cfg, init, &essays, &vocab, &mut dev, &mut |_| {}).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.record, b.record);
    assert_eq!(a.params, b.params);
}

#[test]
fn divergence_keeps_last_good_parameters() {
    let (essays, _, vocab) = tiny_corpus(6, 8, 6);
    let cfg = TrainConfig {
        model: tiny_model(),
        max_epochs: 5,
        ..Default::default()
    };
    let mut init = ModelParams::init(&cfg.model, vocab.len(), None, 1).unwrap();
    init.aes_b = Tensor::filled(&[1, 1], f64::NAN);
    let mut dev = Scripted {
        values: vec![0.5],
        seen: Vec::new(),
    };
    let out = train(&cfg, init.clone(), &essays, &vocab, &mut dev, &mut |_| {}).unwrap();
    assert!(matches!(
        out.record.stop_reason,
        StopReason::Diverged { epoch: 1, .. }
    ));
    assert!(out.record.is_diverged());
    assert_eq!(out.record.best_epoch, 0);
    assert_eq!(
        out.params.aes_b.item().to_bits(),
        init.aes_b.item().to_bits()
    );
}

#[test]
fn selection_resolution() {
    assert_eq!(Selection::Auto.resolve(0.9), Selection::FHalf);
    assert_eq!(Selection::Auto.resolve(1.0), Selection::Qwk);
    assert_eq!(Selection::Qwk.resolve(0.0), Selection::Qwk);
}

#[test]
fn overfit_small_corpus() {
    let (essays, _, vocab) = tiny_corpus(10, 20, 11);
    let model = ModelConfig {
        embedding_dim: 16,
        hidden_dim: 16,
        gamma_aes: 0.5,
        ..Default::default()
    };
    let cfg = TrainConfig {
        model: model.clone(),
        batch_size: essays.len(),
        ..Default::default()
    };
    let init = ModelParams::init(&model, vocab.len(), None, 1).unwrap();
    let mut trainer = Trainer::new(&cfg, init, &essays, &vocab).unwrap();
    let started = std::time::Instant::now();
    for _ in 0..500 {
        trainer.run_epoch().unwrap();
    }
    let (mut e_ged, mut abs_err) = (0.0, 0.0);
    for e in &essays {
        let out = forward(&trainer.params, &model, &vocab.encode(&e.tokens)).unwrap();
        e_ged += compute_loss(&out, e, &model).unwrap().e_ged;
        abs_err += (out.predicted_score - e.gold_score as f64).abs();
    }
    let n = essays.len() as f64;
    eprintln!(
        "overfit: E_ged {:.4}, mean |error| {:.3}, {:.1}s",
        e_ged / n,
        abs_err / n,
        started.elapsed().as_secs_f64()
    );
    assert!(e_ged / n < 0.05);
    assert!(abs_err / n < 1.0);
}

fn row(gamma: f64, f: f64, q: Option<f64>) -> SweepRow {
    SweepRow {
        gamma_aes: gamma,
        dev_f_half: f,
        dev_qwk: q,
        dev_spearman: Some(0.25),
        test_f_half: None,
        test_qwk: None,
        best_epoch: 2,
        epochs: 9,
        stop_reason: "patience".into(),
    }
}

#[test]
fn sweep_output_round_trips() {
    let summary = SweepSummary {
        rows: default_grid()
            .into_iter()
            .enumerate()
            .map(|(k, g)| {
                row(
                    g,
                    0.1 * (k % 4) as f64,
                    if k == 0 { None } else { Some(0.05 * k as f64) },
                )
            })
            .collect(),
    };
    let text = format_sweep(&summary);
    assert!(text.ends_with("# argmax_ged=0.3 argmax_aes=1\n"), "{text}");
    let back = parse_sweep(&text).unwrap();
    assert_eq!(back, summary);
    assert_eq!(back.rows.len(), 11);
    validate_sweep(&back).unwrap();
}

#[test]
fn sweep_validator_rejects_bad_rows() {
    let unsorted = SweepSummary {
        rows: vec![row(0.5, 0.2, None), row(0.4, 0.2, None)],
    };
    assert!(validate_sweep(&unsorted).is_err());
    assert!(validate_sweep(&SweepSummary {
        rows: vec![row(0.5, 1.5, None)]
    })
    .is_err());
    assert!(parse_sweep("gamma_aes=0.5 dev_f0.5=x").is_err());
}
