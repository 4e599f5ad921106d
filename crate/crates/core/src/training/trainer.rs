use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AdadeltaState, EpochRecord, StopReason, TrainError, TrainRecord};
use crate::autodiff::Tensor;
use crate::corpus::{Essay, Vocabulary, SCORE_MAX, SCORE_MIN};
use crate::metrics::EvalReport;
use crate::model::{
    accumulate_gradients, predict, predict_labels, ModelConfig, ModelError, ModelParams,
};

/// Dev metric that drives early stopping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// F0.5 while the detection loss has weight (γ_aes < 1), QWK otherwise.
    Auto,
    FHalf,
    Qwk,
}

impl Selection {
    pub fn name(self) -> &'static str {
        match self {
            Selection::Auto => "auto",
            Selection::FHalf => "f0.5",
            Selection::Qwk => "qwk",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(Selection::Auto),
            "f0.5" | "fhalf" => Some(Selection::FHalf),
            "qwk" => Some(Selection::Qwk),
            _ => None,
        }
    }

    pub fn resolve(self, gamma_aes: f64) -> Selection {
        match self {
            Selection::Auto if gamma_aes < 1.0 => Selection::FHalf,
            Selection::Auto => Selection::Qwk,
            s => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub selection: Selection,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            batch_size: 8,
            patience: 7,
            max_epochs: 200,
            selection: Selection::Auto,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.model.validate()?;
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("patience", self.patience),
            ("max_epochs", self.max_epochs),
        ] {
            if v == 0 {
                return Err(TrainError::InvalidConfig(format!(
                    "{name} must be at least 1"
                )));
            }
        }
        Ok(())
    }
}

/// An essay with its vocabulary ids.
#[derive(Clone, Debug)]
pub struct Encoded<'e> {
    pub essay: &'e Essay,
    pub ids: Vec<usize>,
}

impl<'e> Encoded<'e> {
    pub fn corpus(essays: &'e [Essay], vocab: &Vocabulary) -> Vec<Encoded<'e>> {
        essays
            .iter()
            .map(|essay| Encoded {
                essay,
                ids: vocab.encode(&essay.tokens),
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DevMetrics {
    pub f_half: f64,
    pub qwk: Option<f64>,
    pub spearman: Option<f64>,
}

impl DevMetrics {
    pub fn value(&self, selection: Selection) -> f64 {
        match selection {
            Selection::Qwk => self.qwk.unwrap_or(f64::NEG_INFINITY),
            _ => self.f_half,
        }
    }
}

impl From<&EvalReport> for DevMetrics {
    fn from(r: &EvalReport) -> Self {
        DevMetrics {
            f_half: r.f_half,
            qwk: r.qwk,
            spearman: r.spearman,
        }
    }
}

/// Scores parameters on a development set after each epoch.
pub trait DevEvaluator {
    fn evaluate(&mut self, params: &ModelParams, epoch: usize) -> Result<DevMetrics, TrainError>;
}

/// Evaluates on a held-out corpus.
pub struct CorpusEvaluator<'e> {
    config: ModelConfig,
    data: Vec<Encoded<'e>>,
}

impl<'e> CorpusEvaluator<'e> {
    pub fn new(config: &ModelConfig, essays: &'e [Essay], vocab: &Vocabulary) -> Self {
        CorpusEvaluator {
            config: config.clone(),
            data: Encoded::corpus(essays, vocab),
        }
    }

    pub fn report(&self, params: &ModelParams) -> Result<EvalReport, TrainError> {
        let mut labels = Vec::with_capacity(self.data.len());
        let mut scores = Vec::with_capacity(self.data.len());
        for e in &self.data {
            let out = predict(params, &self.config, &e.ids)?;
            labels.push(predict_labels(&out.ged_probs, self.config.ged_threshold));
            scores.push(out.predicted_score);
        }
        let gold_labels: Vec<&[_]> = self
            .data
            .iter()
            .map(|e| e.essay.labels.as_slice())
            .collect();
        let gold_scores: Vec<u8> = self.data.iter().map(|e| e.essay.gold_score).collect();
        Ok(EvalReport::compute(
            &labels,
            &gold_labels,
            &scores,
            &gold_scores,
            SCORE_MIN,
            SCORE_MAX,
        )?)
    }
}

impl DevEvaluator for CorpusEvaluator<'_> {
    fn evaluate(&mut self, params: &ModelParams, _epoch: usize) -> Result<DevMetrics, TrainError> {
        Ok(DevMetrics::from(&self.report(params)?))
    }
}

/// Patience counter over a metric where larger is better and only strict
/// improvements count.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Records an epoch's value; true when it is a new best.
    pub fn observe(&mut self, epoch: usize, value: f64) -> bool {
        let improved = self.best.is_none_or(|b| value > b);
        if improved {
            self.best = Some(value);
            self.best_epoch = epoch;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        improved
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Mini-batch Adadelta over a fixed training corpus.
pub struct Trainer<'e> {
    config: TrainConfig,
    pub params: ModelParams,
    state: AdadeltaState,
    rng: ChaCha8Rng,
    data: Vec<Encoded<'e>>,
    order: Vec<usize>,
    grads: Vec<Tensor>,
}

impl<'e> Trainer<'e> {
    pub fn new(
        config: &TrainConfig,
        params: ModelParams,
        essays: &'e [Essay],
        vocab: &Vocabulary,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        if essays.is_empty() {
            return Err(TrainError::EmptyCorpus("training"));
        }
        let data = Encoded::corpus(essays, vocab);
        if let Some(&bad) = data
            .iter()
            .flat_map(|e| &e.ids)
            .find(|&&id| id >= params.vocab_size())
        {
            return Err(ModelError::TokenOutOfRange {
                id: bad,
                vocab_size: params.vocab_size(),
            }
            .into());
        }
        Ok(Trainer {
            config: config.clone(),
            state: AdadeltaState::new(&params),
            grads: params.zero_grads(),
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5AFF_1E00),
            order: (0..data.len()).collect(),
            params,
            data,
        })
    }

    /// One pass over the shuffled corpus; returns the mean combined loss.
    pub fn run_epoch(&mut self) -> Result<f64, TrainError> {
        self.order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for batch in self.order.chunks(self.config.batch_size) {
            for g in &mut self.grads {
                g.data_mut().fill(0.0);
            }
            for &k in batch {
                let e = &self.data[k];
                let loss = accumulate_gradients(
                    &self.params,
                    &self.config.model,
                    &e.ids,
                    e.essay,
                    &mut self.grads,
                )?;
                if !loss.e.is_finite() {
                    return Err(TrainError::NonFiniteLoss(loss.e));
                }
                total += loss.e;
            }
            let scale = 1.0 / batch.len() as f64;
            for g in &mut self.grads {
                for v in g.data_mut() {
                    *v *= scale;
                }
            }
            self.state.step(&mut self.params, &self.grads)?;
        }
        Ok(total / self.data.len() as f64)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best epoch.
    pub params: ModelParams,
    pub record: TrainRecord,
}

/// Trains until the selection metric stops improving, returning the best
/// epoch's parameters. `on_epoch` sees each epoch record as it completes.
pub fn train(
    config: &TrainConfig,
    init: ModelParams,
    essays: &[Essay],
    vocab: &Vocabulary,
    dev: &mut dyn DevEvaluator,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    let selection = config.selection.resolve(config.model.gamma_aes);
    let mut trainer = Trainer::new(config, init, essays, vocab)?;
    let mut best_params = trainer.params.clone();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        let train_loss = match trainer.run_epoch() {
            Ok(l) => l,
            Err(e @ (TrainError::NonFiniteLoss(_) | TrainError::NonFiniteGradient(_))) => {
                log::warn!("epoch {epoch}: {e}; keeping epoch {}", stopper.best_epoch());
                stop_reason = StopReason::Diverged {
                    epoch,
                    message: e.to_string(),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        let metrics = dev.evaluate(&trainer.params, epoch)?;
        let value = metrics.value(selection);
        let improved = stopper.observe(epoch, value);
        if improved {
            best_params.clone_from(&trainer.params);
        }
        let rec = EpochRecord {
            epoch,
            train_loss,
            dev_f_half: metrics.f_half,
            dev_qwk: metrics.qwk,
            dev_spearman: metrics.spearman,
            selection_value: value,
            wall_secs: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: train E {train_loss:.4}, dev {} {value:.4}{}",
            selection.name(),
            if improved { " *" } else { "" }
        );
        on_epoch(&rec);
        epochs.push(rec);
        if stopper.should_stop() {
            stop_reason = StopReason::Patience;
            break;
        }
    }

    Ok(TrainOutcome {
        params: best_params,
        record: TrainRecord {
            selection_metric: selection.name(),
            epochs,
            best_epoch: stopper.best_epoch(),
            stop_reason,
        },
    })
}
