use std::fmt::{self, Write as _};

/// Dev-set results and training loss of one epoch.
#[derive(Clone, Debug)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean combined loss over the epoch's training essays.
    pub train_loss: f64,
    pub dev_f_half: f64,
    pub dev_qwk: Option<f64>,
    pub dev_spearman: Option<f64>,
    /// Value of the early-stopping metric; `-inf` when it is undefined.
    pub selection_value: f64,
    pub wall_secs: f64,
}

// Wall time differs between otherwise identical runs.
impl PartialEq for EpochRecord {
    fn eq(&self, other: &Self) -> bool {
        self.epoch == other.epoch
            && self.train_loss.to_bits() == other.train_loss.to_bits()
            && self.dev_f_half.to_bits() == other.dev_f_half.to_bits()
            && self.dev_qwk.map(f64::to_bits) == other.dev_qwk.map(f64::to_bits)
            && self.dev_spearman.map(f64::to_bits) == other.dev_spearman.map(f64::to_bits)
            && self.selection_value.to_bits() == other.selection_value.to_bits()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    /// The selection metric failed to improve for `patience` epochs.
    Patience,
    MaxEpochs,
    /// Non-finite loss or gradient during the given epoch.
    Diverged {
        epoch: usize,
        message: String,
    },
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::Patience => f.write_str("patience"),
            StopReason::MaxEpochs => f.write_str("max_epochs"),
            StopReason::Diverged { epoch, .. } => write!(f, "diverged@{epoch}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRecord {
    pub selection_metric: &'static str,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned; 0 means the initial parameters.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

impl TrainRecord {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self.stop_reason, StopReason::Diverged { .. })
    }

    /// One `key=value …` line per epoch, then a summary line.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "epoch={} train_e={} dev_f0.5={} dev_qwk={} dev_spearman={} selection={} wall_secs={:.3}",
                e.epoch,
                e.train_loss,
                e.dev_f_half,
                opt(e.dev_qwk),
                opt(e.dev_spearman),
                e.selection_value,
                e.wall_secs
            );
        }
        let _ = write!(
            out,
            "best_epoch={} stop_reason={} selection_metric={} epochs={}",
            self.best_epoch,
            self.stop_reason,
            self.selection_metric,
            self.epochs.len()
        );
        if let StopReason::Diverged { message, .. } = &self.stop_reason {
            let _ = write!(out, " message={:?}", message);
        }
        out.push('\n');
        out
    }
}
