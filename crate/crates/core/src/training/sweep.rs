use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{train, CorpusEvaluator, DevMetrics, TrainConfig, TrainError};
use crate::corpus::{Essay, Vocabulary};
use crate::model::{ModelConfig, ModelParams};

/// γ_aes from 0.0 to 1.0 in steps of 0.1.
pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// Results of one grid point, measured at its best epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub gamma_aes: f64,
    pub dev_f_half: f64,
    pub dev_qwk: Option<f64>,
    pub dev_spearman: Option<f64>,
    pub test_f_half: Option<f64>,
    pub test_qwk: Option<f64>,
    pub best_epoch: usize,
    pub epochs: usize,
    pub stop_reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
}

fn argmax(rows: &[SweepRow], key: impl Fn(&SweepRow) -> Option<f64>) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for r in rows {
        if let Some(v) = key(r) {
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, r.gamma_aes));
            }
        }
    }
    best.map(|(_, g)| g)
}

impl SweepSummary {
    /// γ_aes with the highest dev F0.5 (first on ties).
    pub fn best_for_ged(&self) -> Option<f64> {
        argmax(&self.rows, |r| Some(r.dev_f_half))
    }

    /// γ_aes with the highest dev QWK (first on ties).
    pub fn best_for_aes(&self) -> Option<f64> {
        argmax(&self.rows, |r| r.dev_qwk)
    }
}

/// Trains once per grid point with identical seed and data.
///
/// `init` creates the starting parameters for a grid point's model config;
/// `test`, when given, is scored with each point's selected parameters.
#[allow(clippy::too_many_arguments)]
pub fn sweep_gamma(
    base: &TrainConfig,
    grid: &[f64],
    train_set: &[Essay],
    dev_set: &[Essay],
    test_set: Option<&[Essay]>,
    vocab: &Vocabulary,
    init: &dyn Fn(&ModelConfig) -> Result<ModelParams, TrainError>,
    on_row: &mut dyn FnMut(&SweepRow),
) -> Result<SweepSummary, TrainError> {
    if let Some(&g) = grid.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(TrainError::InvalidConfig(format!(
            "grid value {g} outside [0, 1]"
        )));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &gamma_aes in grid {
        let mut config = base.clone();
        config.model.gamma_aes = gamma_aes;
        let params = init(&config.model)?;
        let mut dev = CorpusEvaluator::new(&config.model, dev_set, vocab);
        let outcome = train(&config, params, train_set, vocab, &mut dev, &mut |_| {})?;
        let best = match outcome.record.best() {
            Some(e) => DevMetrics {
                f_half: e.dev_f_half,
                qwk: e.dev_qwk,
                spearman: e.dev_spearman,
            },
            None => dev.evaluate_params(&outcome.params)?,
        };
        let test = match test_set {
            Some(t) => Some(CorpusEvaluator::new(&config.model, t, vocab).report(&outcome.params)?),
            None => None,
        };
        let row = SweepRow {
            gamma_aes,
            dev_f_half: best.f_half,
            dev_qwk: best.qwk,
            dev_spearman: best.spearman,
            test_f_half: test.as_ref().map(|r| r.f_half),
            test_qwk: test.as_ref().and_then(|r| r.qwk),
            best_epoch: outcome.record.best_epoch,
            epochs: outcome.record.epochs.len(),
            stop_reason: outcome.record.stop_reason.to_string(),
        };
        log::info!(
            "gamma_aes={gamma_aes}: dev F0.5 {:.4}, dev QWK {}",
            row.dev_f_half,
            row.dev_qwk
                .map_or("undefined".into(), |q| format!("{q:.4}"))
        );
        on_row(&row);
        rows.push(row);
    }
    Ok(SweepSummary { rows })
}

impl CorpusEvaluator<'_> {
    fn evaluate_params(&self, params: &ModelParams) -> Result<DevMetrics, TrainError> {
        Ok(DevMetrics::from(&self.report(params)?))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

pub fn format_row(r: &SweepRow) -> String {
    let mut line = format!(
        "gamma_aes={} dev_f0.5={} dev_qwk={} dev_spearman={}",
        r.gamma_aes,
        r.dev_f_half,
        opt(r.dev_qwk),
        opt(r.dev_spearman)
    );
    if let Some(f) = r.test_f_half {
        let _ = write!(line, " test_f0.5={f} test_qwk={}", opt(r.test_qwk));
    }
    let _ = write!(
        line,
        " best_epoch={} epochs={} stop_reason={}",
        r.best_epoch, r.epochs, r.stop_reason
    );
    line
}

/// One line per grid point, then a `#` comment with the argmax per task.
pub fn format_sweep(summary: &SweepSummary) -> String {
    let mut out = String::new();
    for r in &summary.rows {
        out.push_str(&format_row(r));
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "# argmax_ged={} argmax_aes={}",
        opt(summary.best_for_ged()),
        opt(summary.best_for_aes())
    );
    out
}

/// Reads sweep output back; `#` lines and blank lines are skipped.
pub fn parse_sweep(text: &str) -> Result<SweepSummary, TrainError> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| TrainError::SweepFormat {
            line: n + 1,
            message,
        };
        let mut kv = BTreeMap::new();
        for field in line.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {field:?}")))?;
            if kv.insert(k, v).is_some() {
                return Err(bad(format!("duplicate key {k}")));
            }
        }
        let get = |k: &str| {
            kv.get(k)
                .copied()
                .ok_or_else(|| bad(format!("missing {k}")))
        };
        let real = |k: &str| -> Result<f64, TrainError> {
            let v = get(k)?;
            v.parse::<f64>()
                .map_err(|_| bad(format!("{k}: not a number: {v:?}")))
        };
        let maybe = |k: &str| -> Result<Option<f64>, TrainError> {
            match kv.get(k) {
                None | Some(&"undefined") => Ok(None),
                Some(v) => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| bad(format!("{k}: not a number: {v:?}"))),
            }
        };
        let count = |k: &str| -> Result<usize, TrainError> {
            let v = get(k)?;
            v.parse::<usize>()
                .map_err(|_| bad(format!("{k}: not a count: {v:?}")))
        };
        get("dev_qwk")?;
        get("dev_spearman")?;
        rows.push(SweepRow {
            gamma_aes: real("gamma_aes")?,
            dev_f_half: real("dev_f0.5")?,
            dev_qwk: maybe("dev_qwk")?,
            dev_spearman: maybe("dev_spearman")?,
            test_f_half: maybe("test_f0.5")?,
            test_qwk: maybe("test_qwk")?,
            best_epoch: count("best_epoch")?,
            epochs: count("epochs")?,
            stop_reason: get("stop_reason")?.to_string(),
        });
    }
    Ok(SweepSummary { rows })
}

/// Checks parsed sweep rows for plotting: a non-empty, strictly increasing
/// grid inside [0, 1] and metrics inside their ranges.
pub fn validate_sweep(summary: &SweepSummary) -> Result<(), TrainError> {
    let bad = |line: usize, message: String| TrainError::SweepFormat { line, message };
    if summary.rows.is_empty() {
        return Err(bad(0, "no rows".into()));
    }
    let unit = |v: f64| (0.0..=1.0).contains(&v);
    let corr = |v: Option<f64>| v.is_none_or(|x| (-1.0..=1.0).contains(&x));
    for (k, r) in summary.rows.iter().enumerate() {
        let row = k + 1;
        if !unit(r.gamma_aes) {
            return Err(bad(
                row,
                format!("gamma_aes {} outside [0, 1]", r.gamma_aes),
            ));
        }
        if k > 0 && r.gamma_aes <= summary.rows[k - 1].gamma_aes {
            return Err(bad(
                row,
                "gamma_aes values must be strictly increasing".into(),
            ));
        }
        if !unit(r.dev_f_half) || !r.test_f_half.is_none_or(unit) {
            return Err(bad(row, "F0.5 outside [0, 1]".into()));
        }
        if !corr(r.dev_qwk) || !corr(r.dev_spearman) || !corr(r.test_qwk) {
            return Err(bad(row, "QWK or Spearman outside [-1, 1]".into()));
        }
        if r.best_epoch > r.epochs {
            return Err(bad(
                row,
                format!("best_epoch {} after last epoch {}", r.best_epoch, r.epochs),
            ));
        }
    }
    Ok(())
}
