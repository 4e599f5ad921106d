//! Detection and scoring metrics, and paired significance testing.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Label;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("length mismatch: {left} predictions vs {right} gold values")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} items, got {got}")]
    TooFewItems { needed: usize, got: usize },
    #[error("score {score} outside {min}..={max}")]
    OutOfRange { score: i64, min: i64, max: i64 },
    #[error("{0} is undefined for these inputs")]
    Undefined(&'static str),
    #[error("significance test needs at least 1000 iterations, got {0}")]
    TooFewIterations(usize),
}

/// Precision-weighted F-measure, `1.25·P·R / (0.25·P + R)`; 0 when undefined.
pub fn f_half(precision: f64, recall: f64) -> f64 {
    let denom = 0.25 * precision + recall;
    if denom > 0.0 {
        1.25 * precision * recall / denom
    } else {
        0.0
    }
}

/// Token-level detection counts with "incorrect" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Prf {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Prf {
    pub fn add(&mut self, predicted: Label, gold: Label) {
        match (predicted.is_error(), gold.is_error()) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => {}
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f_half(&self) -> f64 {
        f_half(self.precision(), self.recall())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn token_prf(predicted: &[Label], gold: &[Label]) -> Result<Prf, MetricError> {
    if predicted.len() != gold.len() {
        return Err(MetricError::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
        });
    }
    let mut prf = Prf::default();
    for (&p, &g) in predicted.iter().zip(gold) {
        prf.add(p, g);
    }
    Ok(prf)
}

/// Micro-averaged counts over all tokens of all essays.
pub fn corpus_prf<P: AsRef<[Label]>, G: AsRef<[Label]>>(
    predicted: &[P],
    gold: &[G],
) -> Result<Prf, MetricError> {
    if predicted.len() != gold.len() {
        return Err(MetricError::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
        });
    }
    let mut total = Prf::default();
    for (p, g) in predicted.iter().zip(gold) {
        let one = token_prf(p.as_ref(), g.as_ref())?;
        total.tp += one.tp;
        total.fp += one.fp;
        total.fn_ += one.fn_;
    }
    Ok(total)
}

/// Rounds halves upward (`10.5 → 11`, `-0.5 → 0`).
pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Quadratic weighted kappa over integer ratings in `min..=max`.
pub fn qwk(predicted: &[i64], gold: &[i64], min: i64, max: i64) -> Result<f64, MetricError> {
    if predicted.len() != gold.len() {
        return Err(MetricError::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
        });
    }
    if predicted.len() < 2 {
        return Err(MetricError::TooFewItems {
            needed: 2,
            got: predicted.len(),
        });
    }
    if min >= max {
        return Err(MetricError::Undefined("qwk on a single-point scale"));
    }
    for &s in predicted.iter().chain(gold) {
        if s < min || s > max {
            return Err(MetricError::OutOfRange { score: s, min, max });
        }
    }
    let n = (max - min + 1) as usize;
    let mut observed = vec![0.0; n * n];
    let mut pred_hist = vec![0.0; n];
    let mut gold_hist = vec![0.0; n];
    for (&p, &g) in predicted.iter().zip(gold) {
        let (i, j) = ((p - min) as usize, (g - min) as usize);
        observed[i * n + j] += 1.0;
        pred_hist[i] += 1.0;
        gold_hist[j] += 1.0;
    }
    let total = predicted.len() as f64;
    let scale = ((n - 1) * (n - 1)) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let w = ((i as f64 - j as f64).powi(2)) / scale;
            num += w * observed[i * n + j];
            den += w * pred_hist[i] * gold_hist[j] / total;
        }
    }
    if den == 0.0 {
        return Err(MetricError::Undefined("qwk"));
    }
    Ok(1.0 - num / den)
}

/// Fractional ranks starting at 1; ties share their average rank.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(MetricError::TooFewItems {
            needed: 2,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::Undefined("correlation with zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of fractional ranks.
pub fn spearman(predicted: &[f64], gold: &[f64]) -> Result<f64, MetricError> {
    if predicted.len() != gold.len() {
        return Err(MetricError::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
        });
    }
    pearson(&fractional_ranks(predicted), &fractional_ranks(gold))
}

/// Two-sided paired approximate-randomization test.
///
/// Each iteration swaps the two systems' outputs for every item with
/// probability ½ and recomputes `|metric(A') − metric(B')|`. Returns
/// `(r + 1) / (iterations + 1)`, where `r` counts shuffles at least as
/// extreme as the observed difference.
pub fn significance_test<T, G, M>(
    metric: M,
    system_a: &[T],
    system_b: &[T],
    gold: &[G],
    iterations: usize,
    seed: u64,
) -> Result<f64, MetricError>
where
    T: Clone,
    M: Fn(&[T], &[G]) -> f64,
{
    if system_a.len() != system_b.len() || system_a.len() != gold.len() {
        return Err(MetricError::LengthMismatch {
            left: system_a.len().max(system_b.len()),
            right: gold.len(),
        });
    }
    if iterations < 1000 {
        return Err(MetricError::TooFewIterations(iterations));
    }
    let observed = (metric(system_a, gold) - metric(system_b, gold)).abs();
    // Differences within rounding noise of the observed value count as ties.
    let slack = 1e-12 * observed.abs().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = system_a.to_vec();
    let mut b = system_b.to_vec();
    let mut extreme = 0usize;
    for _ in 0..iterations {
        for i in 0..a.len() {
            if rng.gen_bool(0.5) {
                a[i] = system_b[i].clone();
                b[i] = system_a[i].clone();
            } else {
                a[i] = system_a[i].clone();
                b[i] = system_b[i].clone();
            }
        }
        let diff = (metric(&a, gold) - metric(&b, gold)).abs();
        if diff + slack >= observed {
            extreme += 1;
        }
    }
    Ok((extreme + 1) as f64 / (iterations + 1) as f64)
}

/// Evaluation summary for one system on one corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub essays: usize,
    pub tokens: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_half: f64,
    /// `None` when undefined (e.g. constant scores).
    pub spearman: Option<f64>,
    pub qwk: Option<f64>,
    pub p_value: Option<f64>,
}

impl EvalReport {
    /// Builds a report; predicted scores are rounded half-up before QWK.
    pub fn compute<P, G>(
        predicted_labels: &[P],
        gold_labels: &[G],
        predicted_scores: &[f64],
        gold_scores: &[u8],
        score_min: u8,
        score_max: u8,
    ) -> Result<EvalReport, MetricError>
    where
        P: AsRef<[Label]>,
        G: AsRef<[Label]>,
    {
        if predicted_scores.len() != gold_scores.len() {
            return Err(MetricError::LengthMismatch {
                left: predicted_scores.len(),
                right: gold_scores.len(),
            });
        }
        let prf = corpus_prf(predicted_labels, gold_labels)?;
        let gold_f: Vec<f64> = gold_scores.iter().map(|&s| s as f64).collect();
        let rounded: Vec<i64> = predicted_scores
            .iter()
            .map(|&s| round_half_up(s).clamp(score_min as i64, score_max as i64))
            .collect();
        let gold_i: Vec<i64> = gold_scores.iter().map(|&s| s as i64).collect();
        Ok(EvalReport {
            essays: gold_scores.len(),
            tokens: gold_labels.iter().map(|g| g.as_ref().len()).sum(),
            tp: prf.tp,
            fp: prf.fp,
            fn_: prf.fn_,
            precision: prf.precision(),
            recall: prf.recall(),
            f_half: prf.f_half(),
            spearman: spearman(predicted_scores, &gold_f).ok(),
            qwk: qwk(&rounded, &gold_i, score_min as i64, score_max as i64).ok(),
            p_value: None,
        })
    }

    /// `key=value` lines; undefined values are written as `undefined`.
    pub fn to_key_value(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"));
        let mut out = String::new();
        let _ = writeln!(out, "essays={}", self.essays);
        let _ = writeln!(out, "tokens={}", self.tokens);
        let _ = writeln!(out, "tp={}", self.tp);
        let _ = writeln!(out, "fp={}", self.fp);
        let _ = writeln!(out, "fn={}", self.fn_);
        let _ = writeln!(out, "precision={:.6}", self.precision);
        let _ = writeln!(out, "recall={:.6}", self.recall);
        let _ = writeln!(out, "f0.5={:.6}", self.f_half);
        let _ = writeln!(out, "spearman={}", opt(self.spearman));
        let _ = writeln!(out, "qwk={}", opt(self.qwk));
        if let Some(p) = self.p_value {
            let _ = writeln!(out, "p_value={p:.6}");
        }
        out
    }

    pub fn table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"));
        let mut out = String::new();
        let _ = writeln!(out, "{:<16} {:>8}", "essays", self.essays);
        let _ = writeln!(out, "{:<16} {:>8}", "tokens", self.tokens);
        let _ = writeln!(out, "{:<16} {:>8.3}", "precision", self.precision);
        let _ = writeln!(out, "{:<16} {:>8.3}", "recall", self.recall);
        let _ = writeln!(out, "{:<16} {:>8.3}", "F0.5", self.f_half);
        let _ = writeln!(out, "{:<16} {:>8}", "spearman", opt(self.spearman));
        let _ = writeln!(out, "{:<16} {:>8}", "QWK", opt(self.qwk));
        if let Some(p) = self.p_value {
            let _ = writeln!(out, "{:<16} {:>8.4}", "p-value", p);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Correct as C, Incorrect as I};

    #[test]
    fn published_f_half_rows() {
        assert!((f_half(0.543, 0.265) - 0.449).abs() <= 0.001);
        assert!((f_half(0.588, 0.221) - 0.442).abs() <= 0.001);
        assert!((f_half(0.492, 0.251) - 0.413).abs() <= 0.001);
    }

    #[test]
    fn f_half_fixed_point_and_degenerate() {
        assert!((f_half(0.5, 0.5) - 0.5).abs() < 1e-15);
        let prf = token_prf(&[C, C, C], &[I, C, I]).unwrap();
        assert_eq!(prf.precision(), 0.0);
        assert_eq!(prf.f_half(), 0.0);
        assert_eq!(prf.fn_, 2);
    }

    #[test]
    fn prf_counts() {
        let prf = token_prf(&[I, I, C, I], &[I, C, I, I]).unwrap();
        assert_eq!((prf.tp, prf.fp, prf.fn_), (2, 1, 1));
        assert!((prf.precision() - 2.0 / 3.0).abs() < 1e-15);
        assert!(token_prf(&[I], &[I, C]).is_err());
    }

    #[test]
    fn corpus_prf_is_micro_averaged() {
        let pred = vec![vec![I, I], vec![C]];
        let gold = vec![vec![I, C], vec![I]];
        let prf = corpus_prf(&pred, &gold).unwrap();
        assert_eq!((prf.tp, prf.fp, prf.fn_), (1, 1, 1));
    }

    #[test]
    fn qwk_cases() {
        let g = [1, 5, 9, 20, 13];
        assert!((qwk(&g, &g, 1, 20).unwrap() - 1.0).abs() < 1e-15);
        assert!(qwk(&[20, 1], &[1, 20], 1, 20).unwrap() < 0.0);
        assert_eq!(
            qwk(&[3, 3], &[3, 3], 1, 20),
            Err(MetricError::Undefined("qwk"))
        );
        assert!(qwk(&[0, 3], &[3, 3], 1, 20).is_err());
        assert!(qwk(&[3], &[3], 1, 20).is_err());
    }

    #[test]
    fn spearman_cases() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(fractional_ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
        assert_eq!(
            fractional_ranks(&[5.0, 1.0, 5.0, 5.0]),
            vec![3.0, 1.0, 3.0, 3.0]
        );
    }

    #[test]
    fn round_half_up_rule() {
        assert_eq!(round_half_up(10.5), 11);
        assert_eq!(round_half_up(10.49), 10);
        assert_eq!(round_half_up(1.0), 1);
    }

    #[test]
    fn identical_systems_give_p_one() {
        let gold = [1.0, 2.0, 3.0, 4.0];
        let a = [1.5, 2.0, 2.5, 4.5];
        let mae = |s: &[f64], g: &[f64]| s.iter().zip(g).map(|(x, y)| (x - y).abs()).sum::<f64>();
        assert_eq!(significance_test(mae, &a, &a, &gold, 1000, 1).unwrap(), 1.0);
        assert!(significance_test(mae, &a, &a, &gold, 10, 1).is_err());
    }

    #[test]
    fn report_formats() {
        let report = EvalReport::compute(
            &[vec![I, C], vec![C]],
            &[vec![I, I], vec![C]],
            &[10.5, 3.2],
            &[11, 3],
            1,
            20,
        )
        .unwrap();
        assert_eq!(report.qwk, Some(1.0));
        let kv = report.to_key_value();
        assert!(kv.contains("tp=1\n") && kv.contains("fn=1\n") && kv.contains("qwk=1.000000\n"));
        assert!(report.table().contains("F0.5"));
    }
}
