//! Seeded stand-in for an annotated learner corpus.
//!
//! Clean words `w0 … w{V-1}` are drawn from a Zipf unigram model. Every essay
//! draws its own error rate `r`, and each token is independently replaced by
//! one of its misspelt variants (`w12~0`, `w12~1`, …) with probability `r`
//! and labeled incorrect. The gold score falls linearly with the realised
//! error fraction `f`: `round(20 − 19·f)` plus uniform integer noise, clipped
//! to `1..=20`.
//!
//! With `agreement_classes = K > 0` the words instead form K classes
//! (`id mod K`) that must appear in cyclic order, so a clean essay's class
//! sequence is `c0, c0+1, …` (mod K). An error is then a real word drawn
//! from a wrong class; it can only be spotted from its neighbours.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Essay, Label, SCORE_MAX, SCORE_MIN};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    /// Number of clean word types.
    pub vocab_size: usize,
    /// Misspelt variants per clean word.
    pub error_variants: usize,
    pub train_essays: usize,
    pub dev_essays: usize,
    pub test_essays: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub error_rate_min: f64,
    pub error_rate_max: f64,
    /// Largest absolute integer noise added to a gold score.
    pub score_noise: u8,
    /// Number of word classes in agreement mode; 0 selects misspellings.
    pub agreement_classes: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            vocab_size: 200,
            error_variants: 2,
            train_essays: 200,
            dev_essays: 50,
            test_essays: 50,
            min_len: 20,
            max_len: 40,
            error_rate_min: 0.0,
            error_rate_max: 0.5,
            score_noise: 1,
            agreement_classes: 0,
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::BadSyntheticConfig(m.to_string()));
        if self.vocab_size == 0 {
            return bad("vocab_size must be positive");
        }
        if self.error_variants == 0 {
            return bad("error_variants must be positive");
        }
        if self.agreement_classes == 1 || self.agreement_classes > self.vocab_size {
            return bad("agreement_classes must be 0 or between 2 and vocab_size");
        }
        if self.train_essays == 0 {
            return bad("train_essays must be positive");
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad("length range must satisfy 1 <= min_len <= max_len");
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.error_rate_min)
            || !in_unit(self.error_rate_max)
            || self.error_rate_min > self.error_rate_max
        {
            return bad("error-rate range must satisfy 0 <= min <= max <= 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub train: Vec<Essay>,
    pub dev: Vec<Essay>,
    pub test: Vec<Essay>,
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticCorpus, CorpusError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let weight = |k: usize| 1.0 / (k + 1) as f64;
    let unigram = WeightedIndex::new((0..config.vocab_size).map(weight)).expect("positive weights");
    // Per-class samplers over word ids `class, class + K, class + 2K, …`.
    let classes = config.agreement_classes;
    let by_class: Vec<WeightedIndex<f64>> = (0..classes)
        .map(|c| {
            WeightedIndex::new((c..config.vocab_size).step_by(classes).map(weight))
                .expect("non-empty class")
        })
        .collect();
    let word_in = |c: usize, rng: &mut ChaCha8Rng| c + classes * by_class[c].sample(rng);

    let mut split = |name: &str, count: usize| -> Vec<Essay> {
        (0..count)
            .map(|n| {
                let len = rng.gen_range(config.min_len..=config.max_len);
                let rate = if config.error_rate_max > config.error_rate_min {
                    rng.gen_range(config.error_rate_min..=config.error_rate_max)
                } else {
                    config.error_rate_min
                };
                let phase = if classes > 0 {
                    rng.gen_range(0..classes)
                } else {
                    0
                };
                let mut tokens = Vec::with_capacity(len);
                let mut labels = Vec::with_capacity(len);
                for t in 0..len {
                    let corrupt = rng.gen_bool(rate);
                    if classes > 0 {
                        let expected = (phase + t) % classes;
                        let class = if corrupt {
                            (expected + rng.gen_range(1..classes)) % classes
                        } else {
                            expected
                        };
                        tokens.push(format!("w{}", word_in(class, &mut rng)));
                    } else {
                        let word = unigram.sample(&mut rng);
                        if corrupt {
                            let variant = rng.gen_range(0..config.error_variants);
                            tokens.push(format!("w{word}~{variant}"));
                        } else {
                            tokens.push(format!("w{word}"));
                        }
                    }
                    labels.push(if corrupt {
                        Label::Incorrect
                    } else {
                        Label::Correct
                    });
                }
                let fraction = labels.iter().filter(|l| l.is_error()).count() as f64 / len as f64;
                let base =
                    (SCORE_MAX as f64 - (SCORE_MAX - SCORE_MIN) as f64 * fraction).round() as i64;
                let noise = if config.score_noise > 0 {
                    rng.gen_range(-(config.score_noise as i64)..=config.score_noise as i64)
                } else {
                    0
                };
                let score = (base + noise).clamp(SCORE_MIN as i64, SCORE_MAX as i64) as u8;
                Essay::new(format!("{name}-{n:05}"), tokens, labels, score)
                    .expect("generated essay is valid")
            })
            .collect()
    };
    let train = split("train", config.train_essays);
    let dev = split("dev", config.dev_essays);
    let test = split("test", config.test_essays);
    Ok(SyntheticCorpus { train, dev, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::serialize_corpus;

    fn small(seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            train_essays: 30,
            dev_essays: 5,
            test_essays: 5,
            seed,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn zero_error_rate() {
        let cfg = SyntheticConfig {
            error_rate_min: 0.0,
            error_rate_max: 0.0,
            score_noise: 0,
            ..small(3)
        };
        let c = generate_synthetic(&cfg).unwrap();
        for e in c.train.iter().chain(&c.dev).chain(&c.test) {
            assert!(e.labels.iter().all(|l| *l == Label::Correct));
            assert_eq!(e.gold_score, 20);
        }
    }

    #[test]
    fn full_error_rate() {
        let cfg = SyntheticConfig {
            error_rate_min: 1.0,
            error_rate_max: 1.0,
            score_noise: 0,
            ..small(3)
        };
        let c = generate_synthetic(&cfg).unwrap();
        for e in &c.train {
            assert!(e.labels.iter().all(|l| *l == Label::Incorrect));
            assert_eq!(e.gold_score, 1);
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let a = generate_synthetic(&small(9)).unwrap();
        let b = generate_synthetic(&small(9)).unwrap();
        assert_eq!(serialize_corpus(&a.train), serialize_corpus(&b.train));
        assert_eq!(serialize_corpus(&a.test), serialize_corpus(&b.test));
        let c = generate_synthetic(&small(10)).unwrap();
        assert_ne!(serialize_corpus(&a.train), serialize_corpus(&c.train));
    }

    #[test]
    fn split_sizes_and_lengths() {
        let c = generate_synthetic(&small(1)).unwrap();
        assert_eq!((c.train.len(), c.dev.len(), c.test.len()), (30, 5, 5));
        assert!(c.train.iter().all(|e| (20..=40).contains(&e.len())));
    }

    #[test]
    fn agreement_mode_errors_break_the_class_cycle() {
        let cfg = SyntheticConfig {
            agreement_classes: 4,
            vocab_size: 40,
            ..small(5)
        };
        let c = generate_synthetic(&cfg).unwrap();
        let class = |tok: &str| tok[1..].parse::<usize>().unwrap() % 4;
        let mut errors = 0;
        for e in &c.train {
            // The first clean token fixes the phase.
            let anchor = e.labels.iter().position(|l| !l.is_error()).unwrap();
            let phase = (class(&e.tokens[anchor]) + 4 - anchor % 4) % 4;
            for (t, (tok, l)) in e.tokens.iter().zip(&e.labels).enumerate() {
                assert!(!tok.contains('~'));
                assert_eq!(
                    class(tok) == (phase + t) % 4,
                    !l.is_error(),
                    "{} at {t}",
                    e.id
                );
                errors += l.is_error() as usize;
            }
        }
        assert!(errors > 0);
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SyntheticConfig {
                error_rate_min: 0.6,
                error_rate_max: 0.5,
                ..small(1)
            },
            SyntheticConfig {
                error_rate_max: 1.5,
                ..small(1)
            },
            SyntheticConfig {
                min_len: 0,
                ..small(1)
            },
            SyntheticConfig {
                min_len: 9,
                max_len: 8,
                ..small(1)
            },
            SyntheticConfig {
                vocab_size: 0,
                ..small(1)
            },
            SyntheticConfig {
                agreement_classes: 1,
                ..small(1)
            },
            SyntheticConfig {
                agreement_classes: 300,
                ..small(1)
            },
        ] {
            assert!(generate_synthetic(&cfg).is_err(), "{cfg:?}");
        }
    }
}
