use super::ModelError;

/// How the forward and backward language-modeling losses are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LmCombine {
    Mean,
    Sum,
}

impl LmCombine {
    pub fn name(self) -> &'static str {
        match self {
            LmCombine::Mean => "mean",
            LmCombine::Sum => "sum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(LmCombine::Mean),
            "sum" => Some(LmCombine::Sum),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    /// Hidden units per direction.
    pub hidden_dim: usize,
    pub score_min: f64,
    pub score_max: f64,
    pub gamma_lm: f64,
    pub gamma_aes: f64,
    pub ged_threshold: f64,
    /// Number of most frequent vocabulary entries the LM heads predict;
    /// rarer targets fall back to the unknown token. `None` = full vocabulary.
    pub lm_vocab_cap: Option<usize>,
    pub lm_combine: LmCombine,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 300,
            hidden_dim: 100,
            score_min: 1.0,
            score_max: 20.0,
            gamma_lm: 0.1,
            gamma_aes: 0.0,
            ged_threshold: 0.5,
            lm_vocab_cap: None,
            lm_combine: LmCombine::Mean,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.embedding_dim == 0 || self.hidden_dim == 0 {
            return bad("embedding_dim and hidden_dim must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.gamma_aes) {
            return bad(format!("gamma_aes {} outside [0, 1]", self.gamma_aes));
        }
        if !(self.gamma_lm >= 0.0 && self.gamma_lm.is_finite()) {
            return bad(format!(
                "gamma_lm {} must be a finite value >= 0",
                self.gamma_lm
            ));
        }
        if !self.score_min.is_finite()
            || !self.score_max.is_finite()
            || self.score_min >= self.score_max
        {
            return bad(format!(
                "score range [{}, {}] is empty",
                self.score_min, self.score_max
            ));
        }
        if !(self.ged_threshold > 0.0 && self.ged_threshold < 1.0) {
            return bad(format!(
                "ged_threshold {} outside (0, 1)",
                self.ged_threshold
            ));
        }
        if self.lm_vocab_cap == Some(0) {
            return bad("lm_vocab_cap must be positive".into());
        }
        Ok(())
    }

    /// LM output classes for a vocabulary of `vocab_size` entries.
    pub fn lm_classes(&self, vocab_size: usize) -> usize {
        self.lm_vocab_cap
            .map_or(vocab_size, |cap| cap.min(vocab_size))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!((c.embedding_dim, c.hidden_dim, c.gamma_lm), (300, 100, 0.1));
    }

    #[test]
    fn rejects_out_of_range() {
        for c in [
            ModelConfig {
                gamma_aes: 1.1,
                ..Default::default()
            },
            ModelConfig {
                gamma_lm: -0.1,
                ..Default::default()
            },
            ModelConfig {
                score_min: 20.0,
                score_max: 1.0,
                ..Default::default()
            },
            ModelConfig {
                ged_threshold: 1.0,
                ..Default::default()
            },
            ModelConfig {
                hidden_dim: 0,
                ..Default::default()
            },
        ] {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn lm_cap() {
        let c = ModelConfig {
            lm_vocab_cap: Some(50),
            ..Default::default()
        };
        assert_eq!(c.lm_classes(20), 20);
        assert_eq!(c.lm_classes(500), 50);
        assert_eq!(ModelConfig::default().lm_classes(500), 500);
    }
}
