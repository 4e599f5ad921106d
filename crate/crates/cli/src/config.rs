//! Line-oriented `key=value` run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use ged_aes::corpus::SyntheticConfig;
use ged_aes::model::{config_pairs, set_config_field, ModelConfig};
use ged_aes::training::{default_grid, Selection, TrainConfig};

use crate::CliError;

/// Reads `key=value` lines; `#` starts a comment line.
pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_pairs(&text).map_err(|m| CliError::Config(format!("{}: {m}", path.display())))
}

pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {value:?}")))
}

fn path_or_none(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

/// Everything a train, sweep or eval run reads from its configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub seed: u64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub selection: Selection,
    pub min_count: usize,
    pub grid: Vec<f64>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        RunConfig {
            model: t.model,
            train: None,
            dev: None,
            test: None,
            embeddings: None,
            seed: t.seed,
            batch_size: t.batch_size,
            patience: t.patience,
            max_epochs: t.max_epochs,
            selection: t.selection,
            min_count: 1,
            grid: default_grid(),
            out: None,
        }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if set_config_field(&mut self.model, key, value)
            .map_err(|e| CliError::Config(e.to_string()))?
        {
            return Ok(());
        }
        match key {
            "train" => self.train = path_or_none(value),
            "dev" => self.dev = path_or_none(value),
            "test" => self.test = path_or_none(value),
            "embeddings" => self.embeddings = path_or_none(value),
            "out" => self.out = path_or_none(value),
            "seed" => self.seed = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            "selection" => {
                self.selection = Selection::parse(value).ok_or_else(|| {
                    CliError::Config(format!(
                        "selection: expected auto, f0.5 or qwk, got {value:?}"
                    ))
                })?
            }
            "grid" => {
                self.grid = value
                    .split(',')
                    .map(|v| parse::<f64>(key, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            _ => return Err(CliError::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Defaults, then the config file, then flag overrides.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            for (k, v) in read_pairs(path)? {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.model
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.patience == 0 || cfg.batch_size == 0 || cfg.max_epochs == 0 || cfg.min_count == 0 {
            return Err(CliError::Config(
                "patience, batch_size, max_epochs and min_count must be at least 1".into(),
            ));
        }
        if let Some(g) = cfg.grid.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(CliError::Config(format!("grid value {g} outside [0, 1]")));
        }
        Ok(cfg)
    }

    /// The path stored under `field`, which must be set and exist.
    pub fn require(&self, field: &str) -> Result<&Path, CliError> {
        let p = match field {
            "train" => &self.train,
            "dev" => &self.dev,
            "test" => &self.test,
            "embeddings" => &self.embeddings,
            "out" => &self.out,
            _ => unreachable!("not a path field: {field}"),
        };
        let p = p.as_deref().ok_or_else(|| {
            CliError::Config(format!(
                "missing required field `{field}` (set {field}=PATH or --{field})"
            ))
        })?;
        if field != "out" && !p.exists() {
            return Err(CliError::Config(format!(
                "`{field}` path {} does not exist",
                p.display()
            )));
        }
        Ok(p)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            model: self.model.clone(),
            batch_size: self.batch_size,
            patience: self.patience,
            max_epochs: self.max_epochs,
            selection: self.selection,
            seed: self.seed,
        }
    }

    /// Canonical snapshot: every key, one per line, in a fixed order.
    pub fn snapshot(&self) -> String {
        let mut lines: Vec<String> = config_pairs(&self.model)
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let grid: Vec<String> = self.grid.iter().map(|g| g.to_string()).collect();
        lines.extend([
            format!("train={}", show_path(&self.train)),
            format!("dev={}", show_path(&self.dev)),
            format!("test={}", show_path(&self.test)),
            format!("embeddings={}", show_path(&self.embeddings)),
            format!("out={}", show_path(&self.out)),
            format!("seed={}", self.seed),
            format!("batch_size={}", self.batch_size),
            format!("patience={}", self.patience),
            format!("max_epochs={}", self.max_epochs),
            format!("selection={}", self.selection.name()),
            format!("min_count={}", self.min_count),
            format!("grid={}", grid.join(",")),
        ]);
        lines.join("\n") + "\n"
    }
}

pub fn set_synthetic(cfg: &mut SyntheticConfig, key: &str, value: &str) -> Result<(), CliError> {
    match key {
        "vocab_size" => cfg.vocab_size = parse(key, value)?,
        "error_variants" => cfg.error_variants = parse(key, value)?,
        "train_essays" => cfg.train_essays = parse(key, value)?,
        "dev_essays" => cfg.dev_essays = parse(key, value)?,
        "test_essays" => cfg.test_essays = parse(key, value)?,
        "min_len" => cfg.min_len = parse(key, value)?,
        "max_len" => cfg.max_len = parse(key, value)?,
        "error_rate_min" => cfg.error_rate_min = parse(key, value)?,
        "error_rate_max" => cfg.error_rate_max = parse(key, value)?,
        "score_noise" => cfg.score_noise = parse(key, value)?,
        "agreement_classes" => cfg.agreement_classes = parse(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        // Shared with run configs; handled by the caller.
        "out" => {}
        _ => {
            return Err(CliError::Config(format!(
                "unknown synthetic config key {key:?}"
            )))
        }
    }
    Ok(())
}

pub fn synthetic_snapshot(cfg: &SyntheticConfig) -> String {
    format!(
        "vocab_size={}\nerror_variants={}\ntrain_essays={}\ndev_essays={}\ntest_essays={}\nmin_len={}\nmax_len={}\n\
         error_rate_min={}\nerror_rate_max={}\nscore_noise={}\nagreement_classes={}\nseed={}\n",
        cfg.vocab_size,
        cfg.error_variants,
        cfg.train_essays,
        cfg.dev_essays,
        cfg.test_essays,
        cfg.min_len,
        cfg.max_len,
        cfg.error_rate_min,
        cfg.error_rate_max,
        cfg.score_noise,
        cfg.agreement_classes,
        cfg.seed
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "# comment\ngamma_aes=0.3\nseed=4\nhidden_dim=12\n").unwrap();
        let cfg = RunConfig::resolve(Some(&path), &[("seed".into(), "9".into())]).unwrap();
        assert_eq!(cfg.model.gamma_aes, 0.3);
        assert_eq!(cfg.model.hidden_dim, 12);
        assert_eq!(cfg.seed, 9);
        assert!(cfg.snapshot().contains("\nseed=9\n"));
    }

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("grid", "0,0.5,1").unwrap();
        cfg.set("lm_vocab_cap", "40").unwrap();
        cfg.set("train", "a.txt").unwrap();
        let mut back = RunConfig::default();
        for (k, v) in parse_pairs(&cfg.snapshot()).unwrap() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("gamma", "0.1").is_err());
        assert!(cfg.set("seed", "x").is_err());
        let bad = RunConfig::resolve(None, &[("gamma_aes".into(), "2".into())]);
        assert!(matches!(bad, Err(CliError::Config(_))));
        let err = RunConfig::default().require("dev").unwrap_err();
        assert!(err.to_string().contains("dev"));
    }
}
