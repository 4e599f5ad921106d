//! On-disk checkpoints: a directory with `manifest.txt` (key=value),
//! `vocab.txt` (one token per line, id order) and `params.bin` (named
//! little-endian f64 tensors).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{LmCombine, ModelConfig, ModelError, ModelParams, PARAM_NAMES};
use crate::autodiff::Tensor;
use crate::corpus::Vocabulary;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const PARAMS_FILE: &str = "params.bin";
const FORMAT: &str = "ged-aes-checkpoint-1";
const MAGIC: &[u8; 8] = b"GEDAES01";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams,
    /// Seed the parameters were created from.
    pub seed: u64,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn integrity(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

/// Key=value lines of every [`ModelConfig`] field.
pub fn config_pairs(config: &ModelConfig) -> Vec<(&'static str, String)> {
    vec![
        ("embedding_dim", config.embedding_dim.to_string()),
        ("hidden_dim", config.hidden_dim.to_string()),
        ("score_min", config.score_min.to_string()),
        ("score_max", config.score_max.to_string()),
        ("gamma_lm", config.gamma_lm.to_string()),
        ("gamma_aes", config.gamma_aes.to_string()),
        ("ged_threshold", config.ged_threshold.to_string()),
        (
            "lm_vocab_cap",
            config
                .lm_vocab_cap
                .map_or_else(|| "full".to_string(), |c| c.to_string()),
        ),
        ("lm_combine", config.lm_combine.name().to_string()),
    ]
}

/// Applies one config key; returns `Ok(false)` for keys that are not model fields.
pub fn set_config_field(
    config: &mut ModelConfig,
    key: &str,
    value: &str,
) -> Result<bool, ModelError> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ModelError> {
        value
            .trim()
            .parse()
            .map_err(|_| ModelError::InvalidConfig(format!("{key}: cannot parse {value:?}")))
    }
    match key {
        "embedding_dim" => config.embedding_dim = num(key, value)?,
        "hidden_dim" => config.hidden_dim = num(key, value)?,
        "score_min" => config.score_min = num(key, value)?,
        "score_max" => config.score_max = num(key, value)?,
        "gamma_lm" => config.gamma_lm = num(key, value)?,
        "gamma_aes" => config.gamma_aes = num(key, value)?,
        "ged_threshold" => config.ged_threshold = num(key, value)?,
        "lm_vocab_cap" => {
            config.lm_vocab_cap = match value.trim() {
                "full" | "none" => None,
                v => Some(num(key, v)?),
            }
        }
        "lm_combine" => {
            config.lm_combine = LmCombine::parse(value.trim()).ok_or_else(|| {
                ModelError::InvalidConfig(format!(
                    "lm_combine: expected mean or sum, got {value:?}"
                ))
            })?
        }
        _ => return Ok(false),
    }
    Ok(true)
}

fn encode_params(params: &ModelParams) -> Vec<u8> {
    let mut out =
        Vec::with_capacity(MAGIC.len() + params.element_count() * 8 + 64 * PARAM_NAMES.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(PARAM_NAMES.len() as u32).to_le_bytes());
    for (name, t) in params.named() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'b> {
    bytes: &'b [u8],
    pos: usize,
}

impl<'b> Reader<'b> {
    fn take(&mut self, n: usize) -> Result<&'b [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| integrity("params.bin is truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode_params(bytes: &[u8]) -> Result<Vec<(String, Tensor)>, ModelError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(integrity("params.bin has a bad header"));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| integrity("tensor name is not UTF-8"))?
            .to_string();
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = r.take(
            n.checked_mul(8)
                .ok_or_else(|| integrity("tensor too large"))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| integrity(format!("tensor {name}: {e}")))?;
        out.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(integrity("params.bin has trailing bytes"));
    }
    Ok(out)
}

fn shape_text(shape: &[usize]) -> String {
    shape
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

impl Checkpoint {
    pub fn manifest(&self, params_bytes: &[u8]) -> String {
        let mut lines = vec![format!("format={FORMAT}")];
        lines.extend(
            config_pairs(&self.config)
                .into_iter()
                .map(|(k, v)| format!("{k}={v}")),
        );
        lines.push(format!("vocab_size={}", self.vocab.len()));
        lines.push(format!("vocab_hash={}", self.vocab.hash()));
        lines.push(format!("seed={}", self.seed));
        lines.push(format!("params_sha256={}", sha256_hex(params_bytes)));
        for (name, t) in self.params.named() {
            lines.push(format!("tensor.{name}={}", shape_text(t.shape())));
        }
        lines.join("\n") + "\n"
    }

    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        let io = |e| ModelError::Io {
            path: dir.to_path_buf(),
            source: e,
        };
        fs::create_dir_all(dir).map_err(io)?;
        let bytes = encode_params(&self.params);
        let write = |name: &str, data: &[u8]| {
            let path = dir.join(name);
            fs::write(&path, data).map_err(|source| ModelError::Io { path, source })
        };
        write(PARAMS_FILE, &bytes)?;
        write(VOCAB_FILE, self.vocab.to_text().as_bytes())?;
        write(MANIFEST_FILE, self.manifest(&bytes).as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read(&path).map_err(|source| ModelError::Io { path, source })
        };
        let manifest = String::from_utf8(read(MANIFEST_FILE)?)
            .map_err(|_| integrity("manifest is not UTF-8"))?;
        let mut kv = BTreeMap::new();
        for (n, line) in manifest.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| integrity(format!("manifest line {}: expected key=value", n + 1)))?;
            kv.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| integrity(format!("manifest lacks {k}")))
        };
        if get("format")? != FORMAT {
            return Err(integrity(format!(
                "unsupported checkpoint format {:?}",
                get("format")?
            )));
        }

        let bytes = read(PARAMS_FILE)?;
        if sha256_hex(&bytes) != get("params_sha256")? {
            return Err(integrity("params.bin does not match its recorded checksum"));
        }
        let vocab_text = String::from_utf8(read(VOCAB_FILE)?)
            .map_err(|_| integrity("vocab.txt is not UTF-8"))?;
        let vocab =
            Vocabulary::from_text(&vocab_text).map_err(|e| integrity(format!("vocab.txt: {e}")))?;
        if vocab.hash() != get("vocab_hash")? {
            return Err(integrity(
                "vocab.txt does not match the recorded vocabulary hash",
            ));
        }

        let mut config = ModelConfig::default();
        for (key, _) in config_pairs(&ModelConfig::default()) {
            set_config_field(&mut config, key, get(key)?)?;
        }
        config.validate()?;
        let seed = get("seed")?
            .parse()
            .map_err(|_| integrity("manifest seed is not an integer"))?;

        let named = decode_params(&bytes)?;
        let mut tensors = Vec::with_capacity(named.len());
        if named.len() != PARAM_NAMES.len() {
            return Err(integrity(format!(
                "expected {} tensors, found {}",
                PARAM_NAMES.len(),
                named.len()
            )));
        }
        for ((name, t), want) in named.into_iter().zip(PARAM_NAMES) {
            if name != want {
                return Err(integrity(format!("expected tensor {want}, found {name}")));
            }
            if get(&format!("tensor.{name}"))? != shape_text(t.shape()) {
                return Err(integrity(format!(
                    "tensor {name} shape disagrees with the manifest"
                )));
            }
            tensors.push(t);
        }
        let params = ModelParams::from_tensors(&config, vocab.len(), tensors)?;
        Ok(Checkpoint {
            config,
            vocab,
            params,
            seed,
        })
    }

    /// Rejects a vocabulary other than the one the checkpoint was trained with.
    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<(), ModelError> {
        let (expected, found) = (self.vocab.hash(), vocab.hash());
        if expected != found {
            return Err(ModelError::VocabMismatch { expected, found });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let vocab = Vocabulary::from_tokens(["a", "b", "c"]).unwrap();
        let config = ModelConfig {
            embedding_dim: 3,
            hidden_dim: 2,
            gamma_aes: 0.3,
            lm_vocab_cap: Some(4),
            ..Default::default()
        };
        let params = ModelParams::init(&config, vocab.len(), None, 7).unwrap();
        Checkpoint {
            config,
            vocab,
            params,
            seed: 7,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ck = sample();
        ck.save(dir.path()).unwrap();
        let back = Checkpoint::load(dir.path()).unwrap();
        assert_eq!(back, ck);
        for (a, b) in ck.params.tensors().iter().zip(back.params.tensors()) {
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        sample().save(dir.path()).unwrap();
        let path = dir.path().join(PARAMS_FILE);
        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        fs::write(&path, bytes).unwrap();
        let err = Checkpoint::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
    }

    #[test]
    fn vocab_mismatch() {
        let ck = sample();
        let other = Vocabulary::from_tokens(["a", "b", "d"]).unwrap();
        assert!(matches!(
            ck.check_vocab(&other),
            Err(ModelError::VocabMismatch { .. })
        ));
        ck.check_vocab(&ck.vocab.clone()).unwrap();
    }
}
