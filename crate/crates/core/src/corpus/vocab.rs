use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::{CorpusError, Essay};

pub const UNK_TOKEN: &str = "<unk>";
pub const BOUNDARY_TOKEN: &str = "</s>";
pub const UNK_ID: usize = 0;
pub const BOUNDARY_ID: usize = 1;

/// Token ↔ id mapping. Ids 0 and 1 are reserved for the unknown token and
/// the sentence-boundary marker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary from an ordered token list; reserved entries are
    /// prepended unless the list already starts with them.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary {
            index: HashMap::new(),
            tokens: Vec::new(),
        };
        vocab.insert(UNK_TOKEN.to_string());
        vocab.insert(BOUNDARY_TOKEN.to_string());
        for (n, t) in tokens.into_iter().enumerate() {
            let t = t.into();
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(CorpusError::Malformed {
                    line: n + 1,
                    message: format!("vocabulary entry {t:?} is empty or contains whitespace"),
                });
            }
            if (t == UNK_TOKEN && n == UNK_ID) || (t == BOUNDARY_TOKEN && n == BOUNDARY_ID) {
                continue;
            }
            if vocab.index.contains_key(&t) {
                return Err(CorpusError::Malformed {
                    line: n + 1,
                    message: format!("duplicate vocabulary entry {t:?}"),
                });
            }
            vocab.insert(t);
        }
        Ok(vocab)
    }

    fn insert(&mut self, token: String) {
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or [`UNK_ID`] when absent.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// One token per line, in id order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CorpusError> {
        Vocabulary::from_tokens(text.lines())
    }

    /// Hex SHA-256 of [`Vocabulary::to_text`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Keeps tokens seen at least `min_count` times, ordered by descending
/// frequency and then lexicographically.
pub fn build_vocabulary(essays: &[Essay], min_count: usize) -> Result<Vocabulary, CorpusError> {
    if min_count == 0 {
        return Err(CorpusError::BadMinCount);
    }
    if essays.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for e in essays {
        for t in &e.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_count && t != UNK_TOKEN && t != BOUNDARY_TOKEN)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    fn essay(tokens: &[&str]) -> Essay {
        Essay::new(
            "e",
            tokens.iter().map(|s| s.to_string()).collect(),
            vec![Label::Correct; tokens.len()],
            10,
        )
        .unwrap()
    }

    #[test]
    fn min_count_filters() {
        let v = build_vocabulary(&[essay(&["a", "b", "a", "a"])], 2).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.id("a"), 2);
        assert_eq!(v.id("b"), UNK_ID);
        assert!(!v.contains("b"));
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let v = build_vocabulary(&[essay(&["x", "y", "z", "y"])], 1).unwrap();
        for t in ["x", "y", "z"] {
            assert!(v.contains(t));
        }
        assert_eq!(v.token(2), Some("y"));
    }

    #[test]
    fn ties_break_lexicographically() {
        let a = build_vocabulary(&[essay(&["m", "b", "z", "a"])], 1).unwrap();
        let b = build_vocabulary(&[essay(&["z", "a", "m", "b"])], 1).unwrap();
        assert_eq!(&a.tokens()[2..], &["a", "b", "m", "z"]);
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn reserved_ids() {
        let v = build_vocabulary(&[essay(&["a", BOUNDARY_TOKEN, "b"])], 1).unwrap();
        assert_eq!(v.id(UNK_TOKEN), UNK_ID);
        assert_eq!(v.id(BOUNDARY_TOKEN), BOUNDARY_ID);
        assert_eq!(v.id("never-seen"), UNK_ID);
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            build_vocabulary(&[], 1),
            Err(CorpusError::EmptyCorpus)
        ));
        assert!(matches!(
            build_vocabulary(&[essay(&["a"])], 0),
            Err(CorpusError::BadMinCount)
        ));
    }

    #[test]
    fn text_round_trip() {
        let v = build_vocabulary(&[essay(&["q", "r", "r"])], 1).unwrap();
        let back = Vocabulary::from_text(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert!(Vocabulary::from_text("<unk>\n</s>\na\na\n").is_err());
    }
}
