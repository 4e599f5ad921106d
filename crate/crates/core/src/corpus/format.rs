//! The line-oriented corpus format.
//!
//! ```text
//! # id=essay-1 score=2.2
//! Dear	c
//! Sir	c
//!
//! I	c
//! writting	i
//! ```
//!
//! A header opens each essay; `score` is an exam grade (`1.1`–`5.3`), an
//! integer essay score (`1`–`20`), or `0` for an essay to be dropped. Each
//! following line is `token<TAB>label` with label `c` or `i`; the label may be
//! omitted in unlabeled corpora. A blank line between tokens marks a sentence
//! boundary and becomes the boundary token. A line holding only `<TAB>i` marks
//! a missing word: the error is carried by the next word of the essay.

// The example above uses real tabs, as the format does.
#![allow(clippy::tabs_in_doc_comments)]

use std::fs;
use std::path::Path;

use super::{
    map_exam_score, CorpusError, Essay, ExamScore, Label, BOUNDARY_TOKEN, SCORE_MAX, SCORE_MIN,
};

/// An essay whose labels and score may be absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawEssay {
    pub id: String,
    pub tokens: Vec<String>,
    pub labels: Option<Vec<Label>>,
    pub score: Option<u8>,
    /// 1-based line number of the header.
    pub header_line: usize,
}

impl RawEssay {
    pub fn into_essay(self) -> Result<Essay, CorpusError> {
        let labels = self.labels.ok_or_else(|| CorpusError::Malformed {
            line: self.header_line,
            message: format!("essay {} has no token labels", self.id),
        })?;
        let score = self.score.ok_or_else(|| CorpusError::Malformed {
            line: self.header_line,
            message: format!("essay {} has no score", self.id),
        })?;
        Essay::new(self.id, self.tokens, labels, score)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Slot {
    Given(Label),
    Unlabeled,
    Boundary,
}

struct Builder {
    id: String,
    header_line: usize,
    score: Option<u8>,
    removed: bool,
    tokens: Vec<String>,
    slots: Vec<Slot>,
    pending_boundary: bool,
    pending_missing: bool,
}

impl Builder {
    fn push(&mut self, token: String, slot: Slot) {
        if self.pending_boundary {
            self.tokens.push(BOUNDARY_TOKEN.to_string());
            self.slots.push(Slot::Boundary);
            self.pending_boundary = false;
        }
        let slot = if self.pending_missing && token != BOUNDARY_TOKEN {
            self.pending_missing = false;
            match slot {
                Slot::Unlabeled => Slot::Unlabeled,
                _ => Slot::Given(Label::Incorrect),
            }
        } else {
            slot
        };
        self.tokens.push(token);
        self.slots.push(slot);
    }

    fn finish(mut self) -> Result<Option<RawEssay>, CorpusError> {
        if self.tokens.is_empty() {
            return Err(CorpusError::Malformed {
                line: self.header_line,
                message: format!("essay {} has no tokens", self.id),
            });
        }
        if self.pending_missing {
            // No word follows the gap: the last word carries the error.
            if let Some(i) = self.slots.iter().rposition(|s| *s != Slot::Boundary) {
                if let Slot::Given(_) = self.slots[i] {
                    self.slots[i] = Slot::Given(Label::Incorrect);
                }
            }
        }
        if self.removed {
            return Ok(None);
        }
        let given = self
            .slots
            .iter()
            .filter(|s| matches!(s, Slot::Given(_)))
            .count();
        let unlabeled = self.slots.iter().filter(|s| **s == Slot::Unlabeled).count();
        let labels = if unlabeled == 0 && given > 0 {
            Some(
                self.slots
                    .iter()
                    .map(|s| match s {
                        Slot::Given(l) => *l,
                        _ => Label::Correct,
                    })
                    .collect(),
            )
        } else if given == 0 {
            None
        } else {
            return Err(CorpusError::LabelCountMismatch {
                id: self.id,
                tokens: self.tokens.len(),
                labels: self.slots.len() - unlabeled,
            });
        };
        Ok(Some(RawEssay {
            id: self.id,
            tokens: self.tokens,
            labels,
            score: self.score,
            header_line: self.header_line,
        }))
    }
}

fn is_header(line: &str) -> bool {
    line.starts_with("# ") && !line.contains('\t')
}

fn parse_header(line: &str, line_no: usize) -> Result<Builder, CorpusError> {
    let malformed = |message: String| CorpusError::Malformed {
        line: line_no,
        message,
    };
    let mut id = None;
    let mut score = None;
    let mut removed = false;
    for field in line[1..].split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| malformed(format!("header field {field:?} is not key=value")))?;
        match key {
            "id" if !value.is_empty() => id = Some(value.to_string()),
            "score" => {
                if value.contains('.') || value == "0" {
                    match map_exam_score(value).map_err(|e| malformed(e.to_string()))? {
                        ExamScore::Score(s) => score = Some(s),
                        ExamScore::Removed => removed = true,
                    }
                } else {
                    let s: i64 = value.parse().map_err(|_| {
                        malformed(format!(
                            "score {value:?} is neither an exam grade nor an integer"
                        ))
                    })?;
                    if !(SCORE_MIN as i64..=SCORE_MAX as i64).contains(&s) {
                        return Err(malformed(format!("score {s} outside 1..=20")));
                    }
                    score = Some(s as u8);
                }
            }
            _ => return Err(malformed(format!("unknown header field {field:?}"))),
        }
    }
    let id = id.ok_or_else(|| malformed("header has no id".to_string()))?;
    Ok(Builder {
        id,
        header_line: line_no,
        score,
        removed,
        tokens: Vec::new(),
        slots: Vec::new(),
        pending_boundary: false,
        pending_missing: false,
    })
}

/// Parses a corpus whose labels and scores may be missing.
pub fn parse_raw_corpus_str(text: &str) -> Result<Vec<RawEssay>, CorpusError> {
    let mut essays = Vec::new();
    let mut current: Option<Builder> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if is_header(line) {
            if let Some(done) = current.take() {
                essays.extend(done.finish()?);
            }
            current = Some(parse_header(line, line_no)?);
            continue;
        }
        if line.trim().is_empty() {
            if let Some(b) = current.as_mut() {
                if !b.tokens.is_empty() {
                    b.pending_boundary = true;
                }
            }
            continue;
        }
        let builder = current.as_mut().ok_or_else(|| CorpusError::Malformed {
            line: line_no,
            message: "token line before any essay header".to_string(),
        })?;
        let (token, slot) = match line.split_once('\t') {
            Some((token, code)) => {
                let label =
                    Label::from_code(code.trim()).ok_or_else(|| CorpusError::Malformed {
                        line: line_no,
                        message: format!("label {:?} is not c or i", code.trim()),
                    })?;
                (token, Slot::Given(label))
            }
            None => (line, Slot::Unlabeled),
        };
        if token.is_empty() {
            if slot != Slot::Given(Label::Incorrect) {
                return Err(CorpusError::Malformed {
                    line: line_no,
                    message: "empty token (a missing-word marker must be labeled i)".to_string(),
                });
            }
            builder.pending_missing = true;
            continue;
        }
        builder.push(token.to_string(), slot);
    }
    if let Some(done) = current {
        essays.extend(done.finish()?);
    }
    Ok(essays)
}

/// Parses a fully annotated corpus; exam-score-0 essays are dropped.
pub fn parse_corpus_str(text: &str) -> Result<Vec<Essay>, CorpusError> {
    parse_raw_corpus_str(text)?
        .into_iter()
        .map(RawEssay::into_essay)
        .collect()
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Vec<Essay>, CorpusError> {
    parse_corpus_str(&read(path.as_ref())?)
}

pub fn parse_raw_corpus(path: impl AsRef<Path>) -> Result<Vec<RawEssay>, CorpusError> {
    parse_raw_corpus_str(&read(path.as_ref())?)
}

fn write_tokens(out: &mut String, tokens: &[String], labels: Option<&[Label]>) {
    for (i, token) in tokens.iter().enumerate() {
        let label = labels.map(|l| l[i]);
        let is_boundary = |j: usize| tokens[j] == BOUNDARY_TOKEN;
        let blank = is_boundary(i)
            && label != Some(Label::Incorrect)
            && i > 0
            && i + 1 < tokens.len()
            && !is_boundary(i - 1)
            && !is_boundary(i + 1);
        if blank {
            out.push('\n');
            continue;
        }
        out.push_str(token);
        if let Some(l) = label {
            out.push('\t');
            out.push(l.as_char());
        }
        out.push('\n');
    }
}

/// Writes essays in corpus format with integer scores.
pub fn serialize_corpus(essays: &[Essay]) -> String {
    let mut out = String::new();
    for e in essays {
        out.push_str(&format!("# id={} score={}\n", e.id, e.gold_score));
        write_tokens(&mut out, &e.tokens, Some(&e.labels));
        out.push('\n');
    }
    out
}

pub fn serialize_raw_corpus(essays: &[RawEssay]) -> String {
    let mut out = String::new();
    for e in essays {
        match e.score {
            Some(s) => out.push_str(&format!("# id={} score={}\n", e.id, s)),
            None => out.push_str(&format!("# id={}\n", e.id)),
        }
        write_tokens(&mut out, &e.tokens, e.labels.as_deref());
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: impl AsRef<Path>, essays: &[Essay]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, serialize_corpus(essays)).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}
