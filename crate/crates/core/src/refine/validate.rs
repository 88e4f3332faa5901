use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::conllu::{parse_block, ConlluError, Sentence};

pub const NEEDS_COUNCIL_COMMENT: &str = "# needs_council = true";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("no CoNLL-U block")]
    NoBlock,
    #[error("head out of range: {0}")]
    HeadOutOfRange(ConlluError),
    #[error("malformed CoNLL-U block: {0}")]
    Malformed(ConlluError),
    #[error("token count mismatch: expected {expected}, found {found}")]
    TokenCount { expected: usize, found: usize },
    #[error("token {id}: expected form {expected:?}, found {found:?}")]
    FormMismatch {
        id: usize,
        expected: String,
        found: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validated {
    pub refined: Sentence,
    pub needs_council: bool,
}

fn council_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"(?i)^\s*#\s*needs_council\s*=\s*true\s*$").unwrap())
}

fn is_token_line(line: &str) -> bool {
    line.contains('\t') && line.starts_with(|c: char| c.is_ascii_digit())
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// First run of comment/token lines containing at least one token line.
fn first_block(raw: &str) -> Option<Vec<(usize, &str)>> {
    let mut current = Vec::new();
    let mut has_token = false;
    for (idx, line) in raw.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if is_fence(line) {
            if has_token {
                break;
            }
            current.clear();
            continue;
        }
        if is_token_line(line) {
            current.push((idx + 1, line));
            has_token = true;
        } else if line.trim_start().starts_with('#') && !has_token {
            current.push((idx + 1, line.trim()));
        } else if has_token {
            break;
        } else {
            current.clear();
        }
    }
    has_token.then_some(current)
}

/// Check an LLM answer against the input sentence.
///
/// Only HEAD and DEPREL are taken from the answer; every other column comes
/// from `input`. Nothing inside the block is repaired.
pub fn validate_output(raw: &str, input: &Sentence) -> Result<Validated, ValidationError> {
    let needs_council = raw.lines().any(|l| council_pattern().is_match(l));
    let lines = first_block(raw).ok_or(ValidationError::NoBlock)?;
    let parsed = parse_block(&lines, &input.sent_id, input.genre).map_err(|e| match e {
        ConlluError::HeadOutOfRange { .. } => ValidationError::HeadOutOfRange(e),
        other => ValidationError::Malformed(other),
    })?;
    if parsed.len() != input.len() {
        return Err(ValidationError::TokenCount {
            expected: input.len(),
            found: parsed.len(),
        });
    }
    let mut refined = input.clone();
    for (target, answer) in refined.tokens.iter_mut().zip(&parsed.tokens) {
        if target.form != answer.form {
            return Err(ValidationError::FormMismatch {
                id: target.id,
                expected: target.form.clone(),
                found: answer.form.clone(),
            });
        }
        target.head = answer.head;
        target.deprel = answer.deprel.clone();
    }
    if needs_council && !refined.comments.iter().any(|c| council_pattern().is_match(c)) {
        refined.comments.push(NEEDS_COUNCIL_COMMENT.to_string());
    }
    Ok(Validated {
        refined,
        needs_council,
    })
}
