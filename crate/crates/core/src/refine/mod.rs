//! LLM refinement of baseline parses.
//!
//! The model sees the annotation guidelines, optionally the `k` structurally
//! closest training sentences, the baseline parse and the input sentence, and
//! answers with a CoNLL-U block. Only HEAD and DEPREL are taken from the answer;
//! an answer that fails validation is retried, and after the last retry the
//! baseline is kept.

mod backend;
mod pipeline;
mod prompt;
mod validate;

use thiserror::Error;

pub use backend::{
    BackendError, HttpBackend, HttpBackendConfig, LlmBackend, MockBackend, MockRule, MockScript,
    TokenEdit,
};
pub use pipeline::{
    refine_sentence, refine_treebank, RefineManifest, RefineOutcome, RefineRun, SentenceRecord,
};
pub use prompt::{build_prompt, extract_section, BASELINE_HEADER, INPUT_HEADER, PROMPT_TEMPLATE};
pub use validate::{validate_output, Validated, ValidationError};

use crate::evaluation::EvalError;
use crate::retrieval::RetrievalError;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_MAX_RETRIES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefineMode {
    /// Guidelines and baseline only.
    GuidelinesOnly,
    /// Guidelines, baseline and retrieved training examples.
    WithRetrieval,
}

impl std::str::FromStr for RefineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "guidelines-only" => Ok(RefineMode::GuidelinesOnly),
            "with-retrieval" => Ok(RefineMode::WithRetrieval),
            _ => Err(format!(
                "unknown mode {s:?} (expected guidelines-only or with-retrieval)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RefineConfig {
    pub mode: RefineMode,
    pub k: usize,
    pub max_retries: usize,
    pub guidelines_text: String,
}

impl RefineConfig {
    pub fn new(mode: RefineMode, guidelines_text: impl Into<String>) -> Self {
        Self {
            mode,
            k: DEFAULT_K,
            max_retries: DEFAULT_MAX_RETRIES,
            guidelines_text: guidelines_text.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("guidelines text is empty")]
    EmptyGuidelines,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("with-retrieval mode needs a knowledge base")]
    MissingKnowledgeBase,
    #[error("{given} examples given, expected {expected}")]
    ExampleCount { given: usize, expected: usize },
    #[error("input and baseline are not aligned: {0}")]
    Alignment(#[from] EvalError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}
