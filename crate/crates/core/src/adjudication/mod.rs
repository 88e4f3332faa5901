//! Gold-vs-system adjudication: divergences, blind A/B items, error taxonomy,
//! consensus tables and inter-annotator agreement.

mod agreement;
mod blind;
mod consensus;
mod divergence;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agreement::{agreement, cohen_kappa, AgreementReport, AgreementStats, ConfusionMatrix};
pub use blind::{make_blind_items, BlindItem, BlindRow, ItemSecret, SecretMapping, Side};
pub use consensus::{
    consensus_report, full_report, marginals, AdjudicationReport, AnnotatorMarginals,
    ConsensusReport, GenreBreakdown, LabelConfusion, TaxonomyRow,
};
pub use divergence::{
    classify_error, extract_divergences, sample_items, Divergence, ItemGroup, TaxonomyCategory,
};

use crate::evaluation::EvalError;

#[derive(Debug, Error, PartialEq)]
pub enum AdjudicationError {
    #[error(transparent)]
    Alignment(#[from] EvalError),
    #[error("requested {requested} items but only {available} sentences diverge")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("token {token_id} of {sent_id:?} does not diverge")]
    NotDivergent { sent_id: String, token_id: usize },
    #[error("the two verdict lists cover different items ({0})")]
    MismatchedItems(String),
    #[error("annotator {annotator:?} has two verdicts for item {item_id:?}")]
    DuplicateVerdict { annotator: String, item_id: String },
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("sentence {0:?} missing from treebank")]
    MissingSentence(String),
}

/// Which annotation a verdict or an error is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Gold,
    System,
}

/// A verdict in gold/system terms, after the blind mapping is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Choice {
    GoldBetter,
    SystemBetter,
    BothWrong,
    Undecidable,
    DontKnow,
}

impl Choice {
    /// Matrix order: Gold, System, Both wrong, Undecidable, Don't know.
    pub const ALL: [Choice; 5] = [
        Choice::GoldBetter,
        Choice::SystemBetter,
        Choice::BothWrong,
        Choice::Undecidable,
        Choice::DontKnow,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Choice::GoldBetter => "Gold better",
            Choice::SystemBetter => "System better",
            Choice::BothWrong => "Both wrong",
            Choice::Undecidable => "Undecidable",
            Choice::DontKnow => "Don't know",
        }
    }

    pub fn is_decided(self) -> bool {
        matches!(self, Choice::GoldBetter | Choice::SystemBetter)
    }
}

/// What an annotator clicks: expressed in A/B terms only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AbChoice {
    #[serde(rename = "A-better")]
    ABetter,
    #[serde(rename = "B-better")]
    BBetter,
    BothWrong,
    Undecidable,
    DontKnow,
}

impl AbChoice {
    pub fn resolve(self, gold_side: Side) -> Choice {
        let picked = match self {
            AbChoice::ABetter => Side::A,
            AbChoice::BBetter => Side::B,
            AbChoice::BothWrong => return Choice::BothWrong,
            AbChoice::Undecidable => return Choice::Undecidable,
            AbChoice::DontKnow => return Choice::DontKnow,
        };
        if picked == gold_side {
            Choice::GoldBetter
        } else {
            Choice::SystemBetter
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub item_id: String,
    pub annotator_id: String,
    pub choice: Choice,
    pub timestamp: String,
}

impl Verdict {
    pub fn new(item_id: impl Into<String>, annotator_id: impl Into<String>, choice: Choice) -> Self {
        Self {
            item_id: item_id.into(),
            annotator_id: annotator_id.into(),
            choice,
            timestamp: String::new(),
        }
    }
}
