//! Retrieval-augmented refinement of dependency parses, with evaluation and
//! double-blind adjudication tooling around it.
//!
//! * [`conllu`]: treebank object model, parser and serializer.
//! * [`retrieval`]: knowledge base and the TF-IDF, structural and morphological scorers.
//! * [`evaluation`]: LenDiff / POSOverlap retrieval metrics and LAS / CLAS scoring.
//! * [`refine`]: prompt assembly, LLM backends, response validation and the batch driver.
//! * [`adjudication`]: divergence extraction, blind A/B items, error taxonomy and agreement.
//! * [`campaign`]: durable state of an annotation campaign (verdict log, cursors, reports).

pub mod adjudication;
pub mod campaign;
pub mod conllu;
pub mod evaluation;
pub mod refine;
pub mod retrieval;

#[cfg(test)]
pub(crate) mod testutil;

pub use conllu::{parse_conllu, serialize, ConlluError, Genre, Sentence, Token, Treebank};
pub use retrieval::{KnowledgeBase, RetrievalResult, Strategy};
