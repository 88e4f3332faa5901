//! Retrieval-quality and parse-quality metrics.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{strip_subtype, Genre, Sentence, Token, Treebank};
use crate::retrieval::{jaccard, KnowledgeBase, RetrievalError, RetrievalResult, Strategy};

/// Default CLAS exclusions (CoNLL 2018 shared task convention).
pub const FUNCTIONAL_RELATIONS: [&str; 8] = ["aux", "case", "cc", "clf", "cop", "det", "mark", "punct"];

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no queries to evaluate")]
    NoQueries,
    #[error("{queries} queries but {retrievals} retrieval results")]
    RetrievalCount { queries: usize, retrievals: usize },
    #[error("query {0:?} has no retrieved sentences")]
    NoHits(String),
    #[error("gold has {gold} sentences, system has {system}")]
    SentenceCount { gold: usize, system: usize },
    #[error("sentence {index}: gold sent_id {gold:?} but system sent_id {system:?}")]
    SentIdMismatch {
        index: usize,
        gold: String,
        system: String,
    },
    #[error("sentence {sent_id:?}: tokenization differs ({detail})")]
    TokenMismatch { sent_id: String, detail: String },
    #[error("CLAS needs a non-empty functional relation set")]
    NoFunctionalRelations,
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        };
        Some(Self { mean, std })
    }
}

fn pair_values(
    queries: &[Sentence],
    retrievals: &[RetrievalResult],
    kb: &KnowledgeBase,
    metric: impl Fn(&Sentence, usize) -> f64,
) -> Result<Vec<f64>, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    if queries.len() != retrievals.len() {
        return Err(EvalError::RetrievalCount {
            queries: queries.len(),
            retrievals: retrievals.len(),
        });
    }
    let mut values = Vec::new();
    for (q, r) in queries.iter().zip(retrievals) {
        if r.hits.is_empty() {
            return Err(EvalError::NoHits(q.sent_id.clone()));
        }
        for hit in &r.hits {
            if hit.index >= kb.len() {
                return Err(RetrievalError::IndexOutOfRange {
                    index: hit.index,
                    len: kb.len(),
                }
                .into());
            }
            values.push(metric(q, hit.index));
        }
    }
    Ok(values)
}

pub(crate) fn length_diff_values(
    queries: &[Sentence],
    retrievals: &[RetrievalResult],
    kb: &KnowledgeBase,
) -> Result<Vec<f64>, EvalError> {
    pair_values(queries, retrievals, kb, |q, i| {
        q.len().abs_diff(kb.features()[i].structural.length) as f64
    })
}

pub(crate) fn pos_overlap_values(
    queries: &[Sentence],
    retrievals: &[RetrievalResult],
    kb: &KnowledgeBase,
) -> Result<Vec<f64>, EvalError> {
    pair_values(queries, retrievals, kb, |q, i| {
        jaccard(&crate::retrieval::unique_pos(q), &kb.features()[i].unique_pos)
    })
}

/// Mean absolute length difference over every (query, hit) pair.
pub fn length_diff(
    queries: &[Sentence],
    retrievals: &[RetrievalResult],
    kb: &KnowledgeBase,
) -> Result<MeanStd, EvalError> {
    let values = length_diff_values(queries, retrievals, kb)?;
    Ok(MeanStd::of(&values).expect("non-empty"))
}

/// Mean Jaccard coefficient of unique-POS sets over every (query, hit) pair.
pub fn pos_overlap(
    queries: &[Sentence],
    retrievals: &[RetrievalResult],
    kb: &KnowledgeBase,
) -> Result<MeanStd, EvalError> {
    let values = pos_overlap_values(queries, retrievals, kb)?;
    Ok(MeanStd::of(&values).expect("non-empty"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub dataset: String,
    pub strategy: Strategy,
    pub len_diff_mean: f64,
    pub len_diff_std: f64,
    pub pos_overlap_mean: f64,
    pub pos_overlap_std: f64,
    pub query_count: usize,
    pub k: usize,
}

/// Retrieve for every query and summarize. With `exclude_self`, a query that
/// is itself in the KB (same sent_id) never retrieves itself.
pub fn run_retrieval(
    kb: &KnowledgeBase,
    queries: &[Sentence],
    strategy: Strategy,
    k: usize,
    exclude_self: bool,
) -> Result<Vec<RetrievalResult>, EvalError> {
    queries
        .iter()
        .map(|q| {
            let exclude = if exclude_self {
                kb.position_of(&q.sent_id)
            } else {
                None
            };
            Ok(kb.retrieve(q, strategy, k, exclude)?)
        })
        .collect()
}

pub fn retrieval_report(
    dataset: &str,
    kb: &KnowledgeBase,
    queries: &[Sentence],
    strategy: Strategy,
    k: usize,
    exclude_self: bool,
) -> Result<RetrievalReport, EvalError> {
    let retrievals = run_retrieval(kb, queries, strategy, k, exclude_self)?;
    let len = length_diff(queries, &retrievals, kb)?;
    let pos = pos_overlap(queries, &retrievals, kb)?;
    Ok(RetrievalReport {
        dataset: dataset.to_string(),
        strategy,
        len_diff_mean: len.mean,
        len_diff_std: len.std,
        pos_overlap_mean: pos.mean,
        pos_overlap_std: pos.std,
        query_count: queries.len(),
        k,
    })
}

pub fn render_retrieval_table(reports: &[RetrievalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:<14} {:>6} {:>3} {:>18} {:>16}",
        "Dataset", "Strategy", "M", "k", "Length Diff", "POS Overlap"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<12} {:<14} {:>6} {:>3} {:>18} {:>16}",
            r.dataset,
            r.strategy.as_str(),
            r.query_count,
            r.k,
            format!("{:.2} ± {:.2}", r.len_diff_mean, r.len_diff_std),
            format!("{:.3} ± {:.3}", r.pos_overlap_mean, r.pos_overlap_std),
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseEvalConfig {
    pub use_subtypes: bool,
    pub functional_relations: BTreeSet<String>,
}

impl Default for ParseEvalConfig {
    fn default() -> Self {
        Self {
            use_subtypes: true,
            functional_relations: FUNCTIONAL_RELATIONS.iter().map(|r| r.to_string()).collect(),
        }
    }
}

impl ParseEvalConfig {
    pub fn with_subtypes(mut self, use_subtypes: bool) -> Self {
        self.use_subtypes = use_subtypes;
        self
    }

    fn labels_match(&self, gold: &str, system: &str) -> bool {
        if self.use_subtypes {
            gold == system
        } else {
            strip_subtype(gold) == strip_subtype(system)
        }
    }

    fn is_content(&self, token: &Token) -> bool {
        !self.functional_relations.contains(token.base_deprel())
    }
}

/// Precision, recall and F1 in percent, and the counts behind them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_items: usize,
    pub system_items: usize,
    pub correct_items: usize,
}

impl Score {
    /// Two empty denominators score 100 (nothing to find, nothing wrong).
    pub fn from_counts(gold_items: usize, system_items: usize, correct_items: usize) -> Self {
        let pct = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                100.0 * num as f64 / den as f64
            }
        };
        let (precision, recall, f1) = if gold_items == 0 && system_items == 0 {
            (100.0, 100.0, 100.0)
        } else {
            let p = pct(correct_items, system_items);
            let r = pct(correct_items, gold_items);
            let f = if gold_items + system_items == 0 {
                0.0
            } else {
                200.0 * correct_items as f64 / (gold_items + system_items) as f64
            };
            (p, r, f)
        };
        Self {
            precision,
            recall,
            f1,
            gold_items,
            system_items,
            correct_items,
        }
    }

    fn add(self, other: Score) -> Self {
        Score::from_counts(
            self.gold_items + other.gold_items,
            self.system_items + other.system_items,
            self.correct_items + other.correct_items,
        )
    }
}

/// Pair up gold and system sentences, requiring identical tokenization.
pub fn align<'a>(
    gold: &'a Treebank,
    system: &'a Treebank,
) -> Result<Vec<(&'a Sentence, &'a Sentence)>, EvalError> {
    if gold.len() != system.len() {
        return Err(EvalError::SentenceCount {
            gold: gold.len(),
            system: system.len(),
        });
    }
    gold.sentences
        .iter()
        .zip(&system.sentences)
        .enumerate()
        .map(|(index, (g, s))| {
            if g.sent_id != s.sent_id {
                return Err(EvalError::SentIdMismatch {
                    index,
                    gold: g.sent_id.clone(),
                    system: s.sent_id.clone(),
                });
            }
            check_tokens(g, s)?;
            Ok((g, s))
        })
        .collect()
}

pub(crate) fn check_tokens(gold: &Sentence, system: &Sentence) -> Result<(), EvalError> {
    if gold.len() != system.len() {
        return Err(EvalError::TokenMismatch {
            sent_id: gold.sent_id.clone(),
            detail: format!("{} gold tokens vs {} system tokens", gold.len(), system.len()),
        });
    }
    for (g, s) in gold.tokens.iter().zip(&system.tokens) {
        if g.form != s.form {
            return Err(EvalError::TokenMismatch {
                sent_id: gold.sent_id.clone(),
                detail: format!("token {}: {:?} vs {:?}", g.id, g.form, s.form),
            });
        }
    }
    Ok(())
}

fn las_counts(pairs: &[(&Sentence, &Sentence)], cfg: &ParseEvalConfig) -> Score {
    let mut total = 0;
    let mut correct = 0;
    for (g, s) in pairs {
        for (gt, st) in g.tokens.iter().zip(&s.tokens) {
            total += 1;
            if gt.head == st.head && cfg.labels_match(&gt.deprel, &st.deprel) {
                correct += 1;
            }
        }
    }
    Score::from_counts(total, total, correct)
}

fn clas_counts(pairs: &[(&Sentence, &Sentence)], cfg: &ParseEvalConfig) -> Score {
    let (mut gold_items, mut system_items, mut correct) = (0, 0, 0);
    for (g, s) in pairs {
        for (gt, st) in g.tokens.iter().zip(&s.tokens) {
            let gold_content = cfg.is_content(gt);
            gold_items += usize::from(gold_content);
            system_items += usize::from(cfg.is_content(st));
            if gold_content && gt.head == st.head && cfg.labels_match(&gt.deprel, &st.deprel) {
                correct += 1;
            }
        }
    }
    Score::from_counts(gold_items, system_items, correct)
}

/// Labeled attachment score over all surface tokens.
pub fn las(gold: &Treebank, system: &Treebank, cfg: &ParseEvalConfig) -> Result<Score, EvalError> {
    Ok(las_counts(&align(gold, system)?, cfg))
}

/// Content-word labeled attachment score.
pub fn clas(gold: &Treebank, system: &Treebank, cfg: &ParseEvalConfig) -> Result<Score, EvalError> {
    if cfg.functional_relations.is_empty() {
        return Err(EvalError::NoFunctionalRelations);
    }
    Ok(clas_counts(&align(gold, system)?, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    Las,
    Clas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseEvalCell {
    pub metric: Metric,
    pub subtypes: bool,
    #[serde(flatten)]
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseEvalRow {
    /// `poetry`, `prose`, `other`, `unlabeled`, or `combined`.
    pub genre: String,
    pub sentences: usize,
    pub cells: Vec<ParseEvalCell>,
}

impl ParseEvalRow {
    pub fn cell(&self, metric: Metric, subtypes: bool) -> &ParseEvalCell {
        self.cells
            .iter()
            .find(|c| c.metric == metric && c.subtypes == subtypes)
            .expect("every row carries all four cells")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseEvalReport {
    pub rows: Vec<ParseEvalRow>,
}

impl ParseEvalReport {
    pub fn row(&self, genre: &str) -> Option<&ParseEvalRow> {
        self.rows.iter().find(|r| r.genre == genre)
    }

    pub fn combined(&self) -> &ParseEvalRow {
        self.row("combined").expect("combined row always present")
    }

    /// Table with subtypes / without subtypes column groups.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>6} | {:^17} | {:^17}",
            "", "", "With subtypes", "No subtypes"
        );
        let _ = writeln!(
            out,
            "{:<10} {:>6} | {:>8} {:>8} | {:>8} {:>8}",
            "Genre", "Sents", "CLAS", "LAS", "CLAS", "LAS"
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:>6} | {:>8.2} {:>8.2} | {:>8.2} {:>8.2}",
                row.genre,
                row.sentences,
                row.cell(Metric::Clas, true).score.f1,
                row.cell(Metric::Las, true).score.f1,
                row.cell(Metric::Clas, false).score.f1,
                row.cell(Metric::Las, false).score.f1,
            );
        }
        out
    }
}

fn genre_label(genre: Option<Genre>) -> &'static str {
    genre.map_or("unlabeled", Genre::as_str)
}

/// LAS and CLAS, with and without subtypes, per gold genre plus combined.
pub fn evaluate_parse(
    gold: &Treebank,
    system: &Treebank,
    functional_relations: &BTreeSet<String>,
) -> Result<ParseEvalReport, EvalError> {
    if functional_relations.is_empty() {
        return Err(EvalError::NoFunctionalRelations);
    }
    let pairs = align(gold, system)?;
    let mut genres: Vec<Option<Genre>> = pairs.iter().map(|(g, _)| g.genre).collect();
    genres.sort();
    genres.dedup();

    let grid = |subset: &[(&Sentence, &Sentence)]| -> Vec<ParseEvalCell> {
        let mut cells = Vec::with_capacity(4);
        for subtypes in [true, false] {
            let cfg = ParseEvalConfig {
                use_subtypes: subtypes,
                functional_relations: functional_relations.clone(),
            };
            cells.push(ParseEvalCell {
                metric: Metric::Las,
                subtypes,
                score: las_counts(subset, &cfg),
            });
            cells.push(ParseEvalCell {
                metric: Metric::Clas,
                subtypes,
                score: clas_counts(subset, &cfg),
            });
        }
        cells
    };

    let mut rows: Vec<ParseEvalRow> = genres
        .iter()
        .map(|genre| {
            let subset: Vec<_> = pairs.iter().copied().filter(|(g, _)| g.genre == *genre).collect();
            ParseEvalRow {
                genre: genre_label(*genre).to_string(),
                sentences: subset.len(),
                cells: grid(&subset),
            }
        })
        .collect();

    let mut combined = ParseEvalRow {
        genre: "combined".to_string(),
        sentences: pairs.len(),
        cells: grid(&[]),
    };
    for cell in &mut combined.cells {
        cell.score = rows
            .iter()
            .map(|r| r.cell(cell.metric, cell.subtypes).score)
            .fold(Score::from_counts(0, 0, 0), Score::add);
    }
    rows.push(combined);
    Ok(ParseEvalReport { rows })
}
