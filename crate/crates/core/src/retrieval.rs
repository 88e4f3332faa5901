//! Similar-sentence retrieval over a knowledge-base treebank.
//!
//! Three scorers are available:
//!
//! * [`Strategy::TfIdf`]: cosine over TF-IDF vectors of lowercased word forms.
//! * [`Strategy::Structural`]: `0.33 * f_len + 0.33 * f_bi + 0.34 * f_tri`, where
//!   `f_len` is the normalized length similarity and `f_bi`/`f_tri` are Jaccard
//!   coefficients over the sets of POS bigrams and trigrams.
//! * [`Strategy::Morphological`]: cosine over TF-IDF vectors of `UPOS|FEATS` terms.
//!
//! TF-IDF weights use raw term counts and `idf = ln((1 + N) / (1 + df)) + 1`, with
//! every stored vector L2-normalized so cosine is a plain dot product.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{pos_sequence, Sentence, Treebank};

pub const LENGTH_WEIGHT: f64 = 0.33;
pub const BIGRAM_WEIGHT: f64 = 0.33;
pub const TRIGRAM_WEIGHT: f64 = 0.34;

/// Bumped whenever the cache layout or feature definitions change.
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("knowledge base needs at least one non-empty sentence")]
    EmptyKnowledgeBase,
    #[error("sentence length must be at least 1")]
    ZeroLength,
    #[error("query sentence {0:?} has no tokens")]
    EmptyQuery(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("sentence index {index} out of range for knowledge base of {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("knowledge-base cache version {found} does not match expected {expected}")]
    CacheVersion { found: u32, expected: u32 },
    #[error("knowledge-base cache does not match treebank: {0}")]
    CacheMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    TfIdf,
    Structural,
    Morphological,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::TfIdf, Strategy::Morphological, Strategy::Structural];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::TfIdf => "tfidf",
            Strategy::Structural => "structural",
            Strategy::Morphological => "morphological",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tfidf" | "tf-idf" => Ok(Strategy::TfIdf),
            "structural" => Ok(Strategy::Structural),
            "morphological" | "morph" => Ok(Strategy::Morphological),
            _ => Err(format!(
                "unknown strategy {s:?} (expected tfidf, structural or morphological)"
            )),
        }
    }
}

/// `1 - |q - s| / max(q, s)`.
pub fn length_similarity(q_len: usize, s_len: usize) -> Result<f64, RetrievalError> {
    if q_len == 0 || s_len == 0 {
        return Err(RetrievalError::ZeroLength);
    }
    let diff = q_len.abs_diff(s_len) as f64;
    Ok(1.0 - diff / q_len.max(s_len) as f64)
}

/// `|A ∩ B| / |A ∪ B|`, with two empty sets counted as identical.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Set of POS n-grams, each rendered as space-joined tags.
pub fn pos_ngrams(tags: &[&str], n: usize) -> BTreeSet<String> {
    if n == 0 || tags.len() < n {
        return BTreeSet::new();
    }
    tags.windows(n).map(|w| w.join(" ")).collect()
}

pub fn unique_pos(sentence: &Sentence) -> BTreeSet<String> {
    pos_sequence(sentence).into_iter().map(str::to_string).collect()
}

/// Length and POS n-gram features used by the structural scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralFeatures {
    pub length: usize,
    pub bigrams: BTreeSet<String>,
    pub trigrams: BTreeSet<String>,
}

impl StructuralFeatures {
    pub fn of(sentence: &Sentence) -> Self {
        let tags = pos_sequence(sentence);
        Self {
            length: tags.len(),
            bigrams: pos_ngrams(&tags, 2),
            trigrams: pos_ngrams(&tags, 3),
        }
    }

    pub fn similarity(&self, other: &Self) -> Result<f64, RetrievalError> {
        let f_len = length_similarity(self.length, other.length)?;
        let f_bi = jaccard(&self.bigrams, &other.bigrams);
        let f_tri = jaccard(&self.trigrams, &other.trigrams);
        Ok(combine_structural(f_len, f_bi, f_tri))
    }
}

pub fn combine_structural(f_len: f64, f_bi: f64, f_tri: f64) -> f64 {
    (LENGTH_WEIGHT * f_len + BIGRAM_WEIGHT * f_bi + TRIGRAM_WEIGHT * f_tri).clamp(0.0, 1.0)
}

pub fn structural_similarity(q: &Sentence, s: &Sentence) -> Result<f64, RetrievalError> {
    StructuralFeatures::of(q).similarity(&StructuralFeatures::of(s))
}

/// Sparse vector of `(term index, weight)` pairs sorted by term index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseVector(Vec<(u32, f64)>);

impl SparseVector {
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    acc += self.0[i].1 * other.0[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Cosine of two unit (or zero) vectors, clamped to `[0, 1]`.
    pub fn cosine(&self, other: &Self) -> f64 {
        if self.is_zero() || other.is_zero() {
            return 0.0;
        }
        self.dot(other).clamp(0.0, 1.0)
    }
}

/// Vocabulary and IDF table for one term space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpace {
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
    pub doc_count: usize,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl TermSpace {
    fn build(documents: &[Vec<String>]) -> Self {
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in documents {
            let unique: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
            for term in unique {
                *df.entry(term).or_default() += 1;
            }
        }
        let mut terms: Vec<String> = df.keys().map(|t| t.to_string()).collect();
        terms.sort();
        let n = documents.len() as f64;
        let idf = terms
            .iter()
            .map(|t| ((1.0 + n) / (1.0 + df[t.as_str()] as f64)).ln() + 1.0)
            .collect();
        let mut space = Self {
            terms,
            idf,
            doc_count: documents.len(),
            index: HashMap::new(),
        };
        space.reindex();
        space
    }

    fn reindex(&mut self) {
        self.index = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    /// Unit-norm TF-IDF vector of `terms`; out-of-vocabulary terms are dropped.
    pub fn embed<S: AsRef<str>>(&self, terms: &[S]) -> SparseVector {
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for term in terms {
            if let Some(&idx) = self.index.get(term.as_ref()) {
                *counts.entry(idx).or_default() += 1;
            }
        }
        let mut entries: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(idx, tf)| (idx, tf as f64 * self.idf[idx as usize]))
            .collect();
        entries.sort_by_key(|(idx, _)| *idx);
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut entries {
                *w /= norm;
            }
        }
        SparseVector(entries)
    }
}

pub fn form_terms(sentence: &Sentence) -> Vec<String> {
    sentence.tokens.iter().map(|t| t.form.to_lowercase()).collect()
}

pub fn morph_terms(sentence: &Sentence) -> Vec<String> {
    sentence
        .tokens
        .iter()
        .map(|t| format!("{}|{}", t.upos, t.canonical_feats()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceFeatures {
    pub structural: StructuralFeatures,
    pub unique_pos: BTreeSet<String>,
    pub form_vector: SparseVector,
    pub morph_vector: SparseVector,
}

/// Indexed training treebank. Immutable once built.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    treebank: Treebank,
    features: Vec<SentenceFeatures>,
    forms: TermSpace,
    morph: TermSpace,
}

/// On-disk form of the precomputed features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnowledgeBaseCache {
    pub version: u32,
    pub source_label: String,
    pub sentence_ids: Vec<String>,
    pub forms: TermSpace,
    pub morph: TermSpace,
    pub features: Vec<SentenceFeatures>,
}

impl KnowledgeBase {
    /// Index every non-empty sentence of `treebank`.
    pub fn build(treebank: &Treebank) -> Result<Self, RetrievalError> {
        let mut kept = Treebank::new(treebank.source_label.clone());
        kept.sentences = treebank
            .sentences
            .iter()
            .filter(|s| !s.is_empty())
            .cloned()
            .collect();
        if kept.is_empty() {
            return Err(RetrievalError::EmptyKnowledgeBase);
        }
        let form_docs: Vec<Vec<String>> = kept.sentences.iter().map(form_terms).collect();
        let morph_docs: Vec<Vec<String>> = kept.sentences.iter().map(morph_terms).collect();
        let forms = TermSpace::build(&form_docs);
        let morph = TermSpace::build(&morph_docs);
        let features = kept
            .sentences
            .iter()
            .zip(form_docs.iter().zip(&morph_docs))
            .map(|(s, (f, m))| SentenceFeatures {
                structural: StructuralFeatures::of(s),
                unique_pos: unique_pos(s),
                form_vector: forms.embed(f),
                morph_vector: morph.embed(m),
            })
            .collect();
        Ok(Self {
            treebank: kept,
            features,
            forms,
            morph,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn treebank(&self) -> &Treebank {
        &self.treebank
    }

    pub fn sentence(&self, index: usize) -> Option<&Sentence> {
        self.treebank.sentences.get(index)
    }

    pub fn features(&self) -> &[SentenceFeatures] {
        &self.features
    }

    pub fn form_space(&self) -> &TermSpace {
        &self.forms
    }

    pub fn morph_space(&self) -> &TermSpace {
        &self.morph
    }

    fn check_index(&self, index: usize) -> Result<&SentenceFeatures, RetrievalError> {
        self.features.get(index).ok_or(RetrievalError::IndexOutOfRange {
            index,
            len: self.len(),
        })
    }

    pub fn tfidf_similarity(&self, q: &Sentence, index: usize) -> Result<f64, RetrievalError> {
        let stored = self.check_index(index)?;
        Ok(self.forms.embed(&form_terms(q)).cosine(&stored.form_vector))
    }

    pub fn morphological_similarity(
        &self,
        q: &Sentence,
        index: usize,
    ) -> Result<f64, RetrievalError> {
        let stored = self.check_index(index)?;
        Ok(self.morph.embed(&morph_terms(q)).cosine(&stored.morph_vector))
    }

    /// Top `k` sentences for `q`, descending by score with ties broken by
    /// ascending index. `exclude` drops one KB index (leave-one-out runs).
    pub fn retrieve(
        &self,
        q: &Sentence,
        strategy: Strategy,
        k: usize,
        exclude: Option<usize>,
    ) -> Result<RetrievalResult, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        if q.is_empty() {
            return Err(RetrievalError::EmptyQuery(q.sent_id.clone()));
        }
        let candidates = (0..self.len()).filter(|&i| Some(i) != exclude);
        let mut hits: Vec<Hit> = match strategy {
            Strategy::Structural => {
                let query = StructuralFeatures::of(q);
                candidates
                    .map(|index| {
                        let score = query.similarity(&self.features[index].structural)?;
                        Ok(Hit { index, score })
                    })
                    .collect::<Result<_, RetrievalError>>()?
            }
            Strategy::TfIdf => {
                let query = self.forms.embed(&form_terms(q));
                candidates
                    .map(|index| Hit {
                        index,
                        score: query.cosine(&self.features[index].form_vector),
                    })
                    .collect()
            }
            Strategy::Morphological => {
                let query = self.morph.embed(&morph_terms(q));
                candidates
                    .map(|index| Hit {
                        index,
                        score: query.cosine(&self.features[index].morph_vector),
                    })
                    .collect()
            }
        };
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
        hits.truncate(k);
        Ok(RetrievalResult { hits })
    }

    /// Index of the KB sentence carrying `sent_id`, if any.
    pub fn position_of(&self, sent_id: &str) -> Option<usize> {
        self.treebank
            .sentences
            .iter()
            .position(|s| s.sent_id == sent_id)
    }

    pub fn to_cache(&self) -> KnowledgeBaseCache {
        KnowledgeBaseCache {
            version: CACHE_VERSION,
            source_label: self.treebank.source_label.clone(),
            sentence_ids: self.treebank.sentences.iter().map(|s| s.sent_id.clone()).collect(),
            forms: self.forms.clone(),
            morph: self.morph.clone(),
            features: self.features.clone(),
        }
    }

    /// Rebuild from a cache, checking it was produced from `treebank`.
    pub fn from_cache(
        treebank: &Treebank,
        mut cache: KnowledgeBaseCache,
    ) -> Result<Self, RetrievalError> {
        if cache.version != CACHE_VERSION {
            return Err(RetrievalError::CacheVersion {
                found: cache.version,
                expected: CACHE_VERSION,
            });
        }
        let mut kept = Treebank::new(treebank.source_label.clone());
        kept.sentences = treebank
            .sentences
            .iter()
            .filter(|s| !s.is_empty())
            .cloned()
            .collect();
        let ids: Vec<&str> = kept.sentences.iter().map(|s| s.sent_id.as_str()).collect();
        if ids != cache.sentence_ids.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(RetrievalError::CacheMismatch("sentence ids differ".into()));
        }
        if cache.features.len() != kept.len() {
            return Err(RetrievalError::CacheMismatch(format!(
                "{} feature rows for {} sentences",
                cache.features.len(),
                kept.len()
            )));
        }
        cache.forms.reindex();
        cache.morph.reindex();
        Ok(Self {
            treebank: kept,
            features: cache.features,
            forms: cache.forms,
            morph: cache.morph,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub hits: Vec<Hit>,
}

impl RetrievalResult {
    pub fn indices(&self) -> Vec<usize> {
        self.hits.iter().map(|h| h.index).collect()
    }
}
