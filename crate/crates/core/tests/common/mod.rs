#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::Rng;
use udrefine_core::adjudication::{Choice, Divergence, ItemSecret, SecretMapping, Side, Verdict};
use udrefine_core::{parse_conllu, Genre, Sentence, Treebank};

pub const FORMS: [&str; 14] = [
    "et", "in", "est", "Roma", "urbs", "magna", "bellum", "Caesar", "non", "cum", "ad", "populus",
    "ROMA", "arma",
];
pub const UPOS: [&str; 7] = ["NOUN", "VERB", "ADJ", "ADP", "CCONJ", "PROPN", "PUNCT"];
pub const FEATS: [&str; 6] = [
    "_",
    "Case=Nom|Number=Sing",
    "Number=Sing|Case=Nom",
    "Case=Acc|Gender=Fem|Number=Plur",
    "Mood=Ind|Tense=Pres",
    "Gender=Masc",
];
pub const DEPRELS: [&str; 12] = [
    "nsubj", "obj", "obl", "obl:arg", "obl:lmod", "advmod", "advmod:tmod", "amod", "case", "cc",
    "det", "punct",
];

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// One random sentence in canonical CoNLL-U (ending in a blank line).
pub fn random_block<R: Rng>(rng: &mut R, sent_id: &str, len: usize) -> String {
    let mut out = format!("# sent_id = {sent_id}\n");
    for id in 1..=len {
        let head = if id == 1 {
            0
        } else {
            let mut h = rng.random_range(1..=len);
            while h == id {
                h = rng.random_range(1..=len);
            }
            h
        };
        let deprel = if id == 1 { "root" } else { DEPRELS.choose(rng).unwrap() };
        out.push_str(&format!(
            "{id}\t{}\t_\t{}\t_\t{}\t{head}\t{deprel}\t_\t_\n",
            FORMS.choose(rng).unwrap(),
            UPOS.choose(rng).unwrap(),
            FEATS.choose(rng).unwrap(),
        ));
    }
    out.push('\n');
    out
}

pub fn random_text<R: Rng>(rng: &mut R, prefix: &str, n: usize, max_len: usize) -> String {
    (0..n)
        .map(|i| {
            let len = rng.random_range(1..=max_len);
            random_block(rng, &format!("{prefix}{i}"), len)
        })
        .collect()
}

pub fn random_treebank<R: Rng>(rng: &mut R, prefix: &str, n: usize, max_len: usize) -> Treebank {
    parse_conllu(&random_text(rng, prefix, n, max_len), prefix, None).expect("generated CoNLL-U parses")
}

/// Copy of `gold` with a fraction of HEAD/DEPREL values changed.
pub fn perturb<R: Rng>(rng: &mut R, gold: &Treebank, rate: f64) -> Treebank {
    let mut system = gold.clone();
    for s in &mut system.sentences {
        let len = s.tokens.len();
        for t in &mut s.tokens {
            if rng.random_bool(rate) {
                t.deprel = DEPRELS.choose(rng).unwrap().to_string();
            }
            if len > 1 && rng.random_bool(rate) {
                let mut h = rng.random_range(0..=len);
                while h == t.id {
                    h = rng.random_range(0..=len);
                }
                t.head = h;
            }
        }
    }
    system
}

// Independent reference implementations over plain strings.

pub fn oracle_set(seq: &[String], n: usize) -> HashSet<String> {
    if seq.len() < n {
        return HashSet::new();
    }
    (0..=seq.len() - n).map(|i| seq[i..i + n].join(" ")).collect()
}

pub fn oracle_jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.iter().filter(|x| b.contains(*x)).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

pub fn upos_of(s: &Sentence) -> Vec<String> {
    s.tokens.iter().map(|t| t.upos.clone()).collect()
}

pub fn oracle_structural(q: &[String], s: &[String]) -> f64 {
    let (lq, ls) = (q.len() as f64, s.len() as f64);
    let f_len = 1.0 - (lq - ls).abs() / lq.max(ls);
    let f_bi = oracle_jaccard(&oracle_set(q, 2), &oracle_set(s, 2));
    let f_tri = oracle_jaccard(&oracle_set(q, 3), &oracle_set(s, 3));
    0.33 * f_len + 0.33 * f_bi + 0.34 * f_tri
}

pub fn oracle_form_terms(s: &Sentence) -> Vec<String> {
    s.tokens.iter().map(|t| t.form.to_lowercase()).collect()
}

pub fn oracle_morph_terms(s: &Sentence) -> Vec<String> {
    s.tokens
        .iter()
        .map(|t| {
            let mut feats: Vec<String> = t.feats.iter().map(|(k, v)| format!("{k}={v}")).collect();
            feats.sort();
            let f = if feats.is_empty() { "_".to_string() } else { feats.join("|") };
            format!("{}|{}", t.upos, f)
        })
        .collect()
}

/// Cosine scores of `query` against every document under smoothed TF-IDF.
pub fn oracle_tfidf(docs: &[Vec<String>], query: &[String]) -> Vec<f64> {
    let n = docs.len() as f64;
    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in docs {
        let uniq: HashSet<&str> = d.iter().map(String::as_str).collect();
        for t in uniq {
            *df.entry(t).or_default() += 1;
        }
    }
    let idf = |t: &str| df.get(t).map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0);
    let vectorize = |terms: &[String]| {
        let mut v: BTreeMap<String, f64> = BTreeMap::new();
        for t in terms {
            if let Some(w) = idf(t) {
                *v.entry(t.clone()).or_default() += w;
            }
        }
        let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in v.values_mut() {
                *x /= norm;
            }
        }
        v
    };
    let qv = vectorize(query);
    docs.iter()
        .map(|d| {
            let dv = vectorize(d);
            if qv.is_empty() || dv.is_empty() {
                return 0.0;
            }
            let dot: f64 = qv.iter().map(|(t, w)| w * dv.get(t).copied().unwrap_or(0.0)).sum();
            dot.clamp(0.0, 1.0)
        })
        .collect()
}

/// Annotator-1 x annotator-2 verdict counts, rows and columns in `Choice::ALL`
/// order (Gold, System, Both wrong, Undecidable, Don't know).
pub const PUBLISHED_MATRIX: [[usize; 5]; 5] = [
    [78, 37, 6, 8, 8],
    [20, 89, 3, 10, 4],
    [3, 4, 0, 0, 0],
    [3, 5, 0, 3, 0],
    [6, 8, 2, 0, 3],
];

pub fn item_name(i: usize) -> String {
    format!("item-{:04}", i + 1)
}

/// Expand the published matrix into per-item choice pairs.
pub fn published_pairs() -> Vec<(Choice, Choice)> {
    let mut pairs = Vec::new();
    for (i, row) in PUBLISHED_MATRIX.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            for _ in 0..count {
                pairs.push((Choice::ALL[i], Choice::ALL[j]));
            }
        }
    }
    pairs
}

pub fn published_verdicts() -> (Vec<Verdict>, Vec<Verdict>) {
    let pairs = published_pairs();
    let v1 = pairs
        .iter()
        .enumerate()
        .map(|(i, (a, _))| Verdict::new(item_name(i), "ann1", *a))
        .collect();
    let v2 = pairs
        .iter()
        .enumerate()
        .map(|(i, (_, b))| Verdict::new(item_name(i), "ann2", *b))
        .collect();
    (v1, v2)
}

/// A mapping for `n` items, each with one head-only divergence.
pub fn simple_mapping<R: Rng>(rng: &mut R, n: usize) -> SecretMapping {
    SecretMapping {
        items: (0..n)
            .map(|i| {
                let genre = if i % 2 == 0 { Genre::Poetry } else { Genre::Prose };
                ItemSecret {
                    item_id: item_name(i),
                    sent_id: format!("s{i}"),
                    gold_side: if rng.random_bool(0.5) { Side::A } else { Side::B },
                    genre: Some(genre),
                    divergences: vec![Divergence {
                        sent_id: format!("s{i}"),
                        token_id: 2,
                        form: "urbs".into(),
                        gold_head: 1,
                        gold_deprel: "nsubj".into(),
                        system_head: 3,
                        system_deprel: "nsubj".into(),
                        genre: Some(genre),
                    }],
                }
            })
            .collect(),
    }
}
