//! CoNLL-U object model, parser and serializer.
//!
//! Surface tokens are parsed into [`Token`]s. Multiword range lines (`1-2`) and
//! empty nodes (`3.1`) are kept as raw records so a canonical file serializes
//! back byte-for-byte, but they never appear in [`Sentence::tokens`] and are
//! ignored by every metric and feature downstream.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Placeholder used by CoNLL-U for an empty column.
pub const EMPTY: &str = "_";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConlluError {
    #[error("line {line}: expected 10 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: invalid token id {value:?}")]
    InvalidId { line: usize, value: String },
    #[error("line {line}: expected token id {expected}, found {found}")]
    NonSequentialId {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: non-integer head {value:?}")]
    InvalidHead { line: usize, value: String },
    #[error("line {line}: head {head} exceeds sentence length {len}")]
    HeadOutOfRange { line: usize, head: usize, len: usize },
    #[error("line {line}: token {id} is its own head")]
    SelfLoop { line: usize, id: usize },
    #[error("line {line}: empty deprel")]
    EmptyDeprel { line: usize },
    #[error("line {line}: malformed feature {value:?}")]
    InvalidFeature { line: usize, value: String },
    #[error("line {line}: comment after token lines")]
    TrailingComment { line: usize },
    #[error("duplicate sent_id {0:?}")]
    DuplicateSentId(String),
}

/// Text genre attached to every sentence of an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Genre {
    Poetry,
    Prose,
    Other,
}

impl Genre {
    pub fn as_str(self) -> &'static str {
        match self {
            Genre::Poetry => "poetry",
            Genre::Prose => "prose",
            Genre::Other => "other",
        }
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Genre {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "poetry" => Ok(Genre::Poetry),
            "prose" => Ok(Genre::Prose),
            "other" => Ok(Genre::Other),
            _ => Err(format!("unknown genre {s:?} (expected poetry, prose or other)")),
        }
    }
}

/// One surface token (a line with an integer ID).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    /// `key=value` pairs in file order; empty when the column is `_`.
    pub feats: Vec<(String, String)>,
    /// Governor index, 0 for the root.
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// FEATS rendered in file order, `_` when empty.
    pub fn feats_string(&self) -> String {
        render_feats(self.feats.iter())
    }

    /// FEATS sorted by key, `_` when empty. Independent of parser order.
    pub fn canonical_feats(&self) -> String {
        let mut sorted: Vec<_> = self.feats.iter().collect();
        sorted.sort();
        render_feats(sorted.into_iter())
    }

    pub fn base_deprel(&self) -> &str {
        strip_subtype(&self.deprel)
    }

    fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.id,
            self.form,
            self.lemma,
            self.upos,
            self.xpos,
            self.feats_string(),
            self.head,
            self.deprel,
            self.deps,
            self.misc
        )
    }
}

fn render_feats<'a>(feats: impl Iterator<Item = &'a (String, String)>) -> String {
    let joined = feats
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join("|");
    if joined.is_empty() {
        EMPTY.to_string()
    } else {
        joined
    }
}

/// A multiword-token range line such as `1-2 nel _ ...` (tab-separated).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiwordSpan {
    pub start: usize,
    pub end: usize,
    pub form: String,
    /// The full original line.
    pub raw: String,
}

/// An empty-node line with a decimal ID such as `3.1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmptyNode {
    /// Integer part of the ID; the node is written after this token.
    pub after: usize,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sent_id: String,
    pub text: Option<String>,
    /// Every comment line verbatim, including `# sent_id` and `# text`.
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
    pub mwt_spans: Vec<MultiwordSpan>,
    pub empty_nodes: Vec<EmptyNode>,
    pub genre: Option<Genre>,
}

/// Non-fatal structural problems found in real corpora.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    RootCount { sent_id: String, roots: usize },
    RootLabel { sent_id: String, token: usize, deprel: String },
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Sentence text from `# text = ...`, falling back to the joined forms.
    pub fn display_text(&self) -> String {
        match &self.text {
            Some(text) => text.clone(),
            None => self
                .tokens
                .iter()
                .map(|t| t.form.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        }
    }

    pub fn has_comment(&self, comment: &str) -> bool {
        self.comments.iter().any(|c| c == comment)
    }

    pub fn validate(&self) -> Vec<Warning> {
        let mut warnings = Vec::new();
        let roots: Vec<&Token> = self.tokens.iter().filter(|t| t.head == 0).collect();
        if roots.len() != 1 {
            warnings.push(Warning::RootCount {
                sent_id: self.sent_id.clone(),
                roots: roots.len(),
            });
        }
        for root in roots {
            if root.base_deprel() != "root" {
                warnings.push(Warning::RootLabel {
                    sent_id: self.sent_id.clone(),
                    token: root.id,
                    deprel: root.deprel.clone(),
                });
            }
        }
        warnings
    }

    fn write_to(&self, out: &mut String) {
        for comment in &self.comments {
            out.push_str(comment);
            out.push('\n');
        }
        for node in self.empty_nodes.iter().filter(|n| n.after == 0) {
            out.push_str(&node.raw);
            out.push('\n');
        }
        for token in &self.tokens {
            for span in self.mwt_spans.iter().filter(|s| s.start == token.id) {
                out.push_str(&span.raw);
                out.push('\n');
            }
            out.push_str(&token.to_line());
            out.push('\n');
            for node in self.empty_nodes.iter().filter(|n| n.after == token.id) {
                out.push_str(&node.raw);
                out.push('\n');
            }
        }
        out.push('\n');
    }

    /// This sentence as a standalone CoNLL-U block (terminated by a blank line).
    pub fn to_conllu(&self) -> String {
        let mut out = String::new();
        self.write_to(&mut out);
        out
    }
}

/// POS tags of the surface tokens, in order.
pub fn pos_sequence(sentence: &Sentence) -> Vec<&str> {
    sentence.tokens.iter().map(|t| t.upos.as_str()).collect()
}

/// The base relation: everything before the first `:`.
pub fn strip_subtype(deprel: &str) -> &str {
    match deprel.split_once(':') {
        Some((base, _)) => base,
        None => deprel,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Treebank {
    pub sentences: Vec<Sentence>,
    pub source_label: String,
}

impl Treebank {
    pub fn new(source_label: impl Into<String>) -> Self {
        Self {
            sentences: Vec::new(),
            source_label: source_label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn validate(&self) -> Vec<Warning> {
        self.sentences.iter().flat_map(Sentence::validate).collect()
    }

    pub fn set_genre(&mut self, genre: Option<Genre>) {
        for sentence in &mut self.sentences {
            sentence.genre = genre;
        }
    }
}

/// Parse a whole CoNLL-U document.
///
/// `source_label` names the treebank and seeds synthesized sent_ids
/// (`<source>-<ordinal>`, 1-based) for blocks without a `# sent_id` comment.
pub fn parse_conllu(
    text: &str,
    source_label: &str,
    genre: Option<Genre>,
) -> Result<Treebank, ConlluError> {
    let mut treebank = Treebank::new(source_label);
    let mut block: Vec<(usize, &str)> = Vec::new();
    let mut seen = HashSet::new();

    let mut flush = |block: &mut Vec<(usize, &str)>, treebank: &mut Treebank| {
        if block.is_empty() {
            return Ok(());
        }
        let ordinal = treebank.sentences.len() + 1;
        let sentence = parse_block(block, &format!("{source_label}-{ordinal}"), genre)?;
        if !seen.insert(sentence.sent_id.clone()) {
            return Err(ConlluError::DuplicateSentId(sentence.sent_id));
        }
        treebank.sentences.push(sentence);
        block.clear();
        Ok(())
    };

    for (idx, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            flush(&mut block, &mut treebank)?;
        } else {
            block.push((idx + 1, line));
        }
    }
    flush(&mut block, &mut treebank)?;
    Ok(treebank)
}

/// Parse one sentence block. `lines` carries 1-based line numbers for errors.
pub(crate) fn parse_block(
    lines: &[(usize, &str)],
    fallback_id: &str,
    genre: Option<Genre>,
) -> Result<Sentence, ConlluError> {
    let mut comments = Vec::new();
    let mut sent_id = None;
    let mut text = None;
    let mut tokens: Vec<Token> = Vec::new();
    let mut mwt_spans = Vec::new();
    let mut empty_nodes = Vec::new();
    let mut head_lines = Vec::new();

    for &(line_no, line) in lines {
        if line.starts_with('#') {
            if !tokens.is_empty() || !mwt_spans.is_empty() || !empty_nodes.is_empty() {
                return Err(ConlluError::TrailingComment { line: line_no });
            }
            if let Some(value) = comment_value(line, "sent_id") {
                sent_id = Some(value.to_string());
            } else if let Some(value) = comment_value(line, "text") {
                text = Some(value.to_string());
            }
            comments.push(line.to_string());
            continue;
        }

        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(ConlluError::FieldCount {
                line: line_no,
                found: fields.len(),
            });
        }
        let id_field = fields[0];

        if let Some((start, end)) = id_field.split_once('-') {
            let parse = |v: &str| {
                v.parse::<usize>().map_err(|_| ConlluError::InvalidId {
                    line: line_no,
                    value: id_field.to_string(),
                })
            };
            mwt_spans.push(MultiwordSpan {
                start: parse(start)?,
                end: parse(end)?,
                form: fields[1].to_string(),
                raw: line.to_string(),
            });
            continue;
        }
        if let Some((whole, _)) = id_field.split_once('.') {
            let after = whole.parse::<usize>().map_err(|_| ConlluError::InvalidId {
                line: line_no,
                value: id_field.to_string(),
            })?;
            empty_nodes.push(EmptyNode {
                after,
                raw: line.to_string(),
            });
            continue;
        }

        let id = id_field.parse::<usize>().map_err(|_| ConlluError::InvalidId {
            line: line_no,
            value: id_field.to_string(),
        })?;
        let expected = tokens.len() + 1;
        if id != expected {
            return Err(ConlluError::NonSequentialId {
                line: line_no,
                expected,
                found: id,
            });
        }
        let head = fields[6]
            .parse::<usize>()
            .map_err(|_| ConlluError::InvalidHead {
                line: line_no,
                value: fields[6].to_string(),
            })?;
        if head == id {
            return Err(ConlluError::SelfLoop { line: line_no, id });
        }
        let deprel = fields[7];
        if deprel.is_empty() || deprel == EMPTY {
            return Err(ConlluError::EmptyDeprel { line: line_no });
        }
        head_lines.push(line_no);
        tokens.push(Token {
            id,
            form: fields[1].to_string(),
            lemma: fields[2].to_string(),
            upos: fields[3].to_string(),
            xpos: fields[4].to_string(),
            feats: parse_feats(fields[5], line_no)?,
            head,
            deprel: deprel.to_string(),
            deps: fields[8].to_string(),
            misc: fields[9].to_string(),
        });
    }

    let len = tokens.len();
    for (token, &line) in tokens.iter().zip(&head_lines) {
        if token.head > len {
            return Err(ConlluError::HeadOutOfRange {
                line,
                head: token.head,
                len,
            });
        }
    }

    Ok(Sentence {
        sent_id: sent_id.unwrap_or_else(|| fallback_id.to_string()),
        text,
        comments,
        tokens,
        mwt_spans,
        empty_nodes,
        genre,
    })
}

/// Value of a `# key = value` comment, if `line` is one.
pub(crate) fn comment_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.strip_prefix('#')?.trim_start();
    let rest = rest.strip_prefix(key)?.trim_start();
    let value = rest.strip_prefix('=')?;
    Some(value.trim())
}

fn parse_feats(field: &str, line: usize) -> Result<Vec<(String, String)>, ConlluError> {
    if field == EMPTY {
        return Ok(Vec::new());
    }
    field
        .split('|')
        .map(|pair| match pair.split_once('=') {
            Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
            _ => Err(ConlluError::InvalidFeature {
                line,
                value: pair.to_string(),
            }),
        })
        .collect()
}

/// Serialize a treebank: LF endings, one blank line after every sentence.
pub fn serialize(treebank: &Treebank) -> String {
    let mut out = String::new();
    for sentence in &treebank.sentences {
        sentence.write_to(&mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TOKENS: &str = "# sent_id = s1\n# text = ueni uidi\n\
1\tueni\tuenio\tVERB\t_\tMood=Ind|Person=1\t0\troot\t_\t_\n\
2\tuidi\tuideo\tVERB\t_\t_\t1\tconj\t_\t_\n\n";

    #[test]
    fn empty_input_has_no_sentences() {
        let tb = parse_conllu("", "x", None).unwrap();
        assert!(tb.is_empty());
        assert_eq!(serialize(&tb), "");
    }

    #[test]
    fn parses_two_token_block_field_by_field() {
        let tb = parse_conllu(TWO_TOKENS, "x", Some(Genre::Poetry)).unwrap();
        assert_eq!(tb.len(), 1);
        let s = &tb.sentences[0];
        assert_eq!(s.sent_id, "s1");
        assert_eq!(s.text.as_deref(), Some("ueni uidi"));
        assert_eq!(s.genre, Some(Genre::Poetry));
        assert_eq!(s.tokens.len(), 2);
        let heads: Vec<usize> = s.tokens.iter().map(|t| t.head).collect();
        assert_eq!(heads, vec![0, 1]);
        let t = &s.tokens[0];
        assert_eq!(t.form, "ueni");
        assert_eq!(t.lemma, "uenio");
        assert_eq!(t.upos, "VERB");
        assert_eq!(t.xpos, "_");
        assert_eq!(
            t.feats,
            vec![
                ("Mood".to_string(), "Ind".to_string()),
                ("Person".to_string(), "1".to_string())
            ]
        );
        assert_eq!(t.deprel, "root");
        assert_eq!(s.tokens[1].deprel, "conj");
        assert!(s.validate().is_empty());
    }

    #[test]
    fn range_lines_are_kept_out_of_tokens() {
        let text = "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n\
1\tde\tde\tADP\t_\t_\t2\tcase\t_\t_\n\
2\tel\tel\tDET\t_\t_\t0\troot\t_\t_\n\
2.1\tx\tx\tX\t_\t_\t_\t_\t_\t_\n\n";
        let tb = parse_conllu(text, "tb", None).unwrap();
        let s = &tb.sentences[0];
        assert_eq!(s.tokens.len(), 2);
        assert_eq!(s.mwt_spans.len(), 1);
        assert_eq!(s.mwt_spans[0].start, 1);
        assert_eq!(s.mwt_spans[0].end, 2);
        assert_eq!(s.mwt_spans[0].form, "del");
        assert_eq!(s.empty_nodes.len(), 1);
        assert_eq!(pos_sequence(s), vec!["ADP", "DET"]);
        assert_eq!(serialize(&tb), text);
    }

    #[test]
    fn synthesizes_sent_ids() {
        let text = "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n\n1\tb\tb\tX\t_\t_\t0\troot\t_\t_\n";
        let tb = parse_conllu(text, "train", None).unwrap();
        assert_eq!(tb.sentences[0].sent_id, "train-1");
        assert_eq!(tb.sentences[1].sent_id, "train-2");
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let tb = parse_conllu(TWO_TOKENS, "x", None).unwrap();
        assert_eq!(serialize(&tb), TWO_TOKENS);
    }

    #[test]
    fn empty_feats_render_as_underscore() {
        let tb = parse_conllu(TWO_TOKENS, "x", None).unwrap();
        let out = serialize(&tb);
        let line = out.lines().find(|l| l.starts_with("2\t")).unwrap();
        assert_eq!(line.split('\t').nth(5), Some("_"));
    }

    #[test]
    fn canonical_feats_sort_by_key() {
        let text = "1\ta\ta\tNOUN\t_\tNumber=Sing|Case=Nom\t0\troot\t_\t_\n";
        let tb = parse_conllu(text, "x", None).unwrap();
        let t = &tb.sentences[0].tokens[0];
        assert_eq!(t.feats_string(), "Number=Sing|Case=Nom");
        assert_eq!(t.canonical_feats(), "Case=Nom|Number=Sing");
    }

    #[test]
    fn crlf_input_is_accepted() {
        let text = TWO_TOKENS.replace('\n', "\r\n");
        let tb = parse_conllu(&text, "x", None).unwrap();
        assert_eq!(serialize(&tb), TWO_TOKENS);
    }

    #[test]
    fn unknown_comments_survive() {
        let text = "# sent_id = a\n# needs_council = true\n1\tx\tx\tX\t_\t_\t0\troot\t_\t_\n\n";
        let tb = parse_conllu(text, "x", None).unwrap();
        assert!(tb.sentences[0].has_comment("# needs_council = true"));
        assert_eq!(serialize(&tb), text);
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let text = "# sent_id = a\n1\tx\tx\tX\t_\t_\t0\troot\t_\n";
        assert_eq!(
            parse_conllu(text, "x", None),
            Err(ConlluError::FieldCount { line: 2, found: 9 })
        );
    }

    #[test]
    fn non_integer_head_is_an_error() {
        let text = "1\tx\tx\tX\t_\t_\t_\troot\t_\t_\n";
        assert!(matches!(
            parse_conllu(text, "x", None),
            Err(ConlluError::InvalidHead { line: 1, .. })
        ));
    }

    #[test]
    fn head_beyond_sentence_is_an_error() {
        let text = "1\tx\tx\tX\t_\t_\t0\troot\t_\t_\n2\ty\ty\tX\t_\t_\t3\tobj\t_\t_\n";
        assert_eq!(
            parse_conllu(text, "x", None),
            Err(ConlluError::HeadOutOfRange {
                line: 2,
                head: 3,
                len: 2
            })
        );
    }

    #[test]
    fn self_loop_and_gaps_are_errors() {
        let looped = "1\tx\tx\tX\t_\t_\t1\troot\t_\t_\n";
        assert!(matches!(
            parse_conllu(looped, "x", None),
            Err(ConlluError::SelfLoop { .. })
        ));
        let gap = "1\tx\tx\tX\t_\t_\t0\troot\t_\t_\n3\ty\ty\tX\t_\t_\t1\tobj\t_\t_\n";
        assert!(matches!(
            parse_conllu(gap, "x", None),
            Err(ConlluError::NonSequentialId {
                expected: 2,
                found: 3,
                ..
            })
        ));
    }

    #[test]
    fn duplicate_sent_ids_are_rejected() {
        let text = "# sent_id = a\n1\tx\tx\tX\t_\t_\t0\troot\t_\t_\n\n# sent_id = a\n1\ty\ty\tX\t_\t_\t0\troot\t_\t_\n";
        assert_eq!(
            parse_conllu(text, "x", None),
            Err(ConlluError::DuplicateSentId("a".into()))
        );
    }

    #[test]
    fn missing_root_is_only_a_warning() {
        let text = "1\tx\tx\tX\t_\t_\t2\tobj\t_\t_\n2\ty\ty\tX\t_\t_\t1\tobj\t_\t_\n";
        let tb = parse_conllu(text, "x", None).unwrap();
        assert_eq!(tb.validate().len(), 1);
    }

    #[test]
    fn strip_subtype_cases() {
        assert_eq!(strip_subtype("advmod:lmod"), "advmod");
        assert_eq!(strip_subtype("root"), "root");
        assert_eq!(strip_subtype("obl:arg"), "obl");
        assert_eq!(strip_subtype("conj:expl:x"), "conj");
    }

    #[test]
    fn pos_sequence_of_empty_sentence() {
        let s = Sentence {
            sent_id: "e".into(),
            text: None,
            comments: vec![],
            tokens: vec![],
            mwt_spans: vec![],
            empty_nodes: vec![],
            genre: None,
        };
        assert!(pos_sequence(&s).is_empty());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        /// form, upos, feats, deprel
        type GenToken = (String, String, Vec<(String, String)>, String);

        fn token_strategy() -> impl Strategy<Value = GenToken> {
            (
                "[a-z]{1,6}",
                prop::sample::select(vec!["NOUN", "VERB", "ADJ", "ADP", "PUNCT"]),
                prop::collection::vec(("[A-Z][a-z]{1,4}", "[A-Z][a-z]{1,3}"), 0..3),
                prop::sample::select(vec!["nsubj", "obj", "obl:arg", "advmod:lmod", "punct"]),
            )
                .prop_map(|(f, u, feats, d)| (f, u.to_string(), feats, d.to_string()))
        }

        fn sentence_strategy() -> impl Strategy<Value = Vec<GenToken>> {
            prop::collection::vec(token_strategy(), 1..8)
        }

        proptest! {
            #[test]
            fn parse_serialize_round_trip(
                raw in prop::collection::vec((sentence_strategy(), any::<u64>()), 0..5),
                with_ids in any::<bool>(),
            ) {
                let mut tb = Treebank::new("gen");
                for (n, (toks, seed)) in raw.into_iter().enumerate() {
                    let len = toks.len();
                    let tokens = toks
                        .into_iter()
                        .enumerate()
                        .map(|(i, (form, upos, feats, deprel))| {
                            let id = i + 1;
                            let head = if i == 0 {
                                0
                            } else {
                                let h = (seed as usize + i) % len + 1;
                                if h == id { 1 } else { h }
                            };
                            Token {
                                id,
                                lemma: form.clone(),
                                form,
                                upos,
                                xpos: EMPTY.into(),
                                feats,
                                head,
                                deprel: if head == 0 { "root".into() } else { deprel },
                                deps: EMPTY.into(),
                                misc: EMPTY.into(),
                            }
                        })
                        .collect();
                    let sent_id = if with_ids { format!("s{n}") } else { format!("gen-{}", n + 1) };
                    let comments = if with_ids { vec![format!("# sent_id = {sent_id}")] } else { vec![] };
                    tb.sentences.push(Sentence {
                        sent_id,
                        text: None,
                        comments,
                        tokens,
                        mwt_spans: vec![],
                        empty_nodes: vec![],
                        genre: None,
                    });
                }
                let text = serialize(&tb);
                let back = parse_conllu(&text, "gen", None).unwrap();
                prop_assert_eq!(&back, &tb);
                prop_assert_eq!(serialize(&back), text);
                for s in &back.sentences {
                    prop_assert_eq!(pos_sequence(s).len(), s.len());
                }
            }

            #[test]
            fn strip_subtype_is_idempotent(s in "[a-z]{1,6}(:[a-z]{1,5}){0,2}") {
                let once = strip_subtype(&s);
                prop_assert_eq!(strip_subtype(once), once);
            }
        }
    }
}
