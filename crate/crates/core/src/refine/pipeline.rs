use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::conllu::{Sentence, Treebank};
use crate::evaluation::{check_tokens, EvalError};
use crate::retrieval::{KnowledgeBase, Strategy};

use super::{build_prompt, validate_output, LlmBackend, RefineConfig, RefineError, RefineMode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub refined: Sentence,
    pub used_fallback: bool,
    pub needs_council: bool,
    pub attempts: usize,
    /// Last backend answer (or error text) for auditing.
    pub raw_response: String,
    /// Why each rejected attempt was rejected.
    pub failures: Vec<String>,
}

/// Input columns with the baseline's HEAD/DEPREL.
fn fallback(input: &Sentence, baseline: &Sentence) -> Sentence {
    let mut out = input.clone();
    for (t, b) in out.tokens.iter_mut().zip(&baseline.tokens) {
        t.head = b.head;
        t.deprel = b.deprel.clone();
    }
    out
}

fn check_config(cfg: &RefineConfig, kb: Option<&KnowledgeBase>) -> Result<(), RefineError> {
    if cfg.guidelines_text.trim().is_empty() {
        return Err(RefineError::EmptyGuidelines);
    }
    if cfg.k == 0 {
        return Err(RefineError::InvalidK);
    }
    if cfg.mode == RefineMode::WithRetrieval && kb.is_none() {
        return Err(RefineError::MissingKnowledgeBase);
    }
    Ok(())
}

fn refine_checked(
    input: &Sentence,
    baseline: &Sentence,
    kb: Option<&KnowledgeBase>,
    backend: &dyn LlmBackend,
    cfg: &RefineConfig,
) -> Result<RefineOutcome, RefineError> {
    if input.is_empty() {
        return Ok(RefineOutcome {
            refined: input.clone(),
            used_fallback: false,
            needs_council: false,
            attempts: 0,
            raw_response: String::new(),
            failures: Vec::new(),
        });
    }
    let examples: Vec<&Sentence> = match (cfg.mode, kb) {
        (RefineMode::WithRetrieval, Some(kb)) => kb
            .retrieve(input, Strategy::Structural, cfg.k, None)?
            .hits
            .iter()
            .filter_map(|h| kb.sentence(h.index))
            .collect(),
        _ => Vec::new(),
    };
    let prompt = build_prompt(cfg, &examples, baseline, input)?;

    let mut failures = Vec::new();
    let mut raw_response = String::new();
    for attempt in 1..=cfg.max_retries + 1 {
        match backend.complete(&prompt) {
            Ok(raw) => {
                let checked = validate_output(&raw, input);
                raw_response = raw;
                match checked {
                    Ok(valid) => {
                        return Ok(RefineOutcome {
                            refined: valid.refined,
                            used_fallback: false,
                            needs_council: valid.needs_council,
                            attempts: attempt,
                            raw_response,
                            failures,
                        })
                    }
                    Err(e) => failures.push(e.to_string()),
                }
            }
            Err(e) => {
                raw_response = e.to_string();
                failures.push(raw_response.clone());
            }
        }
        tracing::debug!(sent_id = %input.sent_id, attempt, "refinement attempt rejected");
    }
    tracing::info!(sent_id = %input.sent_id, "falling back to baseline");
    Ok(RefineOutcome {
        refined: fallback(input, baseline),
        used_fallback: true,
        needs_council: false,
        attempts: cfg.max_retries + 1,
        raw_response,
        failures,
    })
}

/// Refine one sentence. Backend failures are retried and end in a fallback to
/// the baseline; only configuration and alignment problems are errors.
pub fn refine_sentence(
    input: &Sentence,
    baseline: &Sentence,
    kb: Option<&KnowledgeBase>,
    backend: &dyn LlmBackend,
    cfg: &RefineConfig,
) -> Result<RefineOutcome, RefineError> {
    check_config(cfg, kb)?;
    check_tokens(input, baseline)?;
    refine_checked(input, baseline, kb, backend, cfg)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub sent_id: String,
    pub used_fallback: bool,
    pub needs_council: bool,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineManifest {
    pub backend: String,
    pub config: RefineConfig,
    pub sentence_count: usize,
    pub fallback_count: usize,
    pub needs_council_count: usize,
    pub sentences: Vec<SentenceRecord>,
}

#[derive(Debug, Clone)]
pub struct RefineRun {
    pub outcomes: Vec<RefineOutcome>,
    pub manifest: RefineManifest,
}

impl RefineRun {
    pub fn refined_treebank(&self, source_label: &str) -> Treebank {
        Treebank {
            sentences: self.outcomes.iter().map(|o| o.refined.clone()).collect(),
            source_label: source_label.to_string(),
        }
    }
}

/// Refine every sentence with at most `concurrency_limit` backend calls in
/// flight. Outcomes come back in input order.
pub fn refine_treebank(
    inputs: &Treebank,
    baselines: &Treebank,
    kb: Option<&KnowledgeBase>,
    backend: &dyn LlmBackend,
    cfg: &RefineConfig,
    concurrency_limit: usize,
) -> Result<RefineRun, RefineError> {
    check_config(cfg, kb)?;
    if inputs.len() != baselines.len() {
        return Err(EvalError::SentenceCount {
            gold: inputs.len(),
            system: baselines.len(),
        }
        .into());
    }
    for (index, (i, b)) in inputs.sentences.iter().zip(&baselines.sentences).enumerate() {
        if i.sent_id != b.sent_id {
            return Err(EvalError::SentIdMismatch {
                index,
                gold: i.sent_id.clone(),
                system: b.sent_id.clone(),
            }
            .into());
        }
        check_tokens(i, b)?;
    }

    let total = inputs.len();
    let workers = concurrency_limit.clamp(1, total.max(1));
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<RefineOutcome, RefineError>>> = (0..total).map(|_| None).collect();
    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= total {
                    break;
                }
                let result = refine_checked(
                    &inputs.sentences[idx],
                    &baselines.sentences[idx],
                    kb,
                    backend,
                    cfg,
                );
                if tx.send((idx, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (idx, result) in rx {
            slots[idx] = Some(result);
        }
    });

    let outcomes = slots
        .into_iter()
        .map(|slot| slot.expect("every index is processed"))
        .collect::<Result<Vec<_>, _>>()?;
    let sentences: Vec<SentenceRecord> = outcomes
        .iter()
        .map(|o| SentenceRecord {
            sent_id: o.refined.sent_id.clone(),
            used_fallback: o.used_fallback,
            needs_council: o.needs_council,
            attempts: o.attempts,
        })
        .collect();
    let manifest = RefineManifest {
        backend: backend.identity(),
        config: cfg.clone(),
        sentence_count: outcomes.len(),
        fallback_count: sentences.iter().filter(|s| s.used_fallback).count(),
        needs_council_count: sentences.iter().filter(|s| s.needs_council).count(),
        sentences,
    };
    Ok(RefineRun { outcomes, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refine::{MockBackend, MockRule, TokenEdit};
    use crate::testutil::sentence_from_pos;

    fn cfg() -> RefineConfig {
        RefineConfig::new(RefineMode::GuidelinesOnly, "Prefer obl:arg for selected obliques.")
    }

    #[test]
    fn echo_backend_keeps_baseline() {
        let s = sentence_from_pos("s1", &["NOUN", "VERB"]);
        let backend = MockBackend::echo();
        let out = refine_sentence(&s, &s, None, &backend, &cfg()).unwrap();
        assert_eq!(out.refined, s);
        assert!(!out.used_fallback);
        assert_eq!(out.attempts, 1);
    }

    #[test]
    fn garbage_backend_falls_back_after_retries() {
        let s = sentence_from_pos("s1", &["NOUN", "VERB"]);
        let backend = MockBackend::garbage();
        let out = refine_sentence(&s, &s, None, &backend, &cfg()).unwrap();
        assert!(out.used_fallback);
        assert_eq!(out.attempts, 3);
        assert_eq!(backend.calls(), 3);
        assert_eq!(out.refined, s);
        assert_eq!(out.failures.len(), 3);
    }

    #[test]
    fn fallback_takes_baseline_heads() {
        let input = sentence_from_pos("s1", &["NOUN", "VERB", "ADV"]);
        let mut baseline = input.clone();
        baseline.tokens[2].head = 2;
        baseline.tokens[2].deprel = "advmod".into();
        let out = refine_sentence(&input, &baseline, None, &MockBackend::garbage(), &cfg()).unwrap();
        assert_eq!(out.refined.tokens[2].head, 2);
        assert_eq!(out.refined.tokens[2].deprel, "advmod");
    }

    #[test]
    fn transport_errors_count_as_attempts_and_retry_can_succeed() {
        let s = sentence_from_pos("s1", &["NOUN", "VERB"]);
        let backend = MockBackend::with_default(
            "seq",
            MockRule::Sequence {
                steps: vec![MockRule::Fail { message: "timeout".into() }, MockRule::Echo],
            },
        );
        let out = refine_sentence(&s, &s, None, &backend, &cfg()).unwrap();
        assert!(!out.used_fallback);
        assert_eq!(out.attempts, 2);
        assert!(out.failures[0].contains("timeout"));
    }

    #[test]
    fn scripted_correction_touches_only_head_and_deprel() {
        let s = sentence_from_pos("s1", &["NOUN", "VERB", "ADV"]);
        let backend = MockBackend::with_default(
            "edit",
            MockRule::Edit {
                edits: vec![TokenEdit {
                    id: 3,
                    head: Some(2),
                    deprel: Some("advmod:lmod".into()),
                }],
                needs_council: false,
            },
        );
        let out = refine_sentence(&s, &s, None, &backend, &cfg()).unwrap();
        let t = &out.refined.tokens[2];
        assert_eq!((t.head, t.deprel.as_str()), (2, "advmod:lmod"));
        for (a, b) in out.refined.tokens.iter().zip(&s.tokens) {
            assert_eq!((&a.form, &a.lemma, &a.upos, &a.misc), (&b.form, &b.lemma, &b.upos, &b.misc));
        }
    }

    #[test]
    fn config_errors_surface_before_calls() {
        let s = sentence_from_pos("s1", &["NOUN"]);
        let backend = MockBackend::echo();
        let with = RefineConfig::new(RefineMode::WithRetrieval, "G");
        assert!(matches!(
            refine_sentence(&s, &s, None, &backend, &with),
            Err(RefineError::MissingKnowledgeBase)
        ));
        let other = sentence_from_pos("s1", &["NOUN", "VERB"]);
        assert!(matches!(
            refine_sentence(&s, &other, None, &backend, &cfg()),
            Err(RefineError::Alignment(_))
        ));
        assert_eq!(backend.calls(), 0);
    }

    #[test]
    fn with_retrieval_sends_examples() {
        let kb_tb = Treebank {
            sentences: (0..7).map(|i| sentence_from_pos(&format!("k{i}"), &["NOUN", "VERB"])).collect(),
            source_label: "kb".into(),
        };
        let kb = KnowledgeBase::build(&kb_tb).unwrap();
        let s = sentence_from_pos("q", &["NOUN", "VERB"]);
        let cfg = RefineConfig::new(RefineMode::WithRetrieval, "G");
        let out = refine_sentence(&s, &s, Some(&kb), &MockBackend::echo(), &cfg).unwrap();
        assert_eq!(out.refined, s);
    }

    #[test]
    fn treebank_outcomes_keep_input_order() {
        let tb = Treebank {
            sentences: (1..=10).map(|i| sentence_from_pos(&format!("s{i}"), &["NOUN", "VERB"])).collect(),
            source_label: "t".into(),
        };
        let backend = MockBackend::new(
            "mock:script",
            crate::refine::MockScript {
                default: MockRule::Echo,
                by_sent_id: [("s7".to_string(), MockRule::Garbage)].into_iter().collect(),
            },
        );
        let run = refine_treebank(&tb, &tb, None, &backend, &cfg(), 4).unwrap();
        let flags: Vec<bool> = run.outcomes.iter().map(|o| o.used_fallback).collect();
        assert_eq!(flags.iter().filter(|f| **f).count(), 1);
        assert!(flags[6]);
        let ids: Vec<&str> = run.outcomes.iter().map(|o| o.refined.sent_id.as_str()).collect();
        assert_eq!(ids, tb.sentences.iter().map(|s| s.sent_id.as_str()).collect::<Vec<_>>());
        assert_eq!(run.manifest.fallback_count, 1);
        assert_eq!(run.manifest.backend, "mock:script");
    }

    #[test]
    fn empty_and_misaligned_batches() {
        let empty = Treebank::new("e");
        let run = refine_treebank(&empty, &empty, None, &MockBackend::echo(), &cfg(), 2).unwrap();
        assert!(run.outcomes.is_empty());
        let one = Treebank {
            sentences: vec![sentence_from_pos("a", &["NOUN"])],
            source_label: "t".into(),
        };
        let mut renamed = one.clone();
        renamed.sentences[0].sent_id = "b".into();
        let backend = MockBackend::echo();
        assert!(refine_treebank(&one, &renamed, None, &backend, &cfg(), 2).is_err());
        assert!(refine_treebank(&one, &empty, None, &backend, &cfg(), 2).is_err());
        assert_eq!(backend.calls(), 0);
    }
}
