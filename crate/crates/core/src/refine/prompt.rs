use crate::conllu::Sentence;

use super::{RefineConfig, RefineError, RefineMode};

/// Prompt with `{guidelines_text}`, `{example_str}`, `{latinpipe_context}`
/// and `{conllu_str}` placeholders.
pub const PROMPT_TEMPLATE: &str = include_str!("prompt_template.txt");

pub const BASELINE_HEADER: &str = "--- BASELINE (from automatic parser) ---";
pub const INPUT_HEADER: &str = "--- Input Sentence ---";

const EXAMPLES_INTRO: &str = "Here are 5 SIMILAR examples from the\ntraining data.";
const NO_EXAMPLES: &str = "No SIMILAR examples from the training data\nare available for this sentence.";

fn block(sentence: &Sentence) -> String {
    sentence.to_conllu().trim_end().to_string()
}

fn render_examples(examples: &[&Sentence]) -> String {
    examples
        .iter()
        .enumerate()
        .map(|(i, s)| format!("Example {}:\n{}", i + 1, block(s)))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Single-pass placeholder substitution so inserted text is never re-expanded.
fn substitute(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + values.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    'outer: while let Some(open) = rest.find('{') {
        for (name, value) in values {
            let tail = &rest[open + 1..];
            if tail.starts_with(name) && tail[name.len()..].starts_with('}') {
                out.push_str(&rest[..open]);
                out.push_str(value);
                rest = &tail[name.len() + 1..];
                continue 'outer;
            }
        }
        out.push_str(&rest[..=open]);
        rest = &rest[open + 1..];
    }
    out.push_str(rest);
    out
}

/// Fill the refinement prompt. `examples` must be empty in guidelines-only
/// mode and hold at most `cfg.k` retrieved sentences, in rank order, otherwise.
pub fn build_prompt(
    cfg: &RefineConfig,
    examples: &[&Sentence],
    baseline: &Sentence,
    input: &Sentence,
) -> Result<String, RefineError> {
    if cfg.guidelines_text.trim().is_empty() {
        return Err(RefineError::EmptyGuidelines);
    }
    let template = match cfg.mode {
        RefineMode::GuidelinesOnly => {
            if !examples.is_empty() {
                return Err(RefineError::ExampleCount {
                    given: examples.len(),
                    expected: 0,
                });
            }
            PROMPT_TEMPLATE.replacen(EXAMPLES_INTRO, NO_EXAMPLES, 1)
        }
        RefineMode::WithRetrieval => {
            if examples.is_empty() || examples.len() > cfg.k {
                return Err(RefineError::ExampleCount {
                    given: examples.len(),
                    expected: cfg.k,
                });
            }
            let intro = EXAMPLES_INTRO.replacen('5', &examples.len().to_string(), 1);
            PROMPT_TEMPLATE.replacen(EXAMPLES_INTRO, &intro, 1)
        }
    };
    let example_str = render_examples(examples);
    let baseline_str = block(baseline);
    let input_str = block(input);
    Ok(substitute(
        &template,
        &[
            ("guidelines_text", cfg.guidelines_text.trim_end()),
            ("example_str", &example_str),
            ("latinpipe_context", &baseline_str),
            ("conllu_str", &input_str),
        ],
    ))
}

/// Text between the last `header` line and the next blank line.
pub fn extract_section<'a>(prompt: &'a str, header: &str) -> Option<&'a str> {
    let start = prompt.rfind(header)? + header.len();
    let body = prompt[start..].strip_prefix('\n')?;
    let end = body.find("\n\n").unwrap_or(body.len());
    Some(&body[..end])
}
