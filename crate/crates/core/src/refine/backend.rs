use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::conllu::{comment_value, parse_block};

use super::prompt::{extract_section, BASELINE_HEADER, INPUT_HEADER};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Response(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

/// A text-completion service. Implementations must be safe to call from
/// several threads at once and must report failures as errors, not panics.
pub trait LlmBackend: Send + Sync {
    /// Label recorded in run manifests.
    fn identity(&self) -> String;

    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        (**self).complete(prompt)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEdit {
    pub id: usize,
    #[serde(default)]
    pub head: Option<usize>,
    #[serde(default)]
    pub deprel: Option<String>,
}

/// How the mock answers a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MockRule {
    /// Return the baseline block from the prompt.
    Echo,
    /// Return text that contains no CoNLL-U.
    Garbage,
    /// Return this exact text.
    Raw { text: String },
    /// Return the baseline with some HEAD/DEPREL edits applied.
    Edit {
        edits: Vec<TokenEdit>,
        #[serde(default)]
        needs_council: bool,
    },
    /// Fail as a transport error would.
    Fail {
        #[serde(default)]
        message: String,
    },
    /// One rule per attempt for the same sentence; the last repeats.
    Sequence { steps: Vec<MockRule> },
}

/// Mock script file: a default rule plus per-sentence overrides keyed by the
/// `# sent_id` of the input sentence in the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default = "default_rule")]
    pub default: MockRule,
    #[serde(default)]
    pub by_sent_id: BTreeMap<String, MockRule>,
}

fn default_rule() -> MockRule {
    MockRule::Echo
}

pub const GARBAGE_RESPONSE: &str = "I cannot parse this.";

/// Offline backend driven by a [`MockScript`].
#[derive(Debug)]
pub struct MockBackend {
    label: String,
    script: MockScript,
    calls: AtomicUsize,
    attempts: Mutex<HashMap<String, usize>>,
}

impl MockBackend {
    pub fn new(label: impl Into<String>, script: MockScript) -> Self {
        Self {
            label: label.into(),
            script,
            calls: AtomicUsize::new(0),
            attempts: Mutex::new(HashMap::new()),
        }
    }

    pub fn echo() -> Self {
        Self::with_default("mock:echo", MockRule::Echo)
    }

    pub fn garbage() -> Self {
        Self::with_default("mock:garbage", MockRule::Garbage)
    }

    pub fn with_default(label: &str, rule: MockRule) -> Self {
        Self::new(
            label,
            MockScript {
                default: rule,
                by_sent_id: BTreeMap::new(),
            },
        )
    }

    /// `echo`, `garbage`, or a path to a JSON [`MockScript`].
    pub fn from_spec(spec: &str) -> Result<Self, BackendError> {
        match spec {
            "echo" => Ok(Self::echo()),
            "garbage" => Ok(Self::garbage()),
            path => {
                let text = fs::read_to_string(path)
                    .map_err(|e| BackendError::Config(format!("reading mock script {path}: {e}")))?;
                let script: MockScript = serde_json::from_str(&text)
                    .map_err(|e| BackendError::Config(format!("parsing mock script {path}: {e}")))?;
                Ok(Self::new(format!("mock:{path}"), script))
            }
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn answer(&self, rule: &MockRule, prompt: &str, attempt: usize) -> Result<String, BackendError> {
        let baseline = || {
            extract_section(prompt, BASELINE_HEADER)
                .map(str::to_string)
                .ok_or_else(|| BackendError::Response("prompt has no baseline section".into()))
        };
        match rule {
            MockRule::Echo => baseline(),
            MockRule::Garbage => Ok(GARBAGE_RESPONSE.to_string()),
            MockRule::Raw { text } => Ok(text.clone()),
            MockRule::Fail { message } => Err(BackendError::Transport(if message.is_empty() {
                "mock failure".into()
            } else {
                message.clone()
            })),
            MockRule::Edit {
                edits,
                needs_council,
            } => {
                let text = baseline()?;
                let lines: Vec<(usize, &str)> = text.lines().enumerate().collect();
                let mut sentence = parse_block(&lines, "mock", None)
                    .map_err(|e| BackendError::Response(format!("baseline in prompt: {e}")))?;
                for edit in edits {
                    if let Some(token) = sentence.tokens.iter_mut().find(|t| t.id == edit.id) {
                        if let Some(head) = edit.head {
                            token.head = head;
                        }
                        if let Some(deprel) = &edit.deprel {
                            token.deprel = deprel.clone();
                        }
                    }
                }
                if *needs_council {
                    sentence.comments.push(super::validate::NEEDS_COUNCIL_COMMENT.into());
                }
                Ok(sentence.to_conllu())
            }
            MockRule::Sequence { steps } => match steps.get(attempt).or(steps.last()) {
                Some(step) => self.answer(step, prompt, attempt),
                None => Ok(String::new()),
            },
        }
    }
}

fn prompt_sent_id(prompt: &str) -> Option<String> {
    extract_section(prompt, INPUT_HEADER)?
        .lines()
        .find_map(|l| comment_value(l, "sent_id"))
        .map(str::to_string)
}

impl LlmBackend for MockBackend {
    fn identity(&self) -> String {
        self.label.clone()
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let sent_id = prompt_sent_id(prompt);
        let attempt = {
            let mut attempts = self.attempts.lock().expect("attempt table poisoned");
            let slot = attempts.entry(sent_id.clone().unwrap_or_default()).or_default();
            *slot += 1;
            *slot - 1
        };
        let rule = sent_id
            .as_ref()
            .and_then(|id| self.script.by_sent_id.get(id))
            .unwrap_or(&self.script.default);
        self.answer(rule, prompt, attempt)
    }
}

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    /// Full URL of a chat-completion endpoint.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    /// Request/response records are written here with the key redacted.
    pub audit_dir: Option<PathBuf>,
    pub timeout: Duration,
    pub temperature: f64,
}

impl HttpBackendConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            audit_dir: None,
            timeout: Duration::from_secs(120),
            temperature: 0.0,
        }
    }
}

/// Chat-completion style JSON-over-HTTP backend.
pub struct HttpBackend {
    config: HttpBackendConfig,
    agent: ureq::Agent,
    sequence: AtomicUsize,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        if let Some(dir) = &config.audit_dir {
            fs::create_dir_all(dir)
                .map_err(|e| BackendError::Config(format!("audit dir {}: {e}", dir.display())))?;
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            agent,
            sequence: AtomicUsize::new(0),
        })
    }

    fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{ "role": "user", "content": prompt }],
        })
    }

    fn send(&self, body: &Value) -> Result<(u16, String), BackendError> {
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok((status, text))
    }

    fn audit(&self, seq: usize, record: Value) {
        let Some(dir) = &self.config.audit_dir else {
            return;
        };
        let mut text = serde_json::to_string_pretty(&record).unwrap_or_default();
        if let Some(key) = self.config.api_key.as_deref().filter(|k| !k.is_empty()) {
            text = text.replace(key, "[REDACTED]");
        }
        let path = dir.join(format!("{seq:06}.json"));
        if let Err(e) = fs::write(&path, text) {
            tracing::warn!(path = %path.display(), error = %e, "failed to write audit record");
        }
    }
}

/// `choices[0].message.content` of a chat-completion response.
fn completion_text(body: &str) -> Result<String, BackendError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| BackendError::Response(format!("invalid JSON: {e}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Response("missing choices[0].message.content".into()))
}

impl LlmBackend for HttpBackend {
    fn identity(&self) -> String {
        format!("http:{}@{}", self.config.model, self.config.endpoint)
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let seq = self.sequence.fetch_add(1, Ordering::SeqCst);
        let body = self.request_body(prompt);
        let headers = json!({
            "Authorization": self.config.api_key.as_ref().map(|_| "Bearer [REDACTED]"),
        });
        let result = self.send(&body);
        let outcome = match &result {
            Ok((status, text)) => json!({ "status": status, "body": text }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        self.audit(
            seq,
            json!({
                "timestamp": chrono::Utc::now().to_rfc3339(),
                "endpoint": self.config.endpoint,
                "headers": headers,
                "request": body,
                "response": outcome,
            }),
        );
        let (status, text) = result?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Status { status, body: text });
        }
        completion_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completion_text_extraction() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"1\tx"}}]}"#;
        assert_eq!(completion_text(body).unwrap(), "1\tx");
        assert!(matches!(completion_text("{}"), Err(BackendError::Response(_))));
        assert!(matches!(completion_text("nope"), Err(BackendError::Response(_))));
    }

    #[test]
    fn mock_script_parses_from_json() {
        let script: MockScript = serde_json::from_str(
            r#"{"default":{"kind":"garbage"},
                "by_sent_id":{"s7":{"kind":"edit","edits":[{"id":2,"deprel":"obl:arg"}]},
                              "s8":{"kind":"sequence","steps":[{"kind":"fail"},{"kind":"echo"}]}}}"#,
        )
        .unwrap();
        assert_eq!(script.default, MockRule::Garbage);
        assert_eq!(script.by_sent_id.len(), 2);
        let empty: MockScript = serde_json::from_str("{}").unwrap();
        assert_eq!(empty.default, MockRule::Echo);
    }

    #[test]
    fn missing_mock_script_is_a_config_error() {
        assert!(matches!(
            MockBackend::from_spec("/nonexistent/script.json"),
            Err(BackendError::Config(_))
        ));
    }
}
