//! Text-completion backends: an OpenAI-compatible HTTP client, a scripted
//! backend for offline runs, and a transformation-library backend that plays
//! the part of a model over a fixed set of known rewrites.

mod library;
mod openai;
mod scripted;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use library::{LibraryBackend, Transition};
pub use openai::{OpenAiBackend, API_KEY_ENV};
pub use scripted::{ManifestError, ScriptEntry, ScriptManifest, ScriptedBackend};

/// Which of the two prompts a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Plan,
    Code,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Plan => "plan",
            Phase::Code => "code",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_retries: u32,
    /// Delay before the first retry; doubled for each further one.
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, backoff_ms: 1000 }
    }
}

/// One hosted model behind an OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    /// Environment variable holding this model's key, if not `TENSOPT_API_KEY`.
    pub api_key_env: Option<String>,
    pub max_in_flight: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            temperature: 1.0,
            max_tokens: 8192,
            timeout_secs: 600,
            retry: RetryPolicy::default(),
            api_key_env: None,
            max_in_flight: 8,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(format!("model {}: temperature must be >= 0", self.model));
        }
        if self.max_in_flight == 0 || self.timeout_secs == 0 || self.max_tokens == 0 {
            return Err(format!("model {}: max_in_flight, timeout_secs and max_tokens must be positive", self.model));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Completion {
        Completion { text: text.into(), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("request failed after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("provider rejected the request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("empty response")]
    Empty,
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("no API key: set {0}")]
    MissingKey(String),
    #[error("script has no remaining {0} entry matching the prompt")]
    ScriptExhausted(Phase),
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, phase: Phase, prompt: &str) -> Result<Completion, LlmError>;

    /// Upper bound on concurrent requests issued by [`Backend::complete_batch`].
    fn max_in_flight(&self) -> usize {
        8
    }

    /// Answers every prompt; results line up with `prompts`. The default
    /// issues up to `max_in_flight` requests at a time.
    fn complete_batch(&self, phase: Phase, prompts: &[String]) -> Vec<Result<Completion, LlmError>> {
        let workers = self.max_in_flight().clamp(1, prompts.len().max(1));
        if workers == 1 {
            return prompts.iter().map(|p| self.complete(phase, p)).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<Completion, LlmError>>>> = prompts.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(p) = prompts.get(i) else { break };
                    let r = self.complete(phase, p);
                    *slots[i].lock().unwrap() = Some(r);
                });
            }
        });
        slots.into_iter().map(|m| m.into_inner().unwrap().expect("every slot answered")).collect()
    }
}

/// Round-robin model index for each of `n_samples` requests.
pub fn ensemble_assign<T>(n_samples: usize, models: &[T]) -> Vec<usize> {
    if models.is_empty() {
        return Vec::new();
    }
    (0..n_samples).map(|i| i % models.len()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(n: usize, k: usize) -> Vec<usize> {
        let mut c = vec![0; k];
        for m in ensemble_assign(n, &vec![(); k]) {
            c[m] += 1;
        }
        c
    }

    #[test]
    fn assignment_examples() {
        assert_eq!(counts(12, 2), [6, 6]);
        assert_eq!(counts(7, 2), [4, 3]);
        assert_eq!(counts(5, 1), [5]);
        assert!(ensemble_assign::<()>(3, &[]).is_empty());
    }

    struct Echo;

    impl Backend for Echo {
        fn name(&self) -> &str {
            "echo"
        }

        fn complete(&self, _: Phase, prompt: &str) -> Result<Completion, LlmError> {
            if prompt.is_empty() {
                Err(LlmError::Empty)
            } else {
                Ok(Completion::text(prompt.to_uppercase()))
            }
        }
    }

    #[test]
    fn batches_keep_request_order() {
        let prompts: Vec<String> = (0..40).map(|i| if i % 7 == 0 { String::new() } else { format!("p{i}") }).collect();
        let out = Echo.complete_batch(Phase::Plan, &prompts);
        for (i, r) in out.iter().enumerate() {
            match r {
                Ok(c) => assert_eq!(c.text, format!("P{i}")),
                Err(e) => assert_eq!((i % 7, e), (0, &LlmError::Empty)),
            }
        }
    }
}
