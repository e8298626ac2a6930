use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, Completion, LlmError, ModelSpec, Phase};

/// Default environment variable for the API key.
pub const API_KEY_ENV: &str = "TENSOPT_API_KEY";

/// Chat-completions client. Every request is a single user message.
pub struct OpenAiBackend {
    spec: ModelSpec,
    key: String,
    agent: ureq::Agent,
}

enum Failure {
    Transient(String),
    Fatal(LlmError),
}

impl OpenAiBackend {
    /// Reads the key from `spec.api_key_env`, or `TENSOPT_API_KEY` when unset.
    pub fn from_env(spec: ModelSpec) -> Result<OpenAiBackend, LlmError> {
        let var = spec.api_key_env.clone().unwrap_or_else(|| API_KEY_ENV.to_string());
        match std::env::var(&var) {
            Ok(key) if !key.is_empty() => Ok(Self::with_key(spec, key)),
            _ => Err(LlmError::MissingKey(var)),
        }
    }

    pub fn with_key(spec: ModelSpec, key: String) -> OpenAiBackend {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(spec.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        OpenAiBackend { spec, key, agent }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn attempt(&self, prompt: &str) -> Result<Completion, Failure> {
        let body = json!({
            "model": self.spec.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.spec.temperature,
            "max_tokens": self.spec.max_tokens,
        });
        let mut resp = self
            .agent
            .post(&self.spec.endpoint)
            .header("Authorization", format!("Bearer {}", self.key))
            .send_json(&body)
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| Failure::Transient(e.to_string()))?;
        if status == 408 || status == 429 || status >= 500 {
            return Err(Failure::Transient(format!("status {status}: {text}")));
        }
        if !(200..300).contains(&status) {
            return Err(Failure::Fatal(LlmError::Rejected { status, body: text }));
        }
        parse_response(&text).map_err(Failure::Fatal)
    }
}

fn parse_response(text: &str) -> Result<Completion, LlmError> {
    let v: Value = serde_json::from_str(text).map_err(|e| LlmError::Malformed(e.to_string()))?;
    let content =
        v["choices"][0]["message"]["content"].as_str().ok_or_else(|| LlmError::Malformed("no choices[0].message.content".into()))?;
    if content.trim().is_empty() {
        return Err(LlmError::Empty);
    }
    Ok(Completion {
        text: content.to_string(),
        prompt_tokens: v["usage"]["prompt_tokens"].as_u64(),
        completion_tokens: v["usage"]["completion_tokens"].as_u64(),
    })
}

impl Backend for OpenAiBackend {
    fn name(&self) -> &str {
        &self.spec.model
    }

    fn max_in_flight(&self) -> usize {
        self.spec.max_in_flight
    }

    fn complete(&self, _phase: Phase, prompt: &str) -> Result<Completion, LlmError> {
        let attempts = self.spec.retry.max_retries + 1;
        let mut last = String::new();
        for n in 0..attempts {
            if n > 0 {
                let wait = self.spec.retry.backoff_ms.saturating_mul(1 << (n - 1).min(16));
                std::thread::sleep(Duration::from_millis(wait));
            }
            match self.attempt(prompt) {
                Ok(c) => return Ok(c),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient(e)) => {
                    log::warn!("{}: attempt {} failed: {e}", self.spec.model, n + 1);
                    last = e;
                }
            }
        }
        Err(LlmError::Exhausted { attempts, last })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_content_and_usage() {
        let c = parse_response(
            r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}],"usage":{"prompt_tokens":12,"completion_tokens":3}}"#,
        )
        .unwrap();
        assert_eq!(c, Completion { text: "hi".into(), prompt_tokens: Some(12), completion_tokens: Some(3) });
        assert_eq!(parse_response(r#"{"choices":[{"message":{"content":"  "}}]}"#), Err(LlmError::Empty));
        assert!(matches!(parse_response(r#"{"error":"x"}"#), Err(LlmError::Malformed(_))));
    }

    #[test]
    fn missing_key_names_the_variable() {
        let spec = ModelSpec { api_key_env: Some("TENSOPT_TEST_UNSET_KEY".into()), ..Default::default() };
        assert!(matches!(OpenAiBackend::from_env(spec), Err(LlmError::MissingKey(v)) if v == "TENSOPT_TEST_UNSET_KEY"));
    }
}
