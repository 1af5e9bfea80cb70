//! Remote verifier clients over HTTP.
//!
//! Two implementations of [`VerifierClient`]:
//!
//! - [`HttpVerifier`]: the native wire contract. `POST /verify` with
//!   `{"think", "candidates": [..]}`, answered by `{"matches": [bool, ..]}`
//!   of the same length and order. Non-200 or a length mismatch is a
//!   transport failure.
//! - [`ChatCompletionVerifier`]: the same interface reformulated as a
//!   chat-completion request: one yes/no question per candidate, answers
//!   parsed from the reply text.
//!
//! Both honor a configurable in-flight request cap and retry transport
//! failures with a fixed backoff.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::verifier::{VerifierClient, VerifierError, VerifyCandidate};

/// Endpoint, credential, and operational settings for a remote client.
#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: Option<String>,
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub retry_backoff: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            api_key: None,
            model: None,
            timeout: Duration::from_millis(30_000),
            max_in_flight: 4,
            max_retries: 2,
            retry_backoff: Duration::from_millis(250),
        }
    }
}

/// Counting gate bounding concurrent requests per client.
pub(crate) struct Gate {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    pub(crate) fn new(permits: usize) -> Self {
        Gate {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> GateGuard<'_> {
        let mut n = self.permits.lock().expect("gate lock");
        while *n == 0 {
            n = self.cv.wait(n).expect("gate wait");
        }
        *n -= 1;
        GateGuard { gate: self }
    }
}

pub(crate) struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.gate.permits.lock().expect("gate lock");
        *n += 1;
        self.gate.cv.notify_one();
    }
}

fn with_retries<T>(
    max_retries: u32,
    backoff: Duration,
    mut attempt: impl FnMut() -> Result<T, VerifierError>,
) -> Result<T, VerifierError> {
    let mut tries = 0;
    loop {
        match attempt() {
            Ok(v) => return Ok(v),
            Err(e) if tries < max_retries => {
                tries += 1;
                log::warn!("verifier attempt {tries} failed, retrying: {e}");
                if !backoff.is_zero() {
                    std::thread::sleep(backoff);
                }
            }
            Err(e) => return Err(e),
        }
    }
}

fn build_client(timeout: Duration) -> Result<reqwest::blocking::Client, VerifierError> {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| VerifierError::Transport(e.to_string()))
}

/// Native `/verify` wire contract.
pub struct HttpVerifier {
    cfg: RemoteConfig,
    client: reqwest::blocking::Client,
    gate: Gate,
}

#[derive(Deserialize)]
struct VerifyResponse {
    matches: Vec<bool>,
}

impl HttpVerifier {
    pub fn new(cfg: RemoteConfig) -> Result<Self, VerifierError> {
        let client = build_client(cfg.timeout)?;
        let gate = Gate::new(cfg.max_in_flight);
        Ok(HttpVerifier { cfg, client, gate })
    }
}

impl VerifierClient for HttpVerifier {
    fn verify(
        &self,
        think: &str,
        candidates: &[VerifyCandidate],
    ) -> Result<Vec<bool>, VerifierError> {
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let _permit = self.gate.acquire();
        with_retries(self.cfg.max_retries, self.cfg.retry_backoff, || {
            let mut req = self
                .client
                .post(&self.cfg.endpoint)
                .json(&json!({ "think": think, "candidates": candidates }));
            if let Some(key) = &self.cfg.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req
                .send()
                .map_err(|e| VerifierError::Transport(e.to_string()))?;
            let status = resp.status();
            if !status.is_success() {
                return Err(VerifierError::Transport(format!(
                    "verifier endpoint answered {status}"
                )));
            }
            let body: VerifyResponse = resp
                .json()
                .map_err(|e| VerifierError::Transport(e.to_string()))?;
            if body.matches.len() != candidates.len() {
                return Err(VerifierError::LengthMismatch {
                    expected: candidates.len(),
                    got: body.matches.len(),
                });
            }
            Ok(body.matches)
        })
    }
}

/// Chat-completion adapter behind the same interface.
pub struct ChatCompletionVerifier {
    cfg: RemoteConfig,
    client: reqwest::blocking::Client,
    gate: Gate,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl ChatCompletionVerifier {
    pub fn new(cfg: RemoteConfig) -> Result<Self, VerifierError> {
        let client = build_client(cfg.timeout)?;
        let gate = Gate::new(cfg.max_in_flight);
        Ok(ChatCompletionVerifier { cfg, client, gate })
    }

    fn prompt(think: &str, candidates: &[VerifyCandidate]) -> String {
        let mut out = String::with_capacity(think.len() + candidates.len() * 96);
        out.push_str("Rationale:\n");
        out.push_str(think);
        out.push_str("\n\nFor each numbered question answer exactly one line, '<n>: yes' or '<n>: no'.\n");
        for (i, c) in candidates.iter().enumerate() {
            out.push_str(&format!(
                "{}. Does the rationale assert that a {} sample {} {}?\n",
                i + 1,
                c.attack_name,
                c.predicate,
                c.feature_name,
            ));
        }
        out
    }

    /// Parse "n: yes"/"n. no" style lines into per-candidate booleans.
    fn parse_answers(content: &str, expected: usize) -> Result<Vec<bool>, VerifierError> {
        let mut answers: Vec<Option<bool>> = vec![None; expected];
        for line in content.lines() {
            let line = line.trim();
            let digits: String = line.chars().take_while(|c| c.is_ascii_digit()).collect();
            if digits.is_empty() {
                continue;
            }
            let Ok(idx) = digits.parse::<usize>() else {
                continue;
            };
            if idx == 0 || idx > expected {
                continue;
            }
            let rest = line[digits.len()..]
                .trim_start_matches([':', '.', ')', '-', ' '])
                .to_lowercase();
            let verdict = if rest.starts_with("yes") {
                Some(true)
            } else if rest.starts_with("no") {
                Some(false)
            } else {
                None
            };
            if let Some(v) = verdict {
                answers[idx - 1] = Some(v);
            }
        }
        let got = answers.iter().filter(|a| a.is_some()).count();
        if got != expected {
            return Err(VerifierError::Transport(format!(
                "chat reply answered {got} of {expected} questions"
            )));
        }
        Ok(answers.into_iter().map(|a| a.unwrap_or(false)).collect())
    }
}

impl VerifierClient for ChatCompletionVerifier {
    fn verify(
        &self,
        think: &str,
        candidates: &[VerifyCandidate],
    ) -> Result<Vec<bool>, VerifierError> {
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let _permit = self.gate.acquire();
        let prompt = Self::prompt(think, candidates);
        with_retries(self.cfg.max_retries, self.cfg.retry_backoff, || {
            let mut body = json!({
                "messages": [
                    {"role": "system", "content": "You verify whether a rationale mentions given attack-feature relations. Answer every question with yes or no."},
                    {"role": "user", "content": prompt}
                ],
                "temperature": 0
            });
            if let Some(model) = &self.cfg.model {
                body["model"] = json!(model);
            }
            let mut req = self.client.post(&self.cfg.endpoint).json(&body);
            if let Some(key) = &self.cfg.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req
                .send()
                .map_err(|e| VerifierError::Transport(e.to_string()))?;
            let status = resp.status();
            if !status.is_success() {
                return Err(VerifierError::Transport(format!(
                    "chat endpoint answered {status}"
                )));
            }
            let body: ChatResponse = resp
                .json()
                .map_err(|e| VerifierError::Transport(e.to_string()))?;
            let content = body
                .choices
                .first()
                .map(|c| c.message.content.as_str())
                .ok_or_else(|| VerifierError::Transport("chat reply had no choices".into()))?;
            Self::parse_answers(content, candidates.len())
        })
    }
}
