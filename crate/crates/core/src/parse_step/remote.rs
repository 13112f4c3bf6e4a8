//! Completion-service backend.
//!
//! Wire format: `POST {endpoint}` with `{"prompt", "max_tokens", "temperature": 0}`
//! (plus `"model"` when configured), answered by `{"text": "..."}`.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{build_prompt, rule::split_enumerated, ParseError, PromptTemplate, RuleParser, StepInstruction};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub timeout_secs: f64,
    pub max_tokens: u32,
    pub retries: usize,
    pub max_in_flight: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/completions".into(),
            model: None,
            api_key: None,
            timeout_secs: 30.0,
            max_tokens: 128,
            retries: 2,
            max_in_flight: 4,
        }
    }
}

/// Transport for prompt completion.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str, max_tokens: u32) -> Result<String, String>;
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a str>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

pub struct HttpCompletion {
    client: reqwest::blocking::Client,
    config: RemoteConfig,
}

impl HttpCompletion {
    pub fn new(config: RemoteConfig) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self { client, config })
    }
}

impl CompletionClient for HttpCompletion {
    fn complete(&self, prompt: &str, max_tokens: u32) -> Result<String, String> {
        let body = CompletionRequest { prompt, max_tokens, temperature: 0.0, model: self.config.model.as_deref() };
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("HTTP {}", resp.status()));
        }
        resp.json::<CompletionResponse>().map(|r| r.text).map_err(|e| e.to_string())
    }
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteBackend {
    client: Box<dyn CompletionClient>,
    template: PromptTemplate,
    max_tokens: u32,
    retries: usize,
    gate: Gate,
}

impl RemoteBackend {
    pub fn from_config(config: RemoteConfig) -> Result<Self, String> {
        let (max_tokens, retries, inflight) = (config.max_tokens, config.retries, config.max_in_flight);
        Ok(Self::with_client(Box::new(HttpCompletion::new(config)?), max_tokens, retries, inflight))
    }

    pub fn with_client(
        client: Box<dyn CompletionClient>,
        max_tokens: u32,
        retries: usize,
        max_in_flight: usize,
    ) -> Self {
        Self {
            client,
            template: PromptTemplate::default(),
            max_tokens,
            retries,
            gate: Gate { free: Mutex::new(max_in_flight.max(1)), cv: Condvar::new() },
        }
    }

    pub fn parse(&self, response: &str) -> Result<Vec<StepInstruction>, ParseError> {
        let prompt = build_prompt(response, &self.template)?;
        let attempts = self.retries + 1;
        let mut last_err = String::new();
        for _ in 0..attempts {
            let result = {
                let _permit = self.gate.acquire();
                self.client.complete(&prompt, self.max_tokens)
            };
            match result {
                Ok(text) => match steps_from_completion(&text) {
                    Some(steps) => return Ok(steps),
                    None => last_err = format!("completion has no steps: {text:?}"),
                },
                Err(e) => last_err = e,
            }
        }
        Err(ParseError::Remote { raw_response: response.to_string(), attempts, message: last_err })
    }
}

/// Interprets text continuing after the prompt's trailing `1.`.
fn steps_from_completion(text: &str) -> Option<Vec<StepInstruction>> {
    let body = text.split("Commander says").next().unwrap_or("");
    let full = format!("1. {}", body.trim());
    let items = split_enumerated(&full)?;
    let parser = RuleParser::default();
    let mut steps = Vec::new();
    for item in items.iter().filter(|i| !i.trim().is_empty()) {
        // Keep the service's segmentation; only normalize surface form.
        let mut s = parser.parse(item).into_iter().map(|s| s.text).collect::<Vec<_>>();
        if s.len() > 1 {
            s = vec![s.join(" ")];
        }
        steps.extend(s);
    }
    if steps.is_empty() {
        return None;
    }
    Some(steps.into_iter().enumerate().map(|(i, text)| StepInstruction { index: i + 1, text }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    struct Scripted {
        replies: Mutex<Vec<Result<String, String>>>,
        calls: Arc<AtomicUsize>,
    }

    impl CompletionClient for Scripted {
        fn complete(&self, _prompt: &str, _max_tokens: u32) -> Result<String, String> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.replies.lock().unwrap().remove(0)
        }
    }

    fn backend(replies: Vec<Result<String, String>>, retries: usize) -> (RemoteBackend, Arc<AtomicUsize>) {
        let calls = Arc::new(AtomicUsize::new(0));
        let client = Scripted { replies: Mutex::new(replies), calls: calls.clone() };
        (RemoteBackend::with_client(Box::new(client), 128, retries, 4), calls)
    }

    #[test]
    fn completion_is_split_into_steps() {
        let (b, _) =
            backend(vec![Ok(" Enter the bedroom. 2. Walk through it. 3. Exit by using a door on the left.".into())], 0);
        let steps =
            b.parse("Go into the bedroom and walk through it and exit it by using a door on the left.").unwrap();
        let texts: Vec<_> = steps.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["Enter the bedroom.", "Walk through it.", "Exit by using a door on the left."]);
    }

    #[test]
    fn retries_then_reports_raw_response() {
        let (b, calls) = backend(vec![Err("timeout".into()), Err("timeout".into())], 1);
        match b.parse("I would go back.") {
            Err(ParseError::Remote { raw_response, attempts, .. }) => {
                assert_eq!(raw_response, "I would go back.");
                assert_eq!(attempts, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn recovers_on_retry() {
        let (b, _) = backend(vec![Err("503".into()), Ok(" Go back.".into())], 2);
        assert_eq!(b.parse("I would go back.").unwrap()[0].text, "Go back.");
    }

    #[test]
    fn trailing_prompt_echo_is_ignored() {
        let steps = steps_from_completion(" Go back.\nCommander says: \"x\". step by step: 1. y").unwrap();
        assert_eq!(steps.len(), 1);
    }
}
