//! Blocking client for the Ollama-compatible `/api/generate` endpoint.
//!
//! The request body is exactly
//! `{"model", "prompt", "stream": false, "options": {"seed", "temperature",
//! "num_predict"}}` and the response must carry a string field `response`.
//! Every transport failure, non-2xx status, timeout or malformed body
//! aborts the verification run; there is no silent fallback.

use super::OracleError;
use serde::{Deserialize, Serialize};
use std::time::Duration;

#[derive(Serialize)]
struct GenerateRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    stream: bool,
    options: GenerateOptions,
}

#[derive(Serialize)]
struct GenerateOptions {
    seed: i64,
    temperature: f64,
    num_predict: i64,
}

#[derive(Deserialize)]
struct GenerateResponse {
    response: String,
}

pub struct OllamaClient {
    agent: ureq::Agent,
    url: String,
    pub model_name: String,
    pub seed: i64,
    pub temperature: f64,
    pub num_predict: i64,
}

impl OllamaClient {
    pub fn new(
        endpoint: &str,
        model_name: &str,
        seed: i64,
        temperature: f64,
        num_predict: i64,
        request_timeout: Duration,
    ) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(request_timeout).build();
        OllamaClient {
            agent,
            url: format!("{}/api/generate", endpoint.trim_end_matches('/')),
            model_name: model_name.to_string(),
            seed,
            temperature,
            num_predict,
        }
    }

    /// One generation request. Returns the raw response text.
    pub fn generate(&self, prompt: &str) -> Result<String, OracleError> {
        let body = GenerateRequest {
            model: &self.model_name,
            prompt,
            stream: false,
            options: GenerateOptions {
                seed: self.seed,
                temperature: self.temperature,
                num_predict: self.num_predict,
            },
        };
        let response = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| match e {
                ureq::Error::Status(status, resp) => OracleError::Endpoint {
                    status,
                    body: resp
                        .into_string()
                        .unwrap_or_default()
                        .chars()
                        .take(200)
                        .collect(),
                },
                ureq::Error::Transport(t) => OracleError::Transport(t.to_string()),
            })?;
        let parsed: GenerateResponse = response
            .into_json()
            .map_err(|e| OracleError::MalformedResponse(e.to_string()))?;
        Ok(parsed.response)
    }
}
