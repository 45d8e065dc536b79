//! The policy: prompt encoding, response sourcing and action parsing.
//!
//! A policy decision composes three steps: render the state into a prompt,
//! obtain an output string (from an LLM endpoint, a scripted lookup table,
//! or a constant), and parse that string into an enabled action. Parsing is
//! total: when no enabled action can be extracted, a deterministic fallback
//! is chosen and the decision is flagged faulty. Decisions are memoized per
//! state, so every distinct state is queried exactly once per run and the
//! faulty counter is well-defined.

mod cache;
mod ollama;
mod template;

pub use cache::{cache_key, ResponseCache};
pub use ollama::OllamaClient;
pub use template::{encode_state, PromptTemplate, StateEncoder, TemplateError};

use crate::prism::SymbolicModel;
use crate::semantics::{canonical_state_key, declared_actions, StateVector};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("transport error talking to the LLM endpoint: {0}")]
    Transport(String),
    #[error("LLM endpoint returned status {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("malformed LLM response: {0}")]
    MalformedResponse(String),
    #[error("cache file {path}: {message}")]
    Cache { path: String, message: String },
    #[error("prompt encoding failed: {0}")]
    Template(#[from] TemplateError),
    #[error("oracle kind '{0}' requires a prompt template")]
    MissingTemplate(String),
    #[error("scripted policy has no entry for state {0}")]
    ScriptedMissingState(String),
    #[error("scripted policy maps state {state} to unknown action '{action}'")]
    ScriptedUnknownAction { state: String, action: String },
    #[error("constant oracle action '{0}' is not a declared action")]
    UnknownConstantAction(String),
    #[error("faulty action in strict mode: state {state} produced output {raw:?}")]
    FaultyAction { state: String, raw: String },
}

/// How an action decision was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    ExactMatch,
    KeywordMatch,
    FallbackDefault,
    FallbackFirstEnabled,
    Scripted,
}

/// Result of one policy query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDecision {
    pub action: String,
    pub raw_output: String,
    pub faulty: bool,
    pub source: DecisionSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Ollama,
    Scripted,
    Constant,
}

/// Configuration of the policy source for one verification run. The seed
/// is fixed for the whole run so identical prompts yield identical outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub endpoint: String,
    pub model_name: String,
    pub seed: i64,
    pub temperature: f64,
    pub max_output_tokens: i64,
    pub default_action: Option<String>,
    pub cache_path: Option<PathBuf>,
    pub request_timeout_s: f64,
    pub strict_faulty: bool,
    pub scripted_policy_path: Option<PathBuf>,
    pub constant_action: Option<String>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            kind: OracleKind::Constant,
            endpoint: "http://localhost:11434".to_string(),
            model_name: String::new(),
            seed: 42,
            temperature: 0.0,
            max_output_tokens: 256,
            default_action: None,
            cache_path: None,
            request_timeout_s: 120.0,
            strict_faulty: false,
            scripted_policy_path: None,
            constant_action: None,
        }
    }
}

// --- action parsing -----------------------------------------------------

/// Remove `<think>...</think>` regions (case-insensitive). An unclosed
/// opening tag swallows the rest of the string.
fn strip_think(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    loop {
        let Some(open) = find_ci(rest, "<think>") else {
            out.push_str(rest);
            return out;
        };
        out.push_str(&rest[..open]);
        let after = &rest[open + "<think>".len()..];
        match find_ci(after, "</think>") {
            Some(close) => rest = &after[close + "</think>".len()..],
            None => return out,
        }
    }
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Last whole-word, case-insensitive occurrence of any declared action in
/// the text; ties on start position break toward the longer match.
fn last_keyword<'a>(text: &str, declared: &'a [String]) -> Option<&'a String> {
    let hay = text.as_bytes();
    let mut best: Option<(usize, usize, &'a String)> = None;
    for action in declared {
        let n = action.as_bytes();
        if n.is_empty() || hay.len() < n.len() {
            continue;
        }
        for i in 0..=hay.len() - n.len() {
            if !hay[i..i + n.len()].eq_ignore_ascii_case(n) {
                continue;
            }
            let left_ok = i == 0 || !is_word_byte(hay[i - 1]);
            let right_ok = i + n.len() == hay.len() || !is_word_byte(hay[i + n.len()]);
            if left_ok && right_ok {
                let candidate = (i, i + n.len(), action);
                best = match best {
                    Some(b) if (b.0, b.1) >= (candidate.0, candidate.1) => Some(b),
                    _ => Some(candidate),
                };
            }
        }
    }
    best.map(|(_, _, a)| a)
}

/// Parse a raw output string into an action decision.
///
/// The pipeline is deterministic: strip `<think>` regions, trim whitespace
/// and punctuation, try a case-insensitive exact match against the declared
/// actions, otherwise take the last whole-word occurrence of any declared
/// action. If the matched action is not enabled, or nothing matched, fall
/// back to the default action (when enabled) or the first enabled action;
/// fallbacks are flagged faulty. `enabled` must be nonempty.
pub fn parse_action(
    raw: &str,
    declared: &[String],
    enabled: &[String],
    default_action: Option<&str>,
) -> ActionDecision {
    assert!(!enabled.is_empty(), "terminal states are never queried");
    let stripped = strip_think(raw);
    let trimmed = stripped.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());

    let matched = declared
        .iter()
        .find(|a| a.eq_ignore_ascii_case(trimmed))
        .map(|a| (a, DecisionSource::ExactMatch))
        .or_else(|| last_keyword(&stripped, declared).map(|a| (a, DecisionSource::KeywordMatch)));

    if let Some((action, source)) = matched {
        if enabled.contains(action) {
            return ActionDecision {
                action: action.clone(),
                raw_output: raw.to_string(),
                faulty: false,
                source,
            };
        }
    }
    fallback(raw.to_string(), enabled, default_action)
}

fn fallback(
    raw_output: String,
    enabled: &[String],
    default_action: Option<&str>,
) -> ActionDecision {
    if let Some(default) = default_action {
        if let Some(action) = enabled.iter().find(|a| a.as_str() == default) {
            return ActionDecision {
                action: action.clone(),
                raw_output,
                faulty: true,
                source: DecisionSource::FallbackDefault,
            };
        }
    }
    ActionDecision {
        action: enabled[0].clone(),
        raw_output,
        faulty: true,
        source: DecisionSource::FallbackFirstEnabled,
    }
}

// --- the oracle ---------------------------------------------------------

enum OracleSource {
    Ollama {
        client: OllamaClient,
        cache: ResponseCache,
    },
    Scripted {
        table: BTreeMap<String, String>,
    },
    Constant {
        action: String,
    },
}

/// The policy oracle: deterministic state-to-action function with faulty
/// accounting. Safe to query from multiple threads; decisions for distinct
/// states are independent and memoized.
pub struct PolicyOracle {
    source: OracleSource,
    default_action: Option<String>,
    strict_faulty: bool,
    memo: Mutex<HashMap<StateVector, ActionDecision>>,
    llm_calls: AtomicU64,
    cache_hits: AtomicU64,
    faulty_states: AtomicU64,
}

impl PolicyOracle {
    pub fn from_config(config: &OracleConfig) -> Result<Self, OracleError> {
        let source = match config.kind {
            OracleKind::Ollama => {
                let cache = match &config.cache_path {
                    Some(path) => ResponseCache::open(path)?,
                    None => ResponseCache::in_memory(),
                };
                OracleSource::Ollama {
                    client: OllamaClient::new(
                        &config.endpoint,
                        &config.model_name,
                        config.seed,
                        config.temperature,
                        config.max_output_tokens,
                        Duration::from_secs_f64(config.request_timeout_s.max(0.001)),
                    ),
                    cache,
                }
            }
            OracleKind::Scripted => {
                let path = config.scripted_policy_path.as_ref().ok_or_else(|| {
                    OracleError::ScriptedMissingState("<no policy file configured>".into())
                })?;
                let text = std::fs::read_to_string(path).map_err(|e| OracleError::Cache {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                let table: BTreeMap<String, String> =
                    serde_json::from_str(&text).map_err(|e| OracleError::Cache {
                        path: path.display().to_string(),
                        message: format!("invalid scripted policy JSON: {e}"),
                    })?;
                OracleSource::Scripted { table }
            }
            OracleKind::Constant => {
                let action = config
                    .constant_action
                    .clone()
                    .ok_or_else(|| OracleError::UnknownConstantAction("<unset>".into()))?;
                OracleSource::Constant { action }
            }
        };
        Ok(PolicyOracle {
            source,
            default_action: config.default_action.clone(),
            strict_faulty: config.strict_faulty,
            memo: Mutex::new(HashMap::new()),
            llm_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            faulty_states: AtomicU64::new(0),
        })
    }

    /// Build a scripted oracle from an in-memory table.
    pub fn scripted(table: BTreeMap<String, String>) -> Self {
        PolicyOracle {
            source: OracleSource::Scripted { table },
            default_action: None,
            strict_faulty: false,
            memo: Mutex::new(HashMap::new()),
            llm_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            faulty_states: AtomicU64::new(0),
        }
    }

    /// Build a constant oracle that always proposes `action`.
    pub fn constant(action: impl Into<String>) -> Self {
        PolicyOracle {
            source: OracleSource::Constant {
                action: action.into(),
            },
            default_action: None,
            strict_faulty: false,
            memo: Mutex::new(HashMap::new()),
            llm_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            faulty_states: AtomicU64::new(0),
        }
    }

    pub fn llm_calls(&self) -> u64 {
        self.llm_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::SeqCst)
    }

    pub fn faulty_states(&self) -> u64 {
        self.faulty_states.load(Ordering::SeqCst)
    }

    pub fn is_memoized(&self, s: &StateVector) -> bool {
        self.memo.lock().unwrap().contains_key(s)
    }

    /// Decide the action for a non-terminal state. `enabled` must be the
    /// enabled-action list of `s` in first-appearance order.
    pub fn decide(
        &self,
        model: &SymbolicModel,
        encoder: Option<&StateEncoder>,
        s: &StateVector,
        enabled: &[String],
    ) -> Result<ActionDecision, OracleError> {
        assert!(!enabled.is_empty(), "terminal states are never queried");
        if let Some(hit) = self.memo.lock().unwrap().get(s) {
            return Ok(hit.clone());
        }

        let decision = match &self.source {
            OracleSource::Ollama { client, cache } => {
                let encoder =
                    encoder.ok_or_else(|| OracleError::MissingTemplate("ollama".into()))?;
                let prompt = encoder.encode(model, s)?;
                let key = cache_key(
                    &client.model_name,
                    client.seed,
                    client.temperature,
                    client.num_predict,
                    &prompt,
                );
                let raw = match cache.get(&key) {
                    Some(hit) => {
                        self.cache_hits.fetch_add(1, Ordering::SeqCst);
                        hit
                    }
                    None => {
                        let raw = client.generate(&prompt)?;
                        self.llm_calls.fetch_add(1, Ordering::SeqCst);
                        cache.put(&key, &raw)?;
                        raw
                    }
                };
                let declared = declared_actions(model);
                parse_action(&raw, &declared, enabled, self.default_action.as_deref())
            }
            OracleSource::Scripted { table } => {
                let key = canonical_state_key(model, s);
                let action = table
                    .get(&key)
                    .ok_or(OracleError::ScriptedMissingState(key.clone()))?;
                let declared = declared_actions(model);
                if !declared.contains(action) {
                    return Err(OracleError::ScriptedUnknownAction {
                        state: key,
                        action: action.clone(),
                    });
                }
                scripted_decision(action, enabled, self.default_action.as_deref())
            }
            OracleSource::Constant { action } => {
                let declared = declared_actions(model);
                if !declared.contains(action) {
                    return Err(OracleError::UnknownConstantAction(action.clone()));
                }
                scripted_decision(action, enabled, self.default_action.as_deref())
            }
        };

        let mut memo = self.memo.lock().unwrap();
        // a concurrent prefetch may have decided this state first; keep the
        // stored decision so counters stay single-counted per state
        if let Some(existing) = memo.get(s) {
            return Ok(existing.clone());
        }
        if decision.faulty {
            self.faulty_states.fetch_add(1, Ordering::SeqCst);
            if self.strict_faulty {
                return Err(OracleError::FaultyAction {
                    state: canonical_state_key(model, s),
                    raw: decision.raw_output,
                });
            }
        }
        memo.insert(s.clone(), decision.clone());
        Ok(decision)
    }
}

/// A scripted or constant proposal: taken verbatim when enabled, otherwise
/// the deterministic fallback applies.
fn scripted_decision(
    action: &str,
    enabled: &[String],
    default_action: Option<&str>,
) -> ActionDecision {
    match enabled.iter().find(|a| a.as_str() == action) {
        Some(a) => ActionDecision {
            action: a.clone(),
            raw_output: action.to_string(),
            faulty: false,
            source: DecisionSource::Scripted,
        },
        None => fallback(action.to_string(), enabled, default_action),
    }
}
