//! End-to-end verification runs and machine-readable reports.
//!
//! A run parses the property first, then parses, validates and resolves the
//! model, builds the induced chain under the configured oracle, checks each
//! property, writes optional explicit-state exports, and emits a stable
//! JSON report. Exit codes: 0 satisfied or value computed, 2 violated,
//! 3 timeout, 4 input error, 5 oracle/transport error.

use crate::dtmc::{build, export_explicit, BuildError, BuildLimits, BuildStats, InducedDtmc};
use crate::oracle::{OracleConfig, OracleError, PolicyOracle, PromptTemplate, StateEncoder};
use crate::pctl::{check, parse_property, CheckResult, SolverOptions, StateFormula};
use crate::prism::{parse_model, resolve_constants, validate_model, SymbolicModel, Value};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 2;
pub const EXIT_TIMEOUT: i32 = 3;
pub const EXIT_INPUT_ERROR: i32 = 4;
pub const EXIT_ORACLE_ERROR: i32 = 5;

/// Everything one verification run needs. Serialized verbatim into the
/// report for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model_path: PathBuf,
    /// Constant overrides as written on the command line, `NAME=VALUE`.
    pub constants: BTreeMap<String, String>,
    /// Property texts; either inline or loaded from a `.props` file.
    pub properties: Vec<String>,
    pub oracle: OracleConfig,
    pub template_path: Option<PathBuf>,
    pub var_map_path: Option<PathBuf>,
    pub limits: BuildLimits,
    pub export_tra: Option<PathBuf>,
    pub export_lab: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model_path: PathBuf::new(),
            constants: BTreeMap::new(),
            properties: Vec::new(),
            oracle: OracleConfig::default(),
            template_path: None,
            var_map_path: None,
            limits: BuildLimits::default(),
            export_tra: None,
            export_lab: None,
            report_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    TimedOut,
    Error,
}

/// Per-property slice of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    pub value: f64,
    pub satisfied: Option<bool>,
    pub boundary: bool,
    pub iterations: u64,
    pub residual: f64,
    pub method: String,
    pub check_time_s: f64,
}

/// The report of one run. Field order is the stable JSON schema; absent
/// result fields encode a run that produced no result (timeout or error).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub satisfied: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<bool>,
    pub properties: Vec<PropertyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_states: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_transitions: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_transitions_excl_terminal_self_loops: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub build_time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub faulty_actions: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llm_calls: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_hits: Option<u64>,
    pub timed_out: bool,
    pub exit_code: i32,
    pub config: RunConfig,
}

impl VerificationReport {
    fn empty(config: &RunConfig) -> Self {
        VerificationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            status: RunStatus::Ok,
            error: None,
            result_value: None,
            satisfied: None,
            boundary: None,
            properties: Vec::new(),
            num_states: None,
            num_transitions: None,
            num_transitions_excl_terminal_self_loops: None,
            build_time_s: None,
            check_time_s: None,
            faulty_actions: None,
            llm_calls: None,
            cache_hits: None,
            timed_out: false,
            exit_code: EXIT_OK,
            config: config.clone(),
        }
    }

    fn with_stats(&mut self, stats: &BuildStats) {
        self.num_states = Some(stats.num_states);
        self.num_transitions = Some(stats.num_transitions);
        self.num_transitions_excl_terminal_self_loops =
            Some(stats.num_transitions - stats.num_terminal_self_loops);
        self.build_time_s = Some(stats.build_time_s);
        self.faulty_actions = Some(stats.faulty_actions);
        self.llm_calls = Some(stats.llm_calls);
        self.cache_hits = Some(stats.cache_hits);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// A failure, classified for exit-code purposes.
#[derive(Debug)]
pub struct PipelineError {
    pub exit_code: i32,
    pub message: String,
    pub stats: Option<BuildStats>,
}

impl PipelineError {
    fn input(message: impl Into<String>) -> Self {
        PipelineError {
            exit_code: EXIT_INPUT_ERROR,
            message: message.into(),
            stats: None,
        }
    }

    fn oracle(err: &OracleError) -> Self {
        let exit_code = match err {
            // aborting on a faulty action under --strict-faulty is a
            // policy-input problem, not a transport problem
            OracleError::FaultyAction { .. } => EXIT_INPUT_ERROR,
            _ => EXIT_ORACLE_ERROR,
        };
        PipelineError {
            exit_code,
            message: err.to_string(),
            stats: None,
        }
    }
}

fn load_inputs(config: &RunConfig) -> Result<(SymbolicModel, Option<StateEncoder>), PipelineError> {
    let model_text = std::fs::read_to_string(&config.model_path).map_err(|e| {
        PipelineError::input(format!(
            "cannot read model {}: {e}",
            config.model_path.display()
        ))
    })?;
    let model = parse_model(&model_text)
        .map_err(|e| PipelineError::input(format!("{}: {e}", config.model_path.display())))?;

    let diagnostics = validate_model(&model);
    if !diagnostics.is_empty() {
        let lines: Vec<String> = diagnostics.iter().map(|d| d.to_string()).collect();
        return Err(PipelineError::input(format!(
            "model validation failed:\n{}",
            lines.join("\n")
        )));
    }

    let mut overrides: BTreeMap<String, Value> = BTreeMap::new();
    for (name, raw) in &config.constants {
        overrides.insert(name.clone(), parse_constant_value(raw)?);
    }
    let model =
        resolve_constants(&model, &overrides).map_err(|e| PipelineError::input(e.to_string()))?;

    let diagnostics = validate_model(&model);
    if !diagnostics.is_empty() {
        let lines: Vec<String> = diagnostics.iter().map(|d| d.to_string()).collect();
        return Err(PipelineError::input(format!(
            "model validation failed after constant resolution:\n{}",
            lines.join("\n")
        )));
    }

    let encoder = match &config.template_path {
        Some(path) => {
            let template = PromptTemplate::from_file(path).map_err(|e| {
                PipelineError::input(format!("cannot read template {}: {e}", path.display()))
            })?;
            let var_map = match &config.var_map_path {
                Some(vm) => {
                    let text = std::fs::read_to_string(vm).map_err(|e| {
                        PipelineError::input(format!(
                            "cannot read variable map {}: {e}",
                            vm.display()
                        ))
                    })?;
                    serde_json::from_str(&text).map_err(|e| {
                        PipelineError::input(format!("invalid variable map {}: {e}", vm.display()))
                    })?
                }
                None => BTreeMap::new(),
            };
            Some(StateEncoder::new(template, var_map))
        }
        None => None,
    };
    Ok((model, encoder))
}

/// Parse a `NAME=VALUE` constant override value: integer, fraction `a/b`,
/// or decimal.
fn parse_constant_value(raw: &str) -> Result<Value, PipelineError> {
    let raw = raw.trim();
    if let Ok(n) = raw.parse::<i64>() {
        return Ok(Value::Int(n));
    }
    if let Some((num, den)) = raw.split_once('/') {
        if let (Ok(n), Ok(d)) = (num.trim().parse::<i64>(), den.trim().parse::<i64>()) {
            return crate::prism::Value::ratio(n, d)
                .map_err(|e| PipelineError::input(format!("bad constant value '{raw}': {e}")));
        }
    }
    let (neg, body) = match raw.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, raw),
    };
    if let Some((int_part, frac_part)) = body.split_once('.') {
        let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        if all_digits(int_part) && all_digits(frac_part) && frac_part.len() <= 18 {
            let den = 10i64.pow(frac_part.len() as u32);
            if let Ok(num) = format!("{int_part}{frac_part}").parse::<i64>() {
                let num = if neg { -num } else { num };
                return crate::prism::Value::ratio(num, den)
                    .map_err(|e| PipelineError::input(format!("bad constant value '{raw}': {e}")));
            }
        }
    }
    Err(PipelineError::input(format!(
        "bad constant value '{raw}': expected integer, fraction or decimal"
    )))
}

fn parse_properties(config: &RunConfig) -> Result<Vec<(String, StateFormula)>, PipelineError> {
    let mut out = Vec::new();
    for text in &config.properties {
        let formula = parse_property(text)
            .map_err(|e| PipelineError::input(format!("property '{text}': {e}")))?;
        out.push((text.clone(), formula));
    }
    Ok(out)
}

/// Read a `.props` file: one property per line, `//` comments and blank
/// lines ignored.
pub fn read_props_file(path: &Path) -> std::io::Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("//"))
        .map(str::to_string)
        .collect())
}

struct BuiltChain {
    dtmc: InducedDtmc,
}

fn build_chain(
    config: &RunConfig,
    model: &SymbolicModel,
    encoder: Option<&StateEncoder>,
) -> Result<BuiltChain, PipelineError> {
    if config.oracle.kind == crate::oracle::OracleKind::Ollama && encoder.is_none() {
        return Err(PipelineError::input(
            "oracle kind 'ollama' requires --template",
        ));
    }
    let oracle =
        PolicyOracle::from_config(&config.oracle).map_err(|e| PipelineError::oracle(&e))?;
    match build(model, &oracle, encoder, &config.limits) {
        Ok(dtmc) => Ok(BuiltChain { dtmc }),
        Err(BuildError::Timeout { stats }) => Err(PipelineError {
            exit_code: EXIT_TIMEOUT,
            message: format!("timed out after {:.3}s", stats.build_time_s),
            stats: Some(stats),
        }),
        Err(BuildError::StateLimitExceeded { limit, stats }) => Err(PipelineError {
            exit_code: EXIT_INPUT_ERROR,
            message: format!("state limit of {limit} exceeded"),
            stats: Some(stats),
        }),
        Err(BuildError::Oracle(e)) => Err(PipelineError::oracle(&e)),
        Err(BuildError::Semantics(e)) => Err(PipelineError::input(e.to_string())),
        Err(BuildError::InvalidChain(e)) => Err(PipelineError::input(e)),
    }
}

fn write_exports(config: &RunConfig, dtmc: &InducedDtmc) -> Result<(), PipelineError> {
    if let (Some(tra), Some(lab)) = (&config.export_tra, &config.export_lab) {
        export_explicit(dtmc, tra, lab)
            .map_err(|e| PipelineError::input(format!("export failed: {e}")))?;
    } else if config.export_tra.is_some() || config.export_lab.is_some() {
        return Err(PipelineError::input(
            "--export-tra and --export-lab must be given together",
        ));
    }
    Ok(())
}

fn finish(report: &VerificationReport) {
    if let Some(path) = &report.config.report_path {
        if let Err(e) = std::fs::write(path, report.to_json()) {
            eprintln!("warning: could not write report {}: {e}", path.display());
        }
    }
}

fn fail(config: &RunConfig, err: PipelineError) -> VerificationReport {
    let mut report = VerificationReport::empty(config);
    report.status = if err.exit_code == EXIT_TIMEOUT {
        RunStatus::TimedOut
    } else {
        RunStatus::Error
    };
    report.error = Some(err.message);
    report.exit_code = err.exit_code;
    if let Some(stats) = &err.stats {
        // partial counters are facts about the run even when it failed;
        // result fields stay absent
        report.timed_out = stats.timed_out;
        report.build_time_s = Some(stats.build_time_s);
        report.faulty_actions = Some(stats.faulty_actions);
        report.llm_calls = Some(stats.llm_calls);
        report.cache_hits = Some(stats.cache_hits);
    }
    finish(&report);
    report
}

/// Full pipeline: parse, validate, resolve, build, check, export, report.
pub fn run_verify(config: &RunConfig) -> VerificationReport {
    if config.properties.is_empty() {
        return fail(config, PipelineError::input("no property given"));
    }
    // properties must parse before any oracle call is made
    let properties = match parse_properties(config) {
        Ok(p) => p,
        Err(e) => return fail(config, e),
    };
    let (model, encoder) = match load_inputs(config) {
        Ok(v) => v,
        Err(e) => return fail(config, e),
    };
    let built = match build_chain(config, &model, encoder.as_ref()) {
        Ok(b) => b,
        Err(e) => return fail(config, e),
    };
    if let Err(e) = write_exports(config, &built.dtmc) {
        return fail(config, e);
    }

    let mut report = VerificationReport::empty(config);
    report.with_stats(built.dtmc.stats());

    let opts = SolverOptions::default();
    let mut total_check_time = 0.0;
    let mut any_violated = false;
    for (text, formula) in &properties {
        let start = Instant::now();
        let result: CheckResult = match check(&built.dtmc, formula, &opts) {
            Ok(r) => r,
            Err(e) => {
                return fail(
                    config,
                    PipelineError::input(format!("property '{text}': {e}")),
                )
            }
        };
        let check_time_s = start.elapsed().as_secs_f64();
        total_check_time += check_time_s;
        if result.satisfied == Some(false) {
            any_violated = true;
        }
        report.properties.push(PropertyReport {
            property: text.clone(),
            value: result.value,
            satisfied: result.satisfied,
            boundary: result.boundary,
            iterations: result.iterations,
            residual: result.residual,
            method: format!("{:?}", result.method).to_lowercase(),
            check_time_s,
        });
    }
    report.check_time_s = Some(total_check_time);
    if let Some(first) = report.properties.first() {
        report.result_value = Some(first.value);
        report.satisfied = first.satisfied;
        report.boundary = Some(first.boundary);
    }
    report.exit_code = if any_violated { EXIT_VIOLATED } else { EXIT_OK };
    finish(&report);
    report
}

/// Build and export the chain without checking any property.
pub fn run_build_only(config: &RunConfig) -> VerificationReport {
    let (model, encoder) = match load_inputs(config) {
        Ok(v) => v,
        Err(e) => return fail(config, e),
    };
    let built = match build_chain(config, &model, encoder.as_ref()) {
        Ok(b) => b,
        Err(e) => return fail(config, e),
    };
    if let Err(e) = write_exports(config, &built.dtmc) {
        return fail(config, e);
    }
    let mut report = VerificationReport::empty(config);
    report.with_stats(built.dtmc.stats());
    finish(&report);
    report
}
