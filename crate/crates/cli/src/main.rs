//! `polmc` — verify memoryless agent policies against PCTL safety
//! properties on PRISM-style MDPs.
//!
//! The pipeline parses the model, resolves constants, builds the Markov
//! chain induced by the configured policy over exactly the reachable
//! states, checks the property with the built-in solver, and writes a JSON
//! report plus optional explicit-state exports.
//!
//! Exit codes: 0 satisfied or value computed, 2 violated, 3 timeout,
//! 4 input error, 5 oracle/transport error.

use clap::{Args, Parser, Subcommand};
use polmc_core::benchmarks;
use polmc_core::dtmc::BuildLimits;
use polmc_core::oracle::{OracleConfig, OracleKind};
use polmc_core::pipeline::{
    read_props_file, run_build_only, run_verify, RunConfig, RunStatus, VerificationReport,
    EXIT_INPUT_ERROR,
};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

const ENDPOINT_ENV: &str = "POLMC_ENDPOINT";
const CACHE_ENV: &str = "POLMC_CACHE";

#[derive(Parser)]
#[command(
    name = "polmc",
    version,
    about = "Probabilistic model checking of agent policies on PRISM-style MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the induced chain and check PCTL properties against it.
    Verify(RunArgs),
    /// Build and export the induced chain without checking a property.
    Build(RunArgs),
    /// Render a text table from a directory of report JSON files.
    Table {
        /// Directory containing *.json reports.
        dir: PathBuf,
    },
    /// List the bundled benchmark environments and their files.
    ListBenchmarks,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the .prism model file.
    #[arg(long)]
    model: PathBuf,

    /// Constant override NAME=VALUE; repeatable.
    #[arg(long = "const", value_name = "NAME=VALUE")]
    constants: Vec<String>,

    /// Property text, e.g. 'P=? [ F "water" ]'.
    #[arg(long)]
    prop: Option<String>,

    /// Property file, one property per line, // comments.
    #[arg(long)]
    prop_file: Option<PathBuf>,

    /// Policy source.
    #[arg(long, value_parser = ["ollama", "scripted", "constant"])]
    oracle: String,

    /// LLM endpoint base URL (env POLMC_ENDPOINT overrides the default).
    #[arg(long)]
    endpoint: Option<String>,

    /// LLM model name, e.g. llama3.2:3b.
    #[arg(long)]
    llm: Option<String>,

    /// Sampling seed, fixed for the whole run.
    #[arg(long, default_value_t = 42)]
    seed: i64,

    /// Sampling temperature.
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,

    /// Cap on generated tokens per query.
    #[arg(long, default_value_t = 256)]
    max_output_tokens: i64,

    /// Fallback action when the output parses to nothing usable.
    #[arg(long)]
    default_action: Option<String>,

    /// Abort the run on the first faulty action instead of falling back.
    #[arg(long)]
    strict_faulty: bool,

    /// Prompt template file with {var} placeholders (required for ollama).
    #[arg(long)]
    template: Option<PathBuf>,

    /// JSON map from template placeholders to model variables.
    #[arg(long)]
    var_map: Option<PathBuf>,

    /// Scripted policy JSON file mapping canonical states to actions.
    #[arg(long)]
    scripted_policy: Option<PathBuf>,

    /// Action proposed in every state by the constant oracle.
    #[arg(long)]
    constant_action: Option<String>,

    /// State cap for the build; 0 means unlimited.
    #[arg(long, default_value_t = 0)]
    max_states: usize,

    /// Wall-clock budget in seconds for build plus check.
    #[arg(long, default_value_t = 18000.0)]
    timeout_s: f64,

    /// Response cache file (env POLMC_CACHE supplies a default).
    #[arg(long)]
    cache: Option<PathBuf>,

    /// Oracle prefetch workers; 0 keeps the build sequential.
    #[arg(long, default_value_t = 0)]
    prefetch: usize,

    /// Write the transition file here (with --export-lab).
    #[arg(long)]
    export_tra: Option<PathBuf>,

    /// Write the label file here (with --export-tra).
    #[arg(long)]
    export_lab: Option<PathBuf>,

    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,

    /// HTTP timeout per LLM request, in seconds.
    #[arg(long, default_value_t = 120.0)]
    request_timeout_s: f64,
}

fn input_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_INPUT_ERROR as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's help/version output is not an error
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(EXIT_INPUT_ERROR as u8);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match cli.command {
        Command::Verify(args) => run(args, true),
        Command::Build(args) => run(args, false),
        Command::Table { dir } => table(&dir),
        Command::ListBenchmarks => list_benchmarks(),
    }
}

fn run(args: RunArgs, verify: bool) -> ExitCode {
    let config = match to_config(args, verify) {
        Ok(c) => c,
        Err(e) => return input_error(e),
    };
    let report = if verify {
        run_verify(&config)
    } else {
        run_build_only(&config)
    };
    print_summary(&report);
    ExitCode::from(report.exit_code as u8)
}

fn to_config(args: RunArgs, verify: bool) -> Result<RunConfig, String> {
    let kind = match args.oracle.as_str() {
        "ollama" => OracleKind::Ollama,
        "scripted" => OracleKind::Scripted,
        "constant" => OracleKind::Constant,
        other => return Err(format!("unknown oracle kind '{other}'")),
    };

    let mut constants = BTreeMap::new();
    for raw in &args.constants {
        let (name, value) = raw
            .split_once('=')
            .ok_or_else(|| format!("--const '{raw}' is not NAME=VALUE"))?;
        constants.insert(name.trim().to_string(), value.trim().to_string());
    }

    let mut properties = Vec::new();
    if let Some(text) = &args.prop {
        properties.push(text.clone());
    }
    if let Some(path) = &args.prop_file {
        let from_file = read_props_file(path)
            .map_err(|e| format!("cannot read property file {}: {e}", path.display()))?;
        properties.extend(from_file);
    }
    if verify && properties.is_empty() {
        return Err("verify needs --prop or --prop-file".to_string());
    }

    match kind {
        OracleKind::Ollama => {
            if args.template.is_none() {
                return Err("oracle kind 'ollama' requires --template".to_string());
            }
            if args.llm.is_none() {
                return Err("oracle kind 'ollama' requires --llm <model name>".to_string());
            }
        }
        OracleKind::Scripted => {
            if args.scripted_policy.is_none() {
                return Err("oracle kind 'scripted' requires --scripted-policy".to_string());
            }
        }
        OracleKind::Constant => {
            if args.constant_action.is_none() {
                return Err("oracle kind 'constant' requires --constant-action".to_string());
            }
        }
    }

    let endpoint = args
        .endpoint
        .or_else(|| std::env::var(ENDPOINT_ENV).ok())
        .unwrap_or_else(|| "http://localhost:11434".to_string());
    let cache_path = args
        .cache
        .or_else(|| std::env::var(CACHE_ENV).ok().map(PathBuf::from));

    Ok(RunConfig {
        model_path: args.model,
        constants,
        properties,
        oracle: OracleConfig {
            kind,
            endpoint,
            model_name: args.llm.unwrap_or_default(),
            seed: args.seed,
            temperature: args.temperature,
            max_output_tokens: args.max_output_tokens,
            default_action: args.default_action,
            cache_path,
            request_timeout_s: args.request_timeout_s,
            strict_faulty: args.strict_faulty,
            scripted_policy_path: args.scripted_policy,
            constant_action: args.constant_action,
        },
        template_path: args.template,
        var_map_path: args.var_map,
        limits: BuildLimits {
            max_states: args.max_states,
            wall_clock_budget_s: args.timeout_s,
            prefetch_workers: args.prefetch,
        },
        export_tra: args.export_tra,
        export_lab: args.export_lab,
        report_path: args.report,
    })
}

fn print_summary(report: &VerificationReport) {
    match report.status {
        RunStatus::TimedOut => {
            println!("result: TO (timed out)");
        }
        RunStatus::Error => {
            eprintln!("error: {}", report.error.as_deref().unwrap_or("unknown"));
        }
        RunStatus::Ok => {
            for p in &report.properties {
                let verdict = match p.satisfied {
                    Some(true) => " (satisfied)",
                    Some(false) => " (violated)",
                    None => "",
                };
                let boundary = if p.boundary { " [boundary]" } else { "" };
                println!("{}  =  {}{verdict}{boundary}", p.property, p.value);
            }
            if let (Some(states), Some(trans), Some(sans)) = (
                report.num_states,
                report.num_transitions,
                report.num_transitions_excl_terminal_self_loops,
            ) {
                println!(
                    "states: {states}  transitions: {trans} ({sans} excluding terminal self-loops)"
                );
            }
            println!(
                "build: {:.3}s  check: {:.3}s  faulty actions: {}  llm calls: {}  cache hits: {}",
                report.build_time_s.unwrap_or(0.0),
                report.check_time_s.unwrap_or(0.0),
                report.faulty_actions.unwrap_or(0),
                report.llm_calls.unwrap_or(0),
                report.cache_hits.unwrap_or(0),
            );
        }
    }
}

fn table(dir: &std::path::Path) -> ExitCode {
    let mut entries: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect(),
        Err(e) => return input_error(format!("cannot read {}: {e}", dir.display())),
    };
    entries.sort();
    if entries.is_empty() {
        return input_error(format!("no .json reports in {}", dir.display()));
    }

    let mut rows: Vec<[String; 7]> = vec![[
        "report".into(),
        "property".into(),
        "result".into(),
        "states".into(),
        "transitions".into(),
        "time(s)".into(),
        "faulty".into(),
    ]];
    for path in &entries {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return input_error(format!("cannot read {}: {e}", path.display())),
        };
        let report: VerificationReport = match serde_json::from_str(&text) {
            Ok(r) => r,
            Err(e) => return input_error(format!("{} is not a report: {e}", path.display())),
        };
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let to = report.status == RunStatus::TimedOut;
        let cell = |v: Option<String>| {
            if to {
                "TO".to_string()
            } else {
                v.unwrap_or_else(|| "-".to_string())
            }
        };
        let property = report
            .properties
            .first()
            .map(|p| p.property.clone())
            .or_else(|| report.config.properties.first().cloned())
            .unwrap_or_else(|| "-".to_string());
        let time = if to {
            "TO".to_string()
        } else {
            match (report.build_time_s, report.check_time_s) {
                (Some(b), Some(c)) => format!("{:.2}", b + c),
                (Some(b), None) => format!("{b:.2}"),
                _ => "-".to_string(),
            }
        };
        rows.push([
            name,
            property,
            cell(report.result_value.map(|v| v.to_string())),
            cell(report.num_states.map(|v| v.to_string())),
            cell(report.num_transitions.map(|v| v.to_string())),
            time,
            cell(report.faulty_actions.map(|v| v.to_string())),
        ]);
    }

    let mut widths = [0usize; 7];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        println!("{}", line.join("  ").trim_end());
    }
    ExitCode::SUCCESS
}

fn list_benchmarks() -> ExitCode {
    for name in benchmarks::names() {
        let fx = benchmarks::fixture(name).expect("bundled benchmark");
        println!("{name}");
        println!("  model:    {}/model.prism", fx.dir);
        println!("  template: {}/template.txt", fx.dir);
        println!("  var map:  {}/var_map.json", fx.dir);
        println!("  props:    {}/{}.props", fx.dir, name);
        for p in &fx.properties {
            println!("            {p}");
        }
        for policy in fx.scripted_policies {
            println!("  policy:   {}/policies/{policy}.json", fx.dir);
        }
    }
    ExitCode::SUCCESS
}
