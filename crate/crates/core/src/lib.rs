//! Verification of memoryless agent policies against PCTL safety properties.
//!
//! The crate wires together five pieces:
//!
//! * [`prism`] — a parser for a PRISM-style subset describing MDPs with
//!   bounded integer variables and guarded probabilistic commands,
//! * [`semantics`] — explicit-state semantics for a parsed model (initial
//!   state, enabled actions, successor distributions, labeling),
//! * [`oracle`] — the policy: a state is rendered into a prompt, sent to an
//!   LLM endpoint (or answered by a scripted table / constant), and the
//!   response is parsed back into an action with deterministic fallback,
//! * [`dtmc`] — incremental construction of the Markov chain induced by the
//!   policy on the MDP, expanding only policy-reachable states,
//! * [`pctl`] — a PCTL reachability checker operating on the induced chain.
//!
//! [`pipeline`] orchestrates a full run and produces machine-readable
//! reports; [`benchmarks`] ships the bundled example environments.

pub mod benchmarks;
pub mod dtmc;
pub mod oracle;
pub mod pctl;
pub mod pipeline;
pub mod prism;
pub mod semantics;

pub use dtmc::{build, export_explicit, BuildError, BuildLimits, BuildStats, InducedDtmc};
pub use oracle::{
    parse_action, ActionDecision, DecisionSource, OracleConfig, OracleError, OracleKind,
    PolicyOracle, PromptTemplate, StateEncoder,
};
pub use pctl::{
    check, parse_property, qualitative_sets, CheckError, CheckMethod, CheckResult, PathFormula,
    ProbBound, PropertyParseError, Relation, SolveMethod, SolverOptions, StateFormula,
};
pub use pipeline::{run_build_only, run_verify, RunConfig, RunStatus, VerificationReport};
pub use prism::{
    parse_model, print_model, resolve_constants, validate_model, Diagnostic, Expr, ParseError,
    ResolveError, SymbolicModel, Value,
};
pub use semantics::{
    canonical_state_key, declared_actions, enabled_actions, initial_state, label_set,
    successor_distribution, Distribution, SemanticsError, StateVector,
};
