//! Incremental construction of the policy-induced Markov chain.
//!
//! Starting from the initial state, a breadth-first frontier queries the
//! policy once per non-terminal state, expands only the successor
//! distribution of the chosen action, and assigns indices in discovery
//! order. Unseen successors are enqueued in lexicographic state order, so
//! the resulting indexing is independent of command text order and of any
//! concurrent oracle prefetching. Terminal states receive a probability-1
//! self-loop, keeping the chain total.

mod export;

pub use export::export_explicit;

use crate::oracle::{OracleError, PolicyOracle, StateEncoder};
use crate::prism::SymbolicModel;
use crate::semantics::{
    enabled_actions, initial_state, label_set, successor_distribution, SemanticsError, StateVector,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::time::Instant;
use thiserror::Error;

/// Label implicitly attached to state 0.
pub const INIT_LABEL: &str = "init";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("verification timed out after {:.3}s", stats.build_time_s)]
    Timeout { stats: BuildStats },
    #[error("state limit of {limit} exceeded")]
    StateLimitExceeded { limit: usize, stats: BuildStats },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("invalid chain: {0}")]
    InvalidChain(String),
}

/// Resource limits for one build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildLimits {
    /// Maximum number of stored states; 0 means unlimited.
    pub max_states: usize,
    /// Wall-clock budget in seconds for the build+check pipeline, checked
    /// between state expansions.
    pub wall_clock_budget_s: f64,
    /// Number of concurrent oracle prefetch workers; 0 runs sequentially.
    /// The resulting chain is identical either way.
    pub prefetch_workers: usize,
}

impl Default for BuildLimits {
    fn default() -> Self {
        BuildLimits {
            max_states: 0,
            wall_clock_budget_s: 18_000.0,
            prefetch_workers: 0,
        }
    }
}

/// Counters describing one build.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub num_states: u64,
    /// Sparse transition entries, including terminal self-loops.
    pub num_transitions: u64,
    /// Probability-1 self-loops attached to terminal states.
    pub num_terminal_self_loops: u64,
    pub faulty_actions: u64,
    pub llm_calls: u64,
    pub cache_hits: u64,
    pub build_time_s: f64,
    pub timed_out: bool,
}

/// The chain induced by a policy on a model: reachable states only, sparse
/// probability rows, per-state labels and chosen actions.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedDtmc {
    states: Vec<StateVector>,
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<BTreeSet<String>>,
    chosen_action: Vec<Option<String>>,
    label_universe: BTreeSet<String>,
    stats: BuildStats,
}

impl InducedDtmc {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    /// Sparse row of a state, target indices ascending.
    pub fn row(&self, state: usize) -> &[(usize, f64)] {
        &self.rows[state]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn labels_of(&self, state: usize) -> &BTreeSet<String> {
        &self.labels[state]
    }

    pub fn chosen_action(&self, state: usize) -> Option<&str> {
        self.chosen_action[state].as_deref()
    }

    /// All label names the chain knows about, whether or not any state
    /// carries them. Properties may only mention these.
    pub fn label_universe(&self) -> &BTreeSet<String> {
        &self.label_universe
    }

    pub fn stats(&self) -> &BuildStats {
        &self.stats
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.chosen_action[state].is_none()
    }

    /// Construct a chain directly from rows and labels. Row sums must be
    /// within 1e-9 of one; state 0 is the initial state and is labeled
    /// `init`. Used by tests and by explicit-format import.
    pub fn from_rows(
        rows: Vec<Vec<(usize, f64)>>,
        labels: Vec<BTreeSet<String>>,
    ) -> Result<Self, BuildError> {
        let n = rows.len();
        if n == 0 {
            return Err(BuildError::InvalidChain("chain has no states".into()));
        }
        if labels.len() != n {
            return Err(BuildError::InvalidChain(format!(
                "{} label sets for {} states",
                labels.len(),
                n
            )));
        }
        let mut labels = labels;
        labels[0].insert(INIT_LABEL.to_string());
        let mut num_transitions = 0u64;
        let mut sorted_rows = Vec::with_capacity(n);
        for (i, mut row) in rows.into_iter().enumerate() {
            if row.is_empty() {
                return Err(BuildError::InvalidChain(format!("state {i} has no row")));
            }
            row.sort_by_key(|(t, _)| *t);
            let mut sum = 0.0;
            for &(t, p) in &row {
                if t >= n {
                    return Err(BuildError::InvalidChain(format!(
                        "state {i} targets out-of-range index {t}"
                    )));
                }
                if !(p > 0.0 && p <= 1.0 + 1e-9) {
                    return Err(BuildError::InvalidChain(format!(
                        "state {i} has probability {p} outside (0, 1]"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(BuildError::InvalidChain(format!(
                    "row of state {i} sums to {sum}"
                )));
            }
            num_transitions += row.len() as u64;
            sorted_rows.push(row);
        }
        let label_universe: BTreeSet<String> =
            labels.iter().flat_map(|l| l.iter().cloned()).collect();
        let num_terminal_self_loops = sorted_rows
            .iter()
            .enumerate()
            .filter(|(i, row)| row.len() == 1 && row[0].0 == *i && row[0].1 == 1.0)
            .count() as u64;
        Ok(InducedDtmc {
            states: (0..n).map(|i| StateVector(vec![i as i64])).collect(),
            rows: sorted_rows,
            chosen_action: vec![None; n],
            labels,
            label_universe,
            stats: BuildStats {
                num_states: n as u64,
                num_transitions,
                num_terminal_self_loops,
                ..BuildStats::default()
            },
        })
    }
}

/// Build the induced chain. See the module docs for the expansion order
/// contract; `encoder` is required for prompt-based oracles only.
pub fn build(
    model: &SymbolicModel,
    oracle: &PolicyOracle,
    encoder: Option<&StateEncoder>,
    limits: &BuildLimits,
) -> Result<InducedDtmc, BuildError> {
    let start = Instant::now();
    let deadline_s = limits.wall_clock_budget_s;

    let init = initial_state(model)?;
    let mut index: HashMap<StateVector, usize> = HashMap::new();
    let mut states: Vec<StateVector> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    index.insert(init.clone(), 0);
    states.push(init);
    queue.push_back(0);

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels: Vec<BTreeSet<String>> = Vec::new();
    let mut chosen: Vec<Option<String>> = Vec::new();
    let mut num_transitions = 0u64;
    let mut num_terminal_self_loops = 0u64;

    let partial_stats = |states_len: usize,
                         transitions: u64,
                         loops: u64,
                         oracle: &PolicyOracle,
                         start: Instant,
                         timed_out: bool| BuildStats {
        num_states: states_len as u64,
        num_transitions: transitions,
        num_terminal_self_loops: loops,
        faulty_actions: oracle.faulty_states(),
        llm_calls: oracle.llm_calls(),
        cache_hits: oracle.cache_hits(),
        build_time_s: start.elapsed().as_secs_f64(),
        timed_out,
    };

    while let Some(current) = queue.pop_front() {
        if start.elapsed().as_secs_f64() >= deadline_s {
            return Err(BuildError::Timeout {
                stats: partial_stats(
                    states.len(),
                    num_transitions,
                    num_terminal_self_loops,
                    oracle,
                    start,
                    true,
                ),
            });
        }

        if limits.prefetch_workers > 0 {
            prefetch(
                model,
                oracle,
                encoder,
                &states,
                current,
                &queue,
                limits.prefetch_workers,
            )?;
        }

        let state = states[current].clone();
        debug_assert_eq!(rows.len(), current);
        let mut state_labels = label_set(model, &state)?;
        if current == 0 {
            state_labels.insert(INIT_LABEL.to_string());
        }
        labels.push(state_labels);

        let enabled = enabled_actions(model, &state)?;
        if enabled.is_empty() {
            rows.push(vec![(current, 1.0)]);
            chosen.push(None);
            num_transitions += 1;
            num_terminal_self_loops += 1;
            continue;
        }

        let decision = oracle.decide(model, encoder, &state, &enabled)?;
        let dist = successor_distribution(model, &state, &decision.action)?;

        // enqueue unseen successors in lexicographic state order
        let mut successors = dist.support;
        successors.sort_by(|(a, _), (b, _)| a.cmp(b));
        let mut row = Vec::with_capacity(successors.len());
        for (target, prob) in successors {
            let next_index = states.len();
            let idx = match index.get(&target) {
                Some(&i) => i,
                None => {
                    if limits.max_states > 0 && next_index >= limits.max_states {
                        return Err(BuildError::StateLimitExceeded {
                            limit: limits.max_states,
                            stats: partial_stats(
                                states.len(),
                                num_transitions,
                                num_terminal_self_loops,
                                oracle,
                                start,
                                false,
                            ),
                        });
                    }
                    index.insert(target.clone(), next_index);
                    states.push(target);
                    queue.push_back(next_index);
                    next_index
                }
            };
            row.push((idx, prob));
        }
        row.sort_by_key(|(t, _)| *t);
        num_transitions += row.len() as u64;
        rows.push(row);
        chosen.push(Some(decision.action));
    }

    let mut label_universe: BTreeSet<String> =
        model.labels.iter().map(|l| l.name.clone()).collect();
    label_universe.insert(INIT_LABEL.to_string());

    let stats = partial_stats(
        states.len(),
        num_transitions,
        num_terminal_self_loops,
        oracle,
        start,
        false,
    );
    Ok(InducedDtmc {
        states,
        rows,
        labels,
        chosen_action: chosen,
        label_universe,
        stats,
    })
}

/// Warm the oracle memo for up to `workers` queued states concurrently.
/// Workers join before expansion continues, and each state is decided at
/// most once, so counters and the final chain match the sequential build.
fn prefetch(
    model: &SymbolicModel,
    oracle: &PolicyOracle,
    encoder: Option<&StateEncoder>,
    states: &[StateVector],
    current: usize,
    queue: &VecDeque<usize>,
    workers: usize,
) -> Result<(), BuildError> {
    let mut pending: Vec<&StateVector> = Vec::with_capacity(workers);
    for &idx in std::iter::once(&current).chain(queue.iter()) {
        if pending.len() >= workers {
            break;
        }
        let s = &states[idx];
        if !oracle.is_memoized(s) {
            pending.push(s);
        }
    }
    if pending.len() <= 1 {
        return Ok(());
    }
    let results: Vec<Result<(), BuildError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = pending
            .into_iter()
            .map(|s| {
                scope.spawn(move || -> Result<(), BuildError> {
                    let enabled = enabled_actions(model, s)?;
                    if !enabled.is_empty() {
                        oracle.decide(model, encoder, s, &enabled)?;
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("prefetch worker panicked"))
            .collect()
    });
    // surface the error of the earliest queued state for determinism
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prism::parse_model;
    use std::collections::BTreeMap;

    fn resolved(src: &str) -> SymbolicModel {
        let m = parse_model(src).unwrap();
        crate::prism::resolve_constants(&m, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn terminal_initial_state_yields_one_self_loop_and_no_queries() {
        let m = resolved("mdp module m x:[0..1] init 0; [a] x>0 -> (x'=0); endmodule");
        let oracle = PolicyOracle::constant("a");
        let chain = build(&m, &oracle, None, &BuildLimits::default()).unwrap();
        assert_eq!(chain.num_states(), 1);
        assert_eq!(chain.row(0), &[(0, 1.0)]);
        assert_eq!(chain.stats().num_transitions, 1);
        assert_eq!(chain.stats().num_terminal_self_loops, 1);
        assert_eq!(chain.stats().llm_calls, 0);
        assert!(chain.is_terminal(0));
        assert!(chain.labels_of(0).contains(INIT_LABEL));
    }

    #[test]
    fn discovery_order_is_bfs_with_lexicographic_enqueue() {
        // from 0 the successors are 2 and 1 in command text order; indices
        // must follow lexicographic state order instead
        let m = resolved(
            "mdp module m x:[0..2] init 0;\n\
             [a] x=0 -> 0.5:(x'=2) + 0.5:(x'=1);\nendmodule",
        );
        let oracle = PolicyOracle::constant("a");
        let chain = build(&m, &oracle, None, &BuildLimits::default()).unwrap();
        assert_eq!(chain.states()[1], StateVector(vec![1]));
        assert_eq!(chain.states()[2], StateVector(vec![2]));
        assert_eq!(chain.row(0), &[(1, 0.5), (2, 0.5)]);
    }

    #[test]
    fn state_limit_is_enforced() {
        let m = resolved("mdp module m x:[0..9] init 0; [a] x<9 -> (x'=x+1); endmodule");
        let oracle = PolicyOracle::constant("a");
        let limits = BuildLimits {
            max_states: 3,
            ..BuildLimits::default()
        };
        let err = build(&m, &oracle, None, &limits).unwrap_err();
        assert!(matches!(
            err,
            BuildError::StateLimitExceeded { limit: 3, .. }
        ));
    }

    #[test]
    fn scripted_oracle_records_chosen_actions_without_llm_calls() {
        let m = resolved(
            "mdp module m x:[0..2] init 0;\n\
             [a] x<2 -> (x'=x+1);\n[b] x<2 -> (x'=2);\nendmodule",
        );
        let table = BTreeMap::from([
            ("x=0".to_string(), "a".to_string()),
            ("x=1".to_string(), "b".to_string()),
        ]);
        let oracle = PolicyOracle::scripted(table);
        let chain = build(&m, &oracle, None, &BuildLimits::default()).unwrap();
        assert_eq!(chain.chosen_action(0), Some("a"));
        assert_eq!(chain.chosen_action(1), Some("b"));
        assert_eq!(chain.chosen_action(2), None);
        assert_eq!(chain.stats().llm_calls, 0);
        assert_eq!(chain.stats().faulty_actions, 0);
    }

    #[test]
    fn from_rows_validates_and_labels_init() {
        let chain = InducedDtmc::from_rows(
            vec![vec![(1, 0.5), (0, 0.5)], vec![(1, 1.0)]],
            vec![BTreeSet::new(), BTreeSet::from(["t".to_string()])],
        )
        .unwrap();
        assert!(chain.labels_of(0).contains(INIT_LABEL));
        assert_eq!(chain.row(0), &[(0, 0.5), (1, 0.5)]);
        assert_eq!(chain.stats().num_terminal_self_loops, 1);

        let bad = InducedDtmc::from_rows(vec![vec![(0, 0.4)]], vec![BTreeSet::new()]);
        assert!(bad.is_err());
    }
}
