//! Shared helpers for the pipeline benchmarks.

use polmc_core::dtmc::InducedDtmc;
use std::collections::BTreeSet;

/// A birth-death chain with absorbing ends, `n + 1` states, start in the
/// middle. Exercises the qualitative analysis and the iterative solver.
pub fn random_walk_chain(n: usize) -> InducedDtmc {
    let mut rows = Vec::with_capacity(n + 1);
    let mut labels = vec![BTreeSet::new(); n + 1];
    for v in 0..=n {
        if v == 0 || v == n {
            rows.push(vec![(v, 1.0)]);
        } else {
            rows.push(vec![(v - 1, 0.5), (v + 1, 0.5)]);
        }
    }
    labels[n].insert("top".to_string());
    InducedDtmc::from_rows(rows, labels).expect("valid chain")
}
