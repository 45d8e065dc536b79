//! Probability computation on an induced chain.
//!
//! Unbounded until is solved in three stages: the states reaching the
//! target with probability exactly 0 and exactly 1 are carved out by pure
//! graph analysis, and only the remaining states enter the numeric solver.
//! The default solver is Gauss-Seidel value iteration in state index order;
//! a dense direct solve is available as an independent cross-check for
//! small systems. Bounded until and next are synchronous matrix-vector
//! iterations.

use super::{CheckMethod, CheckResult, PathFormula, StateFormula};
use crate::dtmc::InducedDtmc;
use std::collections::BTreeSet;
use thiserror::Error;

/// Verdicts closer than this to the threshold are flagged `boundary`.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

const DIRECT_SOLVE_MAX_STATES: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error("unknown atomic proposition \"{0}\"")]
    UnknownProposition(String),
    #[error("nested probability operators need a threshold bound: {0}")]
    UnboundedNestedProbability(String),
    #[error(
        "value iteration did not converge within {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: u64, residual: f64 },
    #[error("direct solve supports up to {max} unknowns, the system has {n}")]
    SystemTooLarge { n: usize, max: usize },
    #[error("linear system is singular")]
    SingularSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// Graph analysis plus value iteration.
    #[default]
    Auto,
    ValueIteration,
    /// Dense Gaussian elimination; limited to small systems.
    DirectSolve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub method: SolveMethod,
    /// Absolute max-norm tolerance on both the iteration residual and the
    /// geometric a-posteriori error bound.
    pub tolerance: f64,
    pub max_iterations: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: SolveMethod::Auto,
            tolerance: 1e-8,
            max_iterations: 1_000_000,
        }
    }
}

/// States satisfying a boolean state formula.
fn sat(
    dtmc: &InducedDtmc,
    formula: &StateFormula,
    opts: &SolverOptions,
) -> Result<Vec<bool>, CheckError> {
    let n = dtmc.num_states();
    match formula {
        StateFormula::True => Ok(vec![true; n]),
        StateFormula::Ap(name) => {
            if !dtmc.label_universe().contains(name) {
                return Err(CheckError::UnknownProposition(name.clone()));
            }
            Ok((0..n).map(|i| dtmc.labels_of(i).contains(name)).collect())
        }
        StateFormula::Not(inner) => {
            let mut v = sat(dtmc, inner, opts)?;
            v.iter_mut().for_each(|b| *b = !*b);
            Ok(v)
        }
        StateFormula::And(a, b) => {
            let (va, vb) = (sat(dtmc, a, opts)?, sat(dtmc, b, opts)?);
            Ok(va.into_iter().zip(vb).map(|(x, y)| x && y).collect())
        }
        StateFormula::Or(a, b) => {
            let (va, vb) = (sat(dtmc, a, opts)?, sat(dtmc, b, opts)?);
            Ok(va.into_iter().zip(vb).map(|(x, y)| x || y).collect())
        }
        StateFormula::Prob { bound, path } => {
            let Some(bound) = bound else {
                return Err(CheckError::UnboundedNestedProbability(formula.to_string()));
            };
            let solved = prob_path(dtmc, path, opts)?;
            Ok(solved
                .values
                .iter()
                .map(|&v| bound.relation.holds(v, bound.threshold))
                .collect())
        }
    }
}

struct Solved {
    values: Vec<f64>,
    method: CheckMethod,
    iterations: u64,
    residual: f64,
}

fn prob_path(
    dtmc: &InducedDtmc,
    path: &PathFormula,
    opts: &SolverOptions,
) -> Result<Solved, CheckError> {
    match path {
        PathFormula::Next(inner) => {
            let target = sat(dtmc, inner, opts)?;
            let values = (0..dtmc.num_states())
                .map(|s| {
                    dtmc.row(s)
                        .iter()
                        .filter(|(t, _)| target[*t])
                        .map(|(_, p)| p)
                        .sum()
                })
                .collect();
            Ok(Solved {
                values,
                method: CheckMethod::BoundedIteration,
                iterations: 1,
                residual: 0.0,
            })
        }
        PathFormula::BoundedUntil(hold, target, k) => {
            let a = sat(dtmc, hold, opts)?;
            let b = sat(dtmc, target, opts)?;
            Ok(bounded_until(dtmc, &a, &b, *k))
        }
        PathFormula::Until(hold, target) => {
            let a = sat(dtmc, hold, opts)?;
            let b = sat(dtmc, target, opts)?;
            until(dtmc, &a, &b, opts)
        }
        PathFormula::Globally(inner) => {
            let not_inner = StateFormula::Not(inner.clone());
            let a = vec![true; dtmc.num_states()];
            let b = sat(dtmc, &not_inner, opts)?;
            let mut solved = until(dtmc, &a, &b, opts)?;
            solved.values.iter_mut().for_each(|v| *v = 1.0 - *v);
            Ok(solved)
        }
    }
}

fn bounded_until(dtmc: &InducedDtmc, a: &[bool], b: &[bool], k: u64) -> Solved {
    let n = dtmc.num_states();
    let mut x: Vec<f64> = (0..n).map(|s| if b[s] { 1.0 } else { 0.0 }).collect();
    let mut next = vec![0.0; n];
    for _ in 0..k {
        for s in 0..n {
            next[s] = if b[s] {
                1.0
            } else if a[s] {
                dtmc.row(s).iter().map(|&(t, p)| p * x[t]).sum()
            } else {
                0.0
            };
        }
        std::mem::swap(&mut x, &mut next);
    }
    Solved {
        values: x,
        method: CheckMethod::BoundedIteration,
        iterations: k,
        residual: 0.0,
    }
}

/// Backward reachability: all states with a path into `seed` whose interior
/// steps stay inside `through`.
fn backward_closure(reverse: &[Vec<usize>], seed: &[bool], through: &[bool]) -> Vec<bool> {
    let n = seed.len();
    let mut reached = seed.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&s| seed[s]).collect();
    while let Some(s) = stack.pop() {
        for &p in &reverse[s] {
            if !reached[p] && through[p] {
                reached[p] = true;
                stack.push(p);
            }
        }
    }
    reached
}

fn reverse_edges(dtmc: &InducedDtmc) -> Vec<Vec<usize>> {
    let n = dtmc.num_states();
    let mut reverse = vec![Vec::new(); n];
    for s in 0..n {
        for &(t, _) in dtmc.row(s) {
            reverse[t].push(s);
        }
    }
    reverse
}

/// prob0/prob1 sets for `a U b`, by graph analysis alone.
fn until_qualitative(dtmc: &InducedDtmc, a: &[bool], b: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let n = dtmc.num_states();
    let reverse = reverse_edges(dtmc);
    let through: Vec<bool> = (0..n).map(|s| a[s] && !b[s]).collect();
    // states that reach b within a
    let can_reach = backward_closure(&reverse, b, &through);
    let prob0: Vec<bool> = can_reach.iter().map(|r| !r).collect();
    // states that can reach prob0 within a \ b have probability < 1
    let below_one = backward_closure(&reverse, &prob0, &through);
    let prob1: Vec<bool> = below_one.iter().map(|r| !r).collect();
    (prob0, prob1)
}

/// The sets of states that reach `target` with probability exactly 0 and
/// exactly 1. Pure graph computation, no numerics.
pub fn qualitative_sets(dtmc: &InducedDtmc, target: &[bool]) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let a = vec![true; dtmc.num_states()];
    let (prob0, prob1) = until_qualitative(dtmc, &a, target);
    let collect = |v: Vec<bool>| {
        v.into_iter()
            .enumerate()
            .filter_map(|(i, in_set)| in_set.then_some(i))
            .collect()
    };
    (collect(prob0), collect(prob1))
}

fn until(
    dtmc: &InducedDtmc,
    a: &[bool],
    b: &[bool],
    opts: &SolverOptions,
) -> Result<Solved, CheckError> {
    let n = dtmc.num_states();
    let (prob0, prob1) = until_qualitative(dtmc, a, b);
    let mut x: Vec<f64> = (0..n).map(|s| if prob1[s] { 1.0 } else { 0.0 }).collect();
    let unknown: Vec<usize> = (0..n).filter(|&s| !prob0[s] && !prob1[s]).collect();
    if unknown.is_empty() {
        return Ok(Solved {
            values: x,
            method: CheckMethod::GraphOnly,
            iterations: 0,
            residual: 0.0,
        });
    }
    match opts.method {
        SolveMethod::Auto | SolveMethod::ValueIteration => {
            let (iterations, residual) = value_iteration(dtmc, &unknown, &mut x, opts)?;
            Ok(Solved {
                values: x,
                method: CheckMethod::ValueIteration,
                iterations,
                residual,
            })
        }
        SolveMethod::DirectSolve => {
            direct_solve(dtmc, &unknown, &mut x)?;
            let residual = unknown
                .iter()
                .map(|&s| {
                    let v: f64 = dtmc.row(s).iter().map(|&(t, p)| p * x[t]).sum();
                    (v - x[s]).abs()
                })
                .fold(0.0, f64::max);
            Ok(Solved {
                values: x,
                method: CheckMethod::DirectSolve,
                iterations: 0,
                residual,
            })
        }
    }
}

/// Gauss-Seidel iteration in ascending state index order. Stops when both
/// the sweep residual and the geometric a-posteriori error bound
/// `residual * rho / (1 - rho)` drop below the tolerance, so the reported
/// values are accurate to the tolerance, not merely stationary.
fn value_iteration(
    dtmc: &InducedDtmc,
    unknown: &[usize],
    x: &mut [f64],
    opts: &SolverOptions,
) -> Result<(u64, f64), CheckError> {
    let mut prev_delta = f64::INFINITY;
    let mut ratios = [0.0f64; 4];
    for it in 1..=opts.max_iterations {
        let mut delta: f64 = 0.0;
        for &s in unknown {
            let v: f64 = dtmc.row(s).iter().map(|&(t, p)| p * x[t]).sum();
            let d = (v - x[s]).abs();
            if d > delta {
                delta = d;
            }
            x[s] = v;
        }
        if delta == 0.0 {
            return Ok((it, delta));
        }
        if prev_delta.is_finite() && prev_delta > 0.0 {
            ratios[(it % 4) as usize] = (delta / prev_delta).min(0.999_999);
        }
        let rho = ratios.iter().copied().fold(0.0, f64::max);
        let bound = if rho > 0.0 {
            delta * rho / (1.0 - rho)
        } else {
            delta
        };
        // the factor of two guards the bound against rho underestimation
        if delta <= opts.tolerance && bound <= 0.5 * opts.tolerance {
            return Ok((it, delta));
        }
        prev_delta = delta;
    }
    Err(CheckError::NoConvergence {
        iterations: opts.max_iterations,
        residual: prev_delta,
    })
}

/// Dense Gaussian elimination with partial pivoting on the unknown block
/// of `(I - P) x = b`.
fn direct_solve(dtmc: &InducedDtmc, unknown: &[usize], x: &mut [f64]) -> Result<(), CheckError> {
    let n = unknown.len();
    if n > DIRECT_SOLVE_MAX_STATES {
        return Err(CheckError::SystemTooLarge {
            n,
            max: DIRECT_SOLVE_MAX_STATES,
        });
    }
    let mut pos = vec![usize::MAX; dtmc.num_states()];
    for (i, &s) in unknown.iter().enumerate() {
        pos[s] = i;
    }
    let mut a = vec![0.0f64; n * n];
    let mut b = vec![0.0f64; n];
    for (i, &s) in unknown.iter().enumerate() {
        a[i * n + i] = 1.0;
        for &(t, p) in dtmc.row(s) {
            if pos[t] != usize::MAX {
                a[i * n + pos[t]] -= p;
            } else {
                // x[t] is fixed by the qualitative analysis (0 or 1)
                b[i] += p * x[t];
            }
        }
    }
    // forward elimination
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| a[r1 * n + col].abs().total_cmp(&a[r2 * n + col].abs()))
            .expect("nonempty range");
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(CheckError::SingularSystem);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    // back substitution
    for row in (0..n).rev() {
        let mut v = b[row];
        for k in row + 1..n {
            v -= a[row * n + k] * b[k];
        }
        b[row] = v / a[row * n + row];
    }
    for (i, &s) in unknown.iter().enumerate() {
        x[s] = b[i].clamp(0.0, 1.0);
    }
    Ok(())
}

/// Check a state formula against the chain, reporting the value at the
/// initial state.
pub fn check(
    dtmc: &InducedDtmc,
    formula: &StateFormula,
    opts: &SolverOptions,
) -> Result<CheckResult, CheckError> {
    match formula {
        StateFormula::Prob { bound, path } => {
            let solved = prob_path(dtmc, path, opts)?;
            let value = solved.values[0];
            let satisfied = bound.map(|b| b.relation.holds(value, b.threshold));
            let boundary = bound
                .map(|b| (value - b.threshold).abs() <= BOUNDARY_TOLERANCE)
                .unwrap_or(false);
            Ok(CheckResult {
                value,
                satisfied,
                boundary,
                iterations: solved.iterations,
                residual: solved.residual,
                method: solved.method,
            })
        }
        other => {
            let holds = sat(dtmc, other, opts)?;
            Ok(CheckResult {
                value: if holds[0] { 1.0 } else { 0.0 },
                satisfied: Some(holds[0]),
                boundary: false,
                iterations: 0,
                residual: 0.0,
                method: CheckMethod::GraphOnly,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pctl::parse_property;
    use std::collections::BTreeSet;

    fn labels(pairs: &[(usize, &str)], n: usize) -> Vec<BTreeSet<String>> {
        let mut v = vec![BTreeSet::new(); n];
        for (i, name) in pairs {
            v[*i].insert(name.to_string());
        }
        v
    }

    /// 0 -> {target: 0.5, sink: 0.5}
    fn two_way_split() -> InducedDtmc {
        InducedDtmc::from_rows(
            vec![vec![(1, 0.5), (2, 0.5)], vec![(1, 1.0)], vec![(2, 1.0)]],
            labels(&[(1, "t")], 3),
        )
        .unwrap()
    }

    /// Symmetric random walk on 0..=n, absorbing ends, start in `k`.
    fn gambler(n: usize, k: usize) -> InducedDtmc {
        // index 0 is the start state; remaining states indexed by value
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut labs: Vec<BTreeSet<String>> = Vec::new();
        // map value v -> index: start k is 0, others shift
        let idx = |v: usize| -> usize {
            if v == k {
                0
            } else if v < k {
                v + 1
            } else {
                v
            }
        };
        for v in 0..=n {
            let i = idx(v);
            if rows.len() <= i {
                rows.resize(i + 1, Vec::new());
                labs.resize(i + 1, BTreeSet::new());
            }
            if v == 0 || v == n {
                rows[i] = vec![(i, 1.0)];
            } else {
                rows[i] = vec![(idx(v - 1), 0.5), (idx(v + 1), 0.5)];
            }
            if v == n {
                labs[i].insert("top".to_string());
            }
        }
        InducedDtmc::from_rows(rows, labs).unwrap()
    }

    #[test]
    fn two_way_split_is_one_half() {
        let chain = two_way_split();
        let f = parse_property("P=? [ F \"t\" ]").unwrap();
        let r = check(&chain, &f, &SolverOptions::default()).unwrap();
        assert_eq!(r.value, 0.5);
        assert_eq!(r.method, CheckMethod::ValueIteration);
        assert_eq!(r.satisfied, None);
    }

    #[test]
    fn symmetric_gambler_is_one_half() {
        let chain = gambler(4, 2);
        let f = parse_property("P=? [ F \"top\" ]").unwrap();
        for method in [SolveMethod::ValueIteration, SolveMethod::DirectSolve] {
            let opts = SolverOptions {
                method,
                ..SolverOptions::default()
            };
            let r = check(&chain, &f, &opts).unwrap();
            assert!((r.value - 0.5).abs() <= 1e-8, "{method:?}: {}", r.value);
        }
    }

    #[test]
    fn qualitative_sets_on_the_gambler() {
        let chain = gambler(4, 2);
        let target: Vec<bool> = (0..chain.num_states())
            .map(|i| chain.labels_of(i).contains("top"))
            .collect();
        let (prob0, prob1) = qualitative_sets(&chain, &target);
        // value 0 is index 1 under the gambler indexing; top (4) is 4
        assert_eq!(prob0, BTreeSet::from([1]));
        assert_eq!(prob1, BTreeSet::from([4]));
    }

    #[test]
    fn absorbing_sink_is_prob0_and_target_is_prob1() {
        let chain = two_way_split();
        let target: Vec<bool> = (0..3).map(|i| chain.labels_of(i).contains("t")).collect();
        let (prob0, prob1) = qualitative_sets(&chain, &target);
        assert!(prob0.contains(&2));
        assert!(prob1.contains(&1));
        assert!(!prob0.contains(&0) && !prob1.contains(&0));
    }

    #[test]
    fn bounded_until_on_a_self_loop() {
        // s0: 0.5 self-loop, 0.5 -> target
        let chain = InducedDtmc::from_rows(
            vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)]],
            labels(&[(1, "t")], 2),
        )
        .unwrap();
        let f = parse_property("P=? [ F<=2 \"t\" ]").unwrap();
        let r = check(&chain, &f, &SolverOptions::default()).unwrap();
        assert_eq!(r.value, 0.75);
        assert_eq!(r.method, CheckMethod::BoundedIteration);
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn next_is_one_multiplication() {
        let chain = two_way_split();
        let f = parse_property("P=? [ X \"t\" ]").unwrap();
        let r = check(&chain, &f, &SolverOptions::default()).unwrap();
        assert_eq!(r.value, 0.5);
    }

    #[test]
    fn eventually_and_globally_are_complementary() {
        let chain = gambler(10, 3);
        let f = parse_property("P=? [ F \"top\" ]").unwrap();
        let g = parse_property("P=? [ G !\"top\" ]").unwrap();
        let opts = SolverOptions::default();
        let rf = check(&chain, &f, &opts).unwrap();
        let rg = check(&chain, &g, &opts).unwrap();
        assert!((rf.value + rg.value - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn thresholds_and_boundary_flag() {
        let chain = two_way_split();
        let f = parse_property("P<=0.5 [ F \"t\" ]").unwrap();
        let r = check(&chain, &f, &SolverOptions::default()).unwrap();
        assert_eq!(r.satisfied, Some(true));
        assert!(r.boundary);
        let f = parse_property("P<0.1 [ F \"t\" ]").unwrap();
        let r = check(&chain, &f, &SolverOptions::default()).unwrap();
        assert_eq!(r.satisfied, Some(false));
        assert!(!r.boundary);
    }

    #[test]
    fn unknown_propositions_error() {
        let chain = two_way_split();
        let f = parse_property("P=? [ F \"nope\" ]").unwrap();
        assert!(matches!(
            check(&chain, &f, &SolverOptions::default()),
            Err(CheckError::UnknownProposition(_))
        ));
    }

    #[test]
    fn nested_bounded_probability_works_and_unbounded_errors() {
        let chain = two_way_split();
        let f = parse_property("P=? [ F P>=1 [ X \"t\" ] ]").unwrap();
        let r = check(&chain, &f, &SolverOptions::default()).unwrap();
        // the only state with P(X t) = 1 is the target itself
        assert_eq!(r.value, 0.5);
        let f = parse_property("P=? [ F P=? [ X \"t\" ] ]").unwrap();
        assert!(matches!(
            check(&chain, &f, &SolverOptions::default()),
            Err(CheckError::UnboundedNestedProbability(_))
        ));
    }

    #[test]
    fn prob0_and_prob1_states_get_exact_values() {
        let chain = gambler(10, 3);
        let f = parse_property("P=? [ F \"top\" ]").unwrap();
        let opts = SolverOptions::default();
        let StateFormula::Prob { path, .. } = &f else {
            panic!()
        };
        let solved = prob_path(&chain, path, &opts).unwrap();
        // gambler indexing: value 0 -> index 1, value 10 -> index 10
        assert_eq!(solved.values[1], 0.0);
        assert_eq!(solved.values[10], 1.0);
    }
}
