//! Bundled benchmark environments: grid navigation with slippery moves
//! (`frozen_lake`), a fuel-constrained taxi (`taxi`), and a small trading
//! simulation (`stock_market`). Each ships a model, a prompt template, a
//! variable map, a default property, and deterministic scripted reference
//! policies so the full pipeline can run without any LLM endpoint.
//!
//! Fixture files live under `benchmarks/v1/` in the repository; the same
//! contents are embedded here so library consumers and tests need no
//! working directory assumptions.

use crate::prism::{parse_model, resolve_constants, SymbolicModel};
use crate::semantics::{
    canonical_state_key, enabled_actions, initial_state, successor_distribution, StateVector,
};
use std::collections::BTreeMap;
use thiserror::Error;

pub const FIXTURE_DIR: &str = "benchmarks/v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchmarkError {
    #[error("unknown benchmark '{0}' (known: frozen_lake, taxi, stock_market)")]
    UnknownBenchmark(String),
    #[error("unknown scripted policy '{policy}' for benchmark '{benchmark}'")]
    UnknownPolicy { benchmark: String, policy: String },
}

/// One bundled environment.
#[derive(Debug, Clone)]
pub struct BenchmarkFixture {
    pub name: &'static str,
    /// Repository-relative directory holding the fixture files.
    pub dir: String,
    pub model_text: &'static str,
    pub template_text: &'static str,
    pub var_map_text: &'static str,
    pub props_text: &'static str,
    /// Default property texts, comments stripped.
    pub properties: Vec<String>,
    pub scripted_policies: &'static [&'static str],
}

pub fn names() -> [&'static str; 3] {
    ["frozen_lake", "taxi", "stock_market"]
}

/// Look up a bundled benchmark by name.
pub fn fixture(name: &str) -> Result<BenchmarkFixture, BenchmarkError> {
    let (model_text, template_text, var_map_text, props_text, scripted): (
        &'static str,
        &'static str,
        &'static str,
        &'static str,
        &'static [&'static str],
    ) = match name {
        "frozen_lake" => (
            include_str!("../../../benchmarks/v1/frozen_lake/model.prism"),
            include_str!("../../../benchmarks/v1/frozen_lake/template.txt"),
            include_str!("../../../benchmarks/v1/frozen_lake/var_map.json"),
            include_str!("../../../benchmarks/v1/frozen_lake/frozen_lake.props"),
            &["constant-down", "constant-right", "hole-avoiding"],
        ),
        "taxi" => (
            include_str!("../../../benchmarks/v1/taxi/model.prism"),
            include_str!("../../../benchmarks/v1/taxi/template.txt"),
            include_str!("../../../benchmarks/v1/taxi/var_map.json"),
            include_str!("../../../benchmarks/v1/taxi/taxi.props"),
            &["greedy-to-gas", "constant-up"],
        ),
        "stock_market" => (
            include_str!("../../../benchmarks/v1/stock_market/model.prism"),
            include_str!("../../../benchmarks/v1/stock_market/template.txt"),
            include_str!("../../../benchmarks/v1/stock_market/var_map.json"),
            include_str!("../../../benchmarks/v1/stock_market/stock_market.props"),
            &["hold-only", "sell-when-holding"],
        ),
        other => return Err(BenchmarkError::UnknownBenchmark(other.to_string())),
    };
    let properties = props_text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("//"))
        .map(str::to_string)
        .collect();
    let name: &'static str = match name {
        "frozen_lake" => "frozen_lake",
        "taxi" => "taxi",
        _ => "stock_market",
    };
    Ok(BenchmarkFixture {
        name,
        dir: format!("{FIXTURE_DIR}/{name}"),
        model_text,
        template_text,
        var_map_text,
        props_text,
        properties,
        scripted_policies: scripted,
    })
}

impl BenchmarkFixture {
    /// Parse and resolve the fixture model.
    pub fn model(&self) -> SymbolicModel {
        let parsed = parse_model(self.model_text).expect("fixture model parses");
        resolve_constants(&parsed, &BTreeMap::new()).expect("fixture model resolves")
    }
}

/// A deterministic reference policy as a rule over variable values.
pub struct ScriptedPolicy {
    pub name: &'static str,
    rule: fn(&SymbolicModel, &StateVector) -> String,
}

impl ScriptedPolicy {
    pub fn action(&self, model: &SymbolicModel, s: &StateVector) -> String {
        (self.rule)(model, s)
    }
}

fn var(model: &SymbolicModel, s: &StateVector, name: &str) -> i64 {
    s.0[model.variable_index(name).expect("fixture variable")]
}

// frozen lake geometry helpers; cells 0..15 row-major, 16 absorbing
mod fl {
    pub const HOLES: [i64; 4] = [5, 7, 11, 12];
    pub const GOAL: i64 = 15;

    pub fn step(pos: i64, dir: &str) -> i64 {
        match dir {
            "up" => (pos - 4).max(pos % 4),
            "down" => (pos + 4).min(12 + pos % 4),
            "left" => (pos - 1).max(pos - pos % 4),
            "right" => (pos + 1).min(pos - pos % 4 + 3),
            _ => unreachable!("unknown direction"),
        }
    }

    /// Slip targets of an intended move: intended plus the two
    /// perpendicular directions, one third each.
    pub fn targets(pos: i64, dir: &str) -> [i64; 3] {
        let perp = match dir {
            "up" | "down" => ["left", "right"],
            _ => ["up", "down"],
        };
        [step(pos, dir), step(pos, perp[0]), step(pos, perp[1])]
    }
}

fn fl_constant(action: &'static str) -> ScriptedPolicy {
    // the absorbing move out of holes and the goal accepts any direction,
    // so a constant rule covers every non-terminal state
    match action {
        "down" => ScriptedPolicy {
            name: "constant-down",
            rule: |_, _| "down".to_string(),
        },
        _ => ScriptedPolicy {
            name: "constant-right",
            rule: |_, _| "right".to_string(),
        },
    }
}

fn fl_hole_avoiding() -> ScriptedPolicy {
    ScriptedPolicy {
        name: "hole-avoiding",
        rule: |model, s| {
            let pos = var(model, s, "pos");
            if fl::HOLES.contains(&pos) || pos >= fl::GOAL {
                return "up".to_string();
            }
            // least immediate hole risk, then most progress toward the
            // goal, then declaration order
            let manhattan = |p: i64| (3 - p / 4).abs() + (3 - p % 4).abs();
            let mut best: Option<(usize, i64, usize, &str)> = None;
            for (order, dir) in ["up", "left", "down", "right"].iter().enumerate() {
                let risk = fl::targets(pos, dir)
                    .iter()
                    .filter(|t| fl::HOLES.contains(t))
                    .count();
                let progress = manhattan(fl::step(pos, dir));
                let key = (risk, progress, order, *dir);
                best = match best {
                    Some(b) if (b.0, b.1, b.2) <= (key.0, key.1, key.2) => Some(b),
                    _ => Some(key),
                };
            }
            best.expect("four candidate directions").3.to_string()
        },
    }
}

fn taxi_greedy_to_gas() -> ScriptedPolicy {
    ScriptedPolicy {
        name: "greedy-to-gas",
        rule: |model, s| {
            let (x, y) = (var(model, s, "x"), var(model, s, "y"));
            // descend the Manhattan distance to (1, 2), x axis first;
            // once on the station, bounce up and return
            if x > 1 {
                "left"
            } else if x < 1 {
                "right"
            } else if y < 2 {
                "up"
            } else if y > 2 {
                "down"
            } else {
                "up"
            }
            .to_string()
        },
    }
}

fn taxi_constant_up() -> ScriptedPolicy {
    ScriptedPolicy {
        name: "constant-up",
        rule: |_, _| "up".to_string(),
    }
}

fn sm_hold_only() -> ScriptedPolicy {
    ScriptedPolicy {
        name: "hold-only",
        rule: |_, _| "hold".to_string(),
    }
}

fn sm_sell_when_holding() -> ScriptedPolicy {
    ScriptedPolicy {
        name: "sell-when-holding",
        rule: |model, s| {
            if var(model, s, "stocks") > 0 {
                "sell".to_string()
            } else {
                "hold".to_string()
            }
        },
    }
}

/// The scripted reference policies of a benchmark.
pub fn scripted_policies(name: &str) -> Result<Vec<ScriptedPolicy>, BenchmarkError> {
    match name {
        "frozen_lake" => Ok(vec![
            fl_constant("down"),
            fl_constant("right"),
            fl_hole_avoiding(),
        ]),
        "taxi" => Ok(vec![taxi_greedy_to_gas(), taxi_constant_up()]),
        "stock_market" => Ok(vec![sm_hold_only(), sm_sell_when_holding()]),
        other => Err(BenchmarkError::UnknownBenchmark(other.to_string())),
    }
}

/// Compute the state-to-action table of a scripted policy over exactly the
/// states its own induced chain reaches. Keys are canonical state
/// renderings, the scripted-oracle file format.
pub fn scripted_policy_table(
    benchmark: &str,
    policy: &str,
) -> Result<BTreeMap<String, String>, BenchmarkError> {
    let policies = scripted_policies(benchmark)?;
    let policy = policies.iter().find(|p| p.name == policy).ok_or_else(|| {
        BenchmarkError::UnknownPolicy {
            benchmark: benchmark.to_string(),
            policy: policy.to_string(),
        }
    })?;
    let model = fixture(benchmark)?.model();

    let mut table = BTreeMap::new();
    let init = initial_state(&model).expect("fixture initial state");
    let mut seen = std::collections::HashSet::new();
    let mut queue = std::collections::VecDeque::from([init.clone()]);
    seen.insert(init);
    while let Some(s) = queue.pop_front() {
        let enabled = enabled_actions(&model, &s).expect("fixture semantics");
        if enabled.is_empty() {
            continue;
        }
        let action = policy.action(&model, &s);
        assert!(
            enabled.contains(&action),
            "policy {} picked disabled action {action} in {s}",
            policy.name
        );
        table.insert(canonical_state_key(&model, &s), action.clone());
        let dist = successor_distribution(&model, &s, &action).expect("fixture semantics");
        for (target, _) in dist.support {
            if seen.insert(target.clone()) {
                queue.push_back(target);
            }
        }
    }
    Ok(table)
}

/// Render a policy table as the scripted-oracle JSON file format.
pub fn policy_table_json(table: &BTreeMap<String, String>) -> String {
    let mut s = serde_json::to_string_pretty(table).expect("tables serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prism::validate_model;
    use crate::semantics::label_set;

    #[test]
    fn all_fixtures_parse_resolve_and_validate_cleanly() {
        for name in names() {
            let fx = fixture(name).unwrap();
            let model = fx.model();
            let diags = validate_model(&model);
            assert!(diags.is_empty(), "{name}: {diags:?}");
            assert!(!fx.properties.is_empty());
        }
    }

    #[test]
    fn frozen_lake_holes_carry_the_water_label() {
        let model = fixture("frozen_lake").unwrap().model();
        for pos in [5, 7, 11, 12] {
            let labels = label_set(&model, &StateVector(vec![pos])).unwrap();
            assert!(labels.contains("water"), "pos={pos}");
        }
        let labels = label_set(&model, &StateVector(vec![15])).unwrap();
        assert!(labels.contains("frisbee") && !labels.contains("water"));
    }

    #[test]
    fn frozen_lake_enabled_order_and_slip_support() {
        let model = fixture("frozen_lake").unwrap().model();
        assert_eq!(
            enabled_actions(&model, &StateVector(vec![3])).unwrap(),
            vec!["up", "left", "down", "right"]
        );
        // every non-absorbing state: supports of size <= 3 summing to one
        for pos in 0..=15 {
            for action in enabled_actions(&model, &StateVector(vec![pos])).unwrap() {
                let d = successor_distribution(&model, &StateVector(vec![pos]), &action).unwrap();
                assert!(d.support.len() <= 3, "pos={pos} {action}");
                let sum: f64 = d.support.iter().map(|(_, p)| p).sum();
                assert!((sum - 1.0).abs() < 1e-12, "pos={pos} {action} sum={sum}");
            }
        }
    }

    #[test]
    fn frozen_lake_corner_slip_merges_onto_the_border() {
        let model = fixture("frozen_lake").unwrap().model();
        let d = successor_distribution(&model, &StateVector(vec![0]), "right").unwrap();
        let got: Vec<(i64, f64)> = d.support.iter().map(|(s, p)| (s.0[0], *p)).collect();
        assert_eq!(got, vec![(0, 1.0 / 3.0), (1, 1.0 / 3.0), (4, 1.0 / 3.0)]);
    }

    #[test]
    fn taxi_runs_dry_only_away_from_the_station() {
        let model = fixture("taxi").unwrap().model();
        // moving up from (1,1) arrives at the station and refuels
        let d = successor_distribution(&model, &StateVector(vec![1, 1, 5]), "up").unwrap();
        assert_eq!(d.support, vec![(StateVector(vec![1, 2, 10]), 1.0)]);
        // any other move burns one unit
        let d = successor_distribution(&model, &StateVector(vec![0, 0, 5]), "up").unwrap();
        assert_eq!(d.support, vec![(StateVector(vec![0, 1, 4]), 1.0)]);
        // empty tank is terminal and labeled
        assert!(enabled_actions(&model, &StateVector(vec![0, 3, 0]))
            .unwrap()
            .is_empty());
        assert!(label_set(&model, &StateVector(vec![0, 3, 0]))
            .unwrap()
            .contains("empty"));
    }

    #[test]
    fn taxi_fuel_strictly_decreases_except_on_arrival_at_the_station() {
        let model = fixture("taxi").unwrap().model();
        for x in 0..=3i64 {
            for y in 0..=3i64 {
                for fuel in 1..=10i64 {
                    let s = StateVector(vec![x, y, fuel]);
                    for action in enabled_actions(&model, &s).unwrap() {
                        let d = successor_distribution(&model, &s, &action).unwrap();
                        for (t, _) in &d.support {
                            let (tx, ty, tf) = (t.0[0], t.0[1], t.0[2]);
                            if (tx, ty) == (1, 2) {
                                assert_eq!(tf, 10, "arrival at the station refuels");
                            } else {
                                assert_eq!(tf, fuel - 1, "{s} {action}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn stock_market_buy_legality_follows_the_floor_rule() {
        let model = fixture("stock_market").unwrap().model();
        // capital 9, buy_price 10 is impossible here (price cap 3); check
        // the equivalent boundary: capital 1 with buy_price 2
        let s = StateVector(vec![2, 1, 1, 2, 0]);
        let enabled = enabled_actions(&model, &s).unwrap();
        assert!(!enabled.contains(&"buy".to_string()), "{enabled:?}");
        let s = StateVector(vec![2, 1, 2, 2, 0]);
        let enabled = enabled_actions(&model, &s).unwrap();
        assert!(enabled.contains(&"buy".to_string()));
    }

    #[test]
    fn stock_market_bankruptcy_is_terminal_and_labeled() {
        let model = fixture("stock_market").unwrap().model();
        let bankrupt = StateVector(vec![2, 1, 0, 0, 1]);
        assert!(enabled_actions(&model, &bankrupt).unwrap().is_empty());
        assert!(label_set(&model, &bankrupt).unwrap().contains("bankruptcy"));
    }

    #[test]
    fn greedy_taxi_rule_matches_its_definition() {
        let model = fixture("taxi").unwrap().model();
        let policy = taxi_greedy_to_gas();
        assert_eq!(policy.action(&model, &StateVector(vec![3, 2, 9])), "left");
        assert_eq!(policy.action(&model, &StateVector(vec![0, 2, 9])), "right");
        assert_eq!(policy.action(&model, &StateVector(vec![1, 0, 9])), "up");
        assert_eq!(policy.action(&model, &StateVector(vec![1, 3, 9])), "down");
    }

    #[test]
    fn policy_tables_cover_their_own_chains() {
        for name in names() {
            let fx = fixture(name).unwrap();
            for policy in fx.scripted_policies {
                let table = scripted_policy_table(name, policy).unwrap();
                assert!(!table.is_empty(), "{name}/{policy}");
            }
        }
    }
}
