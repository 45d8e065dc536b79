//! Fixture integrity: canonical-form round-trips, the committed golden
//! print of the grid model, and drift checks for the committed scripted
//! policy tables.
//!
//! Setting `POLMC_REGEN_FIXTURES=1` rewrites the generated files instead
//! of checking them.

use polmc_core::benchmarks::{fixture, names, policy_table_json, scripted_policy_table};
use polmc_core::prism::{parse_model, print_model};
use std::path::PathBuf;

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn regen() -> bool {
    std::env::var_os("POLMC_REGEN_FIXTURES").is_some_and(|v| v == "1")
}

#[test]
fn fixture_models_round_trip_through_the_canonical_printer() {
    for name in names() {
        let fx = fixture(name).unwrap();
        let parsed = parse_model(fx.model_text).unwrap();
        let printed = print_model(&parsed);
        let reparsed = parse_model(&printed)
            .unwrap_or_else(|e| panic!("{name}: canonical form failed to reparse: {e}"));
        assert_eq!(parsed, reparsed, "{name}: canonical form changed the model");
    }
}

#[test]
fn frozen_lake_parse_matches_the_golden_canonical_form() {
    let fx = fixture("frozen_lake").unwrap();
    let parsed = parse_model(fx.model_text).unwrap();
    assert_eq!(parsed.variables.len(), 1);
    assert_eq!(parsed.variables[0].name, "pos");
    let actions: Vec<&str> = {
        let mut seen = Vec::new();
        for c in &parsed.commands {
            if !seen.contains(&c.action.as_str()) {
                seen.push(c.action.as_str());
            }
        }
        seen
    };
    assert_eq!(actions, ["up", "left", "down", "right"]);

    let golden_path = repo_root().join("crates/core/tests/golden/frozen_lake.canonical");
    let printed = print_model(&parsed);
    if regen() {
        std::fs::create_dir_all(golden_path.parent().unwrap()).unwrap();
        std::fs::write(&golden_path, &printed).unwrap();
        return;
    }
    let golden = std::fs::read_to_string(&golden_path)
        .expect("golden file exists; run with POLMC_REGEN_FIXTURES=1 to create it");
    assert_eq!(
        printed, golden,
        "canonical print drifted from the golden file"
    );
}

#[test]
fn committed_policy_tables_match_their_rules() {
    for bench in names() {
        let fx = fixture(bench).unwrap();
        for policy in fx.scripted_policies {
            let table = scripted_policy_table(bench, policy).unwrap();
            let rendered = policy_table_json(&table);
            let path = repo_root()
                .join(&fx.dir)
                .join("policies")
                .join(format!("{policy}.json"));
            if regen() {
                std::fs::create_dir_all(path.parent().unwrap()).unwrap();
                std::fs::write(&path, &rendered).unwrap();
                continue;
            }
            let committed = std::fs::read_to_string(&path).unwrap_or_else(|e| {
                panic!(
                    "{}: {e}; run with POLMC_REGEN_FIXTURES=1 to create it",
                    path.display()
                )
            });
            assert_eq!(
                rendered, committed,
                "{bench}/{policy}: committed table drifted from its rule"
            );
        }
    }
}

#[test]
fn templates_mention_their_pinned_state_line() {
    let fl = fixture("frozen_lake").unwrap();
    assert!(fl.template_text.contains("Current State: pos={pos}"));
    let taxi = fixture("taxi").unwrap();
    assert!(taxi
        .template_text
        .contains("current x-coordinate={x};current y-coordinate={y};remaining fuel={fuel}"));
    assert!(taxi.template_text.contains("(x=1, y=2)"));
    let sm = fixture("stock_market").unwrap();
    assert!(sm.template_text.contains(
        "buy_price={buy_price};sell_price={sell_price};capital={capital};stocks={stocks};last_action_price={last_action_price}"
    ));
}
