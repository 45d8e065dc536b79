use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use polmc_bench::random_walk_chain;
use polmc_core::benchmarks::{fixture, scripted_policy_table};
use polmc_core::dtmc::{build, BuildLimits};
use polmc_core::oracle::PolicyOracle;
use polmc_core::pctl::{check, parse_property, SolveMethod, SolverOptions};
use polmc_core::prism::parse_model;

fn bench_parse(c: &mut Criterion) {
    let text = fixture("stock_market").unwrap().model_text;
    c.bench_function("parse_stock_market_model", |b| {
        b.iter(|| parse_model(std::hint::black_box(text)).unwrap())
    });
}

fn bench_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_induced_chain");
    for (bench, policy) in [
        ("frozen_lake", "hole-avoiding"),
        ("taxi", "greedy-to-gas"),
        ("stock_market", "sell-when-holding"),
    ] {
        let model = fixture(bench).unwrap().model();
        let table = scripted_policy_table(bench, policy).unwrap();
        group.bench_function(BenchmarkId::new(bench, policy), |b| {
            b.iter(|| {
                let oracle = PolicyOracle::scripted(table.clone());
                build(&model, &oracle, None, &BuildLimits::default()).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_check(c: &mut Criterion) {
    let mut group = c.benchmark_group("check_reachability");
    let property = parse_property("P=? [ F \"top\" ]").unwrap();
    // the slowly mixing walk defeats iteration at tight tolerances beyond
    // a few hundred states, so each solver gets sizes it can certify
    let cases = [
        (SolveMethod::ValueIteration, 50usize),
        (SolveMethod::ValueIteration, 200),
        (SolveMethod::DirectSolve, 200),
        (SolveMethod::DirectSolve, 1000),
    ];
    for (method, n) in cases {
        let chain = random_walk_chain(n);
        let opts = SolverOptions {
            method,
            ..SolverOptions::default()
        };
        group.bench_function(
            BenchmarkId::new(format!("{method:?}").to_lowercase(), n),
            |b| b.iter(|| check(&chain, &property, &opts).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_parse, bench_build, bench_check);
criterion_main!(benches);
