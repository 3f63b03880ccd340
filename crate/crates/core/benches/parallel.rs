//! Sequential against parallel execution on the workloads that fan out:
//! a full control-problem run, a parameter sweep and an exhaustive search.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use noc_core::cones::ConvexSet;
use noc_core::optproblem::{op_bruteforce, OptProblem};
use noc_core::pipeline::{run, sweep, RunOptions, SweepAxis};
use noc_core::problem::ProblemFile;
use noc_core::smooth::ExprMap;
use noc_core::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn ccs126_run(c: &mut Criterion) {
    let file = ProblemFile::preset("ccs126").unwrap();
    let mut g = c.benchmark_group("ccs126_run");
    g.sample_size(20);
    for (name, exec) in MODES {
        let opts = RunOptions { exec, timing: false };
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run(black_box(&file), &opts).unwrap()));
    }
    g.finish();
}

fn ccs126_sweep(c: &mut Criterion) {
    let mut file = ProblemFile::preset("ccs126").unwrap();
    file.set_grid(200).unwrap();
    let axes = [
        SweepAxis::parse("T=0.1:0.7:7").unwrap(),
        SweepAxis::parse("theta=2.5,3,4").unwrap(),
    ];
    let mut g = c.benchmark_group("ccs126_sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| sweep(black_box(&file), &axes, exec).unwrap()));
    }
    g.finish();
}

fn disc_bruteforce(c: &mut Criterion) {
    let vars = vec!["e1".to_string(), "e2".to_string()];
    let map = ExprMap::parse(&["e1 + 0.1*e2".to_string()], &vars, None, &[]).unwrap();
    let p = OptProblem::new(ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap(), Arc::new(map), 0).unwrap();
    let mut g = c.benchmark_group("disc_bruteforce");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| op_bruteforce(black_box(&p), &[-1.0, 0.0], 1e-3, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, ccs126_run, ccs126_sweep, disc_bruteforce);
criterion_main!(benches);
