use criterion::{criterion_group, criterion_main, Criterion};
use germflow_core::{
    check_kuo_condition, integrate_flow, kuo_pseudo_distance, parse_germ_spec, FlowTolerances, HomotopyProblem,
    HornSpec, KuoCheck, MetricChoice, WeightSystem,
};
use std::hint::black_box;

const PITCHFORK: &str = "dims 1 1 1\ngroup source -1\ngroup target -1\nmap 1 1 3 0\nmap 1 -1 1 1\n";

fn rho(c: &mut Criterion) {
    let ws = WeightSystem::new(vec![1, 2, 3, 1]).unwrap();
    let u = [0.3, -0.2, 0.1, 0.05];
    c.bench_function("rho/weights-1231", |b| b.iter(|| ws.rho(black_box(&u))));
    let flat = WeightSystem::uniform(4);
    c.bench_function("rho/uniform", |b| b.iter(|| flat.rho(black_box(&u))));
}

fn kuo(c: &mut Criterion) {
    let spec = parse_germ_spec(PITCHFORK).unwrap();
    c.bench_function("kuo/pseudo-distance", |b| {
        b.iter(|| kuo_pseudo_distance(&spec.germ, &spec.weights, black_box(&[0.1, 0.01])))
    });
    let cfg = KuoCheck::new(1.0, HornSpec::new(3.0, 0.5, 0.5).unwrap(), 2000, 42);
    c.bench_function("kuo/check-2000", |b| b.iter(|| check_kuo_condition(&spec.germ, &spec.sigma, &spec.weights, &cfg)));
}

fn flow(c: &mut Criterion) {
    let spec = parse_germ_spec(PITCHFORK).unwrap();
    let pert = parse_germ_spec("dims 1 1 1\nmap 1 1 5 0\n").unwrap().germ;
    let problem = HomotopyProblem::new(
        spec.germ,
        pert,
        spec.weights,
        spec.sigma,
        HornSpec::new(3.0, 0.5, 0.5).unwrap(),
        spec.group,
        MetricChoice::Auto,
    )
    .unwrap();
    let tol = FlowTolerances::default();
    c.bench_function("flow/pitchfork-x5", |b| {
        b.iter(|| integrate_flow(&problem, black_box(&[0.2, 0.04]), 0.0, 1.0, &tol).unwrap())
    });
    c.bench_function("flow/near-sigma", |b| {
        b.iter(|| integrate_flow(&problem, black_box(&[1e-4, 1e-8]), 0.0, 1.0, &tol).unwrap())
    });
}

criterion_group!(benches, rho, kuo, flow);
criterion_main!(benches);
