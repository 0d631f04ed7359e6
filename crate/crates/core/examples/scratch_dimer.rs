use dimerloop::sampler::{run_chains, ObservableSpec, SamplerParams};
use std::time::Instant;

fn main() {
    let params = SamplerParams {
        twice_s: 80,
        ell: 16,
        beta: 8,
        n: 64,
        n_sweeps: 40_000,
        n_burnin: 5_000,
        measure_every: 5,
        seed: 20_240_601,
        stream: 0,
        p_insert: 0.5,
        initial: dimerloop::sampler::InitialState::DimerTowers,
    };
    let mut specs = vec![ObservableSpec::DimerProfile, ObservableSpec::BarCount];
    for d in 2..=10 {
        specs.push(ObservableSpec::PairConnected { x: -5, y: -5 + d });
    }
    let t = Instant::now();
    let res = run_chains(&params, 2, &specs, false, 2).unwrap();
    println!("elapsed {:?}", t.elapsed());
    let r = &res[0];
    println!("bars {:.1} accept {:.3}", r.stat("bars").unwrap().mean, r.acceptance_rate);
    for x in [-13i32, -1, 7, 15] {
        let right = r.stat(&format!("bond({x})")).unwrap().mean;
        let left = r.stat(&format!("bond({})", x - 1)).unwrap().mean;
        println!("D({x}) = {:.4} (right {right:.4} left {left:.4})", right - left);
    }
    for d in 2..=10 {
        let p = r.stat(&format!("conn(-5,{})", -5 + d)).unwrap().mean;
        println!("P(d={d}) = {p:.5}");
    }
}
