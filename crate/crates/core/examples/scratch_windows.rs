use dimerloop::sampler::{run_chains, ObservableSpec, SamplerParams};
use std::time::Instant;

fn main() {
    for beta in [2u32, 4, 8] {
        let params = SamplerParams {
            twice_s: 80,
            ell: 8,
            beta,
            n: 64,
            n_sweeps: 6000,
            n_burnin: 1500,
            measure_every: 5,
            seed: 7,
            stream: 0,
            p_insert: 0.5,
        initial: dimerloop::sampler::InitialState::DimerTowers,
        };
        let t = Instant::now();
        let specs = [ObservableSpec::WindowFraction, ObservableSpec::BarCount];
        let res = run_chains(&params, 2, &specs, false, 2).unwrap();
        let frac: f64 =
            res.iter().map(|r| r.stat("window_any").unwrap().mean).sum::<f64>() / 2.0;
        let bars: f64 = res.iter().map(|r| r.stat("bars").unwrap().mean).sum::<f64>() / 2.0;
        let acc: f64 = res.iter().map(|r| r.acceptance_rate).sum::<f64>() / 2.0;
        println!(
            "beta {beta}: window fraction {frac:.4}, bars {bars:.1}, accept {acc:.3}, {:?}",
            t.elapsed()
        );
    }
}
