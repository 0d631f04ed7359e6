use dimerloop::sampler::{SamplerParams, SamplerState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let params = SamplerParams {
        twice_s: 80,
        ell: 8,
        beta: 2,
        n: 64,
        n_sweeps: 20000,
        n_burnin: 100,
        measure_every: 5,
        seed: 7,
        stream: 0,
        p_insert: 0.5,
        initial: dimerloop::sampler::InitialState::DimerTowers,
    };
    let mut state = SamplerState::new(&params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for sweep in 0..20000u64 {
        for _ in 0..state.grid().n_slots() {
            state.step(&mut rng);
        }
        if sweep % 2000 == 0 || (sweep < 200 && sweep % 20 == 0) {
            println!("sweep {sweep}: bars {} loops {}", state.n_bars(), state.loop_count());
        }
    }
}
