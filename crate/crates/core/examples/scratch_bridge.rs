use dimerloop::chain::{ChainGeometry, SpinWeight};
use dimerloop::ed;

fn main() {
    // four-site chain at q = 2: finite-resolution bond expectation vs thermal
    let q = 2u32;
    let spin = SpinWeight::from_twice_s(q - 1).unwrap();
    let g = ChainGeometry::new(2).unwrap();
    let h = ed::build_hamiltonian(2, spin, 4096).unwrap();
    let spec = ed::eigendecompose(&h).unwrap();
    let p2 = ed::singlet_projector(q);
    for e in 0..g.n_edges() {
        let p_embed = ed::embed_pair(&p2, q, 4, e);
        let thermal = ed::gibbs_expectation_from(&spec, &p_embed, 2.0);
        print!("bond {} thermal {:.6} |", g.edge_left_site(e), thermal);
        for n in [1u32, 2, 4, 8, 16, 32] {
            let v = ed::discrete_time_expectation(&spec, &p_embed, 1, n);
            print!(" n={n}: {:.6} (gap {:+.5})", v, v - thermal);
        }
        println!();
    }
}
