use dimerloop::chain::{BarConfiguration, ChainGeometry, TimeGrid};
use dimerloop::loops::trace_loops;

fn main() {
    let g = ChainGeometry::new(4).unwrap();
    let grid = TimeGrid::new(1, 16).unwrap();
    let mut pairs = vec![
        (-3, 12), (-2, 11), (-1, 13), (0, 10), (1, 14), (2, 9), (3, 15),
        (-3, -12), (-2, -11), (-1, -13), (0, -10), (1, -14), (2, -9), (3, -15),
    ];
    pairs.extend_from_slice(&[(-1, -6), (0, -4), (1, -2), (1, 3), (-1, 5)]);
    let cfg = BarConfiguration::from_labels(&g, &grid, &pairs).unwrap();
    let set = trace_loops(&g, &grid, &cfg).unwrap();
    println!("total loops: {}", set.total_loops());
    for lp in &set.loops {
        let sites: Vec<i32> = lp.site_support.iter().map(|&s| g.site_label(s)).collect();
        println!(
            "loop {}: sites {:?} bars {} jumps {} winding {} extent {}",
            lp.id, sites, lp.n_bars(), lp.n_jumps, lp.winding, lp.extent_ticks
        );
    }
}
