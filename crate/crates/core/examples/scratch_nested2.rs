use dimerloop::chain::{BarConfiguration, ChainGeometry, TimeGrid};
use dimerloop::contours::contour_info;
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
    for lp in &set.loops {
        if lp.is_short() {
            continue;
        }
        let info = contour_info(&g, &grid, &cfg, &set, lp.id).unwrap();
        println!(
            "loop {}: bars {} int1 {} int2 {} length {} extent {} external {}",
            lp.id, info.n_bars, info.int1_size, info.int2_size, info.length,
            info.extent_time, info.is_external
        );
    }
}
