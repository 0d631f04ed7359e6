//! Long loops, interiors, and dimer-layer windows.
//!
//! A non-winding loop is a closed rectilinear curve on the space-time
//! cylinder, so it has a Jordan interior. Interiors are decided by strand
//! parity: a point is inside iff an odd number of the loop's vertical
//! strands cross its height strictly to its left. Site points are tested
//! at time 0 (bar-free by construction); edge cells at lattice height `t`
//! are tested just above `t`, which dodges every degeneracy because bars
//! at different columns never share a time slot.

use crate::chain::{BarConfiguration, ChainGeometry, EdgeClass, TimeGrid};
use crate::error::{Error, Result};
use crate::loops::LoopSet;

/// Short loops visit at most two sites; long loops are everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopClass {
    Short,
    Long,
}

/// Classification aligned with `set.loops`.
pub fn classify_loops(set: &LoopSet) -> Vec<LoopClass> {
    set.loops
        .iter()
        .map(|l| if l.is_short() { LoopClass::Short } else { LoopClass::Long })
        .collect()
}

/// Ids of loops with nonzero winding number.
pub fn winding_loops(set: &LoopSet) -> Vec<usize> {
    set.loops
        .iter()
        .filter(|l| l.winding != 0)
        .map(|l| l.id)
        .collect()
}

/// Whether the site point `(site_index, 0)` lies strictly inside the given
/// loop. Points on the loop itself are not interior (the surround event
/// treats them separately).
pub fn interior_contains(set: &LoopSet, loop_id: usize, site_index: usize) -> Result<bool> {
    let lp = &set.loops[loop_id];
    if lp.winding != 0 {
        return Err(Error::WindingPresent);
    }
    if set.loop_at_zero(site_index) == loop_id {
        return Ok(false);
    }
    let mut crossings = 0usize;
    for y in 0..site_index {
        if set.loop_at_zero(y) == loop_id {
            crossings += 1;
        }
    }
    Ok(crossings % 2 == 1)
}

/// Same parity test counted from the right; used as an independent
/// consistency check of the Jordan construction.
pub fn interior_contains_from_right(
    set: &LoopSet,
    loop_id: usize,
    site_index: usize,
) -> Result<bool> {
    let lp = &set.loops[loop_id];
    if lp.winding != 0 {
        return Err(Error::WindingPresent);
    }
    if set.loop_at_zero(site_index) == loop_id {
        return Ok(false);
    }
    let mut crossings = 0usize;
    for y in site_index + 1..set.n_sites() {
        if set.loop_at_zero(y) == loop_id {
            crossings += 1;
        }
    }
    Ok(crossings % 2 == 1)
}

/// Whether `(x, 0)` lies on a long loop or in the interior of one. Only
/// defined for configurations without winding loops.
pub fn surround_event(geometry: &ChainGeometry, set: &LoopSet, x: i32) -> Result<bool> {
    if !winding_loops(set).is_empty() {
        return Err(Error::WindingPresent);
    }
    let site = geometry
        .site_index(x)
        .ok_or_else(|| Error::InvalidParameter(format!("site {x} not on chain")))?;
    let own = set.loop_at_zero(site);
    if !set.loops[own].is_short() {
        return Ok(true);
    }
    for lp in &set.loops {
        if lp.is_short() {
            continue;
        }
        if interior_contains(set, lp.id, site)? {
            return Ok(true);
        }
    }
    Ok(false)
}

pub(crate) fn check_window_alpha(grid: &TimeGrid, alpha: i32) -> Result<()> {
    let beta = grid.beta() as i32;
    if alpha < -beta || alpha >= beta {
        return Err(Error::AlphaOutOfRange { alpha, lo: -beta, hi: beta - 1 });
    }
    Ok(())
}

/// Whether `tick` lies in the closed window `[alpha, alpha + 1]` on the
/// time circle (endpoints included; the window wraps through the
/// identified endpoint when needed).
pub fn window_contains(grid: &TimeGrid, alpha: i32, tick: u32) -> bool {
    let circ = grid.circumference() as i64;
    let n = grid.n() as i64;
    let start = (alpha as i64 * n).rem_euclid(circ);
    let offset = (tick as i64 - start).rem_euclid(circ);
    offset <= n
}

/// Whether every class-1 edge has at least one bar in the window
/// `[alpha, alpha + 1]` while no class-2 edge does.
pub fn has_dimer_layer(
    geometry: &ChainGeometry,
    grid: &TimeGrid,
    config: &BarConfiguration,
    alpha: i32,
) -> Result<bool> {
    check_window_alpha(grid, alpha)?;
    let mut seen_one = vec![false; geometry.n_edges()];
    for bar in config.bars() {
        if window_contains(grid, alpha, bar.tick) {
            match geometry.edge_class(bar.edge as usize) {
                EdgeClass::Two => return Ok(false),
                EdgeClass::One => seen_one[bar.edge as usize] = true,
            }
        }
    }
    Ok(geometry.class_one_edges().all(|e| seen_one[e]))
}

/// All window indices `alpha in [-beta, beta - 1]` whose dimer layer is
/// present in `config`.
pub fn dimer_window_indices(
    geometry: &ChainGeometry,
    grid: &TimeGrid,
    config: &BarConfiguration,
) -> Vec<i32> {
    let beta = grid.beta() as i32;
    (-beta..beta)
        .filter(|&alpha| has_dimer_layer(geometry, grid, config, alpha).unwrap_or(false))
        .collect()
}

/// Geometry of one contour (long, non-winding loop).
#[derive(Debug, Clone)]
pub struct ContourInfo {
    pub loop_id: usize,
    /// Number of distinct double bars on the loop.
    pub n_bars: usize,
    /// Enclosed (class-1 edge, lattice time) cells.
    pub int1_size: u64,
    /// Enclosed (class-2 edge, lattice time) cells.
    pub int2_size: u64,
    /// Contour length from the defining relation
    /// `int1 - int2 = n * length / 2`.
    pub length: f64,
    /// Total vertical extent of the loop in time units; agrees with
    /// `length` up to `n_bars / n`.
    pub extent_time: f64,
    /// Edges with at least one endpoint on the loop.
    pub support_edges: Vec<usize>,
    /// Has a class-2 jump and is not surrounded by any other loop.
    pub is_external: bool,
}

/// Computes interiors, length, support and externality of a contour.
pub fn contour_info(
    geometry: &ChainGeometry,
    grid: &TimeGrid,
    config: &BarConfiguration,
    set: &LoopSet,
    loop_id: usize,
) -> Result<ContourInfo> {
    let lp = &set.loops[loop_id];
    if lp.winding != 0 || lp.is_short() {
        return Err(Error::NotAContour(loop_id));
    }
    let n_sites = set.n_sites();
    let n_edges = geometry.n_edges();
    let circ = grid.circumference();

    // Jump cells of this loop: (edge, tick) pairs where the curve runs
    // horizontally; they are boundary, not interior.
    let mut jumps: Vec<(u32, u32)> = lp
        .bars
        .iter()
        .map(|&b| {
            let bar = config.bars()[b as usize];
            (bar.edge, bar.tick)
        })
        .collect();
    jumps.sort_unstable();

    let mut int1 = 0u64;
    let mut int2 = 0u64;
    for t in 0..circ {
        // cumulative strand parity left of each column, at height t + eps
        let mut parity = false;
        for y in 0..n_sites {
            if set.loop_above(y, t) == loop_id {
                parity = !parity;
            }
            if y < n_edges && parity && jumps.binary_search(&(y as u32, t)).is_err() {
                match geometry.edge_class(y) {
                    EdgeClass::One => int1 += 1,
                    EdgeClass::Two => int2 += 1,
                }
            }
        }
    }

    let length = 2.0 * (int1 as f64 - int2 as f64) / grid.n() as f64;
    let extent_time = lp.extent_ticks as f64 / grid.n() as f64;

    let mut support_edges = Vec::new();
    for e in 0..n_edges {
        if lp.site_support.binary_search(&e).is_ok()
            || lp.site_support.binary_search(&(e + 1)).is_ok()
        {
            support_edges.push(e);
        }
    }

    let has_class_two_jump = lp.bars.iter().any(|&b| {
        geometry.edge_class(config.bars()[b as usize].edge as usize) == EdgeClass::Two
    });
    let is_external = has_class_two_jump && !is_surrounded(set, loop_id)?;

    Ok(ContourInfo {
        loop_id,
        n_bars: lp.n_bars(),
        int1_size: int1,
        int2_size: int2,
        length,
        extent_time,
        support_edges,
        is_external,
    })
}

/// Whether some other non-winding long loop encloses a representative
/// point of `loop_id`. Short loops cannot contain a site in their
/// interior, so only long loops are tested.
fn is_surrounded(set: &LoopSet, loop_id: usize) -> Result<bool> {
    use crate::loops::SegmentKind;
    let lp = &set.loops[loop_id];
    let (site, tick) = lp
        .segments
        .iter()
        .find_map(|seg| match seg.kind {
            SegmentKind::Bounded { lower_tick, .. } => Some((seg.site, lower_tick)),
            SegmentKind::FullCircle => None,
        })
        .ok_or(Error::NotAContour(loop_id))?;
    for other in &set.loops {
        if other.id == loop_id || other.is_short() || other.winding != 0 {
            continue;
        }
        // parity of the other loop's strands left of `site`, just above `tick`
        let mut crossings = 0usize;
        for y in 0..site {
            if set.loop_above(y, tick) == other.id {
                crossings += 1;
            }
        }
        if crossings % 2 == 1 {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::BarConfiguration as Cfg;
    use crate::loops::trace_loops;

    fn setup(ell: u32, beta: u32, n: u32) -> (ChainGeometry, TimeGrid) {
        (ChainGeometry::new(ell).unwrap(), TimeGrid::new(beta, n).unwrap())
    }

    fn dimer_pattern(g: &ChainGeometry, grid: &TimeGrid) -> Cfg {
        let bars: Vec<(i32, i32)> = g
            .class_one_edges()
            .enumerate()
            .map(|(i, e)| (g.edge_left_site(e), 1 + i as i32))
            .collect();
        Cfg::from_labels(g, grid, &bars).unwrap()
    }

    #[test]
    fn classification_examples() {
        let (g, grid) = setup(2, 1, 8);
        // bar-free circles and dimer rungs are short
        let set = trace_loops(&g, &grid, &Cfg::empty()).unwrap();
        assert!(classify_loops(&set).iter().all(|c| *c == LoopClass::Short));
        let set = trace_loops(&g, &grid, &dimer_pattern(&g, &grid)).unwrap();
        assert!(classify_loops(&set).iter().all(|c| *c == LoopClass::Short));
        // the five-bar contour visits four sites
        let cfg =
            Cfg::from_labels(&g, &grid, &[(-1, -6), (0, -4), (1, -2), (1, 3), (-1, 5)]).unwrap();
        let set = trace_loops(&g, &grid, &cfg).unwrap();
        let classes = classify_loops(&set);
        assert_eq!(classes.iter().filter(|c| **c == LoopClass::Long).count(), 1);
    }

    #[test]
    fn winding_filter_examples() {
        let (g, grid) = setup(2, 1, 8);
        let set = trace_loops(&g, &grid, &Cfg::empty()).unwrap();
        assert_eq!(winding_loops(&set).len(), 4);
        let set = trace_loops(&g, &grid, &dimer_pattern(&g, &grid)).unwrap();
        assert!(winding_loops(&set).is_empty());
        // a single bar merges two circles into one non-winding loop
        let cfg = Cfg::from_labels(&g, &grid, &[(1, 2)]).unwrap();
        let set = trace_loops(&g, &grid, &cfg).unwrap();
        let winding: Vec<i32> = set.loops.iter().map(|l| l.winding).collect();
        assert_eq!(set.loops.iter().filter(|l| l.winding == 0).count(), 1);
        assert_eq!(winding.iter().filter(|w| w.abs() == 1).count(), 2);
    }

    /// Ring contour around the middle of the four-site chain: walls on the
    /// outer sites, staircases over the three edges.
    fn ring_config(g: &ChainGeometry, grid: &TimeGrid) -> Cfg {
        Cfg::from_labels(g, grid, &[(-1, 6), (0, 5), (1, 7), (1, -6), (0, -5), (-1, -7)])
            .unwrap()
    }

    #[test]
    fn ring_contour_interior() {
        let (g, grid) = setup(2, 1, 8);
        let cfg = ring_config(&g, &grid);
        let set = trace_loops(&g, &grid, &cfg).unwrap();
        assert_eq!(set.total_loops(), 4);
        let ring = set.loops.iter().find(|l| !l.is_short()).unwrap();
        assert_eq!(ring.n_bars(), 6);
        assert_eq!(ring.winding, 0);
        // enclosed: the two middle sites; the walls are on the loop
        let inside: Vec<bool> = (0..4)
            .map(|s| interior_contains(&set, ring.id, s).unwrap())
            .collect();
        assert_eq!(inside, vec![false, true, true, false]);
        // left and right parity tests agree everywhere
        for s in 0..4 {
            assert_eq!(
                interior_contains(&set, ring.id, s).unwrap(),
                interior_contains_from_right(&set, ring.id, s).unwrap()
            );
        }
        // all four time-0 points are on or inside the ring
        for x in -1..=2 {
            assert!(surround_event(&g, &set, x).unwrap());
        }
        // interior parity never fires for sites outside the bounding box:
        // trivially checked here by the wall sites being on the loop.
        let info = contour_info(&g, &grid, &cfg, &set, ring.id).unwrap();
        assert_eq!(info.n_bars, 6);
        assert_eq!((info.int1_size, info.int2_size), (24, 9));
        assert_eq!(info.length, 3.75);
        assert!((info.extent_time - 4.0).abs() < 1e-12);
        assert!((info.length - info.extent_time).abs() <= info.n_bars as f64 / 8.0);
        assert!(info.is_external);
        assert_eq!(info.support_edges, vec![0, 1, 2]);
    }

    #[test]
    fn five_bar_contour_geometry() {
        let (g, grid) = setup(2, 1, 8);
        let cfg =
            Cfg::from_labels(&g, &grid, &[(-1, -6), (0, -4), (1, -2), (1, 3), (-1, 5)]).unwrap();
        let set = trace_loops(&g, &grid, &cfg).unwrap();
        let long = set.loops.iter().find(|l| !l.is_short()).unwrap();
        let info = contour_info(&g, &grid, &cfg, &set, long.id).unwrap();
        assert_eq!(info.n_bars, 5);
        assert_eq!((info.int1_size, info.int2_size), (20, 0));
        assert_eq!(info.length, 5.0);
        assert!((info.extent_time - 5.5).abs() < 1e-12);
        assert!((info.length - info.extent_time).abs() <= 5.0 / 8.0 + 1e-12);
        assert!(info.int1_size >= info.int2_size);
        assert!(info.is_external);
        // surround pattern: the long loop passes through (-1, 0) and (0, 0);
        // sites 1 and 2 sit on a rung that is not enclosed by it.
        let events: Vec<bool> =
            (-1..=2).map(|x| surround_event(&g, &set, x).unwrap()).collect();
        assert_eq!(events, vec![true, true, false, false]);
    }

    #[test]
    fn surround_event_requires_no_winding() {
        let (g, grid) = setup(2, 1, 8);
        let set = trace_loops(&g, &grid, &Cfg::empty()).unwrap();
        assert!(matches!(surround_event(&g, &set, 0), Err(Error::WindingPresent)));
    }

    #[test]
    fn dimer_pattern_has_no_surrounds() {
        let (g, grid) = setup(3, 1, 8);
        let cfg = dimer_pattern(&g, &grid);
        let set = trace_loops(&g, &grid, &cfg).unwrap();
        for x in -2..=3 {
            assert!(!surround_event(&g, &set, x).unwrap());
        }
    }

    #[test]
    fn contour_info_rejects_short_and_winding_loops() {
        let (g, grid) = setup(2, 1, 8);
        let cfg = dimer_pattern(&g, &grid);
        let set = trace_loops(&g, &grid, &cfg).unwrap();
        assert!(matches!(
            contour_info(&g, &grid, &cfg, &set, 0),
            Err(Error::NotAContour(0))
        ));
    }

    #[test]
    fn dimer_window_membership() {
        let (g, grid) = setup(2, 1, 8);
        let cfg = dimer_pattern(&g, &grid); // bars at slots 1 and 2
        assert!(has_dimer_layer(&g, &grid, &cfg, 0).unwrap());
        assert!(!has_dimer_layer(&g, &grid, &cfg, -1).unwrap());
        assert_eq!(dimer_window_indices(&g, &grid, &cfg), vec![0]);
        // the empty configuration is in no window
        assert!(dimer_window_indices(&g, &grid, &Cfg::empty()).is_empty());
        // a class-2 bar inside the window spoils membership
        let mut bars = cfg.bars().to_vec();
        bars.push(crate::chain::Bar { edge: 1, tick: 5 });
        let spoiled = Cfg::from_bars(&grid, bars);
        assert!(!has_dimer_layer(&g, &grid, &spoiled, 0).unwrap());
        assert!(has_dimer_layer(&g, &grid, &spoiled, -1).is_ok());
        assert!(matches!(
            has_dimer_layer(&g, &grid, &cfg, 1),
            Err(Error::AlphaOutOfRange { .. })
        ));
    }

    #[test]
    fn window_wraps_through_identified_endpoint() {
        let (g, grid) = setup(1, 2, 4);
        // window [-2, -1] includes the identified endpoint tick (= 8)
        let cfg = Cfg::from_labels(&g, &grid, &[(0, 8)]).unwrap();
        assert!(has_dimer_layer(&g, &grid, &cfg, -2).unwrap());
        assert!(has_dimer_layer(&g, &grid, &cfg, 1).unwrap());
        assert!(!has_dimer_layer(&g, &grid, &cfg, 0).unwrap());
    }

    #[test]
    fn window_translation_covariance() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let (g, grid) = setup(2, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let circ = grid.circumference();
        let n = grid.n();
        let mut tested = 0;
        for _ in 0..400 {
            let mut bars = Vec::new();
            for tick in 1..circ {
                if rng.gen::<f64>() < 0.25 {
                    bars.push(crate::chain::Bar {
                        edge: rng.gen_range(0..g.n_edges()) as u32,
                        tick,
                    });
                }
            }
            // shift by one time unit; skip when a bar would land on tick 0
            if bars.iter().any(|b| (b.tick + n) % circ == 0) {
                continue;
            }
            let shifted: Vec<crate::chain::Bar> = bars
                .iter()
                .map(|b| crate::chain::Bar { edge: b.edge, tick: (b.tick + n) % circ })
                .collect();
            let cfg = Cfg::from_bars(&grid, bars);
            let cfg_shift = Cfg::from_bars(&grid, shifted);
            for alpha in -2..1 {
                let a = has_dimer_layer(&g, &grid, &cfg, alpha).unwrap();
                let b = has_dimer_layer(&g, &grid, &cfg_shift, alpha + 1).unwrap();
                assert_eq!(a, b, "alpha {alpha}");
                tested += 1;
            }
        }
        assert!(tested > 100);
    }

    #[test]
    fn nested_contours_externality() {
        // Outer ring over the whole eight-site chain; inner five-bar contour
        // in its interior. The inner one is a contour but not external.
        let (g, grid) = setup(4, 1, 16);
        let mut pairs = vec![
            (-3, 12),
            (-2, 11),
            (-1, 13),
            (0, 10),
            (1, 14),
            (2, 9),
            (3, 15),
            (-3, -12),
            (-2, -11),
            (-1, -13),
            (0, -10),
            (1, -14),
            (2, -9),
            (3, -15),
        ];
        pairs.extend_from_slice(&[(-1, -6), (0, -4), (1, -2), (1, 3), (-1, 5)]);
        let cfg = Cfg::from_labels(&g, &grid, &pairs).unwrap();
        let set = trace_loops(&g, &grid, &cfg).unwrap();
        assert!(winding_loops(&set).is_empty());
        // The five inner bars fuse with the arcs between the rings into an
        // eleven-bar long loop living strictly inside the outer ring.
        let longs: Vec<&crate::loops::Loop> =
            set.loops.iter().filter(|l| !l.is_short()).collect();
        assert_eq!(longs.len(), 2);
        let outer = longs.iter().find(|l| l.n_bars() == 14).expect("outer ring");
        let inner = longs.iter().find(|l| l.n_bars() == 11).expect("inner contour");
        let outer_info = contour_info(&g, &grid, &cfg, &set, outer.id).unwrap();
        let inner_info = contour_info(&g, &grid, &cfg, &set, inner.id).unwrap();
        assert!(outer_info.is_external);
        assert!(!inner_info.is_external);
        assert!(outer_info.int1_size >= outer_info.int2_size);
        assert!((outer_info.length - outer_info.extent_time).abs() <= 14.0 / 16.0);
        // The fused loop runs against the dimer background (downward on
        // class-1 left sites), so its class-2 interior dominates and the
        // signed length is negative; the unsigned defining relation still
        // matches the vertical legs within n_bars / n.
        assert!(inner_info.int2_size > inner_info.int1_size);
        assert!(
            (inner_info.length.abs() - inner_info.extent_time).abs() <= 11.0 / 16.0,
            "unsigned length {} vs extent {}",
            inner_info.length.abs(),
            inner_info.extent_time
        );
        // every time-0 point is on or inside the outer ring
        for x in -3..=4 {
            assert!(surround_event(&g, &set, x).unwrap(), "site {x}");
        }
    }
}
