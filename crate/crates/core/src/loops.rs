//! Loop decomposition of bar configurations.
//!
//! Every site carries a vertical time circle. The bars incident to a site
//! cut its circle into arcs; a bar on edge `{x, x+1}` glues the two arcs
//! ending at its time (one on each site) and the two arcs starting there.
//! Trajectories reverse their vertical direction at every jump, so loops
//! are the connected components of arcs under these gluings.
//!
//! Loop counts drive the measure weight `q^(L - |bars|)`, and loop
//! geometry (winding, site support) drives the contour analysis.

use crate::chain::{validate_config, Bar, BarConfiguration, ChainGeometry, TimeGrid};
use crate::error::{Error, Result};

/// One vertical piece of a loop on a single site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    /// Site index (0-based).
    pub site: usize,
    pub kind: SegmentKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    /// The site has no incident bars; the whole circle is one segment.
    FullCircle,
    /// Arc from `lower_tick` up to `upper_tick` (circularly), both bar times.
    Bounded { lower_tick: u32, upper_tick: u32 },
}

/// A single closed loop.
#[derive(Debug, Clone)]
pub struct Loop {
    pub id: usize,
    /// Segments in traversal order, starting from the loop's smallest arc
    /// moving upward.
    pub segments: Vec<Segment>,
    /// Sorted site indices visited.
    pub site_support: Vec<usize>,
    /// Net number of wraps around the time circle (signed by the traversal
    /// that starts upward on the loop's smallest arc).
    pub winding: i32,
    /// Number of bar traversals (jumps). A bar both of whose gluings lie on
    /// this loop is counted twice; the count is always even.
    pub n_jumps: usize,
    /// Sorted indices (into the configuration's bar list) of the distinct
    /// bars this loop touches.
    pub bars: Vec<u32>,
    /// Total vertical length traversed, in ticks (units of 1/n).
    pub extent_ticks: u64,
}

impl Loop {
    /// Number of distinct double bars on the loop.
    pub fn n_bars(&self) -> usize {
        self.bars.len()
    }

    /// Loops visiting at most two sites are short; the rest are long.
    pub fn is_short(&self) -> bool {
        self.site_support.len() <= 2
    }
}

/// The full loop decomposition of a configuration, with enough indexing to
/// answer point-location and connectivity queries.
#[derive(Debug, Clone)]
pub struct LoopSet {
    pub loops: Vec<Loop>,
    n_sites: usize,
    circumference: u32,
    /// Per site, incident bar ticks sorted ascending.
    incident: Vec<Vec<u32>>,
    /// Arc ids are contiguous per site: site `s` owns arcs
    /// `offset[s] .. offset[s+1]`; arc `offset[s] + i` spans
    /// `[ticks[i], ticks[i+1 mod m])`, or the full circle when `m = 0`.
    offsets: Vec<usize>,
    arc_loop: Vec<u32>,
}

impl LoopSet {
    pub fn total_loops(&self) -> usize {
        self.loops.len()
    }

    fn arcs_of(&self, site: usize) -> (usize, usize) {
        (self.offsets[site], self.offsets[site + 1])
    }

    /// Arc containing the lattice point `(site, tick)`. `tick` must not be
    /// an incident bar time of the site (lattice points on bars belong to
    /// two arcs); tick 0 is always safe.
    pub fn arc_at_point(&self, site: usize, tick: u32) -> usize {
        let (start, end) = self.arcs_of(site);
        let m = end - start;
        if m == 1 && self.incident[site].is_empty() {
            return start;
        }
        let ticks = &self.incident[site];
        debug_assert!(ticks.binary_search(&tick).is_err(), "point sits on a bar");
        let pos = ticks.partition_point(|&t| t < tick);
        if pos == 0 || pos == m {
            start + m - 1
        } else {
            start + pos - 1
        }
    }

    /// Arc covering the open interval just above lattice height `tick`
    /// (i.e. containing `tick + epsilon`). Unlike [`Self::arc_at_point`],
    /// `tick` may coincide with a bar time, in which case the arc starting
    /// there is returned.
    pub fn arc_above(&self, site: usize, tick: u32) -> usize {
        let (start, end) = self.arcs_of(site);
        let m = end - start;
        if m == 1 && self.incident[site].is_empty() {
            return start;
        }
        let ticks = &self.incident[site];
        let pos = ticks.partition_point(|&t| t <= tick);
        start + (pos + m - 1) % m
    }

    /// Loop id of the loop passing through the lattice point `(site, tick)`.
    pub fn loop_at_point(&self, site: usize, tick: u32) -> usize {
        self.arc_loop[self.arc_at_point(site, tick)] as usize
    }

    /// Loop id at the (always bar-free) time-0 point of a site.
    pub fn loop_at_zero(&self, site: usize) -> usize {
        self.loop_at_point(site, 0)
    }

    /// Whether the time-0 points of two sites lie on the same loop.
    pub fn connected_at_zero(&self, site_a: usize, site_b: usize) -> bool {
        self.loop_at_zero(site_a) == self.loop_at_zero(site_b)
    }

    /// Loop id of the arc covering the interval just above `tick` on `site`.
    pub fn loop_above(&self, site: usize, tick: u32) -> usize {
        self.arc_loop[self.arc_above(site, tick)] as usize
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn circumference(&self) -> u32 {
        self.circumference
    }

    /// Debug dump, one CSV row per loop:
    /// `id,winding,n_bars,site_min,site_max,vertical_extent`.
    pub fn dump_csv(&self, geometry: &ChainGeometry) -> String {
        let mut out = String::from("id,winding,n_bars,site_min,site_max,vertical_extent\n");
        for lp in &self.loops {
            let lo = geometry.site_label(*lp.site_support.first().unwrap());
            let hi = geometry.site_label(*lp.site_support.last().unwrap());
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                lp.id,
                lp.winding,
                lp.n_bars(),
                lo,
                hi,
                lp.extent_ticks
            ));
        }
        out
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let gp = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = gp;
            i = gp;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra.max(rb) as usize] = ra.min(rb);
        }
    }
}

fn circ_len(lower: u32, upper: u32, circumference: u32) -> u32 {
    if upper > lower {
        upper - lower
    } else {
        circumference - lower + upper
    }
}

/// Decomposes an admissible configuration into its loops.
pub fn trace_loops(
    geometry: &ChainGeometry,
    grid: &TimeGrid,
    config: &BarConfiguration,
) -> Result<LoopSet> {
    let report = validate_config(geometry, grid, config);
    if !report.is_valid() {
        return Err(Error::InvalidConfiguration(
            report
                .violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }

    let n_sites = geometry.n_sites();
    let circ = grid.circumference();

    let mut incident: Vec<Vec<u32>> = vec![Vec::new(); n_sites];
    for bar in config.bars() {
        let x = bar.edge as usize;
        incident[x].push(bar.tick);
        incident[x + 1].push(bar.tick);
    }
    for ticks in &mut incident {
        ticks.sort_unstable();
    }

    let mut offsets = Vec::with_capacity(n_sites + 1);
    offsets.push(0usize);
    for site in 0..n_sites {
        let m = incident[site].len().max(1);
        offsets.push(offsets[site] + m);
    }
    let n_arcs = offsets[n_sites];

    // Arc-end gluing table: for each arc, the partner arc reached when
    // leaving through its upper or lower end, together with the bar index.
    const NONE: u32 = u32::MAX;
    let mut upper_partner = vec![NONE; n_arcs];
    let mut lower_partner = vec![NONE; n_arcs];
    let mut upper_bar = vec![NONE; n_arcs];
    let mut lower_bar = vec![NONE; n_arcs];

    // Arc ending at tick t on a site (its upper end is t), and arc starting
    // there (lower end t).
    let arc_ending = |site: usize, t: u32, incident: &[Vec<u32>]| -> usize {
        let ticks = &incident[site];
        let m = ticks.len();
        let i = ticks.binary_search(&t).expect("bar tick incident to site");
        offsets[site] + (i + m - 1) % m
    };
    let arc_starting = |site: usize, t: u32, incident: &[Vec<u32>]| -> usize {
        let ticks = &incident[site];
        let i = ticks.binary_search(&t).expect("bar tick incident to site");
        offsets[site] + i
    };

    let mut uf = UnionFind::new(n_arcs);
    for (bar_idx, bar) in config.bars().iter().enumerate() {
        let x = bar.edge as usize;
        let y = x + 1;
        let below_x = arc_ending(x, bar.tick, &incident);
        let below_y = arc_ending(y, bar.tick, &incident);
        let above_x = arc_starting(x, bar.tick, &incident);
        let above_y = arc_starting(y, bar.tick, &incident);
        uf.union(below_x as u32, below_y as u32);
        uf.union(above_x as u32, above_y as u32);
        upper_partner[below_x] = below_y as u32;
        upper_partner[below_y] = below_x as u32;
        lower_partner[above_x] = above_y as u32;
        lower_partner[above_y] = above_x as u32;
        upper_bar[below_x] = bar_idx as u32;
        upper_bar[below_y] = bar_idx as u32;
        lower_bar[above_x] = bar_idx as u32;
        lower_bar[above_y] = bar_idx as u32;
    }

    // Arc geometry lookup.
    let arc_site = |arc: usize| -> usize {
        offsets.partition_point(|&o| o <= arc) - 1
    };
    let arc_bounds = |arc: usize| -> Option<(u32, u32)> {
        let site = arc_site(arc);
        let ticks = &incident[site];
        if ticks.is_empty() {
            None
        } else {
            let i = arc - offsets[site];
            Some((ticks[i], ticks[(i + 1) % ticks.len()]))
        }
    };

    // Walk each component once, starting from its smallest arc moving up.
    let mut arc_loop = vec![NONE; n_arcs];
    let mut loops = Vec::new();
    for start in 0..n_arcs {
        if arc_loop[start] != NONE {
            continue;
        }
        let id = loops.len();
        let mut segments = Vec::new();
        let mut support = Vec::new();
        let mut bars_touched = Vec::new();
        let mut extent: u64 = 0;
        let mut lift: i64 = 0;
        let mut n_jumps = 0usize;

        if arc_bounds(start).is_none() {
            // Bar-free site: the circle closes on itself, winding once.
            arc_loop[start] = id as u32;
            let site = arc_site(start);
            segments.push(Segment { site, kind: SegmentKind::FullCircle });
            support.push(site);
            loops.push(Loop {
                id,
                segments,
                site_support: support,
                winding: 1,
                n_jumps: 0,
                bars: Vec::new(),
                extent_ticks: circ as u64,
            });
            continue;
        }

        let mut arc = start;
        let mut going_up = true;
        loop {
            debug_assert_eq!(arc_loop[arc], NONE);
            arc_loop[arc] = id as u32;
            let site = arc_site(arc);
            let (lo, hi) = arc_bounds(arc).expect("bounded arc");
            let len = circ_len(lo, hi, circ) as i64;
            segments.push(Segment { site, kind: SegmentKind::Bounded { lower_tick: lo, upper_tick: hi } });
            support.push(site);
            extent += len as u64;
            let (next, bar) = if going_up {
                lift += len;
                (upper_partner[arc], upper_bar[arc])
            } else {
                lift -= len;
                (lower_partner[arc], lower_bar[arc])
            };
            bars_touched.push(bar);
            n_jumps += 1;
            // Direction reverses at every jump.
            going_up = !going_up;
            arc = next as usize;
            if arc == start && going_up {
                break;
            }
        }
        debug_assert_eq!(lift.rem_euclid(circ as i64), 0, "lift must close modulo the circle");
        let winding = (lift / circ as i64) as i32;
        support.sort_unstable();
        support.dedup();
        bars_touched.sort_unstable();
        bars_touched.dedup();
        loops.push(Loop {
            id,
            segments,
            site_support: support,
            winding,
            n_jumps,
            bars: bars_touched,
            extent_ticks: extent,
        });
    }

    // Walk order and union-find component order agree because both scan
    // arcs in increasing id; sanity-check in debug builds.
    #[cfg(debug_assertions)]
    for arc in 0..n_arcs {
        let root = uf.find(arc as u32);
        assert_eq!(arc_loop[arc], arc_loop[root as usize]);
    }
    let _ = &mut uf;

    let set = LoopSet {
        loops,
        n_sites,
        circumference: circ,
        incident,
        offsets,
        arc_loop,
    };

    // Structural invariants that hold for every admissible configuration.
    let total: u64 = set.loops.iter().map(|l| l.extent_ticks).sum();
    debug_assert_eq!(total, n_sites as u64 * circ as u64);
    debug_assert!(set.total_loops() >= 1);
    debug_assert!(set.total_loops() <= n_sites + config.n_bars());

    Ok(set)
}

/// Number of loops of a configuration.
pub fn loop_count(
    geometry: &ChainGeometry,
    grid: &TimeGrid,
    config: &BarConfiguration,
) -> Result<usize> {
    Ok(trace_loops(geometry, grid, config)?.total_loops())
}

/// Change in loop count caused by inserting `new_bar`: `+1` when the two
/// endpoints of the bar lie on the same loop of `config`, `-1` otherwise.
pub fn delta_loops(
    geometry: &ChainGeometry,
    grid: &TimeGrid,
    config: &BarConfiguration,
    new_bar: Bar,
) -> Result<i32> {
    if new_bar.tick == 0 || new_bar.tick >= grid.circumference() {
        return Err(Error::InvalidParameter(format!(
            "bar tick {} not a usable slot",
            new_bar.tick
        )));
    }
    if new_bar.edge as usize >= geometry.n_edges() {
        return Err(Error::InvalidParameter(format!("edge {} out of range", new_bar.edge)));
    }
    if config.bars().iter().any(|b| b.tick == new_bar.tick) {
        return Err(Error::SlotCollision { slot: grid.slot_label(new_bar.tick) });
    }
    let set = trace_loops(geometry, grid, config)?;
    let x = new_bar.edge as usize;
    let same = set.loop_at_point(x, new_bar.tick) == set.loop_at_point(x + 1, new_bar.tick);
    Ok(if same { 1 } else { -1 })
}

/// Whether the time-0 points of sites `x` and `y` (physical labels) lie on
/// the same loop.
pub fn connected(
    geometry: &ChainGeometry,
    grid: &TimeGrid,
    config: &BarConfiguration,
    x: i32,
    y: i32,
) -> Result<bool> {
    let ix = geometry
        .site_index(x)
        .ok_or_else(|| Error::InvalidParameter(format!("site {x} not on chain")))?;
    let iy = geometry
        .site_index(y)
        .ok_or_else(|| Error::InvalidParameter(format!("site {y} not on chain")))?;
    Ok(trace_loops(geometry, grid, config)?.connected_at_zero(ix, iy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::BarConfiguration as Cfg;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn setup(ell: u32, beta: u32, n: u32) -> (ChainGeometry, TimeGrid) {
        (ChainGeometry::new(ell).unwrap(), TimeGrid::new(beta, n).unwrap())
    }

    #[test]
    fn empty_config_gives_one_winding_circle_per_site() {
        for ell in [1u32, 3] {
            let (g, grid) = setup(ell, 1, 4);
            let set = trace_loops(&g, &grid, &Cfg::empty()).unwrap();
            assert_eq!(set.total_loops(), 2 * ell as usize);
            for lp in &set.loops {
                assert_eq!(lp.winding.abs(), 1);
                assert_eq!(lp.site_support.len(), 1);
                assert_eq!(lp.extent_ticks, grid.circumference() as u64);
            }
        }
    }

    #[test]
    fn single_bar_merges_two_circles() {
        let (g, grid) = setup(1, 1, 4);
        let cfg = Cfg::from_labels(&g, &grid, &[(0, 2)]).unwrap();
        let set = trace_loops(&g, &grid, &cfg).unwrap();
        assert_eq!(set.total_loops(), 1);
        let lp = &set.loops[0];
        assert_eq!(lp.site_support, vec![0, 1]);
        // The single bar is traversed twice; the two wraps cancel.
        assert_eq!(lp.n_jumps, 2);
        assert_eq!(lp.n_bars(), 1);
        assert_eq!(lp.winding, 0);
    }

    #[test]
    fn two_bars_on_one_edge_make_two_short_loops() {
        let (g, grid) = setup(1, 1, 4);
        let cfg = Cfg::from_labels(&g, &grid, &[(0, 1), (0, 3)]).unwrap();
        let set = trace_loops(&g, &grid, &cfg).unwrap();
        assert_eq!(set.total_loops(), 2);
        for lp in &set.loops {
            assert_eq!(lp.site_support.len(), 2);
            assert_eq!(lp.winding, 0);
            assert!(lp.is_short());
        }
    }

    #[test]
    fn m_bars_on_single_edge_give_m_loops() {
        let (g, grid) = setup(1, 1, 8);
        for m in 1..=6 {
            let pairs: Vec<(i32, i32)> = (1..=m).map(|k| (0, k)).collect();
            let cfg = Cfg::from_labels(&g, &grid, &pairs).unwrap();
            assert_eq!(loop_count(&g, &grid, &cfg).unwrap(), m as usize);
        }
    }

    #[test]
    fn one_bar_on_longer_chain() {
        let (g, grid) = setup(3, 1, 4);
        assert_eq!(loop_count(&g, &grid, &Cfg::empty()).unwrap(), 6);
        let cfg = Cfg::from_labels(&g, &grid, &[(0, 2)]).unwrap();
        assert_eq!(loop_count(&g, &grid, &cfg).unwrap(), 5);
    }

    #[test]
    fn dimer_pattern_connectivity() {
        // One bar per class-1 edge: class-1 bonds are connected at time 0,
        // class-2 bonds are not.
        let (g, grid) = setup(2, 1, 8);
        let cfg = Cfg::from_labels(&g, &grid, &[(-1, 1), (1, 2)]).unwrap();
        let set = trace_loops(&g, &grid, &cfg).unwrap();
        assert_eq!(set.total_loops(), 2);
        assert!(set.connected_at_zero(0, 1));
        assert!(!set.connected_at_zero(1, 2));
        assert!(set.connected_at_zero(2, 3));
    }

    #[test]
    fn five_bar_contour_decomposition() {
        // Hand-traced: a 5-bar configuration on the 4-site chain splits into
        // one long loop (all four sites, 5 bars, 6 jumps, no winding) plus
        // two short rungs.
        let (g, grid) = setup(2, 1, 8);
        let cfg =
            Cfg::from_labels(&g, &grid, &[(-1, -6), (0, -4), (1, -2), (1, 3), (-1, 5)]).unwrap();
        let set = trace_loops(&g, &grid, &cfg).unwrap();
        assert_eq!(set.total_loops(), 3);
        let long: Vec<&Loop> = set.loops.iter().filter(|l| !l.is_short()).collect();
        assert_eq!(long.len(), 1);
        let lp = long[0];
        assert_eq!(lp.site_support, vec![0, 1, 2, 3]);
        assert_eq!(lp.n_bars(), 5);
        assert_eq!(lp.n_jumps, 6);
        assert_eq!(lp.winding, 0);
        assert_eq!(lp.extent_ticks, 44);
        // time-0 connectivity: the long loop passes through sites -1 and 0
        // at time 0, the rung through sites 1 and 2.
        assert!(set.connected_at_zero(0, 1));
        assert!(!set.connected_at_zero(1, 2));
        assert!(set.connected_at_zero(2, 3));
    }

    #[test]
    fn delta_loops_examples() {
        let (g, grid) = setup(2, 1, 8);
        // Inserting into the empty configuration always merges two circles.
        for e in 0..g.n_edges() as u32 {
            let d = delta_loops(&g, &grid, &Cfg::empty(), Bar { edge: e, tick: 3 }).unwrap();
            assert_eq!(d, -1);
        }
        // A second bar on the same edge closes a rung.
        let cfg = Cfg::from_labels(&g, &grid, &[(-1, 2)]).unwrap();
        let d = delta_loops(&g, &grid, &cfg, Bar { edge: 0, tick: 5 }).unwrap();
        assert_eq!(d, 1);
        // Occupied slots are rejected.
        let err = delta_loops(&g, &grid, &cfg, Bar { edge: 1, tick: 2 }).unwrap_err();
        assert!(matches!(err, Error::SlotCollision { .. }));
    }

    fn random_config(g: &ChainGeometry, grid: &TimeGrid, p: f64, rng: &mut ChaCha8Rng) -> Cfg {
        let mut bars = Vec::new();
        for tick in 1..grid.circumference() {
            if rng.gen::<f64>() < p {
                let edge = rng.gen_range(0..g.n_edges()) as u32;
                bars.push(Bar { edge, tick });
            }
        }
        Cfg::from_bars(grid, bars)
    }

    #[test]
    fn randomized_delta_matches_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..1000 {
            let ell = 1 + trial % 3;
            let (g, grid) = setup(ell as u32, 1, 4);
            let cfg = random_config(&g, &grid, 0.4, &mut rng);
            let l0 = loop_count(&g, &grid, &cfg).unwrap();
            // pick a random free slot
            let free: Vec<u32> = (1..grid.circumference())
                .filter(|t| !cfg.bars().iter().any(|b| b.tick == *t))
                .collect();
            if free.is_empty() {
                continue;
            }
            let tick = free[rng.gen_range(0..free.len())];
            let edge = rng.gen_range(0..g.n_edges()) as u32;
            let bar = Bar { edge, tick };
            let d = delta_loops(&g, &grid, &cfg, bar).unwrap();
            let mut bars = cfg.bars().to_vec();
            bars.push(bar);
            let l1 = loop_count(&g, &grid, &Cfg::from_bars(&grid, bars)).unwrap();
            assert_eq!(l1 as i64 - l0 as i64, d as i64);
            assert_eq!(d.abs(), 1);
        }
    }

    #[test]
    fn randomized_structural_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..300 {
            let ell = 1 + trial % 4;
            let beta = 1 + trial % 2;
            let (g, grid) = setup(ell as u32, beta as u32, 4);
            let cfg = random_config(&g, &grid, 0.5, &mut rng);
            let set = trace_loops(&g, &grid, &cfg).unwrap();
            let l = set.total_loops();
            assert!(l >= 1 && l <= g.n_sites() + cfg.n_bars());
            let extent: u64 = set.loops.iter().map(|l| l.extent_ticks).sum();
            assert_eq!(extent, g.n_sites() as u64 * grid.circumference() as u64);
            for lp in &set.loops {
                assert!(lp.n_jumps % 2 == 0);
                assert!(!lp.site_support.is_empty());
            }
        }
    }

    #[test]
    fn connected_is_reflexive_and_respects_bars() {
        let (g, grid) = setup(2, 1, 8);
        let cfg = Cfg::from_labels(&g, &grid, &[(0, 4)]).unwrap();
        for x in -1..=2 {
            assert!(connected(&g, &grid, &cfg, x, x).unwrap());
        }
        assert!(connected(&g, &grid, &cfg, 0, 1).unwrap());
        assert!(!connected(&g, &grid, &cfg, -1, 0).unwrap());
    }

    #[test]
    fn dump_csv_schema() {
        let (g, grid) = setup(1, 1, 4);
        let cfg = Cfg::from_labels(&g, &grid, &[(0, 2)]).unwrap();
        let set = trace_loops(&g, &grid, &cfg).unwrap();
        let csv = set.dump_csv(&g);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "id,winding,n_bars,site_min,site_max,vertical_extent"
        );
        assert_eq!(lines.next().unwrap(), "0,0,1,0,1,16");
    }
}
