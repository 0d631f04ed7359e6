//! Chain geometry, discrete time circle, and bar configurations.
//!
//! The chain has `2*ell` sites labelled `-ell+1 ..= ell` and `2*ell - 1`
//! nearest-neighbour edges. Edges alternate between two classes: class-1
//! edges are those whose left site is odd relative to the chain start
//! (both boundary edges are class 1), class-2 edges are the rest. Time
//! lives on a discrete circle of circumference `2*beta` with resolution
//! `1/n`; the lattice point at time 0 never carries a bar.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Spin magnitude stored as `2S`, together with the loop fugacity `q = 2S + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinWeight {
    twice_s: u32,
}

impl SpinWeight {
    pub fn from_twice_s(twice_s: u32) -> Result<Self> {
        if twice_s == 0 {
            return Err(Error::InvalidParameter(
                "twice_S must be a positive integer".into(),
            ));
        }
        Ok(SpinWeight { twice_s })
    }

    pub fn twice_s(&self) -> u32 {
        self.twice_s
    }

    /// Loop fugacity q = 2S + 1.
    pub fn q(&self) -> u32 {
        self.twice_s + 1
    }

    pub fn s(&self) -> f64 {
        self.twice_s as f64 / 2.0
    }
}

/// Edge class along the alternating chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeClass {
    /// Preferentially dimerized edges; both boundary edges are class 1.
    One,
    Two,
}

/// The finite chain: sites `-ell+1 ..= ell`, edges between nearest neighbours.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainGeometry {
    ell: u32,
}

impl ChainGeometry {
    pub fn new(ell: u32) -> Result<Self> {
        if ell == 0 {
            return Err(Error::InvalidParameter("ell must be >= 1".into()));
        }
        Ok(ChainGeometry { ell })
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn n_sites(&self) -> usize {
        2 * self.ell as usize
    }

    pub fn n_edges(&self) -> usize {
        2 * self.ell as usize - 1
    }

    /// Physical label of site index `i` (0-based, left to right).
    pub fn site_label(&self, i: usize) -> i32 {
        i as i32 - self.ell as i32 + 1
    }

    /// Site index of a physical label, if it is on the chain.
    pub fn site_index(&self, x: i32) -> Option<usize> {
        let i = x + self.ell as i32 - 1;
        if i >= 0 && (i as usize) < self.n_sites() {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Physical label of the left site of edge `e` (0-based, left to right).
    pub fn edge_left_site(&self, e: usize) -> i32 {
        self.site_label(e)
    }

    /// Edge index of the edge `{x, x+1}`, if it is on the chain.
    pub fn edge_index(&self, left_site: i32) -> Option<usize> {
        let e = left_site + self.ell as i32 - 1;
        if e >= 0 && (e as usize) < self.n_edges() {
            Some(e as usize)
        } else {
            None
        }
    }

    /// Class of edge `e`. Edges alternate starting from class 1 at the left
    /// boundary, so there are `ell` class-1 edges and `ell - 1` class-2 edges.
    pub fn edge_class(&self, e: usize) -> EdgeClass {
        if e % 2 == 0 {
            EdgeClass::One
        } else {
            EdgeClass::Two
        }
    }

    pub fn class_one_edges(&self) -> impl Iterator<Item = usize> {
        (0..self.n_edges()).step_by(2)
    }

    pub fn class_two_edges(&self) -> impl Iterator<Item = usize> {
        (1..self.n_edges()).step_by(2)
    }
}

/// The discrete time circle `[-beta, beta]` with `-beta` and `beta`
/// identified, at resolution `1/n`.
///
/// Lattice points are indexed by "ticks" `u in 0..2*beta*n` in circular
/// order, with tick 0 the (always bar-free) time-0 point. Usable bar slots
/// are ticks `1 ..= 2*beta*n - 1`, i.e. the `2*beta*n - 1` lattice times
/// excluding 0. The physical slot label of tick `u` is `u` for
/// `u <= beta*n` and `u - 2*beta*n` otherwise; label `beta*n` is the
/// identified endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    beta: u32,
    n: u32,
}

impl TimeGrid {
    pub fn new(beta: u32, n: u32) -> Result<Self> {
        if beta == 0 {
            return Err(Error::InvalidParameter(
                "beta must be a positive integer".into(),
            ));
        }
        if n == 0 {
            return Err(Error::InvalidParameter(
                "n must be a positive integer".into(),
            ));
        }
        Ok(TimeGrid { beta, n })
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Number of lattice points on the circle, `2*beta*n`.
    pub fn circumference(&self) -> u32 {
        2 * self.beta * self.n
    }

    /// Number of usable bar slots, `2*beta*n - 1` (time 0 excluded).
    pub fn n_slots(&self) -> u32 {
        self.circumference() - 1
    }

    /// Physical slot label of a tick: `-beta*n + 1 ..= beta*n`, never 0.
    pub fn slot_label(&self, tick: u32) -> i32 {
        let half = (self.beta * self.n) as i32;
        let u = tick as i32;
        if u <= half {
            u
        } else {
            u - 2 * half
        }
    }

    /// Tick of a physical slot label, if valid (nonzero and in range).
    pub fn tick_of_label(&self, label: i32) -> Option<u32> {
        let half = (self.beta * self.n) as i32;
        if label == 0 || label < -half + 1 || label > half {
            return None;
        }
        let u = if label > 0 { label } else { label + 2 * half };
        Some(u as u32)
    }
}

/// A double bar at (edge, slot).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Bar {
    /// Edge index, 0-based from the left end of the chain.
    pub edge: u32,
    /// Tick on the time circle; never 0.
    pub tick: u32,
}

/// One admissibility violation found by [`validate_config`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ZeroTimeBar { edge: u32 },
    SlotCollision { tick: u32, edges: Vec<u32> },
    UnknownEdge { edge: u32, tick: u32 },
    SlotOutOfRange { edge: u32, tick: u32 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::ZeroTimeBar { edge } => write!(f, "bar at time 0 on edge {edge}"),
            Violation::SlotCollision { tick, edges } => {
                write!(f, "slot tick {tick} carries {} bars (edges {:?})", edges.len(), edges)
            }
            Violation::UnknownEdge { edge, tick } => {
                write!(f, "bar on nonexistent edge {edge} at tick {tick}")
            }
            Violation::SlotOutOfRange { edge, tick } => {
                write!(f, "bar on edge {edge} at out-of-range tick {tick}")
            }
        }
    }
}

/// Outcome of validating a configuration against a geometry and grid.
#[derive(Debug, Clone, Default)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A finite set of double bars on the chain's space-time lattice.
///
/// Bars are kept canonically sorted by (physical slot label, edge), so
/// equality and text serialization are stable.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BarConfiguration {
    bars: Vec<Bar>,
}

impl BarConfiguration {
    pub fn empty() -> Self {
        BarConfiguration { bars: Vec::new() }
    }

    /// Builds a configuration from bars, sorting canonically. Admissibility
    /// is not checked here; use [`validate_config`].
    pub fn from_bars(grid: &TimeGrid, mut bars: Vec<Bar>) -> Self {
        bars.sort_by_key(|b| (grid.slot_label(b.tick), b.edge));
        bars.dedup();
        BarConfiguration { bars }
    }

    /// Builds a configuration from (left site label, slot label) pairs.
    pub fn from_labels(
        geometry: &ChainGeometry,
        grid: &TimeGrid,
        pairs: &[(i32, i32)],
    ) -> Result<Self> {
        let mut bars = Vec::with_capacity(pairs.len());
        for &(left, slot) in pairs {
            let edge = geometry
                .edge_index(left)
                .ok_or_else(|| Error::InvalidParameter(format!("no edge with left site {left}")))?;
            let tick = grid
                .tick_of_label(slot)
                .ok_or_else(|| Error::InvalidParameter(format!("invalid slot {slot}")))?;
            bars.push(Bar { edge: edge as u32, tick });
        }
        Ok(Self::from_bars(grid, bars))
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn n_bars(&self) -> usize {
        self.bars.len()
    }

    /// Serializes as text lines `edge_left_site,slot`, canonically sorted.
    pub fn to_text(&self, geometry: &ChainGeometry, grid: &TimeGrid) -> String {
        let mut out = String::new();
        for bar in &self.bars {
            out.push_str(&format!(
                "{},{}\n",
                geometry.edge_left_site(bar.edge as usize),
                grid.slot_label(bar.tick)
            ));
        }
        out
    }

    /// Parses the text form produced by [`Self::to_text`].
    pub fn from_text(geometry: &ChainGeometry, grid: &TimeGrid, text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected 'site,slot'", lineno + 1)))?;
            let left: i32 = a
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad site '{a}'", lineno + 1)))?;
            let slot: i32 = b
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad slot '{b}'", lineno + 1)))?;
            pairs.push((left, slot));
        }
        Self::from_labels(geometry, grid, &pairs)
    }
}

/// Reports every admissibility violation of `config`: bars at time 0, two
/// bars sharing a slot, bars on nonexistent edges or slots. An empty report
/// means the configuration is admissible.
pub fn validate_config(
    geometry: &ChainGeometry,
    grid: &TimeGrid,
    config: &BarConfiguration,
) -> ValidityReport {
    let mut report = ValidityReport::default();
    let circ = grid.circumference();
    let mut by_tick: std::collections::BTreeMap<u32, Vec<u32>> = std::collections::BTreeMap::new();
    for bar in config.bars() {
        if bar.tick == 0 {
            report.violations.push(Violation::ZeroTimeBar { edge: bar.edge });
            continue;
        }
        if bar.tick >= circ {
            report
                .violations
                .push(Violation::SlotOutOfRange { edge: bar.edge, tick: bar.tick });
            continue;
        }
        if bar.edge as usize >= geometry.n_edges() {
            report
                .violations
                .push(Violation::UnknownEdge { edge: bar.edge, tick: bar.tick });
            continue;
        }
        by_tick.entry(bar.tick).or_default().push(bar.edge);
    }
    for (tick, edges) in by_tick {
        if edges.len() > 1 {
            report.violations.push(Violation::SlotCollision { tick, edges });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_chain() {
        let g = ChainGeometry::new(1).unwrap();
        assert_eq!(g.n_sites(), 2);
        assert_eq!(g.n_edges(), 1);
        assert_eq!(g.site_label(0), 0);
        assert_eq!(g.site_label(1), 1);
        assert_eq!(g.edge_class(0), EdgeClass::One);
    }

    #[test]
    fn ell_four_class_one_edges() {
        let g = ChainGeometry::new(4).unwrap();
        assert_eq!(g.n_sites(), 8);
        assert_eq!(g.n_edges(), 7);
        let e1: Vec<i32> = g.class_one_edges().map(|e| g.edge_left_site(e)).collect();
        assert_eq!(e1, vec![-3, -1, 1, 3]);
    }

    #[test]
    fn class_counts() {
        for ell in 1..=6 {
            let g = ChainGeometry::new(ell).unwrap();
            let n1 = g.class_one_edges().count();
            let n2 = g.class_two_edges().count();
            assert_eq!(n1, ell as usize);
            assert_eq!(n2, ell as usize - 1);
            assert_eq!(n1 - n2, 1);
            // classes alternate along the chain
            for e in 1..g.n_edges() {
                assert_ne!(g.edge_class(e), g.edge_class(e - 1));
            }
        }
        // ell = 2 has exactly one class-2 edge, {-1, 0}... the middle edge {0, 1}
        let g = ChainGeometry::new(2).unwrap();
        let e2: Vec<i32> = g.class_two_edges().map(|e| g.edge_left_site(e)).collect();
        assert_eq!(e2, vec![0]);
    }

    #[test]
    fn invalid_parameters() {
        assert!(ChainGeometry::new(0).is_err());
        assert!(TimeGrid::new(0, 4).is_err());
        assert!(TimeGrid::new(1, 0).is_err());
        assert!(SpinWeight::from_twice_s(0).is_err());
    }

    #[test]
    fn grid_slot_labels() {
        let grid = TimeGrid::new(1, 4).unwrap();
        assert_eq!(grid.circumference(), 8);
        assert_eq!(grid.n_slots(), 7);
        // ticks 1..=4 are slots 1..=4; ticks 5..=7 are slots -3..=-1
        assert_eq!(grid.slot_label(4), 4);
        assert_eq!(grid.slot_label(5), -3);
        assert_eq!(grid.slot_label(7), -1);
        assert_eq!(grid.tick_of_label(0), None);
        assert_eq!(grid.tick_of_label(-4), None); // -beta*n is the same point as beta*n
        assert_eq!(grid.tick_of_label(4), Some(4));
        assert_eq!(grid.tick_of_label(-1), Some(7));
        for tick in 1..grid.circumference() {
            assert_eq!(grid.tick_of_label(grid.slot_label(tick)), Some(tick));
        }
    }

    #[test]
    fn validate_empty_is_valid() {
        let g = ChainGeometry::new(2).unwrap();
        let grid = TimeGrid::new(1, 4).unwrap();
        let report = validate_config(&g, &grid, &BarConfiguration::empty());
        assert!(report.is_valid());
    }

    #[test]
    fn validate_slot_collision() {
        let g = ChainGeometry::new(2).unwrap();
        let grid = TimeGrid::new(1, 4).unwrap();
        let cfg = BarConfiguration::from_bars(
            &grid,
            vec![Bar { edge: 0, tick: 3 }, Bar { edge: 2, tick: 3 }],
        );
        let report = validate_config(&g, &grid, &cfg);
        assert!(!report.is_valid());
        assert!(matches!(report.violations[0], Violation::SlotCollision { tick: 3, .. }));
    }

    #[test]
    fn validate_zero_time_bar() {
        let g = ChainGeometry::new(1).unwrap();
        let grid = TimeGrid::new(1, 4).unwrap();
        let cfg = BarConfiguration { bars: vec![Bar { edge: 0, tick: 0 }] };
        let report = validate_config(&g, &grid, &cfg);
        assert_eq!(report.violations, vec![Violation::ZeroTimeBar { edge: 0 }]);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let g = ChainGeometry::new(2).unwrap();
        let grid = TimeGrid::new(1, 8).unwrap();
        let cfg = BarConfiguration::from_labels(
            &g,
            &grid,
            &[(-1, -6), (0, -4), (1, -2), (1, 3), (-1, 5)],
        )
        .unwrap();
        let text = cfg.to_text(&g, &grid);
        assert_eq!(text, "-1,-6\n0,-4\n1,-2\n1,3\n-1,5\n");
        let back = BarConfiguration::from_text(&g, &grid, &text).unwrap();
        assert_eq!(back, cfg);
    }
}
