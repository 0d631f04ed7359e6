//! Exact enumeration of the configuration space for desk-scale instances.
//!
//! Enumeration walks slot by slot: each usable time slot either stays empty
//! or carries one bar on one edge (the global one-bar-per-slot rule makes
//! slots, not edges, the natural axis). Loop counts are maintained with a
//! rollback union-find over arcs; the weight of a leaf is
//! `(1/n)^m * q^(L - m)` with `m` bars and `L` loops.
//!
//! The walk is always partitioned into depth-2 prefixes whose partial sums
//! are combined in a fixed order, so results are bit-identical for any
//! worker count.

use crate::chain::{Bar, BarConfiguration, ChainGeometry, SpinWeight, TimeGrid};
use crate::contours;
use crate::error::{Error, Result};
use crate::stats::Kahan;

/// An event whose exact probability the enumerator can accumulate.
#[derive(Debug, Clone, PartialEq)]
pub enum EnumEvent {
    /// Time-0 points of sites `x` and `y` lie on the same loop.
    ConnectedAtZero { x: i32, y: i32 },
    /// The configuration has no bars.
    Empty,
    /// Every class-1 edge has a bar in the window `[alpha, alpha+1]` and no
    /// class-2 edge does.
    DimerWindow { alpha: i32 },
    /// Joint event: `DimerWindow(alpha)` and `(x, 0)` on or inside a long
    /// loop. Conditioning on the window keeps the surround event
    /// well-defined (no winding loops).
    WindowAndSurrounded { alpha: i32, x: i32 },
}

/// Exact partition function and event probabilities.
#[derive(Debug, Clone)]
pub struct ExactResult {
    pub z: f64,
    pub n_configs: u64,
    /// Probabilities aligned with the requested event list.
    pub event_probabilities: Vec<f64>,
}

const DEFAULT_BUDGET: f64 = 1e8;

/// Default cap on `(n_edges + 1)^n_slots`, the number of weighted states.
pub fn default_budget() -> f64 {
    DEFAULT_BUDGET
}

struct Rollback {
    parent: Vec<u32>,
    size: Vec<u32>,
    undo: Vec<u32>,
}

impl Rollback {
    fn with_capacity(cap: usize) -> Self {
        Rollback {
            parent: Vec::with_capacity(cap),
            size: Vec::with_capacity(cap),
            undo: Vec::with_capacity(cap),
        }
    }

    fn new_node(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.size.push(1);
        id
    }

    fn find(&self, mut i: u32) -> u32 {
        // No path compression: keeps unions reversible.
        while self.parent[i as usize] != i {
            i = self.parent[i as usize];
        }
        i
    }

    /// Returns true if the two nodes were in distinct components.
    fn union(&mut self, a: u32, b: u32) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        let (child, parent) = if self.size[ra as usize] < self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[child as usize] = parent;
        self.size[parent as usize] += self.size[child as usize];
        self.undo.push(child);
        true
    }

    fn rollback_unions(&mut self, undo_len: usize) {
        while self.undo.len() > undo_len {
            let child = self.undo.pop().unwrap();
            let parent = self.parent[child as usize];
            self.parent[child as usize] = child;
            self.size[parent as usize] -= self.size[child as usize];
        }
    }

    fn truncate_nodes(&mut self, len: usize) {
        self.parent.truncate(len);
        self.size.truncate(len);
    }
}

struct Walker<'a> {
    n_edges: usize,
    n_slots: u32,
    /// q^l for l in 0..=n_sites+n_slots.
    pow_q: Vec<f64>,
    /// (1/(q n))^m for m in 0..=n_slots.
    pow_inv_qn: Vec<f64>,
    uf: Rollback,
    fronts: Vec<u32>,
    comps: usize,
    bars: Vec<Bar>,
    z: Kahan,
    n_configs: u64,
    conn_pairs: &'a [(usize, usize)],
    conn_accs: Vec<Kahan>,
    predicates: &'a [Predicate<'a>],
    pred_accs: Vec<Kahan>,
}

type Predicate<'a> = Box<dyn Fn(&[Bar]) -> bool + Sync + 'a>;

impl<'a> Walker<'a> {
    fn new(
        geometry: &ChainGeometry,
        grid: &TimeGrid,
        q: u32,
        conn_pairs: &'a [(usize, usize)],
        predicates: &'a [Predicate<'a>],
    ) -> Self {
        let n_sites = geometry.n_sites();
        let n_slots = grid.n_slots();
        let max_l = n_sites + n_slots as usize;
        let qf = q as f64;
        let mut pow_q = Vec::with_capacity(max_l + 1);
        let mut acc = 1.0;
        for _ in 0..=max_l {
            pow_q.push(acc);
            acc *= qf;
        }
        let mut pow_inv_qn = Vec::with_capacity(n_slots as usize + 1);
        let step = 1.0 / (qf * grid.n() as f64);
        let mut acc = 1.0;
        for _ in 0..=n_slots {
            pow_inv_qn.push(acc);
            acc *= step;
        }
        let mut uf = Rollback::with_capacity(n_sites + 2 * n_slots as usize + 4);
        let mut fronts = Vec::with_capacity(n_sites);
        for _ in 0..n_sites {
            fronts.push(uf.new_node());
        }
        Walker {
            n_edges: geometry.n_edges(),
            n_slots,
            pow_q,
            pow_inv_qn,
            uf,
            fronts,
            comps: n_sites,
            bars: Vec::with_capacity(n_slots as usize),
            z: Kahan::default(),
            n_configs: 0,
            conn_pairs,
            conn_accs: vec![Kahan::default(); conn_pairs.len()],
            predicates,
            pred_accs: vec![Kahan::default(); predicates.len()],
        }
    }

    /// Applies one slot choice: 0 = empty, e+1 = bar on edge e. Returns the
    /// state needed to undo it.
    fn apply(&mut self, slot: u32, choice: usize) -> (usize, usize, usize, u32, u32) {
        let undo_len = self.uf.undo.len();
        let node_len = self.uf.parent.len();
        let comps = self.comps;
        if choice == 0 {
            return (undo_len, node_len, comps, 0, 0);
        }
        let e = choice - 1;
        let (fx, fy) = (self.fronts[e], self.fronts[e + 1]);
        if self.uf.union(fx, fy) {
            self.comps -= 1;
        }
        let ax = self.uf.new_node();
        let ay = self.uf.new_node();
        self.comps += 2;
        self.uf.union(ax, ay);
        self.comps -= 1;
        self.fronts[e] = ax;
        self.fronts[e + 1] = ay;
        self.bars.push(Bar { edge: e as u32, tick: slot + 1 });
        (undo_len, node_len, comps, fx, fy)
    }

    fn revert(&mut self, choice: usize, saved: (usize, usize, usize, u32, u32)) {
        let (undo_len, node_len, comps, fx, fy) = saved;
        if choice == 0 {
            return;
        }
        let e = choice - 1;
        self.bars.pop();
        self.fronts[e] = fx;
        self.fronts[e + 1] = fy;
        self.uf.rollback_unions(undo_len);
        self.uf.truncate_nodes(node_len);
        self.comps = comps;
    }

    fn leaf(&mut self) {
        // Close the time circle: the front arc of each site is the same arc
        // as its bottom arc (sites are numbered before any other node).
        let undo_len = self.uf.undo.len();
        let mut merges = 0usize;
        for s in 0..self.fronts.len() {
            if self.uf.union(self.fronts[s], s as u32) {
                merges += 1;
            }
        }
        let n_loops = self.comps - merges;
        let weight = self.pow_q[n_loops] * self.pow_inv_qn[self.bars.len()];
        self.z.add(weight);
        self.n_configs += 1;
        for (i, &(x, y)) in self.conn_pairs.iter().enumerate() {
            if self.uf.find(x as u32) == self.uf.find(y as u32) {
                self.conn_accs[i].add(weight);
            }
        }
        for (i, pred) in self.predicates.iter().enumerate() {
            if pred(&self.bars) {
                self.pred_accs[i].add(weight);
            }
        }
        self.uf.rollback_unions(undo_len);
    }

    fn recurse(&mut self, slot: u32) {
        if slot == self.n_slots {
            self.leaf();
            return;
        }
        for choice in 0..=self.n_edges {
            let saved = self.apply(slot, choice);
            self.recurse(slot + 1);
            self.revert(choice, saved);
        }
    }
}

#[derive(Clone)]
struct Partial {
    z: Kahan,
    n_configs: u64,
    conn: Vec<Kahan>,
    pred: Vec<Kahan>,
}

/// Enumerates the whole configuration space, returning the exact partition
/// function and the probabilities of the requested events.
pub fn enumerate_events(
    geometry: &ChainGeometry,
    grid: &TimeGrid,
    spin: SpinWeight,
    events: &[EnumEvent],
    budget: f64,
    workers: usize,
) -> Result<ExactResult> {
    let n_slots = grid.n_slots();
    let states = ((geometry.n_edges() + 1) as f64).powi(n_slots as i32);
    if states > budget {
        return Err(Error::TooLargeInstance { states, budget });
    }

    // Split events into fast connectivity queries and per-config predicates.
    let mut conn_pairs: Vec<(usize, usize)> = Vec::new();
    let mut predicates: Vec<Predicate<'_>> = Vec::new();
    // For each event: (true, idx) = conn pair idx, (false, idx) = predicate idx.
    let mut routing: Vec<(bool, usize)> = Vec::new();
    for ev in events {
        match ev {
            EnumEvent::ConnectedAtZero { x, y } => {
                let ix = geometry
                    .site_index(*x)
                    .ok_or_else(|| Error::InvalidParameter(format!("site {x} not on chain")))?;
                let iy = geometry
                    .site_index(*y)
                    .ok_or_else(|| Error::InvalidParameter(format!("site {y} not on chain")))?;
                routing.push((true, conn_pairs.len()));
                conn_pairs.push((ix, iy));
            }
            EnumEvent::Empty => {
                routing.push((false, predicates.len()));
                predicates.push(Box::new(|bars: &[Bar]| bars.is_empty()));
            }
            EnumEvent::DimerWindow { alpha } => {
                let alpha = *alpha;
                contours::check_window_alpha(grid, alpha)?;
                let g = geometry.clone();
                let gr = *grid;
                routing.push((false, predicates.len()));
                predicates.push(Box::new(move |bars: &[Bar]| {
                    let cfg = BarConfiguration::from_bars(&gr, bars.to_vec());
                    contours::has_dimer_layer(&g, &gr, &cfg, alpha).unwrap_or(false)
                }));
            }
            EnumEvent::WindowAndSurrounded { alpha, x } => {
                let alpha = *alpha;
                let x = *x;
                contours::check_window_alpha(grid, alpha)?;
                geometry
                    .site_index(x)
                    .ok_or_else(|| Error::InvalidParameter(format!("site {x} not on chain")))?;
                let g = geometry.clone();
                let gr = *grid;
                routing.push((false, predicates.len()));
                predicates.push(Box::new(move |bars: &[Bar]| {
                    let cfg = BarConfiguration::from_bars(&gr, bars.to_vec());
                    if !contours::has_dimer_layer(&g, &gr, &cfg, alpha).unwrap_or(false) {
                        return false;
                    }
                    let set = crate::loops::trace_loops(&g, &gr, &cfg).expect("admissible");
                    contours::surround_event(&g, &set, x).expect("window excludes winding")
                }));
            }
        }
    }

    // Depth-2 prefix partition (depth 1 when there is a single slot).
    let depth = n_slots.min(2);
    let branches = geometry.n_edges() + 1;
    let n_prefixes: usize = branches.pow(depth);
    let q = spin.q();

    let run_prefix = |prefix: usize| -> Partial {
        let mut w = Walker::new(geometry, grid, q, &conn_pairs, &predicates);
        let mut saves = Vec::new();
        let mut choices = Vec::new();
        let mut rem = prefix;
        for d in 0..depth {
            let choice = rem % branches;
            rem /= branches;
            saves.push(w.apply(d, choice));
            choices.push(choice);
        }
        w.recurse(depth);
        for d in (0..depth as usize).rev() {
            w.revert(choices[d], saves[d]);
        }
        Partial { z: w.z, n_configs: w.n_configs, conn: w.conn_accs, pred: w.pred_accs }
    };

    let partials: Vec<Partial> = if workers <= 1 || n_prefixes == 1 {
        (0..n_prefixes).map(run_prefix).collect()
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots: Vec<std::sync::Mutex<Option<Partial>>> =
            (0..n_prefixes).map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers.min(n_prefixes) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= n_prefixes {
                        break;
                    }
                    *slots[i].lock().unwrap() = Some(run_prefix(i));
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().unwrap().expect("worker filled slot"))
            .collect()
    };

    // Combine in prefix order: bit-identical for every worker count.
    let mut z = Kahan::default();
    let mut n_configs = 0u64;
    let mut conn = vec![Kahan::default(); conn_pairs.len()];
    let mut pred = vec![Kahan::default(); predicates.len()];
    for p in &partials {
        z.merge(&p.z);
        n_configs += p.n_configs;
        for (acc, part) in conn.iter_mut().zip(&p.conn) {
            acc.merge(part);
        }
        for (acc, part) in pred.iter_mut().zip(&p.pred) {
            acc.merge(part);
        }
    }

    let z_val = z.value();
    let event_probabilities = routing
        .iter()
        .map(|&(is_conn, idx)| {
            let num = if is_conn { conn[idx].value() } else { pred[idx].value() };
            num / z_val
        })
        .collect();

    Ok(ExactResult { z: z_val, n_configs, event_probabilities })
}

/// Exact partition function only.
pub fn enumerate_z(
    geometry: &ChainGeometry,
    grid: &TimeGrid,
    spin: SpinWeight,
    budget: f64,
    workers: usize,
) -> Result<ExactResult> {
    enumerate_events(geometry, grid, spin, &[], budget, workers)
}

/// Exact probability of a single event.
pub fn exact_probability(
    geometry: &ChainGeometry,
    grid: &TimeGrid,
    spin: SpinWeight,
    event: EnumEvent,
    budget: f64,
    workers: usize,
) -> Result<f64> {
    let res = enumerate_events(geometry, grid, spin, &[event], budget, workers)?;
    Ok(res.event_probabilities[0])
}

/// Closed form of the partition function for the two-site chain:
/// `q^2 - 1 + (1 + 1/n)^(2*beta*n - 1)`. With `m >= 1` bars on the single
/// edge the configuration has exactly `m` loops, so all bar weights are
/// `1/n` and the sum over bar counts is binomial.
pub fn two_site_z_closed_form(q: u32, beta: u32, n: u32) -> f64 {
    let m = (2 * beta * n - 1) as i32;
    let qf = q as f64;
    qf * qf - 1.0 + (1.0 + 1.0 / n as f64).powi(m)
}
