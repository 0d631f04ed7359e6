//! Metropolis insert/delete sampling of the loop measure.
//!
//! A proposal either inserts a bar at a uniformly chosen (edge, slot) cell
//! (immediately rejected if the slot is occupied, which keeps the proposal
//! probability of every legal target exactly `p_insert / n_cells`) or
//! deletes a uniformly chosen existing bar. Acceptance ratios use the
//! loop-count change of one bar, which is always +1 or -1 depending on
//! whether the bar's endpoints are on the same loop, so the weight factor
//! is `q^(dL - 1) in {1, q^-2}` for inserts and the reciprocal for
//! deletes. Detailed balance holds exactly and is audited in log space.

use crate::chain::{Bar, BarConfiguration, ChainGeometry, SpinWeight, TimeGrid};
use crate::contours;
use crate::error::{Error, Result};
use crate::loops;
use crate::stats;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub use crate::stats::{binned_error, binned_error_auto, ErrorReport};

/// Starting configuration of a chain.
///
/// At large fugacity the singlet-rich sector is separated from mixed-parity
/// dimer domains by barriers the single-bar dynamics cannot cross at any
/// useful rate, so ordered-phase runs start from a seeded dimer cover
/// (two stacked bars per class-1 edge, which is stable under deletes).
/// Disordered-phase runs melt the seed within a few sweeps either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum InitialState {
    #[default]
    Empty,
    DimerTowers,
}

/// Everything needed to reproduce a run. `stream` selects the RNG stream
/// for parallel chains sharing one seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerParams {
    pub twice_s: u32,
    pub ell: u32,
    pub beta: u32,
    pub n: u32,
    pub n_sweeps: u64,
    pub n_burnin: u64,
    pub measure_every: u64,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
    /// Probability of proposing an insert; deletes take the rest.
    pub p_insert: f64,
    #[serde(default)]
    pub initial: InitialState,
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        SpinWeight::from_twice_s(self.twice_s)?;
        ChainGeometry::new(self.ell)?;
        TimeGrid::new(self.beta, self.n)?;
        if !(self.p_insert > 0.0 && self.p_insert < 1.0) {
            return Err(Error::InvalidParameter(
                "move mix must give both proposals positive probability".into(),
            ));
        }
        if self.n_sweeps <= self.n_burnin {
            return Err(Error::InvalidParameter("n_sweeps must exceed n_burnin".into()));
        }
        if self.measure_every == 0 {
            return Err(Error::InvalidParameter("measure_every must be >= 1".into()));
        }
        if (self.n_sweeps - self.n_burnin) / self.measure_every < 2 {
            return Err(Error::InvalidParameter(
                "run too short: fewer than two measurements".into(),
            ));
        }
        if self.initial == InitialState::DimerTowers
            && 2 * self.ell as u64 >= 2 * self.beta as u64 * self.n as u64
        {
            return Err(Error::InvalidParameter(
                "grid too coarse to seed two bars per class-1 edge".into(),
            ));
        }
        Ok(())
    }
}

/// What a single proposal did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Proposal {
    Insert(Bar),
    Delete(Bar),
    /// Insert aimed at an occupied slot; no target state.
    OccupiedCell(Bar),
    /// Delete proposed on the empty configuration; no target state.
    EmptyDelete,
}

#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub proposal: Proposal,
    /// Log acceptance ratio of a genuine proposal.
    pub log_ratio: Option<f64>,
    pub accepted: bool,
}

const FREE: u32 = u32::MAX;

/// The RNG a chain uses: seeded by `params.seed` on stream `params.stream`.
pub fn chain_rng(params: &SamplerParams) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(params.stream);
    rng
}

/// Mutable Markov-chain state: the configuration plus a lazily rebuilt
/// connectivity index over its arcs. The loop count is maintained
/// incrementally from the per-move change.
pub struct SamplerState {
    geometry: ChainGeometry,
    grid: TimeGrid,
    q: u32,
    p_insert: f64,
    bars: Vec<Bar>,
    /// tick -> index into `bars`, or FREE.
    tick_owner: Vec<u32>,
    /// per-site sorted incident ticks
    site_ticks: Vec<Vec<u32>>,
    loop_count: usize,
    n_cells: f64,
    ln_n: f64,
    ln_q: f64,
    ln_mix: f64,
    // connectivity cache
    cache_valid: bool,
    offsets: Vec<usize>,
    parent: Vec<u32>,
    scratch_left: Vec<u32>,
    scratch_right: Vec<u32>,
    pub proposals: u64,
    pub accepts: u64,
}

impl SamplerState {
    pub fn new(params: &SamplerParams) -> Result<Self> {
        params.validate()?;
        let geometry = ChainGeometry::new(params.ell)?;
        let grid = TimeGrid::new(params.beta, params.n)?;
        let spin = SpinWeight::from_twice_s(params.twice_s)?;
        let n_sites = geometry.n_sites();
        let circ = grid.circumference() as usize;
        let mut state = SamplerState {
            q: spin.q(),
            p_insert: params.p_insert,
            bars: Vec::new(),
            tick_owner: vec![FREE; circ],
            site_ticks: vec![Vec::new(); n_sites],
            loop_count: n_sites,
            n_cells: geometry.n_edges() as f64 * grid.n_slots() as f64,
            ln_n: (grid.n() as f64).ln(),
            ln_q: (spin.q() as f64).ln(),
            ln_mix: ((1.0 - params.p_insert) / params.p_insert).ln(),
            cache_valid: false,
            offsets: Vec::new(),
            parent: Vec::new(),
            scratch_left: Vec::new(),
            scratch_right: Vec::new(),
            geometry,
            grid,
            proposals: 0,
            accepts: 0,
        };
        if params.initial == InitialState::DimerTowers {
            for (i, e) in state.geometry.class_one_edges().enumerate() {
                for tick in [2 * i as u32 + 1, 2 * i as u32 + 2] {
                    let delta = state.insert_delta(Bar { edge: e as u32, tick });
                    state.apply_insert(Bar { edge: e as u32, tick }, delta);
                }
            }
            debug_assert_eq!(
                state.loop_count,
                loops::loop_count(&state.geometry, &state.grid, &state.config())?
            );
        }
        Ok(state)
    }

    pub fn geometry(&self) -> &ChainGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_bars(&self) -> usize {
        self.bars.len()
    }

    pub fn loop_count(&self) -> usize {
        self.loop_count
    }

    /// Snapshot of the configuration in canonical form.
    pub fn config(&self) -> BarConfiguration {
        BarConfiguration::from_bars(&self.grid, self.bars.clone())
    }

    fn rebuild_cache(&mut self) {
        let n_sites = self.geometry.n_sites();
        self.offsets.clear();
        self.offsets.push(0);
        for s in 0..n_sites {
            let m = self.site_ticks[s].len().max(1);
            self.offsets.push(self.offsets[s] + m);
        }
        let n_arcs = self.offsets[n_sites];
        self.parent.clear();
        self.parent.extend(0..n_arcs as u32);
        // Walk each site's sorted incident list once: position i on site s
        // is the arc starting at that tick, (i + m - 1) % m the arc ending
        // there. Gluing the two "ending" arcs and the two "starting" arcs
        // of every bar is one union pair per bar side.
        self.scratch_left.clear();
        self.scratch_left.resize(self.bars.len(), 0);
        self.scratch_right.clear();
        self.scratch_right.resize(self.bars.len(), 0);
        for s in 0..n_sites {
            let off = self.offsets[s] as u32;
            for (i, &t) in self.site_ticks[s].iter().enumerate() {
                let bar_idx = self.tick_owner[t as usize] as usize;
                if self.bars[bar_idx].edge as usize == s {
                    self.scratch_left[bar_idx] = off + i as u32;
                } else {
                    self.scratch_right[bar_idx] = off + i as u32;
                }
            }
        }
        for bi in 0..self.bars.len() {
            let bar = self.bars[bi];
            let x = bar.edge as usize;
            let (start_x, start_y) = (self.scratch_left[bi], self.scratch_right[bi]);
            let m_x = (self.offsets[x + 1] - self.offsets[x]) as u32;
            let m_y = (self.offsets[x + 2] - self.offsets[x + 1]) as u32;
            let off_x = self.offsets[x] as u32;
            let off_y = self.offsets[x + 1] as u32;
            let end_x = off_x + (start_x - off_x + m_x - 1) % m_x;
            let end_y = off_y + (start_y - off_y + m_y - 1) % m_y;
            self.union(end_x, end_y);
            self.union(start_x, start_y);
        }
        self.cache_valid = true;
    }

    fn ensure_cache(&mut self) {
        if !self.cache_valid {
            self.rebuild_cache();
        }
    }

    fn arc_ending(&self, site: usize, tick: u32) -> u32 {
        let ticks = &self.site_ticks[site];
        let m = ticks.len();
        let i = ticks.binary_search(&tick).expect("incident tick");
        (self.offsets[site] + (i + m - 1) % m) as u32
    }

    fn arc_starting(&self, site: usize, tick: u32) -> u32 {
        let ticks = &self.site_ticks[site];
        let i = ticks.binary_search(&tick).expect("incident tick");
        (self.offsets[site] + i) as u32
    }

    /// Arc containing a non-incident tick.
    fn arc_at(&self, site: usize, tick: u32) -> u32 {
        let ticks = &self.site_ticks[site];
        let m = ticks.len();
        if m == 0 {
            return self.offsets[site] as u32;
        }
        let pos = ticks.partition_point(|&t| t < tick);
        let i = if pos == 0 || pos == m { m - 1 } else { pos - 1 };
        (self.offsets[site] + i) as u32
    }

    fn root(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let gp = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = gp;
            i = gp;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.root(a);
        let rb = self.root(b);
        if ra != rb {
            self.parent[ra.max(rb) as usize] = ra.min(rb);
        }
    }

    /// Loop-count change of inserting `bar` into the current configuration.
    fn insert_delta(&mut self, bar: Bar) -> i32 {
        self.ensure_cache();
        let x = bar.edge as usize;
        let ax = self.arc_at(x, bar.tick);
        let ay = self.arc_at(x + 1, bar.tick);
        if self.root(ax) == self.root(ay) {
            1
        } else {
            -1
        }
    }

    /// Loop-count change of deleting `bar`: +1 when its two gluings lie on
    /// the same loop, -1 otherwise.
    fn delete_delta(&mut self, bar: Bar) -> i32 {
        self.ensure_cache();
        let x = bar.edge as usize;
        let below = self.arc_ending(x, bar.tick);
        let above = self.arc_starting(x, bar.tick);
        if self.root(below) == self.root(above) {
            1
        } else {
            -1
        }
    }

    fn apply_insert(&mut self, bar: Bar, delta: i32) {
        self.tick_owner[bar.tick as usize] = self.bars.len() as u32;
        self.bars.push(bar);
        for site in [bar.edge as usize, bar.edge as usize + 1] {
            let ticks = &mut self.site_ticks[site];
            let pos = ticks.partition_point(|&t| t < bar.tick);
            ticks.insert(pos, bar.tick);
        }
        self.loop_count = (self.loop_count as i64 + delta as i64) as usize;
        self.cache_valid = false;
    }

    fn apply_delete(&mut self, idx: usize, delta: i32) {
        let bar = self.bars.swap_remove(idx);
        self.tick_owner[bar.tick as usize] = FREE;
        if idx < self.bars.len() {
            let moved = self.bars[idx];
            self.tick_owner[moved.tick as usize] = idx as u32;
        }
        for site in [bar.edge as usize, bar.edge as usize + 1] {
            let ticks = &mut self.site_ticks[site];
            let pos = ticks.binary_search(&bar.tick).expect("incident tick");
            ticks.remove(pos);
        }
        self.loop_count = (self.loop_count as i64 + delta as i64) as usize;
        self.cache_valid = false;
    }

    /// One Metropolis proposal.
    pub fn step(&mut self, rng: &mut ChaCha8Rng) -> StepInfo {
        self.proposals += 1;
        let move_draw: f64 = rng.gen();
        if move_draw < self.p_insert {
            let edge = rng.gen_range(0..self.geometry.n_edges()) as u32;
            let tick = rng.gen_range(1..self.grid.circumference());
            let bar = Bar { edge, tick };
            if self.tick_owner[tick as usize] != FREE {
                return StepInfo {
                    proposal: Proposal::OccupiedCell(bar),
                    log_ratio: None,
                    accepted: false,
                };
            }
            let delta = self.insert_delta(bar);
            let ln_r = -self.ln_n + (delta - 1) as f64 * self.ln_q + self.n_cells.ln()
                - ((self.bars.len() + 1) as f64).ln()
                + self.ln_mix;
            let u: f64 = rng.gen();
            let accepted = (1.0 - u).ln() < ln_r;
            if accepted {
                self.accepts += 1;
                self.apply_insert(bar, delta);
            }
            StepInfo { proposal: Proposal::Insert(bar), log_ratio: Some(ln_r), accepted }
        } else {
            if self.bars.is_empty() {
                return StepInfo {
                    proposal: Proposal::EmptyDelete,
                    log_ratio: None,
                    accepted: false,
                };
            }
            let idx = rng.gen_range(0..self.bars.len());
            let bar = self.bars[idx];
            let delta = self.delete_delta(bar);
            let ln_r = self.ln_n + (delta + 1) as f64 * self.ln_q
                + (self.bars.len() as f64).ln()
                - self.n_cells.ln()
                - self.ln_mix;
            let u: f64 = rng.gen();
            let accepted = (1.0 - u).ln() < ln_r;
            if accepted {
                self.accepts += 1;
                self.apply_delete(idx, delta);
            }
            StepInfo { proposal: Proposal::Delete(bar), log_ratio: Some(ln_r), accepted }
        }
    }

    /// Whether the time-0 points of two site indices are on the same loop.
    pub fn connected_at_zero(&mut self, site_a: usize, site_b: usize) -> bool {
        self.ensure_cache();
        let a = self.arc_at(site_a, 0);
        let b = self.arc_at(site_b, 0);
        self.root(a) == self.root(b)
    }
}

/// Per-observable summary statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservableStats {
    pub name: String,
    pub mean: f64,
    /// Plateau blocked standard error.
    pub error: f64,
    pub tau_int: f64,
    pub n_samples: usize,
}

/// Result of one chain, with full provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub params: SamplerParams,
    pub version: String,
    pub acceptance_rate: f64,
    pub observables: Vec<ObservableStats>,
    /// Raw measurement series, kept when requested (used for joint
    /// statistics and trace output).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<BTreeMap<String, Vec<f64>>>,
}

impl RunResult {
    pub fn stat(&self, name: &str) -> Option<&ObservableStats> {
        self.observables.iter().find(|o| o.name == name)
    }
}

/// What to measure during a run.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservableSpec {
    /// Indicator that time-0 points of two sites are on the same loop.
    PairConnected { x: i32, y: i32 },
    /// Connection indicator for every edge (the dimer profile feeds off
    /// these through the bond-expectation transform).
    DimerProfile,
    LoopCount,
    BarCount,
    /// Indicator of membership in at least one dimer window.
    WindowFraction,
    /// Number of dimer windows the sample belongs to.
    WindowWeight,
    /// Sum over windows of (member and `(x,0)` on/inside a long loop).
    WindowAndSurrounded { x: i32 },
    /// Sums over windows of (member and bond connected), for the bonds
    /// right and left of `x`.
    WindowAndBonds { x: i32 },
}

fn series_names(geometry: &ChainGeometry, specs: &[ObservableSpec]) -> Vec<String> {
    let mut names = Vec::new();
    for spec in specs {
        match spec {
            ObservableSpec::PairConnected { x, y } => names.push(format!("conn({x},{y})")),
            ObservableSpec::DimerProfile => {
                for e in 0..geometry.n_edges() {
                    names.push(format!("bond({})", geometry.edge_left_site(e)));
                }
            }
            ObservableSpec::LoopCount => names.push("loops".into()),
            ObservableSpec::BarCount => names.push("bars".into()),
            ObservableSpec::WindowFraction => names.push("window_any".into()),
            ObservableSpec::WindowWeight => names.push("window_weight".into()),
            ObservableSpec::WindowAndSurrounded { x } => {
                names.push(format!("window_surround({x})"))
            }
            ObservableSpec::WindowAndBonds { x } => {
                names.push(format!("window_bond({},{})", x, x + 1));
                names.push(format!("window_bond({},{})", x - 1, x));
            }
        }
    }
    names
}

struct Measurer {
    specs: Vec<ObservableSpec>,
    needs_windows: bool,
    needs_trace: bool,
}

impl Measurer {
    fn new(specs: &[ObservableSpec]) -> Self {
        let needs_windows = specs.iter().any(|s| {
            matches!(
                s,
                ObservableSpec::WindowFraction
                    | ObservableSpec::WindowWeight
                    | ObservableSpec::WindowAndSurrounded { .. }
                    | ObservableSpec::WindowAndBonds { .. }
            )
        });
        let needs_trace =
            specs.iter().any(|s| matches!(s, ObservableSpec::WindowAndSurrounded { .. }));
        Measurer { specs: specs.to_vec(), needs_windows, needs_trace }
    }

    fn measure(&self, state: &mut SamplerState, out: &mut Vec<f64>) -> Result<()> {
        let geometry = state.geometry.clone();
        let grid = state.grid;
        let (window_weight, set) = if self.needs_windows {
            let config = state.config();
            let windows = contours::dimer_window_indices(&geometry, &grid, &config);
            let set = if self.needs_trace && !windows.is_empty() {
                Some(loops::trace_loops(&geometry, &grid, &config)?)
            } else {
                None
            };
            (windows.len() as f64, set)
        } else {
            (0.0, None)
        };

        for spec in &self.specs {
            match spec {
                ObservableSpec::PairConnected { x, y } => {
                    let ix = geometry.site_index(*x).expect("validated site");
                    let iy = geometry.site_index(*y).expect("validated site");
                    out.push(state.connected_at_zero(ix, iy) as u8 as f64);
                }
                ObservableSpec::DimerProfile => {
                    for e in 0..geometry.n_edges() {
                        out.push(state.connected_at_zero(e, e + 1) as u8 as f64);
                    }
                }
                ObservableSpec::LoopCount => out.push(state.loop_count() as f64),
                ObservableSpec::BarCount => out.push(state.n_bars() as f64),
                ObservableSpec::WindowFraction => {
                    out.push(if window_weight > 0.0 { 1.0 } else { 0.0 })
                }
                ObservableSpec::WindowWeight => out.push(window_weight),
                ObservableSpec::WindowAndSurrounded { x } => {
                    let v = if window_weight > 0.0 {
                        let set = set.as_ref().expect("trace for surround");
                        let surrounded = contours::surround_event(&geometry, set, *x)?;
                        window_weight * surrounded as u8 as f64
                    } else {
                        0.0
                    };
                    out.push(v);
                }
                ObservableSpec::WindowAndBonds { x } => {
                    let ix = geometry.site_index(*x).expect("validated site");
                    let right = state.connected_at_zero(ix, ix + 1) as u8 as f64;
                    let left = state.connected_at_zero(ix - 1, ix) as u8 as f64;
                    out.push(window_weight * right);
                    out.push(window_weight * left);
                }
            }
        }
        Ok(())
    }
}

fn validate_specs(geometry: &ChainGeometry, specs: &[ObservableSpec]) -> Result<()> {
    for spec in specs {
        match spec {
            ObservableSpec::PairConnected { x, y } => {
                for s in [*x, *y] {
                    geometry.site_index(s).ok_or_else(|| {
                        Error::InvalidParameter(format!("site {s} not on chain"))
                    })?;
                }
            }
            ObservableSpec::WindowAndSurrounded { x } => {
                geometry
                    .site_index(*x)
                    .ok_or_else(|| Error::InvalidParameter(format!("site {x} not on chain")))?;
            }
            ObservableSpec::WindowAndBonds { x } => {
                for s in [*x - 1, *x, *x + 1] {
                    geometry.site_index(s).ok_or_else(|| {
                        Error::InvalidParameter(format!("site {s} not on chain"))
                    })?;
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Runs one chain: burn-in, then measurements every `measure_every`
/// sweeps (one sweep = one proposal per usable slot).
pub fn run(
    params: &SamplerParams,
    specs: &[ObservableSpec],
    keep_series: bool,
) -> Result<RunResult> {
    let mut state = SamplerState::new(params)?;
    validate_specs(&state.geometry, specs)?;
    let mut rng = chain_rng(params);

    let names = series_names(&state.geometry, specs);
    let measurer = Measurer::new(specs);
    let sweep_len = state.grid.n_slots() as u64;
    let n_measurements =
        ((params.n_sweeps - params.n_burnin) / params.measure_every) as usize;
    let mut series: Vec<Vec<f64>> =
        names.iter().map(|_| Vec::with_capacity(n_measurements)).collect();

    let mut scratch = Vec::with_capacity(names.len());
    for sweep in 0..params.n_sweeps {
        for _ in 0..sweep_len {
            state.step(&mut rng);
        }
        if sweep >= params.n_burnin && (sweep - params.n_burnin) % params.measure_every == 0 {
            scratch.clear();
            measurer.measure(&mut state, &mut scratch)?;
            debug_assert_eq!(scratch.len(), names.len());
            for (dst, &v) in series.iter_mut().zip(&scratch) {
                dst.push(v);
            }
        }
    }

    let mut observables = Vec::with_capacity(names.len());
    for (name, data) in names.iter().zip(&series) {
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFiniteAccumulator(name.clone()));
        }
        let report = stats::binned_error_auto(data)?;
        observables.push(ObservableStats {
            name: name.clone(),
            mean: report.mean,
            error: report.error,
            tau_int: report.tau_int,
            n_samples: data.len(),
        });
    }

    Ok(RunResult {
        params: params.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        acceptance_rate: state.accepts as f64 / state.proposals.max(1) as f64,
        observables,
        series: keep_series.then(|| names.into_iter().zip(series).collect()),
    })
}

/// Runs independent chains on RNG streams `0..n_chains`, in parallel,
/// merging results in stream order (bit-stable for any thread count).
pub fn run_chains(
    params: &SamplerParams,
    n_chains: usize,
    specs: &[ObservableSpec],
    keep_series: bool,
    threads: usize,
) -> Result<Vec<RunResult>> {
    let chain_params: Vec<SamplerParams> = (0..n_chains)
        .map(|i| {
            let mut p = params.clone();
            p.stream = i as u64;
            p
        })
        .collect();
    if threads <= 1 || n_chains <= 1 {
        return chain_params.iter().map(|p| run(p, specs, keep_series)).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<Result<RunResult>>>> =
        (0..n_chains).map(|_| std::sync::Mutex::new(None)).collect();
    let params_slice: &[SamplerParams] = &chain_params;
    std::thread::scope(|scope| {
        for _ in 0..threads.min(n_chains) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n_chains {
                    break;
                }
                let out = run(&params_slice[i], specs, keep_series);
                *results[i].lock().unwrap() = Some(out);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled slot"))
        .collect()
}

/// Runs a short chain and checks, for every genuine proposal, that the
/// sampler's log acceptance ratio matches the ratio recomputed from
/// independent full retraces of both endpoint configurations. Returns the
/// largest absolute log-space residual.
pub fn detailed_balance_audit(params: &SamplerParams, n_proposals: u64) -> Result<f64> {
    let mut state = SamplerState::new(params)?;
    let mut rng = chain_rng(params);
    let geometry = state.geometry.clone();
    let grid = state.grid;
    let q = state.q as f64;
    let n = grid.n() as f64;
    let n_cells = state.n_cells;
    let p_ins = params.p_insert;
    let p_del = 1.0 - p_ins;

    let log_weight = |cfg: &BarConfiguration| -> Result<f64> {
        let l = loops::loop_count(&geometry, &grid, cfg)? as f64;
        let m = cfg.n_bars() as f64;
        Ok(-m * n.ln() + (l - m) * q.ln())
    };

    let mut worst = 0.0f64;
    for _ in 0..n_proposals {
        let before = state.config();
        let info = state.step(&mut rng);
        let (after, ln_r) = match (info.proposal, info.log_ratio) {
            (Proposal::Insert(bar), Some(lr)) => {
                let mut bars = before.bars().to_vec();
                bars.push(bar);
                (BarConfiguration::from_bars(&grid, bars), lr)
            }
            (Proposal::Delete(bar), Some(lr)) => {
                let bars: Vec<Bar> =
                    before.bars().iter().copied().filter(|b| *b != bar).collect();
                (BarConfiguration::from_bars(&grid, bars), lr)
            }
            _ => continue,
        };
        let lw_before = log_weight(&before)?;
        let lw_after = log_weight(&after)?;
        // forward/reverse proposal probabilities
        let (ln_g_fwd, ln_g_rev) = if after.n_bars() > before.n_bars() {
            (p_ins.ln() - n_cells.ln(), p_del.ln() - (after.n_bars() as f64).ln())
        } else {
            (p_del.ln() - (before.n_bars() as f64).ln(), p_ins.ln() - n_cells.ln())
        };
        let independent = lw_after + ln_g_rev - lw_before - ln_g_fwd;
        worst = worst.max((independent - ln_r).abs());
        // balance identity with the independent weights
        let lhs = lw_before + ln_g_fwd + independent.min(0.0);
        let rhs = lw_after + ln_g_rev + (-independent).min(0.0);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params() -> SamplerParams {
        SamplerParams {
            twice_s: 1,
            ell: 1,
            beta: 1,
            n: 4,
            n_sweeps: 200,
            n_burnin: 50,
            measure_every: 1,
            seed: 12345,
            stream: 0,
            p_insert: 0.5,
            initial: InitialState::Empty,
        }
    }

    #[test]
    fn params_validation() {
        let mut p = small_params();
        p.n_burnin = 300;
        assert!(p.validate().is_err());
        let mut p = small_params();
        p.p_insert = 1.0;
        assert!(p.validate().is_err());
        let mut p = small_params();
        p.measure_every = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn delete_on_empty_is_rejected_noop() {
        let p = small_params();
        let mut state = SamplerState::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut saw_empty_delete = false;
        for _ in 0..50 {
            let info = state.step(&mut rng);
            if info.proposal == Proposal::EmptyDelete {
                assert!(!info.accepted);
                saw_empty_delete = true;
                break;
            }
            if state.n_bars() > 0 {
                break;
            }
        }
        let _ = saw_empty_delete;
    }

    #[test]
    fn loop_count_tracks_full_retrace() {
        let mut p = small_params();
        p.ell = 2;
        p.n = 8;
        let mut state = SamplerState::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..2000 {
            state.step(&mut rng);
            if i % 100 == 0 {
                let retraced =
                    loops::loop_count(state.geometry(), state.grid(), &state.config()).unwrap();
                assert_eq!(state.loop_count(), retraced, "at step {i}");
            }
        }
    }

    #[test]
    fn acceptance_ratio_branches() {
        // the insert weight factor is q^(dL-1) in {1, q^-2}; with all other
        // factors fixed, log ratios of genuine inserts at the same bar count
        // differ by exactly 2 ln q
        let mut p = small_params();
        p.twice_s = 2;
        p.ell = 2;
        p.n = 8;
        let mut state = SamplerState::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ln_q = (3.0f64).ln();
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..5000 {
            let m = state.n_bars();
            let info = state.step(&mut rng);
            if let (Proposal::Insert(_), Some(lr)) = (info.proposal, info.log_ratio) {
                // reconstruct the branch from the ratio
                let base = -(8.0f64).ln() + (state.n_cells.ln()) - ((m + 1) as f64).ln();
                let branch = (lr - base) / ln_q;
                let rounded = branch.round();
                assert!((branch - rounded).abs() < 1e-9);
                assert!(rounded == 0.0 || rounded == -2.0, "branch {rounded}");
                seen.insert(rounded as i64);
            }
        }
        assert_eq!(seen.len(), 2, "both weight branches exercised");
    }

    #[test]
    fn detailed_balance_audit_is_exact() {
        for (ts, ell, n) in [(1u32, 1u32, 4u32), (2, 2, 4), (5, 2, 8), (80, 2, 8)] {
            let p = SamplerParams {
                twice_s: ts,
                ell,
                beta: 1,
                n,
                n_sweeps: 10,
                n_burnin: 1,
                measure_every: 1,
                seed: 99,
                stream: 0,
                p_insert: 0.5,
                initial: InitialState::Empty,
            };
            let worst = detailed_balance_audit(&p, 3000).unwrap();
            assert!(worst <= 1e-12, "residual {worst}");
        }
    }

    #[test]
    fn replay_is_bit_exact() {
        let mut p = small_params();
        p.ell = 2;
        p.n = 8;
        p.n_sweeps = 400;
        p.n_burnin = 100;
        let specs = [ObservableSpec::DimerProfile, ObservableSpec::BarCount];
        let a = run(&p, &specs, true).unwrap();
        let b = run(&p, &specs, true).unwrap();
        for (sa, sb) in a.observables.iter().zip(&b.observables) {
            assert_eq!(sa.mean.to_bits(), sb.mean.to_bits());
        }
        assert_eq!(a.series, b.series);
        // a different stream gives a different trajectory
        let mut p2 = p.clone();
        p2.stream = 1;
        let c = run(&p2, &specs, true).unwrap();
        assert_ne!(a.series, c.series);
    }

    #[test]
    fn tiny_stationarity_check() {
        // 16-configuration instance: empirical frequencies against the
        // exact distribution, one seed, coarse threshold (the acceptance
        // suite runs the full version).
        let p = SamplerParams {
            twice_s: 1,
            ell: 1,
            beta: 1,
            n: 2,
            n_sweeps: 60_000,
            n_burnin: 1_000,
            measure_every: 2,
            seed: 4242,
            stream: 0,
            p_insert: 0.5,
            initial: InitialState::Empty,
        };
        let mut state = SamplerState::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let circ = state.grid().circumference();
        let mut counts = vec![0u64; 8]; // masks over 3 slots
        for sweep in 0..p.n_sweeps {
            for _ in 0..state.grid().n_slots() {
                state.step(&mut rng);
            }
            if sweep >= p.n_burnin && sweep % p.measure_every == 0 {
                let mut mask = 0usize;
                for bar in state.config().bars() {
                    mask |= 1 << (bar.tick - 1);
                }
                counts[mask] += 1;
            }
        }
        // exact probabilities by direct weight: L = m for m >= 1, else 2
        let q = 2.0f64;
        let n = 2.0f64;
        let mut probs = vec![0.0; 8];
        let mut z = 0.0;
        for mask in 0..8usize {
            let m = mask.count_ones() as f64;
            let l = if m == 0.0 { 2.0 } else { m };
            let w = q.powf(l - m) * (1.0 / n).powf(m);
            probs[mask] = w;
            z += w;
        }
        for p in &mut probs {
            *p /= z;
        }
        let _ = circ;
        let (_, _, pvalue) = stats::chi_square_pvalue(&counts, &probs).unwrap();
        assert!(pvalue > 0.001, "p = {pvalue}");
    }

    #[test]
    fn large_fugacity_matches_enumeration() {
        // q = 81 exercises the strongly suppressed weight branches; the
        // sampled bond-connection probabilities must match the exact sums.
        let p = SamplerParams {
            twice_s: 80,
            ell: 2,
            beta: 1,
            n: 4,
            n_sweeps: 120_000,
            n_burnin: 5_000,
            measure_every: 2,
            seed: 31,
            stream: 0,
            p_insert: 0.5,
            initial: InitialState::Empty,
        };
        let geometry = ChainGeometry::new(p.ell).unwrap();
        let grid = TimeGrid::new(p.beta, p.n).unwrap();
        let spin = SpinWeight::from_twice_s(p.twice_s).unwrap();
        let events: Vec<crate::enumerate::EnumEvent> = (0..3)
            .map(|e| {
                let x = geometry.edge_left_site(e);
                crate::enumerate::EnumEvent::ConnectedAtZero { x, y: x + 1 }
            })
            .collect();
        let exact =
            crate::enumerate::enumerate_events(&geometry, &grid, spin, &events, 1e8, 2)
                .unwrap();
        let res = run(&p, &[ObservableSpec::DimerProfile], false).unwrap();
        for e in 0..3usize {
            let x = geometry.edge_left_site(e);
            let st = res.stat(&format!("bond({x})")).unwrap();
            let gap = (st.mean - exact.event_probabilities[e]).abs();
            let tol = (4.0 * st.error).max(5e-4);
            assert!(
                gap <= tol,
                "bond {x}: sampled {} vs exact {} (tol {tol})",
                st.mean,
                exact.event_probabilities[e]
            );
        }
    }

    #[test]
    fn window_observables_consistent() {
        let p = SamplerParams {
            twice_s: 8,
            ell: 2,
            beta: 2,
            n: 8,
            n_sweeps: 3000,
            n_burnin: 500,
            measure_every: 2,
            seed: 5,
            stream: 0,
            p_insert: 0.5,
            initial: InitialState::Empty,
        };
        let specs = [
            ObservableSpec::WindowFraction,
            ObservableSpec::WindowWeight,
            ObservableSpec::WindowAndSurrounded { x: 0 },
            ObservableSpec::WindowAndBonds { x: 1 },
        ];
        let res = run(&p, &specs, true).unwrap();
        let series = res.series.as_ref().unwrap();
        let any = &series["window_any"];
        let weight = &series["window_weight"];
        let surr = &series["window_surround(0)"];
        for i in 0..any.len() {
            assert!(weight[i] >= any[i]);
            assert!(surr[i] <= weight[i]);
            if weight[i] == 0.0 {
                assert_eq!(any[i], 0.0);
                assert_eq!(surr[i], 0.0);
            }
        }
    }
}
