//! Command-line front end: reproducible runs with CSV/JSON outputs.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error,
//! 3 runtime error. The only environment variable read is
//! `DIMERLOOP_THREADS` (worker count for parallel chains and enumeration).

mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use config::{parse_config, parse_formats, parse_s_grid, Format, RunConfig};
use dimerloop::chain::{ChainGeometry, SpinWeight, TimeGrid};
use dimerloop::enumerate::EnumEvent;
use dimerloop::sampler::{InitialState, ObservableSpec, SamplerParams};
use dimerloop::{bounds, contours, ed, enumerate, loops, sampler, verify};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dimerloop", version, about = "Loop-model simulator and verifier for singlet-projector spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte Carlo sampling of the loop measure
    Simulate(SimulateArgs),
    /// Exact enumeration of small instances
    Enumerate(EnumerateArgs),
    /// Dense diagonalization tables
    Ed(EdArgs),
    /// Contour census over sampled configurations
    Contours(ContoursArgs),
    /// Closed-form bound tables over a spin grid
    Bounds(BoundsArgs),
    /// Cross-module verification battery
    Verify(VerifyArgs),
}

#[derive(Args, Clone, Default)]
struct ModelArgs {
    /// Configuration file (key = value); explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Twice the spin value (q = twice_S + 1)
    #[arg(long = "twice-s")]
    twice_s: Option<u32>,
    #[arg(long)]
    ell: Option<u32>,
    #[arg(long)]
    beta: Option<u32>,
    /// Time resolution (slots per unit time)
    #[arg(long)]
    n: Option<u32>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats, comma separated (csv, json)
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    burnin: Option<u64>,
    #[arg(long = "measure-every")]
    measure_every: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    /// Initial state: empty or dimer
    #[arg(long)]
    start: Option<String>,
    /// Extra connection pairs to track, e.g. "-5:-3,-5:0"
    #[arg(long)]
    pairs: Option<String>,
    /// Track window-conditioned observables around these sites, e.g. "1,3"
    #[arg(long)]
    surround: Option<String>,
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Budget on (edges+1)^slots weighted states
    #[arg(long)]
    budget: Option<f64>,
    /// Events, e.g. "conn:0:1,empty,window:0,winsurround:0:1"
    #[arg(long)]
    events: Option<String>,
}

#[derive(Args)]
struct EdArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Inverse temperature of the thermal state
    #[arg(long = "beta-q")]
    beta_q: Option<f64>,
    /// Dense dimension budget
    #[arg(long = "dense-budget")]
    dense_budget: Option<usize>,
}

#[derive(Args)]
struct ContoursArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    burnin: Option<u64>,
    #[arg(long = "measure-every")]
    measure_every: Option<u64>,
    #[arg(long)]
    start: Option<String>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Spin grid lo:hi:step
    #[arg(long = "s-grid")]
    s_grid: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Run the acceptance-scale battery (hours instead of minutes)
    #[arg(long, conflicts_with = "smoke")]
    full: bool,
    /// Run only the instant closed-form and identity checks
    #[arg(long)]
    smoke: bool,
}

enum CliError {
    Usage(String),
    Runtime(String),
    VerificationFailed(usize),
}

impl From<dimerloop::Error> for CliError {
    fn from(e: dimerloop::Error) -> Self {
        match e {
            dimerloop::Error::InvalidParameter(_) | dimerloop::Error::Parse(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o: {e}"))
    }
}

fn threads() -> usize {
    std::env::var("DIMERLOOP_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1))
}

fn load_config(path: &Option<PathBuf>, expected_command: &str) -> Result<RunConfig, CliError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse_config(&text).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(cmd) = &cfg.command {
        if cmd != expected_command {
            return Err(CliError::Usage(format!(
                "config file says 'command = {cmd}' but the '{expected_command}' subcommand was invoked"
            )));
        }
    }
    Ok(cfg)
}

struct Model {
    spin: SpinWeight,
    geometry: ChainGeometry,
    grid: TimeGrid,
}

fn resolve_model(args: &ModelArgs, cfg: &RunConfig) -> Result<Model, CliError> {
    let twice_s = args
        .twice_s
        .or(cfg.twice_s)
        .ok_or_else(|| CliError::Usage("twice_S is required".into()))?;
    let ell = args.ell.or(cfg.ell).ok_or_else(|| CliError::Usage("ell is required".into()))?;
    let beta = args.beta.or(cfg.beta).ok_or_else(|| CliError::Usage("beta is required".into()))?;
    let n = args.n.or(cfg.n).ok_or_else(|| CliError::Usage("n is required".into()))?;
    Ok(Model {
        spin: SpinWeight::from_twice_s(twice_s)?,
        geometry: ChainGeometry::new(ell)?,
        grid: TimeGrid::new(beta, n)?,
    })
}

fn resolve_out(args: &ModelArgs, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Usage("an output directory is required (--out)".into()))?;
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn resolve_formats(args: &ModelArgs, cfg: &RunConfig) -> Result<Vec<Format>, CliError> {
    if let Some(f) = &args.format {
        return parse_formats(f).map_err(CliError::Usage);
    }
    Ok(cfg.formats.clone().unwrap_or_else(|| vec![Format::Csv, Format::Json]))
}

fn parse_pair_list(text: &str) -> Result<Vec<(i32, i32)>, CliError> {
    let mut out = Vec::new();
    for item in text.split(',') {
        let parts: Vec<&str> = item.trim().split(':').collect();
        if parts.len() != 2 {
            return Err(CliError::Usage(format!("bad pair '{item}', expected x:y")));
        }
        let x = parts[0].parse().map_err(|_| CliError::Usage(format!("bad site '{}'", parts[0])))?;
        let y = parts[1].parse().map_err(|_| CliError::Usage(format!("bad site '{}'", parts[1])))?;
        out.push((x, y));
    }
    Ok(out)
}

fn parse_events(text: &str) -> Result<Vec<(String, EnumEvent)>, CliError> {
    let mut out = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        let parts: Vec<&str> = item.split(':').collect();
        let parse_i32 = |s: &str| {
            s.parse::<i32>().map_err(|_| CliError::Usage(format!("bad integer '{s}' in event '{item}'")))
        };
        let ev = match parts[0] {
            "conn" if parts.len() == 3 => {
                EnumEvent::ConnectedAtZero { x: parse_i32(parts[1])?, y: parse_i32(parts[2])? }
            }
            "empty" if parts.len() == 1 => EnumEvent::Empty,
            "window" if parts.len() == 2 => EnumEvent::DimerWindow { alpha: parse_i32(parts[1])? },
            "winsurround" if parts.len() == 3 => EnumEvent::WindowAndSurrounded {
                alpha: parse_i32(parts[1])?,
                x: parse_i32(parts[2])?,
            },
            _ => return Err(CliError::Usage(format!("unknown event '{item}'"))),
        };
        out.push((item.to_string(), ev));
    }
    Ok(out)
}

fn resolve_initial(start: &Option<String>, cfg: &RunConfig) -> Result<InitialState, CliError> {
    match start.as_deref().or(cfg.start.as_deref()) {
        None | Some("empty") => Ok(InitialState::Empty),
        Some("dimer") => Ok(InitialState::DimerTowers),
        Some(other) => Err(CliError::Usage(format!("start must be 'empty' or 'dimer' (got '{other}')"))),
    }
}

fn sampler_params(
    model: &Model,
    seed: u64,
    sweeps: u64,
    burnin: u64,
    measure_every: u64,
    initial: InitialState,
) -> SamplerParams {
    SamplerParams {
        twice_s: model.spin.twice_s(),
        ell: model.geometry.ell(),
        beta: model.grid.beta(),
        n: model.grid.n(),
        n_sweeps: sweeps,
        n_burnin: burnin,
        measure_every,
        seed,
        stream: 0,
        p_insert: 0.5,
        initial,
    }
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.model.config, "simulate")?;
    let model = resolve_model(&args.model, &cfg)?;
    let out = resolve_out(&args.model, &cfg)?;
    let formats = resolve_formats(&args.model, &cfg)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(1);
    let sweeps = args.sweeps.or(cfg.sweeps).unwrap_or(20_000);
    let burnin = args.burnin.or(cfg.burnin).unwrap_or(sweeps / 10);
    let measure_every = args.measure_every.or(cfg.measure_every).unwrap_or(5);
    let chains = args.chains.or(cfg.chains).unwrap_or(1);
    let initial = resolve_initial(&args.start, &cfg)?;
    let params = sampler_params(&model, seed, sweeps, burnin, measure_every, initial);
    params.validate()?;

    let mut specs = vec![
        ObservableSpec::DimerProfile,
        ObservableSpec::LoopCount,
        ObservableSpec::BarCount,
        ObservableSpec::WindowFraction,
    ];
    if let Some(pairs) = args.pairs.as_deref().or(cfg.pairs.as_deref()) {
        for (x, y) in parse_pair_list(pairs)? {
            specs.push(ObservableSpec::PairConnected { x, y });
        }
    }
    if let Some(surround) = &args.surround {
        specs.push(ObservableSpec::WindowWeight);
        for site in surround.split(',') {
            let x: i32 = site
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad site '{site}'")))?;
            specs.push(ObservableSpec::WindowAndSurrounded { x });
            specs.push(ObservableSpec::WindowAndBonds { x });
        }
    }

    let results = sampler::run_chains(&params, chains, &specs, true, threads())?;
    output::write_simulate(&out, &formats, &params, chains, &results)?;
    for (i, r) in results.iter().enumerate() {
        eprintln!("chain {i}: acceptance {:.3}", r.acceptance_rate);
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn run_enumerate(args: EnumerateArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.model.config, "enumerate")?;
    let model = resolve_model(&args.model, &cfg)?;
    let out = resolve_out(&args.model, &cfg)?;
    let budget = args.budget.or(cfg.budget).unwrap_or(enumerate::default_budget());
    let named = match args.events.as_deref().or(cfg.events.as_deref()) {
        Some(text) => parse_events(text)?,
        None => Vec::new(),
    };
    let events: Vec<EnumEvent> = named.iter().map(|(_, e)| e.clone()).collect();
    let result = enumerate::enumerate_events(
        &model.geometry,
        &model.grid,
        model.spin,
        &events,
        budget,
        threads(),
    )?;
    output::write_enumerate(&out, &model, budget, &named, &result)?;
    println!(
        "Z = {:.12e} over {} configurations -> {}",
        result.z,
        result.n_configs,
        out.display()
    );
    Ok(())
}

fn run_ed(args: EdArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.model.config, "ed")?;
    let twice_s = args
        .model
        .twice_s
        .or(cfg.twice_s)
        .ok_or_else(|| CliError::Usage("twice_S is required".into()))?;
    let ell = args.model.ell.or(cfg.ell).ok_or_else(|| CliError::Usage("ell is required".into()))?;
    let out = resolve_out(&args.model, &cfg)?;
    let beta_q = args.beta_q.or(cfg.beta_q).unwrap_or(50.0);
    let budget = args.dense_budget.or(cfg.dense_budget).unwrap_or(ed::DEFAULT_DENSE_BUDGET);
    let spin = SpinWeight::from_twice_s(twice_s)?;
    let geometry = ChainGeometry::new(ell)?;

    let h = ed::build_hamiltonian(ell, spin, budget)?;
    let spec = ed::eigendecompose(&h)?;
    let p2 = ed::singlet_projector(spin.q());
    let mut bond_values = Vec::new();
    for e in 0..geometry.n_edges() {
        let p_embed = ed::embed_pair(&p2, spin.q(), geometry.n_sites(), e);
        bond_values.push((geometry.edge_left_site(e), ed::gibbs_expectation_from(&spec, &p_embed, beta_q)));
    }
    let mut correlations = Vec::new();
    for xi in 0..geometry.n_sites() {
        for yi in xi..geometry.n_sites() {
            let x = geometry.site_label(xi);
            let y = geometry.site_label(yi);
            let v = ed::spin_correlation(ell, spin, x, y, 3, 3, beta_q, budget)?;
            correlations.push((x, y, v));
        }
    }
    output::write_ed(&out, twice_s, ell, beta_q, &spec.eigenvalues, &bond_values, &correlations)?;
    println!(
        "ground energy {:.9}, {} bonds, {} correlations -> {}",
        spec.eigenvalues[0],
        bond_values.len(),
        correlations.len(),
        out.display()
    );
    Ok(())
}

fn run_contours(args: ContoursArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.model.config, "contours")?;
    let model = resolve_model(&args.model, &cfg)?;
    let out = resolve_out(&args.model, &cfg)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(1);
    let sweeps = args.sweeps.or(cfg.sweeps).unwrap_or(5_000);
    let burnin = args.burnin.or(cfg.burnin).unwrap_or(sweeps / 10);
    let measure_every = args.measure_every.or(cfg.measure_every).unwrap_or(10);
    let initial = resolve_initial(&args.start, &cfg)?;
    let params = sampler_params(&model, seed, sweeps, burnin, measure_every, initial);
    params.validate()?;

    let mut state = sampler::SamplerState::new(&params)?;
    let mut rng = {
        use dimerloop::sampler::chain_rng;
        chain_rng(&params)
    };
    let origin = model.geometry.site_index(0).expect("site 0 exists");
    let mut rows = Vec::new();
    let mut sample_idx = 0u64;
    for sweep in 0..params.n_sweeps {
        for _ in 0..state.grid().n_slots() {
            state.step(&mut rng);
        }
        if sweep >= params.n_burnin && (sweep - params.n_burnin) % params.measure_every == 0 {
            let config = state.config();
            let set = loops::trace_loops(&model.geometry, &model.grid, &config)?;
            for lp in &set.loops {
                if lp.is_short() || lp.winding != 0 {
                    continue;
                }
                let info = contours::contour_info(&model.geometry, &model.grid, &config, &set, lp.id)?;
                let encloses =
                    contours::interior_contains(&set, lp.id, origin).unwrap_or(false);
                rows.push(output::ContourRow {
                    sample: sample_idx,
                    n_bars: info.n_bars,
                    length: info.length,
                    int1: info.int1_size,
                    int2: info.int2_size,
                    external: info.is_external,
                    encloses_origin: encloses,
                });
            }
            sample_idx += 1;
        }
    }
    output::write_contours(&out, &params, sample_idx, &rows)?;
    println!("{} contours over {} samples -> {}", rows.len(), sample_idx, out.display());
    Ok(())
}

fn run_bounds(args: BoundsArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.model.config, "bounds")?;
    let out = resolve_out(&args.model, &cfg)?;
    let grid = match &args.s_grid {
        Some(text) => parse_s_grid(text).map_err(CliError::Usage)?,
        None => cfg.s_grid.unwrap_or((8.0, 100.0, 0.5)),
    };
    let mut rows = Vec::new();
    let mut s = grid.0;
    while s <= grid.1 + 1e-12 {
        rows.push(bounds::bound_report(s));
        s += grid.2;
    }
    output::write_bounds(&out, grid, &rows)?;
    println!("{} rows -> {}", rows.len(), out.display());
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.model.config, "verify")?;
    let full = args.full || cfg.full.unwrap_or(false);
    let out = if args.model.out.is_some() || cfg.out_dir.is_some() {
        Some(resolve_out(&args.model, &cfg)?)
    } else {
        None
    };
    let workers = threads();

    let mut checks = Vec::new();
    checks.extend(verify::check_operator_identities());
    checks.extend(verify::check_bounds());
    if args.smoke {
        checks.extend(verify::check_loop_laws(500, 11)?);
        checks.extend(verify::check_trotter_identity(2, &[1, 2, 4])?);
    } else {
        checks.extend(verify::check_loop_laws(10_000, 11)?);
        for q in [2u32, 3] {
            checks.extend(verify::check_trotter_identity(q, &[1, 2, 4, 8])?);
        }
        let bridge_ns: &[u32] = if full { &[1, 2, 4, 8] } else { &[1, 2, 4] };
        checks.extend(verify::check_bridge(bridge_ns, 2e9, workers)?);
        let (seeds, sweeps) = if full { (10, 1_200_000) } else { (3, 200_000) };
        checks.extend(verify::check_sampler_exactness(seeds, sweeps, 10, 20_000)?);
        checks.extend(verify::check_correlation_convention(
            if full { 400_000 } else { 120_000 },
            2024,
        )?);
        checks.extend(verify::check_conditional_surround_exact(60_000, 99)?);
        let dimer_scale = if full {
            verify::DimerScale::acceptance()
        } else {
            verify::DimerScale {
                ell: 8,
                sweeps: 20_000,
                burnin: 4_000,
                chains: 2,
                ..verify::DimerScale::acceptance()
            }
        };
        let runs = verify::dimerization_run(&dimer_scale)?;
        checks.extend(verify::check_dimerization(&runs));
        checks.extend(verify::check_decay_fit(&runs, &dimer_scale));
        let window_scale = if full {
            verify::WindowScale::acceptance()
        } else {
            verify::WindowScale {
                sweeps: 15_000,
                burnin: 3_000,
                chains: 2,
                ..verify::WindowScale::acceptance()
            }
        };
        checks.extend(verify::check_window_saturation(&window_scale)?);
    }

    let mut failures = 0usize;
    for c in &checks {
        println!(
            "{} {:<34} measured {:>12.5e} threshold {:>12.5e}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.threshold,
            c.details
        );
        if !c.passed {
            failures += 1;
        }
    }
    println!("{} checks, {} failed", checks.len(), failures);
    if let Some(dir) = out {
        output::write_verify(&dir, full, &checks)?;
        println!("report -> {}", dir.display());
    }
    if failures > 0 {
        return Err(CliError::VerificationFailed(failures));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Simulate(args) => run_simulate(args),
        Cmd::Enumerate(args) => run_enumerate(args),
        Cmd::Ed(args) => run_ed(args),
        Cmd::Contours(args) => run_contours(args),
        Cmd::Bounds(args) => run_bounds(args),
        Cmd::Verify(args) => run_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::VerificationFailed(n)) => {
            eprintln!("verification failed: {n} checks");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
