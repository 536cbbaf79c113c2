use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use blockpd::netflow::{experiment_sweeps, generate_benchmark, PartitionPreset, Scale};
use blockpd::reference::{
    corollary_parameters, default_rho, max_tightening_delta, rate_constants, regularization_error_bounds,
    theorem_bound, CorollaryParameters, Mu0Distance, RateConstants, RegularizationBounds,
};
use blockpd::simulator::{run, write_trace_csv, BoundSummary, RunResult};
use blockpd::{DualGeometry, ProblemConstants, ProblemSpec, SimulationConfig};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::error::{CliError, CliResult, EXIT_BUDGET, EXIT_OK};
use crate::manifest::{read_input, verify, InputRecord, OutputDir};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScaleArg {
    /// 15 paths and 66 edges in 3 groups.
    Full,
    /// 3 paths and 8 edges in one group.
    Small,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Full => Scale::Full,
            ScaleArg::Small => Scale::Small,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PresetArg {
    /// One agent per path and per edge.
    Scalar,
    /// One primal and one dual agent per edge-disjoint group.
    Grouped,
}

impl From<PresetArg> for PartitionPreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Scalar => PartitionPreset::Scalar,
            PresetArg::Grouped => PartitionPreset::Grouped,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Scalar against grouped blocks at a 50% update rate.
    Blocks,
    /// Diagonal-dominance margins 0.10, 0.25, 0.75.
    Beta,
    /// Communication rates 0.25, 0.5, 0.75, 1.0.
    Commrate,
}

impl SweepKind {
    fn experiment(self) -> &'static str {
        match self {
            SweepKind::Blocks => "blocks",
            SweepKind::Beta => "beta",
            SweepKind::Commrate => "commrate",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mu0Arg {
    /// Distance from zero to the oracle dual solution.
    Oracle,
    /// Squared diameter of the dual set.
    Diameter,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem JSON file.
    #[arg(long)]
    pub problem: PathBuf,
    /// Simulation config JSON file; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "BLOCKPD_OUT", default_value = "blockpd-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepKind,
    /// Seed for both the instance and the runs.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "full")]
    pub scale: ScaleArg,
    /// Tick budget per run.
    #[arg(long, default_value_t = 30_000)]
    pub steps: u64,
    /// Successive-distance threshold that defines ticks-to-threshold.
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
    #[arg(long, default_value_t = 100)]
    pub snapshot_every: u64,
    /// Worker threads per run.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Output directory.
    #[arg(long, env = "BLOCKPD_OUT", default_value = "blockpd-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Problem JSON file.
    #[arg(long)]
    pub problem: PathBuf,
    /// Distance target for the primal iterates.
    #[arg(long)]
    pub eps1: f64,
    /// Allowed asynchrony penalty.
    #[arg(long)]
    pub eps2: f64,
    /// Primal stepsize; defaults to half the admissible maximum.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Regularization for the reported rate constants.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "oracle")]
    pub mu0: Mu0Arg,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "full")]
    pub scale: ScaleArg,
    #[arg(long, value_enum, default_value = "scalar")]
    pub preset: PresetArg,
    /// Utility weight W; the diagonal-dominance margin is W / 121.
    #[arg(long)]
    pub weight: Option<f64>,
    /// Output directory.
    #[arg(long, env = "BLOCKPD_OUT", default_value = "blockpd-out")]
    pub out: PathBuf,
}

/// Contents of `bounds.json` for a single run.
#[derive(Debug, Serialize)]
struct RunBounds<'a> {
    rates: &'a RateConstants,
    regularization: RegularizationBounds,
    max_tightening_delta: f64,
    run: Option<&'a BoundSummary>,
}

#[derive(Debug, Serialize)]
struct BoundsReport {
    n: usize,
    m: usize,
    delta: f64,
    gamma: f64,
    rho: f64,
    gamma_max: f64,
    beta: f64,
    dual_bound: f64,
    rates: RateConstants,
    regularization: RegularizationBounds,
    max_tightening_delta: f64,
    corollary: CorollaryParameters,
    round_trip_bound: f64,
    round_trip_ok: bool,
}

fn load_problem(path: &Path) -> CliResult<(ProblemSpec, InputRecord)> {
    let (text, record) = read_input(path)?;
    let p = ProblemSpec::from_json_str(&text).map_err(|e| CliError::from_lib_in(path, e))?;
    Ok((p, record))
}

fn setup(p: &ProblemSpec, delta: f64) -> CliResult<(DualGeometry, ProblemConstants)> {
    let geom = DualGeometry::new(p, delta)?;
    let consts = ProblemConstants::compute(p, &geom)?;
    Ok((geom, consts))
}

fn trace_csv(r: &RunResult) -> CliResult<Vec<u8>> {
    let mut bytes = Vec::new();
    write_trace_csv(&mut bytes, &r.trace)?;
    Ok(bytes)
}

fn to_value<T: Serialize>(v: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| CliError::Manifest(e.to_string()))
}

pub fn solve(args: &SolveArgs) -> CliResult<u8> {
    let start = Instant::now();
    let (p, problem_input) = load_problem(&args.problem)?;
    let mut inputs = vec![problem_input];
    let mut config = match &args.config {
        Some(path) => {
            let (text, record) = read_input(path)?;
            inputs.push(record);
            serde_json::from_str::<SimulationConfig>(&text).map_err(|e| CliError::json(path, &e))?
        }
        None => SimulationConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let (geom, consts) = setup(&p, config.delta)?;
    let result = run(&p, &geom, &consts, &config)?;
    let rates = match &result.rates {
        Some(r) => r.clone(),
        None => rate_constants(&p, &geom, &consts, config.gamma, config.rho)?,
    };

    let mut out = OutputDir::create(&args.out)?;
    out.write("trace.csv", &trace_csv(&result)?)?;
    out.write_json("summary.json", &result.summary)?;
    out.write_json(
        "bounds.json",
        &RunBounds {
            rates: &rates,
            regularization: regularization_error_bounds(&p, &geom, &consts),
            max_tightening_delta: max_tightening_delta(&p, &geom, &consts),
            run: result.summary.bound.as_ref(),
        },
    )?;
    let s = &result.summary;
    let code = if s.converged { EXIT_OK } else { EXIT_BUDGET };
    out.finish("solve", to_value(&config)?, inputs, start, code)?;
    match s.stop_tick {
        Some(t) => println!("converged at tick {t}; outputs in {}", args.out.display()),
        None => println!(
            "tick budget of {} exhausted before convergence; outputs in {}",
            s.ticks,
            args.out.display()
        ),
    }
    Ok(code)
}

fn dir_name(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect()
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn sweep(args: &SweepArgs) -> CliResult<u8> {
    let start = Instant::now();
    let (net, _) = generate_benchmark(args.seed, args.scale.into())?;
    let base = SimulationConfig {
        seed: args.seed,
        steps: args.steps,
        stop_tol: args.threshold,
        snapshot_every: args.snapshot_every,
        workers: args.workers,
        ..SimulationConfig::default()
    };
    let runs: Vec<_> = experiment_sweeps(&net, &base)
        .into_iter()
        .filter(|r| r.experiment == args.kind.experiment())
        .collect();

    let mut out = OutputDir::create(&args.out)?;
    let mut edges = Vec::new();
    net.write_edge_csv(&mut edges)?;
    out.write("network.csv", &edges)?;
    let mut aggregate = String::from(
        "experiment,label,preset,weight,beta,p_update,p_comm,ticks_to_threshold,ticks,converged,final_dist_to_saddle\n",
    );
    let mut all_converged = true;
    for sweep_run in &runs {
        let p = sweep_run.problem(&net)?;
        let (geom, consts) = setup(&p, sweep_run.config.delta)?;
        let result = run(&p, &geom, &consts, &sweep_run.config)?;
        let dir = dir_name(&sweep_run.label);
        out.write(&format!("{dir}/problem.json"), p.to_json_string()?.as_bytes())?;
        out.write(&format!("{dir}/trace.csv"), &trace_csv(&result)?)?;
        out.write_json(&format!("{dir}/summary.json"), &result.summary)?;
        let s = &result.summary;
        all_converged &= s.converged;
        let preset = match sweep_run.preset {
            PartitionPreset::Scalar => "scalar",
            PartitionPreset::Grouped => "grouped",
        };
        let _ = writeln!(
            aggregate,
            "{},{},{preset},{},{},{},{},{},{},{},{}",
            sweep_run.experiment,
            sweep_run.label,
            sweep_run.weight,
            consts.beta,
            sweep_run.config.p_update,
            sweep_run.config.p_comm,
            opt(s.stop_tick),
            s.ticks,
            s.converged,
            opt(s.final_dist_to_saddle),
        );
        match s.stop_tick {
            Some(t) => println!("{}: {t} ticks to threshold", sweep_run.label),
            None => println!("{}: threshold not reached in {} ticks", sweep_run.label, s.ticks),
        }
    }
    out.write("aggregate.csv", aggregate.as_bytes())?;
    let code = if all_converged { EXIT_OK } else { EXIT_BUDGET };
    let config = serde_json::json!({
        "kind": args.kind.experiment(),
        "seed": args.seed,
        "scale": Scale::from(args.scale),
        "threshold": args.threshold,
        "runs": to_value(&runs)?,
    });
    out.finish("sweep", config, Vec::new(), start, code)?;
    Ok(code)
}

pub fn bounds(args: &BoundsArgs) -> CliResult<u8> {
    let (p, _) = load_problem(&args.problem)?;
    let (geom, consts) = setup(&p, args.delta)?;
    let gamma = args.gamma.unwrap_or(0.5 * consts.gamma_max);
    let rho = default_rho(args.delta);
    let rates = rate_constants(&p, &geom, &consts, gamma, rho)?;
    let mu0 = match args.mu0 {
        Mu0Arg::Oracle => Mu0Distance::Oracle,
        Mu0Arg::Diameter => Mu0Distance::DiameterFallback,
    };
    let corollary = corollary_parameters(&p, &geom, &consts, gamma, args.eps1, args.eps2, mu0)?;
    let round_trip_bound = theorem_bound(
        &corollary.rates,
        corollary.k_min,
        corollary.t_min,
        corollary.k_min,
        corollary.mu0_dist_sq,
        None,
    );
    let report = BoundsReport {
        n: p.n(),
        m: p.m(),
        delta: args.delta,
        gamma,
        rho,
        gamma_max: consts.gamma_max,
        beta: consts.beta,
        dual_bound: geom.bound,
        rates,
        regularization: regularization_error_bounds(&p, &geom, &consts),
        max_tightening_delta: max_tightening_delta(&p, &geom, &consts),
        round_trip_ok: round_trip_bound <= args.eps1 + args.eps2 + 1e-9,
        round_trip_bound,
        corollary,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Manifest(e.to_string()))?;
    text.push('\n');
    if let Some(path) = &args.out {
        std::fs::write(path, &text).map_err(|e| CliError::io(path, e))?;
    }
    print!("{text}");
    Ok(EXIT_OK)
}

pub fn generate(args: &GenerateArgs) -> CliResult<u8> {
    let start = Instant::now();
    let (mut net, _) = generate_benchmark(args.seed, args.scale.into())?;
    if let Some(w) = args.weight {
        net = net.with_weight(w);
    }
    let p = net.to_problem(args.preset.into())?;
    let mut out = OutputDir::create(&args.out)?;
    out.write("problem.json", p.to_json_string()?.as_bytes())?;
    let mut edges = Vec::new();
    net.write_edge_csv(&mut edges)?;
    out.write("edges.csv", &edges)?;
    let config = serde_json::json!({
        "seed": args.seed,
        "scale": Scale::from(args.scale),
        "preset": PartitionPreset::from(args.preset),
        "weight": net.weight,
    });
    out.finish("generate", config, Vec::new(), start, EXIT_OK)?;
    println!("wrote {}", args.out.join("problem.json").display());
    Ok(EXIT_OK)
}

pub fn verify_dir(dir: &Path) -> CliResult<u8> {
    let m = verify(dir)?;
    println!("{}: {} outputs verified", dir.display(), m.outputs.len());
    Ok(EXIT_OK)
}
