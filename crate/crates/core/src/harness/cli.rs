use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::config::{ConfigError, CostSpec, ExperimentConfig, MollifierSpec, OutputSpec, SamplingSpec};
use super::records::{append_record, write_csv, ResultRecord};
use super::suite::{acceptance_suite_with, Tier};
use crate::control::{estimate_drift, DriftOptions};
use crate::dynamics::{
    law_equality_test, sample_gibbs, simulate_ensemble, summarize_trajectories, LawConfig, LawSummary,
    OptimalConfig, PathStatistic,
};
use crate::feynman_kac::{estimate_c, estimate_u};
use crate::functionals::{sausage_volume, MollifierFamily, SausageFunctional, Support};
use crate::occupation::{MeasureRepr, OccupationMeasure};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(_) => 1,
            _ => 2,
        }
    }
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "occupath", version, about = "Occupation-measure control experiments")]
pub struct Cli {
    /// append a JSON-lines record of every result to this file
    #[arg(long, global = true)]
    pub log: Option<PathBuf>,
    /// write a CSV table of the result (trajectories, statistics) here
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Feynman-Kac value u (or c = -log u) at (t, nu, x)
    Value(ValueArgs),
    /// Optimal drift at the state of a JSON file
    Drift(DriftArgs),
    /// Optimally controlled trajectories
    Simulate(SimulateArgs),
    /// Gibbs-weighted path statistics
    Gibbs(GibbsArgs),
    /// Sausage volume or g_l of a point or a segment
    Sausage(SausageArgs),
    /// Acceptance checks
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct MollifierArgs {
    #[arg(long, default_value_t = 4)]
    pub ell: u32,
    #[arg(long, default_value_t = 2.0)]
    pub cutoff_inner: f64,
    #[arg(long, default_value_t = 4.0)]
    pub cutoff_outer: f64,
    #[arg(long, default_value_t = 0.05)]
    pub quad_step: f64,
    #[arg(long, default_value_t = 0.01)]
    pub grid_h: f64,
}

impl MollifierArgs {
    fn spec(&self) -> MollifierSpec {
        MollifierSpec {
            level: self.ell,
            cutoff_inner: self.cutoff_inner,
            cutoff_outer: self.cutoff_outer,
            quad_step: self.quad_step,
            grid_h: self.grid_h,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostKind {
    Constant,
    Linear,
    Cylindrical,
    Sausage,
    ExactSausage,
}

#[derive(Args, Debug, Clone)]
pub struct CostArgs {
    #[arg(long, value_enum, default_value_t = CostKind::Sausage)]
    pub cost: CostKind,
    /// constant running cost
    #[arg(long, default_value_t = 0.0)]
    pub running: f64,
    /// constant terminal cost
    #[arg(long, default_value_t = 0.0)]
    pub terminal: f64,
    /// linear coefficients, comma separated
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    /// centre of the cylindrical bump
    #[arg(long, value_delimiter = ',')]
    pub center: Vec<f64>,
    #[arg(long, default_value_t = 0.2)]
    pub inner: f64,
    #[arg(long, default_value_t = 1.5)]
    pub outer: f64,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    /// radius of the exact sausage
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
}

impl CostArgs {
    fn spec(&self, dim: usize) -> CostSpec {
        match self.cost {
            CostKind::Constant => CostSpec::Constant {
                running: self.running,
                terminal: self.terminal,
            },
            CostKind::Linear => CostSpec::Linear {
                lambda: self.lambda.clone(),
            },
            CostKind::Cylindrical => CostSpec::Cylindrical {
                center: if self.center.is_empty() {
                    vec![0.0; dim]
                } else {
                    self.center.clone()
                },
                inner: self.inner,
                outer: self.outer,
                amplitude: self.amplitude,
            },
            CostKind::Sausage => CostSpec::Sausage,
            CostKind::ExactSausage => CostSpec::ExactSausage { radius: self.radius },
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    /// experiment configuration; replaces the problem flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(short = 'n', long, default_value_t = 1)]
    pub particles: usize,
    #[arg(short = 'd', long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1.0 / 64.0)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// starting point, comma separated (origin by default)
    #[arg(long, value_delimiter = ',')]
    pub start: Vec<f64>,
    #[command(flatten)]
    pub cost: CostArgs,
    #[command(flatten)]
    pub mollifier: MollifierArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    U,
    C,
}

#[derive(Args, Debug)]
pub struct ValueArgs {
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    #[arg(long, default_value_t = 100_000)]
    pub n_samples: usize,
    #[arg(long, value_enum, default_value_t = Quantity::U)]
    pub quantity: Quantity,
    #[command(flatten)]
    pub problem: ProblemArgs,
}

#[derive(Args, Debug)]
pub struct DriftArgs {
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    #[arg(long, default_value_t = 20_000)]
    pub n_inner: usize,
    /// JSON file `{"nu": {"dim": d, "atoms": [[[..], w], ..]}, "x": [..]}`
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// cut estimates back to the a-priori bound
    #[arg(long)]
    pub clip: bool,
    #[command(flatten)]
    pub problem: ProblemArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 20_000)]
    pub n_inner: usize,
    #[arg(long, default_value_t = 10)]
    pub n_traj: usize,
    #[arg(long)]
    pub clip: bool,
    #[command(flatten)]
    pub problem: ProblemArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Energy {
    Gell,
    ExactSausage,
    Linear,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stat {
    /// terminal coordinates of particle 0
    Coords,
    /// terminal norm of particle 0
    Norm,
    /// g_l of the occupation
    Gell,
    /// exact sausage volume at --radius
    Volume,
}

#[derive(Args, Debug)]
pub struct GibbsArgs {
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[arg(long, value_enum, default_value_t = Energy::Gell)]
    pub energy: Energy,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![Stat::Coords, Stat::Norm, Stat::Gell])]
    pub stats: Vec<Stat>,
    #[command(flatten)]
    pub problem: ProblemArgs,
}

#[derive(Args, Debug)]
pub struct SausageArgs {
    /// segment length (a single point when absent)
    #[arg(long)]
    pub segment: Option<f64>,
    #[arg(long)]
    pub point: bool,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// evaluate g_l of the unit-mass atom instead of the volume
    #[arg(long)]
    pub gell: bool,
    #[command(flatten)]
    pub mollifier: MollifierArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(subcommand)]
    pub what: Verify,
}

#[derive(Subcommand, Debug)]
pub enum Verify {
    /// every acceptance criterion
    All {
        #[arg(long)]
        quick: bool,
    },
    /// one acceptance criterion
    Criterion {
        id: u8,
        #[arg(long)]
        quick: bool,
    },
    /// optimal trajectories against the Gibbs law of a configuration
    Laws {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let input = |message: String| CliError::Input {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| input(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| input(e.to_string()))
}

impl ProblemArgs {
    fn config(&self, t: f64, sampling: SamplingSpec) -> Result<ExperimentConfig, CliError> {
        let config = match &self.config {
            Some(path) => read_json(path)?,
            None => ExperimentConfig {
                n_particles: self.particles,
                dim: self.dim,
                horizon: self.horizon,
                dt: self.dt,
                t,
                start: (!self.start.is_empty()).then(|| self.start.clone()),
                base: Vec::new(),
                cost: self.cost.spec(self.dim),
                mollifier: self.mollifier.spec(),
                sampling: SamplingSpec {
                    seed: self.seed,
                    ..sampling
                },
                output: OutputSpec::default(),
            },
        };
        config.validate()?;
        Ok(config)
    }
}

/// Where records and tables of a run go.
struct Sink {
    log: Option<PathBuf>,
    csv: Option<PathBuf>,
}

impl Sink {
    fn for_config(cli: &Cli, config: Option<&ExperimentConfig>) -> Self {
        let out = config.map(|c| c.output.clone()).unwrap_or_default();
        Self {
            log: cli.log.clone().or(out.log),
            csv: cli.csv.clone().or(out.csv),
        }
    }

    fn emit(&self, hash: &str, operation: &str, payload: Value, start: Instant) -> Result<(), CliError> {
        let record = ResultRecord::new(hash, operation, payload, start.elapsed().as_secs_f64());
        println!("{}", serde_json::to_string_pretty(&record.payload).map_err(run_err)?);
        if let Some(path) = &self.log {
            append_record(path, &record).map_err(run_err)?;
        }
        Ok(())
    }
}

fn with_hash(mut payload: Value, hash: &str) -> Value {
    if let Value::Object(m) = &mut payload {
        m.insert("config_hash".into(), Value::String(hash.to_string()));
    }
    payload
}

fn value_cmd(cli: &Cli, a: &ValueArgs) -> Result<bool, CliError> {
    let start = Instant::now();
    let config = a.problem.config(
        a.t,
        SamplingSpec {
            n_samples: a.n_samples,
            n_inner: 0,
            n_traj: 0,
            seed: 0,
        },
    )?;
    let hash = config.config_hash();
    let (costs, nu, x) = (config.costs(), config.base_measure(), config.start_point());
    let est = match a.quantity {
        Quantity::U => estimate_u(&costs, config.horizon, config.t, &nu, &x, &config.sampling()),
        Quantity::C => estimate_c(&costs, config.horizon, config.t, &nu, &x, &config.sampling()),
    }
    .map_err(run_err)?;
    let payload = json!({
        "mean": est.mean,
        "se": est.std_error,
        "n": est.n_samples,
        "seed": est.seed,
        "config_hash": hash,
    });
    Sink::for_config(cli, Some(&config)).emit(&hash, "value", payload, start)?;
    Ok(true)
}

#[derive(Deserialize)]
struct DriftState {
    nu: MeasureRepr<f64>,
    x: Vec<f64>,
}

fn drift_cmd(cli: &Cli, a: &DriftArgs) -> Result<bool, CliError> {
    let start = Instant::now();
    let mut config = a.problem.config(
        a.t,
        SamplingSpec {
            n_samples: a.n_inner,
            n_inner: a.n_inner,
            n_traj: 0,
            seed: 0,
        },
    )?;
    if let Some(path) = &a.state {
        let state: DriftState = read_json(path)?;
        config.dim = state.nu.dim;
        config.n_particles = state.x.len() / state.nu.dim.max(1);
        config.base = state.nu.atoms;
        config.start = Some(state.x);
        config.validate()?;
    }
    let hash = config.config_hash();
    let costs = config.costs();
    let options = DriftOptions {
        clip: if a.clip {
            crate::control::drift_bound(&costs, config.horizon, config.dim).ok()
        } else {
            None
        },
    };
    let est = estimate_drift(
        &costs,
        config.horizon,
        config.t,
        &config.base_measure(),
        &config.start_point(),
        &config.sampling(),
        options,
    )
    .map_err(run_err)?;
    let payload = with_hash(serde_json::to_value(est).map_err(run_err)?, &hash);
    Sink::for_config(cli, Some(&config)).emit(&hash, "drift", payload, start)?;
    Ok(true)
}

fn law_config(config: &ExperimentConfig) -> LawConfig<f64> {
    LawConfig {
        n_particles: config.n_particles,
        dim: config.dim,
        horizon: config.horizon,
        dt: config.dt,
        start: config.start_point(),
        base_atoms: config.base.len(),
        costs: serde_json::to_string(&(&config.cost, &config.mollifier)).unwrap_or_default(),
    }
}

fn statistics(config: &ExperimentConfig, stats: &[Stat], radius: f64) -> Vec<PathStatistic<f64>> {
    let mut out = Vec::new();
    for s in stats {
        match s {
            Stat::Coords => out.extend((0..config.dim).map(|axis| PathStatistic::TerminalCoord { particle: 0, axis })),
            Stat::Norm => out.push(PathStatistic::TerminalNorm { particle: 0 }),
            Stat::Gell => out.push(PathStatistic::Sausage(config.sausage())),
            Stat::Volume => out.push(PathStatistic::SausageVolume {
                radius,
                grid_h: config.mollifier.grid_h,
            }),
        }
    }
    out
}

fn simulate_cmd(cli: &Cli, a: &SimulateArgs) -> Result<bool, CliError> {
    let start = Instant::now();
    let config = a.problem.config(
        0.0,
        SamplingSpec {
            n_samples: a.n_traj,
            n_inner: a.n_inner,
            n_traj: a.n_traj,
            seed: 0,
        },
    )?;
    let hash = config.config_hash();
    let (costs, nu, x) = (config.costs(), config.base_measure(), config.start_point());
    let optimal = OptimalConfig {
        dt: config.dt,
        n_inner: config.sampling.n_inner,
        seed: config.sampling.seed,
        clip: a.clip,
    };
    let trajs = simulate_ensemble(&costs, config.horizon, &nu, &x, &optimal, config.sampling.n_traj).map_err(run_err)?;
    let stats = statistics(&config, &[Stat::Coords, Stat::Norm], 1.0);
    let summary = summarize_trajectories(law_config(&config), &trajs, &stats, &nu).map_err(run_err)?;
    let costs_realized: Vec<f64> = trajs.iter().map(|t| t.realized_cost()).collect();
    let (mean, se) = crate::stats::mean_and_se(&costs_realized);
    let sink = Sink::for_config(cli, Some(&config));
    if let Some(path) = &sink.csv {
        let width = config.n_particles * config.dim;
        let mut header = vec!["trajectory".to_string(), "t".to_string()];
        header.extend((0..width).map(|c| format!("x{}_{}", c / config.dim, c % config.dim)));
        let rows: Vec<Vec<f64>> = trajs
            .iter()
            .enumerate()
            .flat_map(|(j, tr)| {
                tr.path.chunks_exact(width).enumerate().map(move |(i, xs)| {
                    let mut row = vec![j as f64, i as f64 * config.dt];
                    row.extend_from_slice(xs);
                    row
                })
            })
            .collect();
        write_csv(path, &header, &rows).map_err(run_err)?;
    }
    let payload = json!({
        "realized_cost": {"mean": mean, "se": se},
        "statistics": summary.statistics,
        "bound_violations": trajs.iter().map(|t| t.bound_violations()).sum::<usize>(),
        "n_traj": trajs.len(),
        "seed": config.sampling.seed,
        "config_hash": hash,
    });
    sink.emit(&hash, "simulate", payload, start)?;
    Ok(true)
}

fn gibbs_cmd(cli: &Cli, a: &GibbsArgs) -> Result<bool, CliError> {
    let start = Instant::now();
    let mut problem = a.problem.clone();
    problem.cost.cost = match a.energy {
        Energy::Gell => CostKind::Sausage,
        Energy::ExactSausage => CostKind::ExactSausage,
        Energy::Linear => CostKind::Linear,
    };
    let config = problem.config(
        0.0,
        SamplingSpec {
            n_samples: a.n_paths,
            n_inner: 0,
            n_traj: 0,
            seed: 0,
        },
    )?;
    let hash = config.config_hash();
    let stats = statistics(&config, &a.stats, a.problem.cost.radius);
    let report = sample_gibbs(
        &config.costs(),
        config.horizon,
        &config.base_measure(),
        &config.start_point(),
        &config.sampling(),
        &stats,
    )
    .map_err(run_err)?;
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    let payload = with_hash(serde_json::to_value(&report).map_err(run_err)?, &hash);
    Sink::for_config(cli, Some(&config)).emit(&hash, "gibbs", payload, start)?;
    Ok(true)
}

fn sausage_cmd(cli: &Cli, a: &SausageArgs) -> Result<bool, CliError> {
    let start = Instant::now();
    if a.point && a.segment.is_some() {
        return Err(ConfigError {
            violations: vec!["--point and --segment are exclusive".into()],
        }
        .into());
    }
    let dim = a.dim;
    let bad = |v: &str| CliError::from(ConfigError {
        violations: vec![v.to_string()],
    });
    if dim == 0 {
        return Err(bad("dim must be positive"));
    }
    let origin = vec![0.0; dim];
    let hash = {
        let key = json!({"segment": a.segment, "rho": a.rho, "dim": dim, "gell": a.gell, "mollifier": a.mollifier.spec()});
        super::config::content_hash(&key)
    };
    let payload = if a.gell {
        let m = &a.mollifier;
        let fam = MollifierFamily::new(m.ell, m.cutoff_inner, m.cutoff_outer).map_err(|e| bad(&e.to_string()))?;
        let sf = SausageFunctional::new(fam, m.quad_step).map_err(|e| bad(&e.to_string()))?;
        let nu = match a.segment {
            None => OccupationMeasure::dirac(&origin, 1.0).map_err(run_err)?,
            Some(len) => {
                // unit-mass occupation of a straight segment
                let steps = ((len / m.quad_step).ceil() as usize * 4).max(1);
                let mut nu = OccupationMeasure::empty(dim);
                for i in 0..steps {
                    let mut p = origin.clone();
                    p[0] = len * ((i as f64 + 0.5) / steps as f64 - 0.5);
                    nu.push_atom(&p, 1.0 / steps as f64).map_err(run_err)?;
                }
                nu
            }
        };
        json!({"value": sf.g_ell(&nu), "quad_step": m.quad_step, "config_hash": hash})
    } else {
        let est = match a.segment {
            None => {
                let nu = OccupationMeasure::dirac(&origin, 1.0).map_err(run_err)?;
                sausage_volume(Support::Atoms(&nu), a.rho, a.mollifier.grid_h)
            }
            Some(len) => {
                let mut line = origin.clone();
                line[0] = -len / 2.0;
                let mut end = origin;
                end[0] = len / 2.0;
                line.extend(end);
                sausage_volume(Support::Polylines { dim, lines: &[line] }, a.rho, a.mollifier.grid_h)
            }
        }
        .map_err(|e| bad(&e.to_string()))?;
        with_hash(serde_json::to_value(est).map_err(run_err)?, &hash)
    };
    let sink = Sink {
        log: cli.log.clone(),
        csv: None,
    };
    sink.emit(&hash, "sausage", payload, start)?;
    Ok(true)
}

fn verify_cmd(cli: &Cli, a: &VerifyArgs) -> Result<bool, CliError> {
    let start = Instant::now();
    let sink = Sink::for_config(cli, None);
    match &a.what {
        Verify::All { quick } => {
            let tier = if *quick { Tier::Quick } else { Tier::Full };
            let report = acceptance_suite_with(tier, |o| eprintln!("{}", o.line()));
            let hash = super::config::content_hash(&json!({"suite": tier}));
            let passed = report.all_passed();
            sink.emit(&hash, "verify all", serde_json::to_value(&report).map_err(run_err)?, start)?;
            Ok(passed)
        }
        Verify::Criterion { id, quick } => {
            let tier = if *quick { Tier::Quick } else { Tier::Full };
            let o = super::suite::run_criterion(*id, tier);
            eprintln!("{}", o.line());
            let hash = super::config::content_hash(&json!({"criterion": id, "tier": tier}));
            sink.emit(&hash, "verify criterion", serde_json::to_value(&o).map_err(run_err)?, start)?;
            Ok(o.passed)
        }
        Verify::Laws { config } => {
            let config: ExperimentConfig = read_json(config)?;
            config.validate()?;
            let hash = config.config_hash();
            let (costs, nu, x) = (config.costs(), config.base_measure(), config.start_point());
            let mut which = vec![Stat::Coords, Stat::Norm];
            if config.cost == CostSpec::Sausage {
                which.push(Stat::Gell);
            }
            let stats = statistics(&config, &which, 1.0);
            let optimal = OptimalConfig {
                dt: config.dt,
                n_inner: config.sampling.n_inner,
                seed: config.sampling.seed,
                clip: false,
            };
            let trajs =
                simulate_ensemble(&costs, config.horizon, &nu, &x, &optimal, config.sampling.n_traj).map_err(run_err)?;
            let controlled = summarize_trajectories(law_config(&config), &trajs, &stats, &nu).map_err(run_err)?;
            let mut sampling = config.sampling();
            sampling.seed = sampling.seed.wrapping_add(1_000_003);
            let report = sample_gibbs(&costs, config.horizon, &nu, &x, &sampling, &stats).map_err(run_err)?;
            let gibbs = LawSummary::from_gibbs(law_config(&config), &report);
            let cmp = law_equality_test(&controlled, &gibbs).map_err(run_err)?;
            let passed = cmp.passed;
            let payload = json!({
                "comparison": cmp,
                "controlled": controlled.statistics,
                "gibbs": gibbs.statistics,
                "ess": report.ess,
                "config_hash": hash,
            });
            Sink::for_config(cli, Some(&config)).emit(&hash, "verify laws", payload, start)?;
            Ok(passed)
        }
    }
}

/// Runs the command line and returns the process exit code:
/// 0 on success, 1 when a check fails or a computation errors,
/// 2 on invalid configuration.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = std::env::var("OCCUPATH_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // already initialised pools keep their size; results do not depend on it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match &cli.command {
        Command::Value(a) => value_cmd(&cli, a),
        Command::Drift(a) => drift_cmd(&cli, a),
        Command::Simulate(a) => simulate_cmd(&cli, a),
        Command::Gibbs(a) => gibbs_cmd(&cli, a),
        Command::Sausage(a) => sausage_cmd(&cli, a),
        Command::Verify(a) => verify_cmd(&cli, a),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
