//! Command-line surface: parses flags and model documents, drives the
//! toolkit, and emits machine-readable reports.
//!
//! Every run produces a single JSON object with the command, an echo of the
//! parsed inputs, the seed, the results payload, the toolkit version, and
//! the wall time. Reports are byte-identical for identical
//! `(command, inputs, seed)` apart from the wall-time field. `--format csv`
//! flattens the tabular payloads (SI profiles, TV decay curves, telescope
//! traces) for external plotting.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use glauber_lab::bounds;
use glauber_lab::counting::{self, AnnealParams, MarginalMode};
use glauber_lab::exact::{self, StateSpace};
use glauber_lab::glauber::{self, McmcParams};
use glauber_lab::graph::{generate, Graph, GraphFamily};
use glauber_lab::spectral::{self, Kernel};
use glauber_lab::spin::{Pinning, SpinSystem};
use glauber_lab::{Caps, Error, Parallelism, Result};

#[derive(Parser, Debug)]
#[command(name = "glauber-lab", version, about = "Glauber dynamics, spectral gaps, and counting for q-spin systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report format. CSV is available for tabular payloads only.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Enumerate the state space: log-partition function and marginals.
    Exact(ExactArgs),
    /// Exact Glauber spectrum and gap with the theory lower bounds.
    Gap(GapArgs),
    /// Spectral-independence profile with per-model theory constants.
    Si(SiArgs),
    /// Exact s<->r down-up walk gap against its kappa lower bound.
    Downup(DownupArgs),
    /// Evaluate a closed-form bound or threshold.
    Bounds(BoundsArgs),
    /// Run Glauber chains and report empirical statistics.
    Sample(SampleArgs),
    /// Exact TV decay by kernel powering against the mixing-time relations.
    Mix(MixArgs),
    /// Estimate the partition function by telescoping or annealing.
    Count(CountArgs),
    /// Bipartite degree-condition check.
    BisCheck(BisArgs),
    /// Generate a graph file.
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Hardcore,
    Coloring,
    Matching,
}

/// Flags shared by every instance-driven command.
#[derive(Args, Debug, Serialize)]
pub struct InstanceArgs {
    /// Edge-list graph file.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Fugacity for the hardcore and matching models.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Colors for the coloring model.
    #[arg(long)]
    pub k: Option<usize>,
    /// Key-value model document: `model = ...`, `lambda = ...`, `k = ...`.
    /// Explicit flags take precedence over the file.
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    /// Enumeration cap override.
    #[arg(long)]
    pub cap: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct ExactArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct GapArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Pinnings sampled per size when the instance is too large for the
    /// exhaustive SI sweep.
    #[arg(long, default_value_t = 200)]
    pub si_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct SiArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value_t = 200)]
    pub si_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct DownupArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long)]
    pub s: usize,
    #[arg(long)]
    pub r: usize,
    /// Cap on the system size for exact down-up kernels.
    #[arg(long, default_value_t = 6)]
    pub max_n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    LambdaC,
    AlphaStar,
    AloCh,
    MainGap,
    Kappa,
    BlockFactorization,
    AtChain,
    ComponentTail,
    Mixing,
    Regime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeKind {
    Coloring,
    Hardcore,
    Matching,
}

#[derive(Args, Debug, Serialize)]
pub struct BoundsArgs {
    #[arg(long, value_enum)]
    pub formula: Formula,
    #[arg(long)]
    pub n: Option<usize>,
    /// Maximum degree Delta.
    #[arg(long)]
    pub delta_cap: Option<usize>,
    /// Spectral-independence constant C.
    #[arg(long)]
    pub c_si: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub tau_rel: Option<f64>,
    #[arg(long)]
    pub min_mu: Option<f64>,
    #[arg(long)]
    pub warm_ratio: Option<f64>,
    /// Slack parameter delta of the regime statements.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub k_colors: Option<usize>,
    #[arg(long)]
    pub k_size: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Block-factorization constant C_l for the chain bound.
    #[arg(long)]
    pub c_ell: Option<f64>,
    #[arg(long, value_enum)]
    pub kind: Option<RegimeKind>,
}

#[derive(Args, Debug, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value_t = 100_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct MixArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Starting state index for the from-start decay curve; defaults to the
    /// greedy feasible configuration.
    #[arg(long)]
    pub start: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMethod {
    Telescope,
    Anneal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Marginals {
    Exact,
    Mcmc,
}

#[derive(Args, Debug, Serialize)]
pub struct CountArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, value_enum)]
    pub method: CountMethod,
    #[arg(long, value_enum, default_value_t = Marginals::Exact)]
    pub marginals: Marginals,
    /// Elimination order as comma-separated vertices; defaults to all
    /// vertices in index order (telescope only).
    #[arg(long, value_delimiter = ',')]
    pub order: Option<Vec<usize>>,
    #[arg(long, default_value_t = 100_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 1_000)]
    pub burnin: u64,
    #[arg(long, default_value_t = 8)]
    pub chains: usize,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long, default_value_t = 20_000)]
    pub steps_per_level: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct BisArgs {
    #[arg(long)]
    pub graph: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Cycle,
    Path,
    Complete,
    CompleteBipartite,
    Grid,
    RandomRegular,
    Gnp,
}

#[derive(Args, Debug, Serialize)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub a: Option<usize>,
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub degree: Option<usize>,
    /// Expected degree for the binomial random graph.
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Destination edge-list file.
    #[arg(long)]
    pub gen_out: PathBuf,
}

/// The single-object report envelope.
#[derive(Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Value,
    pub seed: Option<u64>,
    pub results: Value,
    pub version: String,
    pub wall_time_ms: f64,
}

/// Entry point used by `main` and the tests. Returns the process exit code.
pub fn run(args: impl IntoIterator<Item = String>) -> u8 {
    let all = std::iter::once("glauber-lab".to_string()).chain(args);
    let cli = match Cli::try_parse_from(all) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(text) => match &cli.out {
            Some(path) => match std::fs::write(path, text) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            },
            None => {
                println!("{text}");
                0
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } | Error::InvalidGraph(_) | Error::InvalidParam(_) => 2,
        Error::CapExceeded(_) => 3,
        Error::Infeasible(_) => 4,
        _ => 1,
    }
}

/// Runs the command and renders the report in the requested format.
pub fn execute(cli: &Cli) -> Result<String> {
    let start = Instant::now();
    let (name, inputs, seed, results) = dispatch(&cli.command)?;
    let report = RunReport {
        command: name.to_string(),
        inputs,
        seed,
        results,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    match cli.format {
        Format::Json => Ok(serde_json::to_string_pretty(&report).expect("report serializes")),
        Format::Csv => render_csv(&cli.command, &report),
    }
}

fn dispatch(command: &Command) -> Result<(&'static str, Value, Option<u64>, Value)> {
    match command {
        Command::Exact(args) => Ok(("exact", to_value(args), None, cmd_exact(args)?)),
        Command::Gap(args) => Ok(("gap", to_value(args), Some(args.seed), cmd_gap(args)?)),
        Command::Si(args) => Ok(("si", to_value(args), Some(args.seed), cmd_si(args)?)),
        Command::Downup(args) => Ok(("downup", to_value(args), None, cmd_downup(args)?)),
        Command::Bounds(args) => Ok(("bounds", to_value(args), None, cmd_bounds(args)?)),
        Command::Sample(args) => Ok(("sample", to_value(args), Some(args.seed), cmd_sample(args)?)),
        Command::Mix(args) => Ok(("mix", to_value(args), None, cmd_mix(args)?)),
        Command::Count(args) => Ok(("count", to_value(args), Some(args.seed), cmd_count(args)?)),
        Command::BisCheck(args) => Ok(("bis-check", to_value(args), None, cmd_bis(args)?)),
        Command::Gen(args) => Ok(("gen", to_value(args), Some(args.seed), cmd_gen(args)?)),
    }
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("arguments serialize")
}

/// A fully resolved instance: graph, spin system, and bookkeeping.
struct Instance {
    graph: Graph,
    system: SpinSystem,
    /// Line-graph vertex to base edge, for the matching model.
    edge_map: Option<Vec<(usize, usize)>>,
    kind: ModelKind,
    lambda: Option<f64>,
    cap: u64,
}

fn resolve_instance(args: &InstanceArgs) -> Result<Instance> {
    let graph = Graph::from_file(&args.graph)?;
    let mut model = args.model;
    let mut lambda = args.lambda;
    let mut k = args.k;
    if let Some(path) = &args.model_config {
        let text = std::fs::read_to_string(path)?;
        let (file_model, file_lambda, file_k) = parse_model_config(&text)?;
        model = model.or(file_model);
        lambda = lambda.or(file_lambda);
        k = k.or(file_k);
    }
    let kind = model.ok_or_else(|| {
        Error::InvalidParam("no model given: use --model or --model-config".into())
    })?;
    let cap = args.cap.unwrap_or_else(|| Caps::default().enumeration);
    let (system, edge_map) = match kind {
        ModelKind::Hardcore => {
            let l = lambda.ok_or_else(|| Error::InvalidParam("hardcore needs --lambda".into()))?;
            (SpinSystem::hardcore(graph.clone(), l)?, None)
        }
        ModelKind::Coloring => {
            let k = k.ok_or_else(|| Error::InvalidParam("coloring needs --k".into()))?;
            (SpinSystem::coloring(graph.clone(), k)?, None)
        }
        ModelKind::Matching => {
            let l = lambda.ok_or_else(|| Error::InvalidParam("matching needs --lambda".into()))?;
            let (sys, map) = SpinSystem::monomer_dimer(&graph, l)?;
            (sys, Some(map))
        }
    };
    Ok(Instance { graph, system, edge_map, kind, lambda, cap })
}

/// Parses the key-value model document: `model = hardcore|coloring|matching`,
/// `lambda = <real>`, `k = <int>`, with `#` comments.
fn parse_model_config(text: &str) -> Result<(Option<ModelKind>, Option<f64>, Option<usize>)> {
    let mut model = None;
    let mut lambda = None;
    let mut k = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: idx + 1,
                message: "expected `key = value`".into(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "model" => {
                model = Some(match value {
                    "hardcore" => ModelKind::Hardcore,
                    "coloring" => ModelKind::Coloring,
                    "matching" => ModelKind::Matching,
                    other => {
                        return Err(Error::Parse {
                            line: idx + 1,
                            message: format!("unknown model {other:?}"),
                        })
                    }
                })
            }
            "lambda" => {
                lambda = Some(value.parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("bad real {value:?}"),
                })?)
            }
            "k" => {
                k = Some(value.parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("bad integer {value:?}"),
                })?)
            }
            other => {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("unknown key {other:?}"),
                })
            }
        }
    }
    Ok((model, lambda, k))
}

fn enumerate(instance: &Instance) -> Result<StateSpace> {
    exact::enumerate_with_cap(&instance.system, instance.cap)
}

fn cmd_exact(args: &ExactArgs) -> Result<Value> {
    let instance = resolve_instance(&args.instance)?;
    let space = enumerate(&instance)?;
    let sys = &instance.system;
    let mut marginals = Vec::with_capacity(sys.n());
    for v in 0..sys.n() {
        let row: Result<Vec<f64>> = (0..sys.q() as u8)
            .map(|s| space.marginal_given(&Pinning::empty(), v, s))
            .collect();
        marginals.push(row?);
    }
    Ok(json!({
        "log_z": space.log_z(),
        "z": space.log_z().exp(),
        "state_count": space.len(),
        "marginals": marginals,
        "edge_map": instance.edge_map,
    }))
}

/// Exhaustive profile when the size allows, sampled otherwise.
fn profile_for(
    space: &StateSpace,
    samples: usize,
    seed: u64,
) -> Result<spectral::SiProfile> {
    if space.n() <= Caps::default().si_exhaustive_n {
        spectral::si_profile(space)
    } else {
        spectral::si_profile_sampled(space, samples, seed, Parallelism::default())
    }
}

fn cmd_gap(args: &GapArgs) -> Result<Value> {
    let instance = resolve_instance(&args.instance)?;
    let space = enumerate(&instance)?;
    let (kernel, _) = spectral::glauber_kernel(&instance.system, &space, None)?;
    let spectrum = spectral::spectral_gap(&kernel)?;
    let profile = profile_for(&space, args.si_samples, args.seed)?;
    let alo = bounds::alo_gap_bound(&profile.etas).ok();
    let alo_ch = if profile.fitted_eta < 1.0 {
        bounds::alo_gap_bound_ch(space.n(), profile.fitted_c, profile.fitted_eta).ok()
    } else {
        None
    };
    let main = if profile.fitted_eta < 1.0 {
        Some(bounds::main_gap_bound(
            space.n(),
            instance.system.graph().max_degree(),
            profile.fitted_c,
            profile.fitted_eta,
        )?)
    } else {
        None
    };
    Ok(json!({
        "spectrum": {
            "eigenvalues": spectrum.eigenvalues,
            "gap": spectrum.gap,
            "tau_rel": spectrum.relaxation_time,
            "state_count": spectrum.state_count,
        },
        "si": profile,
        "alo_bound": alo,
        "alo_bound_ch": alo_ch,
        "main_gap": main,
    }))
}

fn cmd_si(args: &SiArgs) -> Result<Value> {
    let instance = resolve_instance(&args.instance)?;
    let space = enumerate(&instance)?;
    let profile = profile_for(&space, args.si_samples, args.seed)?;
    let base_degree = instance.graph.max_degree();
    let model_constants = match instance.kind {
        ModelKind::Hardcore => {
            let lambda = instance.lambda.unwrap_or_default();
            json!({
                "eta_model": lambda / (1.0 + lambda),
                "lambda_c": bounds::lambda_critical(base_degree).ok(),
            })
        }
        ModelKind::Coloring => json!({
            "alpha_star": bounds::alpha_star(),
            "si_c_note": "O(delta^-2): constant not evaluable",
        }),
        ModelKind::Matching => {
            let lambda = instance.lambda.unwrap_or_default();
            json!({
                "si_c_model": 2.0 * (1.0 + base_degree as f64).sqrt(),
                "eta_model": lambda / (1.0 + lambda),
            })
        }
    };
    Ok(json!({
        "si": profile,
        "model_constants": model_constants,
    }))
}

fn cmd_downup(args: &DownupArgs) -> Result<Value> {
    let instance = resolve_instance(&args.instance)?;
    let space = enumerate(&instance)?;
    let caps = Caps {
        enumeration: instance.cap,
        down_up_n: args.max_n,
        ..Caps::default()
    };
    let (kernel, dist) = spectral::down_up_kernel(&space, args.s, args.r, &caps)?;
    let spectrum = spectral::spectral_gap(&kernel)?;
    let profile = spectral::si_profile_with(&space, Parallelism::default(), args.max_n.max(10))?;
    let kappa = if profile.fitted_eta < 1.0 {
        Some(bounds::kappa_rs(space.n(), args.r, args.s, profile.fitted_c, profile.fitted_eta)?)
    } else {
        None
    };
    Ok(json!({
        "s": args.s,
        "r": args.r,
        "level_states": dist.len(),
        "gap": spectrum.gap,
        "tau_rel": spectrum.relaxation_time,
        "kappa": kappa,
        "fitted_c": profile.fitted_c,
        "fitted_eta": profile.fitted_eta,
    }))
}

fn need<T: Copy>(opt: Option<T>, flag: &str) -> Result<T> {
    opt.ok_or_else(|| Error::InvalidParam(format!("missing required flag {flag}")))
}

fn cmd_bounds(args: &BoundsArgs) -> Result<Value> {
    let value = match args.formula {
        Formula::LambdaC => {
            json!({ "lambda_c": bounds::lambda_critical(need(args.delta_cap, "--delta-cap")?)? })
        }
        Formula::AlphaStar => {
            let a = bounds::alpha_star();
            json!({ "alpha_star": a, "residual": (a - (1.0 / a).exp()).abs() })
        }
        Formula::AloCh => json!({
            "bound": bounds::alo_gap_bound_ch(
                need(args.n, "--n")?,
                need(args.c_si, "--c-si")?,
                need(args.eta, "--eta")?,
            )?
        }),
        Formula::MainGap => serde_json::to_value(bounds::main_gap_bound(
            need(args.n, "--n")?,
            need(args.delta_cap, "--delta-cap")?,
            need(args.c_si, "--c-si")?,
            need(args.eta, "--eta")?,
        )?)
        .expect("serializes"),
        Formula::Kappa => json!({
            "kappa": bounds::kappa_rs(
                need(args.n, "--n")?,
                need(args.r, "--r")?,
                need(args.s, "--s")?,
                need(args.c_si, "--c-si")?,
                need(args.eta, "--eta")?,
            )?
        }),
        Formula::BlockFactorization => serde_json::to_value(bounds::block_factorization(
            need(args.n, "--n")?,
            need(args.ell, "--ell")?,
            need(args.c_si, "--c-si")?,
            need(args.eta, "--eta")?,
        )?)
        .expect("serializes"),
        Formula::AtChain => json!({
            "c_ell": need(args.c_ell, "--c-ell")?,
            "bound": bounds::at_chain_bound(
                need(args.c_ell, "--c-ell")?,
                need(args.c_si, "--c-si")?,
                need(args.eta, "--eta")?,
                need(args.delta_cap, "--delta-cap")?,
                need(args.theta, "--theta")?,
                need(args.ell, "--ell")?,
            )?
        }),
        Formula::ComponentTail => json!({
            "bound": bounds::component_tail_bound(
                need(args.n, "--n")?,
                need(args.delta_cap, "--delta-cap")?,
                need(args.theta, "--theta")?,
                need(args.k_size, "--k-size")?,
            )?
        }),
        Formula::Mixing => serde_json::to_value(bounds::mixing_relations(
            need(args.tau_rel, "--tau-rel")?,
            need(args.epsilon, "--epsilon")?,
            args.min_mu,
            args.warm_ratio,
        )?)
        .expect("serializes"),
        Formula::Regime => {
            let regime = match need(args.kind, "--kind")? {
                RegimeKind::Coloring => bounds::Regime::Coloring {
                    n: need(args.n, "--n")?,
                    max_degree: need(args.delta_cap, "--delta-cap")?,
                    delta: need(args.delta, "--delta")?,
                    k: need(args.k_colors, "--k-colors")?,
                },
                RegimeKind::Hardcore => bounds::Regime::Hardcore {
                    max_degree: need(args.delta_cap, "--delta-cap")?,
                    delta: need(args.delta, "--delta")?,
                    lambda: need(args.lambda, "--lambda")?,
                },
                RegimeKind::Matching => bounds::Regime::Matching {
                    max_degree: need(args.delta_cap, "--delta-cap")?,
                },
            };
            serde_json::to_value(bounds::regime_checks(&regime)?).expect("serializes")
        }
    };
    Ok(value)
}

fn cmd_sample(args: &SampleArgs) -> Result<Value> {
    let instance = resolve_instance(&args.instance)?;
    let traj = glauber::run_chain(
        &instance.system,
        &glauber::Init::Greedy,
        args.steps,
        args.seed,
        None,
    )?;
    // Compare against exact marginals whenever enumeration fits the cap.
    let comparison = match enumerate(&instance) {
        Ok(space) => {
            let mut exact_marginals = Vec::with_capacity(instance.system.n());
            let mut worst: f64 = 0.0;
            for v in 0..instance.system.n() {
                let row: Result<Vec<f64>> = (0..instance.system.q() as u8)
                    .map(|s| space.marginal_given(&Pinning::empty(), v, s))
                    .collect();
                let row = row?;
                for (s, &m) in row.iter().enumerate() {
                    worst = worst.max((traj.spin_frequencies[v][s] - m).abs());
                }
                exact_marginals.push(row);
            }
            Some(json!({
                "exact_marginals": exact_marginals,
                "max_abs_deviation": worst,
            }))
        }
        Err(Error::CapExceeded(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(json!({
        "steps": traj.steps,
        "samples": traj.samples,
        "final_config": traj.final_config.spins(),
        "spin_frequencies": traj.spin_frequencies,
        "comparison": comparison,
    }))
}

/// Smallest t with worst-start TV at most eps, by doubling plus bisection.
fn empirical_tau_mix(kernel: &Kernel, eps: f64) -> u64 {
    if spectral::worst_tv_at(kernel, 0) <= eps {
        return 0;
    }
    let mut hi = 1u64;
    while spectral::worst_tv_at(kernel, hi) > eps {
        hi *= 2;
        if hi > 1 << 24 {
            return hi; // Reducible or glacial; report the horizon.
        }
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        if spectral::worst_tv_at(kernel, mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn cmd_mix(args: &MixArgs) -> Result<Value> {
    let instance = resolve_instance(&args.instance)?;
    let space = enumerate(&instance)?;
    let (kernel, _) = spectral::glauber_kernel(&instance.system, &space, None)?;
    let spectrum = spectral::spectral_gap(&kernel)?;
    let eps = args.epsilon;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParam("epsilon must be in (0, 1)".into()));
    }
    let min_mu = kernel.stationary.iter().copied().fold(f64::INFINITY, f64::min);
    let relations = bounds::mixing_relations(spectrum.relaxation_time, eps, Some(min_mu), None)?;
    let worst_bound = relations.worst_bound.expect("min_mu supplied");
    let t_upper = worst_bound.ceil().max(0.0) as u64;
    let tv_at_upper = spectral::worst_tv_at(&kernel, t_upper);
    let lower = relations.lower_bound;
    let t_lower = if lower.ceil() >= 1.0 { Some(lower.ceil() as u64 - 1) } else { None };
    let tv_at_lower = t_lower.map(|t| spectral::worst_tv_at(&kernel, t));
    let tau_mix = empirical_tau_mix(&kernel, eps);

    let start = match args.start {
        Some(i) if i < space.len() => i,
        Some(i) => {
            return Err(Error::InvalidParam(format!(
                "start index {i} out of range ({} states)",
                space.len()
            )))
        }
        None => {
            let greedy = glauber::greedy_feasible(&instance.system, None)?;
            space.index_of(&greedy).expect("greedy state is feasible")
        }
    };
    let t_curve = (t_upper + 10).min(1_000);
    let curve = spectral::tv_decay_from(&kernel, start, t_curve);
    Ok(json!({
        "gap": spectrum.gap,
        "tau_rel": spectrum.relaxation_time,
        "min_mu": min_mu,
        "epsilon": eps,
        "worst_bound": worst_bound,
        "lower_bound": lower,
        "t_upper": t_upper,
        "tv_worst_at_upper": tv_at_upper,
        "t_lower": t_lower,
        "tv_worst_at_lower": tv_at_lower,
        "empirical_tau_mix_worst": tau_mix,
        "start_state": start,
        "tv_from_start": curve,
    }))
}

fn cmd_count(args: &CountArgs) -> Result<Value> {
    let instance = resolve_instance(&args.instance)?;
    if instance.kind == ModelKind::Coloring {
        return Err(Error::InvalidParam(
            "counting supports the hardcore and matching models".into(),
        ));
    }
    // The dynamics graph: the base graph for hardcore, the line graph for
    // matchings.
    let dyn_graph = instance.system.graph().clone();
    let lambda = instance.lambda.expect("hardcore-shaped models carry lambda");
    let exact_log_z = match enumerate(&instance) {
        Ok(space) => Some(space.log_z()),
        Err(Error::CapExceeded(_)) => None,
        Err(e) => return Err(e),
    };
    let results = match args.method {
        CountMethod::Telescope => {
            let order: Vec<usize> = match &args.order {
                Some(o) => o.clone(),
                None => (0..dyn_graph.n()).collect(),
            };
            let mode = match args.marginals {
                Marginals::Exact => MarginalMode::Exact,
                Marginals::Mcmc => MarginalMode::Mcmc(McmcParams {
                    steps: args.steps,
                    burnin: args.burnin,
                    chains: args.chains,
                    lag: 1,
                    seed: args.seed,
                }),
            };
            let trace = counting::telescoping_partition(
                &dyn_graph,
                lambda,
                &order,
                &mode,
                instance.cap,
                Parallelism::default(),
            )?;
            json!({
                "method": "telescope",
                "trace": trace,
                "log_z": trace.log_z,
                "exact_log_z": exact_log_z,
                "abs_error": exact_log_z.map(|z| (trace.log_z - z).abs()),
            })
        }
        CountMethod::Anneal => {
            let sys = SpinSystem::hardcore(dyn_graph.clone(), lambda)?;
            let report = counting::annealing_partition(
                &sys,
                &AnnealParams {
                    schedule_length: args.levels,
                    steps_per_level: args.steps_per_level,
                    burnin: args.burnin,
                    chains: args.chains,
                    lag: 1,
                    seed: args.seed,
                    lambda0: None,
                    rel_se_threshold: 0.05,
                },
                Parallelism::default(),
            )?;
            json!({
                "method": "anneal",
                "report": report,
                "log_z": report.log_z,
                "std_error": report.std_error,
                "exact_log_z": exact_log_z,
                "abs_error": exact_log_z.map(|z| (report.log_z - z).abs()),
            })
        }
    };
    Ok(results)
}

fn cmd_bis(args: &BisArgs) -> Result<Value> {
    let graph = Graph::from_file(&args.graph)?;
    let part = graph
        .bipartite_partition()
        .ok_or_else(|| Error::Infeasible("graph is not bipartite".into()))?;
    let report = counting::bis_condition_check(&graph, &part);
    Ok(json!({
        "partition": part,
        "report": report,
    }))
}

fn cmd_gen(args: &GenArgs) -> Result<Value> {
    let family = match args.family {
        Family::Cycle => GraphFamily::Cycle { n: need(args.n, "--n")? },
        Family::Path => GraphFamily::Path { n: need(args.n, "--n")? },
        Family::Complete => GraphFamily::Complete { n: need(args.n, "--n")? },
        Family::CompleteBipartite => GraphFamily::CompleteBipartite {
            a: need(args.a, "--a")?,
            b: need(args.b, "--b")?,
        },
        Family::Grid => GraphFamily::Grid {
            rows: need(args.rows, "--rows")?,
            cols: need(args.cols, "--cols")?,
        },
        Family::RandomRegular => GraphFamily::RandomRegular {
            n: need(args.n, "--n")?,
            degree: need(args.degree, "--degree")?,
        },
        Family::Gnp => GraphFamily::Gnp {
            n: need(args.n, "--n")?,
            d: need(args.d, "--d")?,
        },
    };
    let graph = generate(&family, args.seed)?;
    graph.to_file(&args.gen_out)?;
    Ok(json!({
        "family": family,
        "n": graph.n(),
        "m": graph.m(),
        "path": args.gen_out,
    }))
}

/// CSV flattening for the tabular payloads.
fn render_csv(command: &Command, report: &RunReport) -> Result<String> {
    let results = &report.results;
    match command {
        Command::Si(_) | Command::Gap(_) => {
            let etas = results["si"]["etas"]
                .as_array()
                .ok_or_else(|| Error::InvalidParam("no SI table in payload".into()))?;
            let mut out = String::from("k,eta_k\n");
            for (k, eta) in etas.iter().enumerate() {
                out.push_str(&format!("{k},{}\n", eta));
            }
            Ok(out)
        }
        Command::Mix(_) => {
            let curve = results["tv_from_start"]
                .as_array()
                .ok_or_else(|| Error::InvalidParam("no decay curve in payload".into()))?;
            let mut out = String::from("t,tv_from_start\n");
            for (t, tv) in curve.iter().enumerate() {
                out.push_str(&format!("{t},{}\n", tv));
            }
            Ok(out)
        }
        Command::Count(_) if results["method"] == "telescope" => {
            let steps = results["trace"]["steps"]
                .as_array()
                .ok_or_else(|| Error::InvalidParam("no trace in payload".into()))?;
            let mut out = String::from("step,vertex,skipped,marginal,log_z_delta\n");
            for (i, s) in steps.iter().enumerate() {
                out.push_str(&format!(
                    "{i},{},{},{},{}\n",
                    s["vertex"], s["skipped"], s["marginal"], s["log_z_delta"]
                ));
            }
            Ok(out)
        }
        _ => Err(Error::InvalidParam(
            "--format csv is available for si, gap, mix, and telescope payloads".into(),
        )),
    }
}
