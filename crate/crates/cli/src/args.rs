use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use radialcap::quadrature::TailConfig;
use radialcap::ClassifyConfig;

#[derive(Debug, Parser)]
#[command(name = "radialcap", version, about = "p-parabolicity criteria and radial capacities on model spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide p-parabolicity of the submanifold described by a constellation.
    Classify(ClassifyArgs),
    /// Classify over a range of p and write one CSV row per p.
    Sweep(SweepArgs),
    /// Drifted capacity of an annulus, with the exact model capacity when available.
    Capacity(CapacityArgs),
    /// Tabulate the closed-form and ODE Dirichlet solutions.
    Solve(SolveArgs),
    /// Monte Carlo hitting probability of the radial diffusion.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    /// Lower- or upper-tangency criterion, chosen by the constellation.
    Tangency,
    /// Upper tangency with `w` bounded below by a positive constant.
    BoundedW,
    /// Monotonicity in p from a smaller exponent `q`.
    Monotone,
}

/// Tolerances of the hypothesis grid and of the tail classifier.
#[derive(Debug, Clone, Args)]
pub struct Tolerances {
    /// Largest radius examined; defaults to rho * 2^k_max.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Number of horizon doublings.
    #[arg(long, default_value_t = TailConfig::default().k_max)]
    pub k_max: u32,
    /// Cauchy threshold on relative increments of the tail.
    #[arg(long, default_value_t = TailConfig::default().conv_eps)]
    pub conv_eps: f64,
    /// Half-width of the undecidable band around exponent -1.
    #[arg(long, default_value_t = TailConfig::default().exp_band)]
    pub exp_band: f64,
    /// Relative tolerance of each horizon's quadrature.
    #[arg(long, default_value_t = TailConfig::default().rel_tol)]
    pub rel_tol: f64,
    /// Points of the hypothesis grid.
    #[arg(long, default_value_t = ClassifyConfig::default().grid_size)]
    pub grid_size: usize,
    /// The hypothesis grid starts at min(rho, grid_floor).
    #[arg(long, default_value_t = ClassifyConfig::default().grid_floor)]
    pub grid_floor: f64,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Constellation file (JSON).
    pub config: PathBuf,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = CriterionArg::Tangency)]
    pub criterion: CriterionArg,
    /// Radius from which `w >= w_lower` is checked (bounded-w).
    #[arg(long, default_value_t = 1.0)]
    pub r0: f64,
    /// Claimed lower bound of `w` (bounded-w).
    #[arg(long)]
    pub w_lower: Option<f64>,
    /// Smaller exponent of the monotone criterion.
    #[arg(long)]
    pub q: Option<f64>,
    #[command(flatten)]
    pub tol: Tolerances,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub p_from: f64,
    #[arg(long)]
    pub p_to: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p_step: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub tol: Tolerances,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Outer radius of the annulus.
    #[arg(long = "R", alias = "big-r")]
    pub big_r: f64,
    /// Boundary flux of the submanifold at rho, used by the upper bound.
    #[arg(long, default_value_t = 1.0)]
    pub flux: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long = "R", alias = "big-r")]
    pub big_r: f64,
    /// Equally spaced output radii, endpoints included.
    #[arg(long, default_value_t = 21)]
    pub samples: usize,
    /// Minimum number of RK4 steps of the ODE solver.
    #[arg(long, default_value_t = 4000)]
    pub steps: usize,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub r0: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rin: f64,
    #[arg(long, default_value_t = 8.0)]
    pub rout: f64,
    #[arg(long, default_value_t = 20_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Paths still inside the annulus at this time are censored.
    #[arg(long, default_value_t = 1e3)]
    pub max_time: f64,
    /// Only check the barriers at grid times.
    #[arg(long)]
    pub no_bridge: bool,
    #[arg(long)]
    pub json: bool,
}
