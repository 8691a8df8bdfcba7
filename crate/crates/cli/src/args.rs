use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Two-terminal connectivity of weighted networks under classical and
/// concurrence percolation rules.
///
/// All link angles on the command line are in units of pi/4, so 1.0 is a
/// perfect link.
#[derive(Debug, Parser)]
#[command(name = "qperc", version, about)]
pub struct Cli {
    /// Worker threads for sweeps and realizations (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a network and write it as JSON.
    Generate(GenerateArgs),
    /// Evaluate a network over a grid of uniform link angles (CSV).
    Sweep(SweepArgs),
    /// Reduce a network with its own link weights (JSON).
    Reduce(ReduceArgs),
    /// Half-point threshold of a topology or network file (JSON).
    Threshold(ThresholdArgs),
    /// Closed-form and scaling analyses (JSON).
    Analyze(AnalyzeArgs),
    /// Exact classical connectivity by subset enumeration (JSON).
    Oracle(OracleArgs),
    /// Fit cutoff-length scaling to decay curves from a file (JSON).
    Scaling(ScalingArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Bethe,
    Square,
    Honeycomb,
    Triangular,
    Er,
    Ba,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum System {
    Classical,
    Concurrence,
}

impl From<System> for qperc::RuleSystem {
    fn from(s: System) -> Self {
        match s {
            System::Classical => qperc::RuleSystem::Classical,
            System::Concurrence => qperc::RuleSystem::Concurrence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMethod {
    ExactSp,
    StarMesh,
    ParallelApprox,
    ExactClassical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReduceMethod {
    Sp,
    StarMesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMethod {
    ExactSp,
    ParallelApprox,
    BetheRecursion,
}

/// Topology selection shared by `generate` and `threshold`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct TopologyArgs {
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Bethe coordination number.
    #[arg(long)]
    pub k: Option<usize>,
    /// Bethe depth.
    #[arg(long = "L")]
    pub layers: Option<usize>,
    /// Lattice side length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Node count of random networks.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Mean degree of Erdos-Renyi networks.
    #[arg(long)]
    pub kbar: Option<f64>,
    /// Links attached per new Barabasi-Albert node.
    #[arg(long)]
    pub z: Option<usize>,
    /// Base seed of random networks.
    #[arg(long, env = "QPERC_SEED", default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub topology: TopologyArgs,
    /// Uniform link angle, units of pi/4.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Output JSON network file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Network JSON file.
    #[arg(long)]
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = System::Concurrence)]
    pub system: System,
    #[arg(long, value_enum, default_value_t = SweepMethod::ExactSp)]
    pub method: SweepMethod,
    /// Number of grid points.
    #[arg(long, default_value_t = 51)]
    pub points: usize,
    /// First grid angle, units of pi/4.
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    /// Last grid angle, units of pi/4.
    #[arg(long, default_value_t = 1.0)]
    pub to: f64,
    /// Shortest length classes kept by parallel-approx.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReduceArgs {
    #[arg(long)]
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = System::Concurrence)]
    pub system: System,
    #[arg(long, value_enum, default_value_t = ReduceMethod::Sp)]
    pub method: ReduceMethod,
    /// Include the reduction steps in the output.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub topology: TopologyArgs,
    /// Network JSON file instead of a generated topology.
    #[arg(long, conflicts_with = "family")]
    pub file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = System::Concurrence)]
    pub system: System,
    #[arg(long, value_enum, default_value_t = ThresholdMethod::ParallelApprox)]
    pub method: ThresholdMethod,
    /// Shortest length classes per terminal pair (parallel-approx only;
    /// omit for the full ensemble of Bethe trees).
    #[arg(long)]
    pub m: Option<usize>,
    /// Realizations of random topologies, seeded from `--seed` upward.
    #[arg(long, default_value_t = 1)]
    pub realizations: usize,
    /// Paths enumerated per terminal pair before giving up (0: no limit).
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: u64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(subcommand)]
    pub what: Analysis,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "analysis", rename_all = "kebab-case")]
pub enum Analysis {
    /// Bethe-lattice thresholds, saturation point and lattice reference values.
    Thresholds {
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Cutoff-length exponent of Bethe trees near threshold.
    Scaling {
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, value_enum, default_value_t = System::Concurrence)]
        system: System,
        #[arg(long, default_value_t = 1e-6)]
        dmin: f64,
        #[arg(long, default_value_t = 1e-4)]
        dmax: f64,
        #[arg(long, default_value_t = 5)]
        distances: usize,
        #[arg(long, default_value_t = 1e3)]
        lmin: f64,
        #[arg(long, default_value_t = 1e5)]
        lmax: f64,
    },
    /// Critical point of n interdependent Erdos-Renyi layers.
    Interdep {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 4.0)]
        kbar: f64,
        /// Also sweep p in both directions on this many points.
        #[arg(long)]
        sweep: Option<usize>,
    },
    /// Percolation exponents of scale-free networks.
    Exponents {
        #[arg(long)]
        lambda: f64,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    #[arg(long)]
    pub file: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ScalingArgs {
    /// JSON list of curves `{distance, lengths, values}`.
    #[arg(long)]
    pub file: PathBuf,
    /// Exponent `a` in `value ~ l^-a exp(-l/l*)`.
    #[arg(long, default_value_t = 0.5)]
    pub prefactor: f64,
    #[arg(long, default_value_t = 1e3)]
    pub lmin: f64,
    #[arg(long, default_value_t = 1e5)]
    pub lmax: f64,
}
