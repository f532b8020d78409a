use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "dropcap",
    about = "Equilibrium measures, capacities and charged-drop energies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Json)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementArg {
    /// Boundary nodes for alpha >= 2, volume nodes otherwise.
    Auto,
    Boundary,
    Volume,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimal energy and capacity of a shape.
    Capacity(SolveArgs),
    /// Equilibrium measure with nodal masses, far-field and support diagnostics.
    Equilibrium(EquilibriumArgs),
    /// Zero-charge optimum in a linear external potential (alpha = 2, N >= 3).
    ExternalField(FieldArgs),
    /// Entropic functional J and G = Per + Q^2 J (N = 3).
    Entropic(EntropicArgs),
    /// Drop energy Per + Q^2 times the minimal energy.
    Energy(EnergyArgs),
    /// Competitor families whose energies decrease without bound or toward the ball.
    #[command(subcommand)]
    Family(FamilyCommand),
    /// Perimeter expansions and charge-threshold scans.
    #[command(subcommand)]
    Stability(StabilityCommand),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Capacity(_) => "capacity",
            Command::Equilibrium(_) => "equilibrium",
            Command::ExternalField(_) => "external-field",
            Command::Entropic(_) => "entropic",
            Command::Energy(_) => "energy",
            Command::Family(FamilyCommand::ManyBalls(_)) => "family many-balls",
            Command::Family(FamilyCommand::TwoBalls(_)) => "family two-balls",
            Command::Family(FamilyCommand::Slab(_)) => "family slab",
            Command::Stability(StabilityCommand::Fuglede(_)) => "stability fuglede",
            Command::Stability(StabilityCommand::Rayleigh(_)) => "stability rayleigh",
            Command::Stability(StabilityCommand::LemmaRatio(_)) => "stability lemma-ratio",
            Command::Stability(StabilityCommand::Convex2d(_)) => "stability convex-2d",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ShapeArg {
    /// Shape JSON: a file path, or an inline document starting with '{'.
    #[arg(long)]
    pub shape: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: ShapeArg,
    /// Ambient dimension; must match the shape.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Riesz exponent in (0, N]; alpha = N selects the logarithmic kernel.
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// Target number of nodes.
    #[serde(rename = "M")]
    #[arg(long = "M", default_value_t = 1000)]
    pub m: usize,
    /// Relative solver tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = PlacementArg::Auto)]
    pub placement: PlacementArg,
    /// Active-set iteration cap.
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Projected-gradient iterations tried after the active set stalls.
    #[arg(long, default_value_t = 3000)]
    pub fallback_iter: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EquilibriumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub solve: SolveArgs,
    /// Radii for the far-field check, increasing.
    #[arg(long, value_delimiter = ',')]
    pub farfield: Vec<f64>,
    /// Radial shell edges about the shape anchor for the support profile;
    /// masses per connected component are always reported.
    #[arg(long, value_delimiter = ',')]
    pub shells: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FieldArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: ShapeArg,
    /// Constant field vector E; the potential is phi(x) = -E.x.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    pub field: Vec<f64>,
    #[serde(rename = "M")]
    #[arg(long = "M", default_value_t = 1000)]
    pub m: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EntropicArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: ShapeArg,
    #[serde(rename = "Q")]
    #[arg(long = "Q", default_value_t = 1.0)]
    pub q: f64,
    #[serde(rename = "M")]
    #[arg(long = "M", default_value_t = 1000)]
    pub m: usize,
    /// Radial bins of the CSV density profile.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnergyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub solve: SolveArgs,
    #[serde(rename = "Q")]
    #[arg(long = "Q", default_value_t = 1.0)]
    pub q: f64,
}

#[derive(Debug, Subcommand)]
pub enum FamilyCommand {
    /// A large ball plus n small balls sharing the charge.
    ManyBalls(ManyBallsArgs),
    /// Two balls at distance 2n in a constant field.
    TwoBalls(FieldFamilyArgs),
    /// Slabs of growing length in a constant field.
    Slab(FieldFamilyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ManyBallsArgs {
    /// Small-ball radius exponent: r = n^-beta.
    #[arg(long)]
    pub beta: f64,
    #[serde(rename = "Q")]
    #[arg(long = "Q", default_value_t = 1.0)]
    pub q: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// Nodes per ball for the unit-ball energy and numeric checks.
    #[serde(rename = "M")]
    #[arg(long = "M", default_value_t = 800)]
    pub m: usize,
    /// Center spacing of the small balls; enables the numeric energy.
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FieldFamilyArgs {
    /// Field strength along e1.
    #[arg(long, default_value_t = 1.0)]
    pub field: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[serde(rename = "M")]
    #[arg(long = "M", default_value_t = 400)]
    pub m: usize,
}

#[derive(Debug, Subcommand)]
pub enum StabilityCommand {
    /// Perimeter of r = 1 + eps phi against its second-order expansion.
    Fuglede(FugledeArgs),
    /// Energy of ball perturbations by a single degree-l mode over a charge grid.
    Rayleigh(RayleighArgs),
    /// Energy deficit over perimeter deficit on random nearly spherical sets.
    LemmaRatio(LemmaArgs),
    /// Ranking of equal-area planar convex shapes under the logarithmic kernel.
    #[command(name = "convex-2d")]
    Convex2d(ConvexArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FugledeArgs {
    /// Coefficients as l:m:value, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    pub coeffs: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05, 0.025, 0.0125])]
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RayleighArgs {
    #[arg(long, default_value_t = 2)]
    pub l: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-0.1, 0.0, 0.1])]
    pub amplitudes: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub charges: Vec<f64>,
    #[serde(rename = "M")]
    #[arg(long = "M", default_value_t = 1000)]
    pub m: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LemmaArgs {
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.1)]
    pub eps_max: f64,
    #[serde(rename = "M")]
    #[arg(long = "M", value_delimiter = ',', default_values_t = [1000, 2000])]
    pub m: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConvexArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0, 2.0])]
    pub charges: Vec<f64>,
    /// Vertex counts of the regular polygons.
    #[arg(long, value_delimiter = ',', default_values_t = [3, 4, 6, 8, 12])]
    pub regular: Vec<usize>,
    /// Number of random convex polygons.
    #[arg(long, default_value_t = 8)]
    pub random: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[serde(rename = "M")]
    #[arg(long = "M", default_value_t = 600)]
    pub m: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}
