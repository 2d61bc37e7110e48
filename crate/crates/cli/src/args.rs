//! Command-line and config arguments of every subcommand.
//!
//! Each field is a long flag (`--sigma-cut`) and a config key (`sigma_cut`).
//! Fields are optional so that configs can supply them; required values are
//! checked when the command runs.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::specs::{operator_arg, weight_arg, OperatorArg, WeightArg};

#[derive(Debug, Parser)]
#[command(
    name = "ma-lab",
    version,
    about = "Numerical laboratory for complex Monge-Ampere equations with Orlicz densities"
)]
pub struct Cli {
    /// JSON config for the subcommand (see schema/experiment.schema.json); flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// RNG seed for generated inputs [default: $MA_LAB_SEED, else 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sweeps [default: all cores]
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    /// Write the main output to this file instead of stdout
    #[arg(long, short, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify an Orlicz weight under condition (K) and summarize its tail
    WeightCheck(WeightArgs),
    /// Luxembourg norm of a density sample under a weight
    LuxNorm(LuxNormArgs),
    /// Tabulate the convex conjugate of a weight
    Legendre(LegendreArgs),
    /// Radial density of a convex profile, as ln F on t = -e^sigma
    RadialForward(RadialForwardArgs),
    /// Recover a radial profile from a named radial density
    RadialInverse(RadialInverseArgs),
    /// Truncated integrability functional of a profile with a power tail
    RadialIntegrability(RadialIntegrabilityArgs),
    /// Rigidity integrals and boundedness study of a radial profile
    Rigidity(RigidityArgs),
    /// Construct the auxiliary function chi for a power tail
    ConstructChi(ConstructChiArgs),
    /// Constant of the logarithmic trick
    TrickConstant(TrickConstantArgs),
    /// Solve the complex Monge-Ampere equation on a torus grid
    SolveMa(SolveMaArgs),
    /// Norms of a potential along the Moser exponent schedule, as CSV
    MoserTrace(MoserTraceArgs),
    /// Discrete energy inequality for a solution with sup = -1
    EnergyCheck(EnergyCheckArgs),
    /// Skoda integrals of a potential over a range of exponents
    Skoda(SkodaArgs),
    /// Quasi-psh envelope of an obstacle
    Envelope(EnvelopeArgs),
    /// Contact-set reduction from a g-equation to a Monge-Ampere bound (n = 1)
    ReductionCheck(ReductionCheckArgs),
    /// Bounds for the integral of the beta cutoff against a density
    BetaBounds(BetaBoundsArgs),
    /// Sample the structural conditions of an operator g
    OperatorCheck(OperatorCheckArgs),
    /// Minimum-point check of the domination principle
    Domination(DominationArgs),
    /// Oscillation sweep over a density family, as CSV
    OscExperiment(OscExperimentArgs),
}

impl Command {
    /// Subcommand name as used on the command line and in configs.
    pub fn name(&self) -> &'static str {
        match self {
            Command::WeightCheck(_) => "weight-check",
            Command::LuxNorm(_) => "lux-norm",
            Command::Legendre(_) => "legendre",
            Command::RadialForward(_) => "radial-forward",
            Command::RadialInverse(_) => "radial-inverse",
            Command::RadialIntegrability(_) => "radial-integrability",
            Command::Rigidity(_) => "rigidity",
            Command::ConstructChi(_) => "construct-chi",
            Command::TrickConstant(_) => "trick-constant",
            Command::SolveMa(_) => "solve-ma",
            Command::MoserTrace(_) => "moser-trace",
            Command::EnergyCheck(_) => "energy-check",
            Command::Skoda(_) => "skoda",
            Command::Envelope(_) => "envelope",
            Command::ReductionCheck(_) => "reduction-check",
            Command::BetaBounds(_) => "beta-bounds",
            Command::OperatorCheck(_) => "operator-check",
            Command::Domination(_) => "domination",
            Command::OscExperiment(_) => "osc-experiment",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightArgs {
    /// Weight family: powerp, logp, loglogp or tabulated
    #[arg(long)]
    pub family: Option<String>,
    /// Exponent p [default: 1]
    #[arg(long)]
    pub p: Option<f64>,
    /// Dimension n [default: 1]
    #[arg(long)]
    pub n: Option<u32>,
    /// CSV of (t, w(t)) samples for the tabulated family
    #[arg(long, value_name = "PATH")]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LuxNormArgs {
    /// Density sample CSV with header f,m (required)
    #[arg(long, value_name = "PATH")]
    pub density: Option<PathBuf>,
    /// Weight family [default: powerp]
    #[arg(long)]
    pub family: Option<String>,
    /// Exponent p [default: 1]
    #[arg(long)]
    pub p: Option<f64>,
    /// Dimension n [default: 1]
    #[arg(long)]
    pub n: Option<u32>,
    /// CSV of (t, w(t)) samples for the tabulated family
    #[arg(long, value_name = "PATH")]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegendreArgs {
    /// Weight family (required)
    #[arg(long)]
    pub family: Option<String>,
    /// Exponent p [default: 1]
    #[arg(long)]
    pub p: Option<f64>,
    /// Dimension n [default: 1]
    #[arg(long)]
    pub n: Option<u32>,
    /// CSV of (t, w(t)) samples for the tabulated family
    #[arg(long, value_name = "PATH")]
    pub table: Option<PathBuf>,
    /// Largest slope s [default: w'(10)]
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Number of slopes, uniform on [0, s_max] [default: 11]
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialForwardArgs {
    /// Named profile: exponential, linear or triple-log [default: triple-log]
    #[arg(long, conflicts_with = "profile_csv")]
    pub profile: Option<String>,
    /// Sampled profile CSV with columns t,chi,chi1,chi2
    #[arg(long, value_name = "PATH")]
    pub profile_csv: Option<PathBuf>,
    /// Complex dimension n [default: 2]
    #[arg(long)]
    pub n: Option<u32>,
    /// Smallest sigma = ln|t| [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_min: Option<f64>,
    /// Largest sigma [default: 10]
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_max: Option<f64>,
    /// Number of sigma samples [default: 11]
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialInverseArgs {
    /// Named density: exponential, triple-log or exp-nt (F = e^{nt}) (required)
    #[arg(long)]
    pub density: Option<String>,
    /// Complex dimension n [default: 2]
    #[arg(long)]
    pub n: Option<u32>,
    /// Smallest sigma = ln|t| of the output samples [default: -1]
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_min: Option<f64>,
    /// Largest sigma [default: 5]
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_max: Option<f64>,
    /// Number of sigma samples, plus t = 0 [default: 13]
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialIntegrabilityArgs {
    /// Named profile [default: triple-log]
    #[arg(long, conflicts_with = "profile_csv")]
    pub profile: Option<String>,
    /// Sampled profile CSV with columns t,chi,chi1,chi2
    #[arg(long, value_name = "PATH")]
    pub profile_csv: Option<PathBuf>,
    /// Complex dimension n [default: 2]
    #[arg(long)]
    pub n: Option<u32>,
    /// Tail h(s) = s^e [default: 0.5]
    #[arg(long)]
    pub h_exponent: Option<f64>,
    /// Cutoff sigma_T = ln|T| [default: 600, or the end of a sampled profile]
    #[arg(long)]
    pub sigma_cut: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidityArgs {
    /// Named profile [default: triple-log]
    #[arg(long, conflicts_with = "profile_csv")]
    pub profile: Option<String>,
    /// Sampled profile CSV with columns t,chi,chi1,chi2
    #[arg(long, value_name = "PATH")]
    pub profile_csv: Option<PathBuf>,
    /// Complex dimension n [default: 2]
    #[arg(long)]
    pub n: Option<u32>,
    /// Log power p [default: n]
    #[arg(long)]
    pub p: Option<f64>,
    /// Cutoff sigma_T = ln|T| [default: 10]
    #[arg(long)]
    pub sigma_cut: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructChiArgs {
    /// Tail h(s) = s^e [default: 2]
    #[arg(long)]
    pub h_exponent: Option<f64>,
    /// alpha [default: 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// c [default: 1]
    #[arg(long)]
    pub c: Option<f64>,
    /// Dimension n [default: 1]
    #[arg(long)]
    pub n: Option<u32>,
    /// B [default: smallest admissible of 4, 8, 16, ...]
    #[arg(long = "b")]
    pub b: Option<f64>,
    /// Include the tabulated chi in the output
    #[arg(long)]
    #[serde(default)]
    pub with_table: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrickConstantArgs {
    /// a (required)
    #[arg(long)]
    pub a: Option<f64>,
    /// b (required)
    #[arg(long = "b")]
    pub b: Option<f64>,
    /// delta (required)
    #[arg(long)]
    pub delta: Option<f64>,
    /// gamma (required)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Skoda-type constant C1 (required)
    #[arg(long)]
    pub c1: Option<f64>,
    /// ||f||_p (required)
    #[arg(long)]
    pub fp_norm: Option<f64>,
    /// Dimension n [default: 1]
    #[arg(long)]
    pub n: Option<u32>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveMaArgs {
    /// Density field in the binary grid format [default: seeded random density]
    #[arg(long, value_name = "PATH")]
    pub density: Option<PathBuf>,
    /// Complex dimension of the generated grid [default: 1]
    #[arg(long)]
    pub n: Option<usize>,
    /// Points per axis of the generated grid [default: 32 for n = 1, 8 for n = 2]
    #[arg(long)]
    pub size: Option<usize>,
    /// Fourier modes of the generated density [default: 3]
    #[arg(long)]
    pub modes: Option<usize>,
    /// Amplitude of the generated density, in [0, 1) [default: 0.5]
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Newton tolerance [default: 1e-10 for n = 1, 1e-7 for n = 2]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Newton iteration cap [default: 50]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Write the solution (sup = 0) in the binary grid format
    #[arg(long, value_name = "PATH")]
    pub phi_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoserTraceArgs {
    /// Potential in the binary grid format [default: solution for a seeded random density]
    #[arg(long, value_name = "PATH")]
    pub phi: Option<PathBuf>,
    /// Complex dimension of the generated grid [default: 2]
    #[arg(long)]
    pub n: Option<usize>,
    /// Points per axis of the generated grid [default: 8]
    #[arg(long)]
    pub size: Option<usize>,
    /// Fourier modes of the generated density [default: 3]
    #[arg(long)]
    pub modes: Option<usize>,
    /// Amplitude of the generated density [default: 0.5]
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Dimension of the exponent schedule, >= 2 [default: grid dimension, at least 2]
    #[arg(long)]
    pub schedule_n: Option<u32>,
    /// Density exponent p > n of the schedule [default: 3]
    #[arg(long)]
    pub p: Option<f64>,
    /// Number of schedule steps [default: 20]
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyCheckArgs {
    /// Potential with sup <= -1 in the binary grid format (needs --density)
    #[arg(long, value_name = "PATH", requires = "density")]
    pub phi: Option<PathBuf>,
    /// Density field in the binary grid format [default: seeded random density]
    #[arg(long, value_name = "PATH")]
    pub density: Option<PathBuf>,
    /// Complex dimension of the generated grid [default: 1]
    #[arg(long)]
    pub n: Option<usize>,
    /// Points per axis of the generated grid [default: 32 for n = 1, 8 for n = 2]
    #[arg(long)]
    pub size: Option<usize>,
    /// Fourier modes of the generated density [default: 3]
    #[arg(long)]
    pub modes: Option<usize>,
    /// Amplitude of the generated density [default: 0.5]
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Exponent r [default: 1]
    #[arg(long)]
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkodaArgs {
    /// Potential with sup = 0 in the binary grid format [default: log distance to --center]
    #[arg(long, value_name = "PATH")]
    pub phi: Option<PathBuf>,
    /// Complex dimension of the generated grid [default: 1]
    #[arg(long)]
    pub n: Option<usize>,
    /// Points per axis of the generated grid [default: 64 for n = 1, 16 for n = 2]
    #[arg(long)]
    pub size: Option<usize>,
    /// Pole of the log distance field, one coordinate per real axis [default: 1/(2 size) on every axis]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    /// Exponents alpha, comma separated [default: 0.5,1,1.5,2,2.5]
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Cap for the admissible exponents [default: 1e6]
    #[arg(long)]
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeArgs {
    /// Obstacle in the binary grid format [default: seeded random obstacle]
    #[arg(long, value_name = "PATH")]
    pub obstacle: Option<PathBuf>,
    /// Complex dimension of the generated grid [default: 1]
    #[arg(long)]
    pub n: Option<usize>,
    /// Points per axis of the generated grid [default: 16 for n = 1, 8 for n = 2]
    #[arg(long)]
    pub size: Option<usize>,
    /// Fourier modes of the generated obstacle [default: 3]
    #[arg(long)]
    pub modes: Option<usize>,
    /// Amplitude of the generated obstacle [default: 0.1]
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Complementarity tolerance [default: 1e-10]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Sweep cap [default: 200000]
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// Write the envelope in the binary grid format
    #[arg(long, value_name = "PATH")]
    pub psi_out: Option<PathBuf>,
    /// Write the JSON mask summary next to --psi-out [default: <psi-out>.json]
    #[arg(long, value_name = "PATH", requires = "psi_out")]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionCheckArgs {
    /// Density field (n = 1) in the binary grid format [default: seeded random density]
    #[arg(long, value_name = "PATH")]
    pub density: Option<PathBuf>,
    /// Points per axis of the generated grid [default: 16]
    #[arg(long)]
    pub size: Option<usize>,
    /// Fourier modes of the generated density [default: 3]
    #[arg(long)]
    pub modes: Option<usize>,
    /// Amplitude of the generated density [default: 0.5]
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Operator as kind[:k=K][:n=N][:delta=D] [default: arithmetic]
    #[arg(long, value_parser = operator_arg)]
    pub operator: Option<OperatorArg>,
    /// Majorization constant [default: the operator's delta]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Residual tolerance of the g-equation [default: 1e-8]
    #[arg(long)]
    pub g_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaBoundsArgs {
    /// Density field in the binary grid format [default: seeded random density]
    #[arg(long, value_name = "PATH")]
    pub density: Option<PathBuf>,
    /// Complex dimension of the generated grid [default: 1]
    #[arg(long)]
    pub n: Option<usize>,
    /// Points per axis of the generated grid [default: 32 for n = 1, 8 for n = 2]
    #[arg(long)]
    pub size: Option<usize>,
    /// Fourier modes of the generated density [default: 3]
    #[arg(long)]
    pub modes: Option<usize>,
    /// Amplitude of the generated density [default: 0.5]
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Multiplier applied to the solution before the check [default: 3]
    #[arg(long)]
    pub scale: Option<f64>,
    /// Tail h(s) = s^e [default: 2]
    #[arg(long)]
    pub h_exponent: Option<f64>,
    /// delta [default: 1]
    #[arg(long)]
    pub delta: Option<f64>,
    /// c [default: 1]
    #[arg(long)]
    pub c: Option<f64>,
    /// Volume of the domain [default: 1]
    #[arg(long)]
    pub v_omega: Option<f64>,
    /// lambda [default: chosen together with M]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Cutoff level M [default: chosen together with lambda]
    #[arg(long = "m")]
    pub m: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorCheckArgs {
    /// Operator as kind[:k=K][:n=N][:delta=D] (required)
    #[arg(long, value_parser = operator_arg)]
    pub operator: Option<OperatorArg>,
    /// Number of random samples [default: 2000]
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DominationArgs {
    /// First potential in the binary grid format (needs --psi) [default: seeded random]
    #[arg(long, value_name = "PATH", requires = "psi")]
    pub phi: Option<PathBuf>,
    /// Second potential in the binary grid format
    #[arg(long, value_name = "PATH", requires = "phi")]
    pub psi: Option<PathBuf>,
    /// Complex dimension of the generated grid [default: 1]
    #[arg(long)]
    pub n: Option<usize>,
    /// Points per axis of the generated grid [default: 32 for n = 1, 8 for n = 2]
    #[arg(long)]
    pub size: Option<usize>,
    /// Fourier modes of the generated potentials [default: 3]
    #[arg(long)]
    pub modes: Option<usize>,
    /// Amplitude of the generated potentials [default: 0.005]
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Operator as kind[:k=K][:n=N][:delta=D] [default: arithmetic in the grid dimension]
    #[arg(long, value_parser = operator_arg)]
    pub operator: Option<OperatorArg>,
    /// Constant c in [0, 1) [default: 0.5]
    #[arg(long)]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscExperimentArgs {
    /// Exponent a of the family (sin^2(pi x1) + eps)^{-a} [default: 0.4]
    #[arg(long = "a")]
    pub a: Option<f64>,
    /// Family parameters, comma separated [default: 0.1,0.01,0.001]
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Weights as family:p=P:n=N, comma separated [default: powerp:p=2,logp:p=2:n=1]
    #[arg(long, value_delimiter = ',', value_parser = weight_arg)]
    pub weights: Option<Vec<WeightArg>>,
    /// Exponent of the reported norm of f, inf for the sup norm [default: inf]
    #[arg(long)]
    pub p: Option<f64>,
    /// Complex dimension [default: 1]
    #[arg(long)]
    pub n: Option<usize>,
    /// Smallest points per axis; n = 1 grids refine to resolve sqrt(eps) [default: 32 for n = 1, 8 for n = 2]
    #[arg(long)]
    pub base_size: Option<usize>,
}
