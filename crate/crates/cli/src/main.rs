mod args;
mod commands;
mod config;
mod error;
mod specs;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;

use args::{Cli, Command};
use config::{Config, Globals};
use error::CliError;

fn merged<T: Serialize + DeserializeOwned>(flags: &T, cfg: &mut Config) -> Result<T, CliError> {
    config::merge(flags, std::mem::take(&mut cfg.args))
}

fn dispatch(command: &Command, cfg: &mut Config, seed: u64) -> Result<String, CliError> {
    use commands as c;
    match command {
        Command::WeightCheck(a) => c::weight_check(&merged(a, cfg)?),
        Command::LuxNorm(a) => c::lux_norm(&merged(a, cfg)?),
        Command::Legendre(a) => c::legendre(&merged(a, cfg)?),
        Command::RadialForward(a) => c::radial_forward(&merged(a, cfg)?),
        Command::RadialInverse(a) => c::radial_inverse(&merged(a, cfg)?),
        Command::RadialIntegrability(a) => c::radial_integrability(&merged(a, cfg)?),
        Command::Rigidity(a) => c::rigidity(&merged(a, cfg)?),
        Command::ConstructChi(a) => c::construct_chi_cmd(&merged(a, cfg)?),
        Command::TrickConstant(a) => c::trick_constant_cmd(&merged(a, cfg)?),
        Command::SolveMa(a) => c::solve_ma(&merged(a, cfg)?, seed),
        Command::MoserTrace(a) => c::moser_trace_cmd(&merged(a, cfg)?, seed),
        Command::EnergyCheck(a) => c::energy_check(&merged(a, cfg)?, seed),
        Command::Skoda(a) => c::skoda(&merged(a, cfg)?),
        Command::Envelope(a) => c::envelope(&merged(a, cfg)?, seed),
        Command::ReductionCheck(a) => c::reduction(&merged(a, cfg)?, seed),
        Command::BetaBounds(a) => c::beta_bounds(&merged(a, cfg)?, seed),
        Command::OperatorCheck(a) => c::operator_check(&merged(a, cfg)?, seed),
        Command::Domination(a) => c::domination(&merged(a, cfg)?, seed),
        Command::OscExperiment(a) => c::osc(&merged(a, cfg)?),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let name = cli.command.name();
    let mut cfg = match &cli.config {
        Some(path) => config::load(path, name)?,
        None => Config::default(),
    };
    let globals = Globals {
        seed: cli.seed.or(cfg.globals.seed),
        jobs: cli.jobs.map(|j| j as usize).or(cfg.globals.jobs),
        output: cli.output.clone().or_else(|| cfg.globals.output.clone()),
    };
    let seed = config::resolve_seed(globals.seed, None)?;
    if let Some(jobs) = globals.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
    }
    let text = dispatch(&cli.command, &mut cfg, seed)?;
    let io = |e: std::io::Error| CliError::Domain(ma_lab_core::error::LabError::Io(e.to_string()));
    match &globals.output {
        Some(path) => std::fs::write(path, text).map_err(io)?,
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(io)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
