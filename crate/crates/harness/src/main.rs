use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dnls_harness::{experiments, output, validate, Experiment, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "dnls", version, about = "Damped lattice breather experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Site energy ladder of a four-site chain.
    Fig1Energies(Flags),
    /// Downcrossing times and the modulation fit.
    Fig3Crossings(Flags),
    /// Decay exponent of the l2 norm.
    Fig4Decay(Flags),
    /// Real-part slopes of the damped spectrum.
    Fig5Spectrum(Flags),
    /// Exact perturbation series against Newton.
    BreatherTable(Flags),
    /// Linearization spectrum, Jordan chain and adjoint frame.
    SpectrumReport(Flags),
    /// Check a configuration without running it.
    Validate {
        #[arg(value_enum)]
        experiment: Experiment,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Chain lengths, comma separated.
    #[arg(long)]
    n_sites: Option<String>,
    /// Coupling values, comma separated.
    #[arg(long)]
    epsilon: Option<String>,
    /// Damping values, comma separated.
    #[arg(long)]
    gamma: Option<String>,
    /// `absolute` or `relative` (gamma times epsilon).
    #[arg(long)]
    gamma_convention: Option<String>,
    #[arg(long)]
    t_end: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// `breather` or `site-one`.
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file applied after the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn build(experiment: Experiment, flags: &Flags) -> Result<ExperimentConfig, HarnessError> {
    let mut config = ExperimentConfig::defaults(experiment);
    let pairs = [
        ("n_sites", &flags.n_sites),
        ("epsilon", &flags.epsilon),
        ("gamma", &flags.gamma),
        ("gamma_convention", &flags.gamma_convention),
        ("t_end", &flags.t_end),
        ("dt", &flags.dt),
        ("seed", &flags.seed),
        ("initial", &flags.initial),
    ];
    for (key, value) in pairs {
        if let Some(v) = value {
            config.set(key, v)?;
        }
    }
    if let Some(out) = &flags.out {
        config.output_dir = out.clone();
    }
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        config.apply_file(&text)?;
    }
    config.validate()?;
    Ok(config)
}

fn run(experiment: Experiment, flags: &Flags) -> Result<i32, HarnessError> {
    let config = build(experiment, flags)?;
    let report = experiments::run(&config)?;
    output::write_report(&config, &report)?;
    print!("{}", output::summary(&report));
    Ok(output::exit_code(&report))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fig1Energies(f) => run(Experiment::Fig1Energies, f),
        Command::Fig3Crossings(f) => run(Experiment::Fig3Crossings, f),
        Command::Fig4Decay(f) => run(Experiment::Fig4Decay, f),
        Command::Fig5Spectrum(f) => run(Experiment::Fig5Spectrum, f),
        Command::BreatherTable(f) => run(Experiment::BreatherTable, f),
        Command::SpectrumReport(f) => run(Experiment::SpectrumReport, f),
        Command::Validate { experiment, flags } => build(*experiment, flags).map(|config| {
            print!("{}", validate::validate(&config).render());
            0
        }),
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
