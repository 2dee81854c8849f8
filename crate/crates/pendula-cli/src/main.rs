use clap::{Parser, Subcommand as ClapSubcommand};
use pendula::experiments::Engine;
use pendula_cli::{dispatch, parse_config, Config, DispatchError, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulator and analysis toolkit for two magnetically coupled pendula
/// behaving as a driven two-level system.
#[derive(Parser)]
#[command(name = "pendula", version, about)]
struct Cli {
    /// Configuration file; omitted means the published apparatus defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV artifacts and manifests.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Engine override: newton-nonlinear, newton-linear or schrodinger.
    #[arg(long, global = true)]
    engine: Option<String>,

    /// Worker threads for grid runs; 0 keeps the default.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Suppress progress output.
    #[arg(long, global = true, default_value_t = false)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Integrate one run and export the raw trajectory or envelope.
    Simulate,
    /// Scan the detuning and measure beat frequency and visibility.
    Rabi,
    /// One drive period through the avoided crossing.
    Lz,
    /// Interference fan over mean coupling and amplitude.
    LzsmFan,
    /// Static attractive/repulsive and driven spectra side by side.
    Spectra,
    /// Linearized mechanical spectrum against the shifted envelope one.
    Eigencheck,
}

fn load_config(cli: &Cli) -> Result<Config, DispatchError> {
    let mut config = match &cli.config {
        None => Config::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                DispatchError::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            parse_config(&text).map_err(|e| DispatchError::Config(e.to_string()))?
        }
    };
    if let Some(engine) = &cli.engine {
        config.run.engine =
            Engine::parse(engine).map_err(|e| DispatchError::Config(e.to_string()))?;
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), DispatchError> {
    let config = load_config(cli)?;
    let sub = match cli.command {
        Command::Simulate => Subcommand::Simulate,
        Command::Rabi => Subcommand::Rabi,
        Command::Lz => Subcommand::Lz,
        Command::LzsmFan => Subcommand::LzsmFan,
        Command::Spectra => Subcommand::Spectra,
        Command::Eigencheck => Subcommand::Eigencheck,
    };
    let go = || dispatch(sub, &config, &cli.out, cli.quiet).map(|_| ());
    if cli.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build()
            .map_err(|e| DispatchError::Config(format!("thread pool: {e}")))?;
        pool.install(go)
    } else {
        go()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pendula: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
