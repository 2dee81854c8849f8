//! Glue between the parsed configuration and the runners: resolve the
//! drive, run the requested experiment, write its CSV artifact and a
//! manifest with the full resolved configuration.

use crate::config::{serialize_config, Config, DriveSource};
use crate::manifest::Manifest;
use pendula::experiments::{
    self, Engine, FanConfig, LzPassageConfig, RabiScanConfig, SpectraConfig, SpectraRegime,
};
use pendula::model::TlsParams;
use pendula::newton::{self, Frame};
use pendula::tls::{self, DriveWaveform};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// What went wrong, mapped onto the process exit codes.
#[derive(Debug)]
pub enum DispatchError {
    /// Exit code 1.
    Config(String),
    /// Exit code 2.
    Numerical(pendula::Error),
    /// Exit code 3.
    Io(std::io::Error),
}

impl std::fmt::Display for DispatchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DispatchError::Config(m) => write!(f, "configuration error: {m}"),
            DispatchError::Numerical(e) => write!(f, "numerical error: {e}"),
            DispatchError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for DispatchError {}

impl DispatchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            DispatchError::Config(_) => 1,
            DispatchError::Numerical(_) => 2,
            DispatchError::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for DispatchError {
    fn from(e: std::io::Error) -> Self {
        DispatchError::Io(e)
    }
}

fn numerical(e: pendula::Error) -> DispatchError {
    match &e {
        // interface misuse is a configuration problem, not a blown run
        pendula::Error::Domain(_) | pendula::Error::NoCrossing { .. } => {
            DispatchError::Config(e.to_string())
        }
        _ => DispatchError::Numerical(e),
    }
}

/// The CLI verbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    Rabi,
    Lz,
    LzsmFan,
    Spectra,
    Eigencheck,
}

impl Subcommand {
    pub fn label(&self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::Rabi => "rabi",
            Subcommand::Lz => "lz",
            Subcommand::LzsmFan => "lzsm-fan",
            Subcommand::Spectra => "spectra",
            Subcommand::Eigencheck => "eigencheck",
        }
    }
}

/// Effective two-level parameters per the configured source.
pub fn resolve_drive(config: &Config) -> Result<TlsParams, DispatchError> {
    match config.drive.source {
        DriveSource::Apparatus => config
            .apparatus
            .effective_tls_params(config.drive.fourier_samples)
            .map_err(numerical),
        DriveSource::Explicit => Ok(TlsParams {
            delta: config.apparatus.pendula.delta(),
            eps0: config.drive.eps0,
            amplitude: config.drive.amplitude,
            omega: config.apparatus.magnets.drive_omega,
        }),
    }
}

/// Run one subcommand, writing `<name>.csv` and `<name>_manifest.txt` into
/// `out_dir`. Returns the manifest.
pub fn dispatch(
    sub: Subcommand,
    config: &Config,
    out_dir: &Path,
    quiet: bool,
) -> Result<Manifest, DispatchError> {
    std::fs::create_dir_all(out_dir)?;
    if !quiet {
        for note in config.apparatus.validity_report() {
            eprintln!("note: {note}");
        }
    }
    let start = Instant::now();
    let mut manifest = Manifest::new(sub.label(), serialize_config(config));
    let csv_name = format!("{}.csv", sub.label().replace('-', "_"));
    let csv_path = out_dir.join(&csv_name);

    match sub {
        Subcommand::Simulate => run_simulate(config, &csv_path, &mut manifest)?,
        Subcommand::Rabi => run_rabi(config, &csv_path, &mut manifest)?,
        Subcommand::Lz => run_lz(config, &csv_path, &mut manifest)?,
        Subcommand::LzsmFan => run_fan(config, &csv_path, &mut manifest)?,
        Subcommand::Spectra => run_spectra(config, &csv_path, &mut manifest)?,
        Subcommand::Eigencheck => run_eigencheck(config, &csv_path, &mut manifest)?,
    }

    manifest.outputs.push(csv_name);
    manifest.elapsed_seconds = start.elapsed().as_secs_f64();
    let manifest_path = out_dir.join(format!("{}_manifest.txt", sub.label().replace('-', "_")));
    manifest.write_to(&manifest_path)?;
    if !quiet {
        println!("{} done in {:.2} s -> {}", sub.label(), manifest.elapsed_seconds, out_dir.display());
        for (k, v) in &manifest.summary {
            println!("  {k} = {v}");
        }
    }
    Ok(manifest)
}

fn csv_writer(path: &Path) -> Result<BufWriter<File>, DispatchError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run_simulate(
    config: &Config,
    csv_path: &PathBuf,
    manifest: &mut Manifest,
) -> Result<(), DispatchError> {
    let drive = resolve_drive(config)?;
    let apparatus = &config.apparatus;
    let t_end = config.run.periods as f64 * drive.period();
    let init = experiments::init_out_of_phase(config.run.amplitude, config.run.relative_phase);
    manifest.push_summary("engine", config.run.engine.label());
    manifest.push_summary("drive_eps0_rad_s", drive.eps0);
    manifest.push_summary("drive_amplitude_rad_s", drive.amplitude);
    match config.run.engine {
        Engine::Schrodinger => {
            let waveform = DriveWaveform::from_params(&drive);
            let dt = config.run.dt.unwrap_or_else(|| waveform.recommended_dt(drive.delta));
            let state0 = init.envelope_state(drive.delta, waveform.eval(0.0));
            let traj = tls::evolve(
                state0,
                |t| tls::hamiltonian_lz(drive.delta, waveform.eval(t)),
                (0.0, t_end),
                dt,
            )
            .map_err(numerical)?;
            traj.write_csv(csv_writer(csv_path)?)?;
        }
        Engine::NewtonLinear => {
            let omega0 = apparatus.omega_mean();
            let (w1, w2) = (omega0 + 0.5 * drive.delta, omega0 - 0.5 * drive.delta);
            let dt = config.run.dt.unwrap_or(1e-3);
            let traj = newton::integrate_linear(
                &drive,
                w1,
                w2,
                init.newton_state(),
                (0.0, t_end),
                dt,
            )
            .map_err(numerical)?;
            traj.write_csv(csv_writer(csv_path)?)?;
        }
        Engine::NewtonNonlinear => {
            let dt = config.run.dt.unwrap_or(1e-3);
            let state0 = newton::convert_frame(apparatus, &init.newton_state(), 0.0, Frame::Lab)
                .map_err(numerical)?;
            let traj = newton::integrate_nonlinear(apparatus, state0, (0.0, t_end), dt)
                .map_err(numerical)?;
            traj.write_csv(csv_writer(csv_path)?)?;
        }
    }
    Ok(())
}

fn run_rabi(
    config: &Config,
    csv_path: &PathBuf,
    manifest: &mut Manifest,
) -> Result<(), DispatchError> {
    let omega_r = match config.rabi.rabi_frequency {
        Some(w) => w,
        None => tls::rabi_frequency(&config.apparatus).map_err(numerical)?,
    };
    let omega = config.rabi.drive_omega;
    let n = config.rabi.points;
    let delta_grid: Vec<f64> = (0..n)
        .map(|i| {
            let x = if n == 1 { 0.0 } else { 2.0 * i as f64 / (n - 1) as f64 - 1.0 };
            omega + x * config.rabi.span * omega_r
        })
        .collect();
    let scan = RabiScanConfig {
        apparatus: config.apparatus,
        delta_grid,
        drive_omega: omega,
        rabi_frequency: omega_r,
        beats: config.rabi.beats,
        engine: config.run.engine,
        dt: config.run.dt,
        amplitude: config.run.amplitude,
    };
    let points = experiments::run_rabi_scan(&scan).map_err(numerical)?;
    experiments::write_rabi_csv(&points, csv_writer(csv_path)?)?;
    manifest.push_summary("rabi_frequency_rad_s", omega_r);
    manifest.push_summary("points", points.len());
    Ok(())
}

fn run_lz(
    config: &Config,
    csv_path: &PathBuf,
    manifest: &mut Manifest,
) -> Result<(), DispatchError> {
    let drive = resolve_drive(config)?;
    let lz = LzPassageConfig {
        apparatus: config.apparatus,
        drive,
        engine: config.run.engine,
        amplitude: config.run.amplitude,
        relative_phase: config.run.relative_phase,
        dt: config.run.dt,
        window: None,
    };
    let run = experiments::run_lz_passage(&lz).map_err(numerical)?;
    experiments::write_lz_csv(&run, csv_writer(csv_path)?)?;
    manifest.push_summary("p_bar_plus", run.p_bar);
    manifest.push_summary("p_transfer_analytic", run.p_transfer_analytic);
    manifest.push_summary("window_center_s", run.window.0);
    manifest.push_summary("window_half_width_s", run.window.1);
    Ok(())
}

fn run_fan(
    config: &Config,
    csv_path: &PathBuf,
    manifest: &mut Manifest,
) -> Result<(), DispatchError> {
    let delta = config.fan.delta.unwrap_or_else(|| config.apparatus.pendula.delta());
    let grid = |max: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|i| if n == 1 { max } else { i as f64 * max / (n - 1) as f64 })
            .collect()
    };
    let fan = FanConfig {
        delta,
        omega: config.apparatus.magnets.drive_omega,
        omega0: config.apparatus.omega_mean(),
        eps0_grid: grid(config.fan.eps0_max, config.fan.eps0_points),
        a_grid: grid(config.fan.amplitude_max, config.fan.amplitude_points),
        periods: config.fan.periods,
        engine: config.run.engine,
        amplitude: config.run.amplitude,
        relative_phase: config.run.relative_phase,
        newton_dt: config.run.dt.unwrap_or(1e-2),
        sample_dt: 0.2,
    };
    let diagram = experiments::run_lzsm_fan(&fan).map_err(numerical)?;
    diagram.write_csv(csv_writer(csv_path)?)?;
    let flagged = diagram.unstable.iter().filter(|u| **u).count();
    manifest.push_summary("cells", diagram.p_plus_mean.len());
    manifest.push_summary("unstable_cells", flagged);
    Ok(())
}

fn run_spectra(
    config: &Config,
    csv_path: &PathBuf,
    manifest: &mut Manifest,
) -> Result<(), DispatchError> {
    let mut spectra = match config.spectra.regime {
        SpectraRegime::Rabi => SpectraConfig::rabi_defaults().map_err(numerical)?,
        SpectraRegime::Lzsm => SpectraConfig::lzsm_defaults().map_err(numerical)?,
    };
    spectra.engine = config.run.engine;
    spectra.smoothing_sigma = config.spectra.smoothing;
    spectra.peak_threshold = config.spectra.threshold;
    spectra.amplitude = config.run.amplitude;
    let cases = experiments::run_spectra_comparison(&spectra).map_err(numerical)?;
    experiments::write_spectra_csv(&cases, csv_writer(csv_path)?)?;
    manifest.push_summary("regime", spectra.regime.label());
    manifest.push_summary("cases", cases.len());
    for c in &cases {
        manifest.push_summary(
            &format!("peaks_{}_{}", c.case, c.series),
            c.spectrum.peaks.len(),
        );
    }
    Ok(())
}

fn run_eigencheck(
    config: &Config,
    csv_path: &PathBuf,
    manifest: &mut Manifest,
) -> Result<(), DispatchError> {
    let mut apparatus = config.apparatus;
    apparatus.pendula.omega1 =
        apparatus.pendula.omega2 + config.eigencheck.frequency_difference;
    apparatus
        .validate()
        .map_err(|e| DispatchError::Config(e.to_string()))?;
    let omega0 = apparatus.omega_mean();
    let max = config.eigencheck.coupling_max.unwrap_or(0.05 * omega0);
    let n = config.eigencheck.points;
    let grid: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                0.0
            } else {
                (2.0 * i as f64 / (n - 1) as f64 - 1.0) * max
            }
        })
        .collect();
    let rows = experiments::run_eigenvalue_consistency(&apparatus, &grid);
    experiments::write_eigencheck_csv(&rows, csv_writer(csv_path)?)?;
    let max_dev = rows
        .iter()
        .filter(|r| !r.unstable)
        .map(|r| r.deviation())
        .fold(0.0_f64, f64::max);
    manifest.push_summary("max_deviation_rad_s", max_dev);
    manifest.push_summary("max_deviation_over_omega0", max_dev / omega0);
    Ok(())
}
