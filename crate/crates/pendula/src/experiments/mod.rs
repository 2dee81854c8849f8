//! Scenario runners reproducing the standard driven-qubit experiments on
//! either engine: Rabi scans over the detuning, single Landau-Zener
//! passages, LZSM interference fans, regime-comparison spectra and the
//! eigenvalue consistency check.

mod eigen;
mod fan;
mod lz;
mod rabi;
mod spectra;

pub use eigen::{run_eigenvalue_consistency, write_eigencheck_csv, EigencheckRow};
pub use fan::{run_lzsm_fan, FanConfig, FanDiagram};
pub use lz::{default_window, run_lz_passage, write_lz_csv, LzPassage, LzPassageConfig};
pub use rabi::{dominant_frequency, run_rabi_scan, write_rabi_csv, RabiPoint, RabiScanConfig};
pub use spectra::{
    implied_coupling, run_spectra_comparison, two_strongest_peaks, write_spectra_csv,
    SpectraCase, SpectraConfig, SpectraRegime,
};

use crate::error::{Error, Result};
use crate::model::{Apparatus, TlsParams};
use crate::newton::{self, Frame, NewtonState, Trajectory};
use crate::signal::{self, TimeSeries};
use crate::tls::{self, Basis, DriveWaveform, EnvelopeState};
use num_complex::Complex64;

/// Which dynamical description integrates the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Full nonlinear Newton dynamics with the exact dipole potential.
    NewtonNonlinear,
    /// Linearized Newton dynamics driven by `eps(t)`.
    NewtonLinear,
    /// Envelope (Schrödinger-like) dynamics.
    Schrodinger,
}

impl Engine {
    pub fn label(&self) -> &'static str {
        match self {
            Engine::NewtonNonlinear => "newton-nonlinear",
            Engine::NewtonLinear => "newton-linear",
            Engine::Schrodinger => "schrodinger",
        }
    }

    pub fn parse(s: &str) -> Result<Engine> {
        match s {
            "newton-nonlinear" => Ok(Engine::NewtonNonlinear),
            "newton-linear" => Ok(Engine::NewtonLinear),
            "schrodinger" => Ok(Engine::Schrodinger),
            other => Err(Error::domain(format!(
                "unknown engine '{other}' (expected newton-nonlinear, newton-linear or schrodinger)"
            ))),
        }
    }
}

/// How a run is started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// Only pendulum 1 deflected, at the drive phase of maximal attraction.
    SinglePendulum { amplitude: f64 },
    /// Both pendula deflected against each other, exciting the out-of-phase
    /// mode. `relative_phase` rotates the small admixture of the upper
    /// adiabatic mode that a start at finite coupling implies.
    OutOfPhase { amplitude: f64, relative_phase: f64 },
}

/// Deflect pendulum 1 by `amplitude`, pendulum 2 at rest.
pub fn init_single_pendulum(amplitude: f64) -> InitialCondition {
    InitialCondition::SinglePendulum { amplitude }
}

/// Deflect the pendula to `±amplitude`, exciting the out-of-phase mode.
pub fn init_out_of_phase(amplitude: f64, relative_phase: f64) -> InitialCondition {
    InitialCondition::OutOfPhase { amplitude, relative_phase }
}

impl InitialCondition {
    /// Mechanical start state in the quasistatic-relative frame.
    pub fn newton_state(&self) -> NewtonState {
        match *self {
            InitialCondition::SinglePendulum { amplitude } => NewtonState {
                phi1: amplitude,
                phi2: 0.0,
                dphi1: 0.0,
                dphi2: 0.0,
                frame: Frame::QuasistaticRelative,
            },
            InitialCondition::OutOfPhase { amplitude, .. } => NewtonState {
                phi1: amplitude,
                phi2: -amplitude,
                dphi1: 0.0,
                dphi2: 0.0,
                frame: Frame::QuasistaticRelative,
            },
        }
    }

    /// Envelope start state. For the out-of-phase start the state is
    /// `(0, 1)` in the mode basis up to the admixture phase: the pure mode
    /// is not an eigenstate at finite `eps(0)`, and `relative_phase`
    /// rotates its upper-eigenmode component.
    pub fn envelope_state(&self, delta: f64, eps_at_start: f64) -> EnvelopeState {
        match *self {
            InitialCondition::SinglePendulum { .. } => EnvelopeState::new(
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Basis::Individual,
            ),
            InitialCondition::OutOfPhase { relative_phase, .. } => {
                let h = tls::hamiltonian_lz(delta, eps_at_start);
                let (ua, ub) = h.eigenvector(true);
                let (la, lb) = h.eigenvector(false);
                let target = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
                let c_up = ua.conj() * target.0 + ub.conj() * target.1;
                let c_lo = la.conj() * target.0 + lb.conj() * target.1;
                let rot = Complex64::new(0.0, relative_phase).exp();
                let a = rot * c_up * ua + c_lo * la;
                let b = rot * c_up * ub + c_lo * lb;
                let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
                EnvelopeState::new(a / n, b / n, Basis::Modes)
            }
        }
    }
}

/// Low-pass widths of the population-extraction chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSettings {
    /// Width separating the quasistatic center from the fast motion (s).
    pub split_sigma: f64,
    /// Width removing the double-carrier term of the squared trace (s).
    pub envelope_sigma: f64,
}

impl ChainSettings {
    /// The published choice `sigma = 10 / omega0` for both stages.
    pub fn for_carrier(omega0: f64) -> Self {
        ChainSettings { split_sigma: 10.0 / omega0, envelope_sigma: 10.0 / omega0 }
    }
}

/// Mode occupations extracted from a mechanical trajectory through the full
/// chain: (lab frame only) time-scale split, mode combination, squared
/// envelopes, normalization.
pub fn mode_populations(
    traj: &Trajectory,
    chain: &ChainSettings,
) -> Result<(TimeSeries, TimeSeries)> {
    let (phi1, phi2) = fast_parts(traj, chain)?;
    let (plus, minus) = signal::mode_transform(&phi1, &phi2)?;
    let env_plus = signal::envelope_sq(&plus, chain.envelope_sigma)?;
    let env_minus = signal::envelope_sq(&minus, chain.envelope_sigma)?;
    let p = signal::populations(&[&env_plus, &env_minus])?;
    let mut it = p.into_iter();
    Ok((it.next().unwrap(), it.next().unwrap()))
}

/// Individual-pendulum occupations from a mechanical trajectory.
pub fn individual_populations(
    traj: &Trajectory,
    chain: &ChainSettings,
) -> Result<(TimeSeries, TimeSeries)> {
    let (phi1, phi2) = fast_parts(traj, chain)?;
    let env1 = signal::envelope_sq(&phi1, chain.envelope_sigma)?;
    let env2 = signal::envelope_sq(&phi2, chain.envelope_sigma)?;
    let p = signal::populations(&[&env1, &env2])?;
    let mut it = p.into_iter();
    Ok((it.next().unwrap(), it.next().unwrap()))
}

fn fast_parts(traj: &Trajectory, chain: &ChainSettings) -> Result<(TimeSeries, TimeSeries)> {
    let phi1 = traj.phi1();
    let phi2 = traj.phi2();
    match traj.samples.first().map(|s| s.frame) {
        Some(Frame::Lab) => {
            let (_, f1) = signal::split_timescales(&phi1, chain.split_sigma)?;
            let (_, f2) = signal::split_timescales(&phi2, chain.split_sigma)?;
            Ok((f1, f2))
        }
        // the quasistatic-relative frame is already centered
        _ => Ok((phi1, phi2)),
    }
}

/// Mode occupations `(P_+, P_-)` of one run on the chosen engine, sampled
/// on a uniform grid of step `dt` over `[0, t_end]`.
///
/// Mechanical engines are integrated past `t_end` so the filter chain does
/// not fold its boundary response into the compared span; the envelope
/// engine yields occupations directly.
pub fn mode_population_run(
    app: &Apparatus,
    drive: &TlsParams,
    engine: Engine,
    init: &InitialCondition,
    t_end: f64,
    dt: f64,
    chain: &ChainSettings,
) -> Result<(TimeSeries, TimeSeries)> {
    let waveform = DriveWaveform::from_params(drive);
    match engine {
        Engine::Schrodinger => {
            let state0 = init.envelope_state(drive.delta, waveform.eval(0.0));
            let state0 = match state0.basis {
                Basis::Modes => state0,
                Basis::Individual => state0.transformed(),
            };
            let traj = tls::evolve(
                state0,
                |t| tls::hamiltonian_lz(drive.delta, waveform.eval(t)),
                (0.0, t_end),
                dt,
            )?;
            Ok(traj.population_series())
        }
        Engine::NewtonLinear => {
            let omega0 = app.omega_mean();
            let (w1, w2) = (omega0 + 0.5 * drive.delta, omega0 - 0.5 * drive.delta);
            let pad = 6.0 * chain.split_sigma.max(chain.envelope_sigma);
            let traj = newton::integrate_linear(
                drive,
                w1,
                w2,
                init.newton_state(),
                (0.0, t_end + pad),
                dt,
            )?;
            let (p, m) = mode_populations(&traj, chain)?;
            Ok((p.slice_time(0.0, t_end), m.slice_time(0.0, t_end)))
        }
        Engine::NewtonNonlinear => {
            let pad = 6.0 * chain.split_sigma.max(chain.envelope_sigma);
            let state0 =
                newton::convert_frame(app, &init.newton_state(), 0.0, Frame::Lab)?;
            let traj = newton::integrate_nonlinear(app, state0, (0.0, t_end + pad), dt)?;
            let (p, m) = mode_populations(&traj, chain)?;
            Ok((p.slice_time(0.0, t_end), m.slice_time(0.0, t_end)))
        }
    }
}
