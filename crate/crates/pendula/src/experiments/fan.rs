//! LZSM interference fan: the time-averaged occupation of the in-phase
//! mode over a grid of mean coupling and modulation amplitude. Repeated
//! passages through the avoided crossing interfere, producing fringes in
//! the triangle `A > |eps0|`; on the mechanical engine, cells whose frozen
//! coupling turns a mode unstable are flagged instead of integrated.

use super::{init_out_of_phase, ChainSettings, Engine};
use crate::error::{Error, Result};
use crate::model::TlsParams;
use crate::newton::{self, linearized_eigenfrequencies, NewtonState};
use crate::tls::{self, DriveWaveform};
use rayon::prelude::*;
use std::io::Write;

#[derive(Debug, Clone)]
pub struct FanConfig {
    /// Frequency difference (rad/s).
    pub delta: f64,
    /// Drive angular frequency (rad/s).
    pub omega: f64,
    /// Carrier frequency (rad/s), entering the mechanical engine and the
    /// instability criterion.
    pub omega0: f64,
    /// Mean-coupling grid (rad/s).
    pub eps0_grid: Vec<f64>,
    /// Amplitude grid (rad/s).
    pub a_grid: Vec<f64>,
    /// Driving periods averaged over.
    pub periods: usize,
    pub engine: Engine,
    /// Start deflection (rad) for the mechanical engine.
    pub amplitude: f64,
    pub relative_phase: f64,
    /// Integration step of the mechanical engine (s).
    pub newton_dt: f64,
    /// Sample spacing handed to the envelope chain (s); the carrier must
    /// stay resolved.
    pub sample_dt: f64,
}

impl FanConfig {
    pub fn defaults(engine: Engine) -> Self {
        let omega0 = 2.0 * std::f64::consts::PI * 0.53;
        let n = 60;
        let grid = |max: f64| (0..n).map(|i| i as f64 * max / (n - 1) as f64).collect();
        FanConfig {
            delta: 2.0 * std::f64::consts::PI * 2.0e-3,
            omega: 2.0 * std::f64::consts::PI * 7.1e-3,
            omega0,
            eps0_grid: grid(2.0),
            a_grid: grid(2.0),
            periods: 5,
            engine,
            amplitude: 0.01,
            relative_phase: 0.0,
            newton_dt: 1e-2,
            sample_dt: 0.2,
        }
    }
}

/// Mean in-phase occupation over the grid; `NaN` marks flagged cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FanDiagram {
    pub eps0_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    /// Row-major over `(eps0, a)`.
    pub p_plus_mean: Vec<f64>,
    /// Cells whose frozen-coupling spectrum went unstable at some drive
    /// phase (mechanical engine only).
    pub unstable: Vec<bool>,
    pub periods_averaged: usize,
}

impl FanDiagram {
    pub fn index(&self, ie: usize, ia: usize) -> usize {
        ie * self.a_grid.len() + ia
    }

    pub fn value(&self, ie: usize, ia: usize) -> f64 {
        self.p_plus_mean[self.index(ie, ia)]
    }

    pub fn is_unstable(&self, ie: usize, ia: usize) -> bool {
        self.unstable[self.index(ie, ia)]
    }

    /// CSV export in long format, one row per cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "eps0,a,p_plus_mean,unstable")?;
        for (ie, &eps0) in self.eps0_grid.iter().enumerate() {
            for (ia, &a) in self.a_grid.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    eps0,
                    a,
                    self.value(ie, ia),
                    u8::from(self.is_unstable(ie, ia))
                )?;
            }
        }
        Ok(())
    }
}

/// Does the frozen-coupling linearized spectrum go unstable anywhere over
/// one drive period?
fn cell_unstable(config: &FanConfig, drive: &TlsParams) -> bool {
    let (w1, w2) = (config.omega0 + 0.5 * config.delta, config.omega0 - 0.5 * config.delta);
    let period = drive.period();
    (0..=128).any(|i| {
        let eps = drive.eps(i as f64 * period / 128.0);
        linearized_eigenfrequencies(eps, config.omega0, 1.0, 1.0, w1, w2).unstable()
    })
}

fn cell(config: &FanConfig, eps0: f64, a: f64) -> Result<(f64, bool)> {
    let drive = TlsParams { delta: config.delta, eps0, amplitude: a, omega: config.omega };
    let t_end = config.periods as f64 * drive.period();
    match config.engine {
        Engine::Schrodinger => {
            let waveform = DriveWaveform::from_params(&drive);
            let state0 = init_out_of_phase(config.amplitude, config.relative_phase)
                .envelope_state(config.delta, waveform.eval(0.0));
            let dt = waveform.recommended_dt(config.delta);
            let traj = tls::evolve(
                state0,
                |t| tls::hamiltonian_lz(config.delta, waveform.eval(t)),
                (0.0, t_end),
                dt,
            )?;
            let (p_plus, _) = traj.population_series();
            Ok((p_plus.mean(), false))
        }
        Engine::NewtonLinear => {
            if cell_unstable(config, &drive) {
                return Ok((f64::NAN, true));
            }
            let (w1, w2) =
                (config.omega0 + 0.5 * config.delta, config.omega0 - 0.5 * config.delta);
            let chain = ChainSettings::for_carrier(config.omega0);
            let pad = 6.0 * chain.envelope_sigma;
            let stride = (config.sample_dt / config.newton_dt).round().max(1.0) as usize;
            let state0: NewtonState =
                init_out_of_phase(config.amplitude, config.relative_phase).newton_state();
            let traj = newton::integrate_strided(
                |s, t| Ok(newton::linear_rhs(s, drive.eps(t), config.omega0, w1, w2)),
                state0,
                (0.0, t_end + pad),
                config.newton_dt,
                stride,
            )?;
            let (p_plus, _) = super::mode_populations(&traj, &chain)?;
            Ok((p_plus.slice_time(0.0, t_end).mean(), false))
        }
        Engine::NewtonNonlinear => Err(Error::domain(
            "the fan runs on the newton-linear or schrodinger engine".to_string(),
        )),
    }
}

/// Compute the fan; grid cells run concurrently and assembly is by index,
/// so identical configurations give identical diagrams.
pub fn run_lzsm_fan(config: &FanConfig) -> Result<FanDiagram> {
    let ne = config.eps0_grid.len();
    let na = config.a_grid.len();
    if ne == 0 || na == 0 {
        return Err(Error::domain("fan grids must be non-empty".to_string()));
    }
    let cells: Vec<(f64, bool)> = (0..ne * na)
        .into_par_iter()
        .map(|idx| cell(config, config.eps0_grid[idx / na], config.a_grid[idx % na]))
        .collect::<Result<_>>()?;
    Ok(FanDiagram {
        eps0_grid: config.eps0_grid.clone(),
        a_grid: config.a_grid.clone(),
        p_plus_mean: cells.iter().map(|c| c.0).collect(),
        unstable: cells.iter().map(|c| c.1).collect(),
        periods_averaged: config.periods,
    })
}
