//! Regime-comparison spectra: static beating runs at maximal attraction
//! and repulsion bracket the driven experiment, and the peak positions of
//! the carrier-resolved traces land on the avoided-crossing curves through
//! the eigenvalue relation.

use super::{init_out_of_phase, init_single_pendulum, ChainSettings, Engine, InitialCondition};
use crate::error::{Error, Result};
use crate::model::{Apparatus, TlsParams};
use crate::newton::{self, Frame};
use crate::signal::{self, Spectrum, TimeSeries};
use crate::tls::{self, Basis};
use std::io::Write;

/// Which pair of traces the comparison analyzes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectraRegime {
    /// Weak coupling, near-resonant drive; individual-pendulum traces.
    Rabi,
    /// Strong slow modulation; in-phase / out-of-phase traces.
    Lzsm,
}

impl SpectraRegime {
    pub fn label(&self) -> &'static str {
        match self {
            SpectraRegime::Rabi => "rabi",
            SpectraRegime::Lzsm => "lzsm",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectraConfig {
    pub apparatus: Apparatus,
    pub regime: SpectraRegime,
    pub engine: Engine,
    /// Drive of the modulated sub-run; the static sub-runs freeze the
    /// coupling at its extremes `eps0 ± A`.
    pub drive: TlsParams,
    /// Total trace length (s).
    pub duration: f64,
    /// Sample spacing of the carrier-resolved traces (s).
    pub sample_dt: f64,
    /// Gaussian smoothing of the spectra (Hz).
    pub smoothing_sigma: f64,
    /// Relative peak threshold.
    pub peak_threshold: f64,
    /// Start deflection (rad).
    pub amplitude: f64,
}

impl SpectraConfig {
    /// Published Rabi comparison: pivot distance 454 mm, detuning
    /// 11.7 mHz, resonant modulation.
    pub fn rabi_defaults() -> Result<Self> {
        let mut apparatus = Apparatus::paper_default();
        apparatus.magnets.pivot_separation = 0.454;
        let f2 = 0.52165;
        apparatus.pendula.omega2 = 2.0 * std::f64::consts::PI * f2;
        apparatus.pendula.omega1 = 2.0 * std::f64::consts::PI * (f2 + 11.7e-3);
        let delta = apparatus.pendula.delta();
        let omega_r = tls::rabi_frequency(&apparatus)?;
        let drive = TlsParams { delta, eps0: 0.0, amplitude: 2.0 * omega_r, omega: delta };
        Ok(SpectraConfig {
            apparatus,
            regime: SpectraRegime::Rabi,
            engine: Engine::Schrodinger,
            drive,
            duration: 4.0 * 2.0 * std::f64::consts::PI / omega_r,
            sample_dt: 0.2,
            smoothing_sigma: 1.0e-4,
            peak_threshold: 0.01,
            amplitude: 0.01,
        })
    }

    /// Published LZSM comparison: pivot distance 240 mm, upper magnets
    /// for a sizable mean coupling, 2.27 mHz modulation.
    pub fn lzsm_defaults() -> Result<Self> {
        let mut apparatus = Apparatus::paper_default();
        apparatus.magnets.pivot_separation = 0.240;
        apparatus.magnets.upper =
            Some(crate::model::UpperMagnets { moment: 6.544, separation: 0.130 });
        let f2 = 0.5228;
        apparatus.pendula.omega2 = 2.0 * std::f64::consts::PI * f2;
        apparatus.pendula.omega1 = 2.0 * std::f64::consts::PI * (f2 + 6.2e-3);
        let drive = apparatus.effective_tls_params(1024)?;
        Ok(SpectraConfig {
            apparatus,
            regime: SpectraRegime::Lzsm,
            engine: Engine::Schrodinger,
            drive,
            duration: 5.0 * drive.period(),
            sample_dt: 0.2,
            smoothing_sigma: 0.025,
            peak_threshold: 0.05,
            amplitude: 0.01,
        })
    }
}

/// One analyzed trace: its spectrum and the couplings implied by mapping
/// each peak onto the avoided-crossing relation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraCase {
    /// Sub-run: attractive, repulsive or driven.
    pub case: &'static str,
    /// Which trace: phi1/phi2 or phi_plus/phi_minus.
    pub series: &'static str,
    pub spectrum: Spectrum,
    /// Per peak `(freq_hz, implied eps)`; the implied coupling solves
    /// `w = (-eps ± sqrt(Delta^2 + eps^2))/2` for `w = 2 pi f - omega0`.
    pub implied: Vec<(f64, Option<f64>)>,
}

/// Coupling implied by an envelope eigenvalue `w` through the
/// avoided-crossing relation; `None` where `w` is too close to zero.
pub fn implied_coupling(w: f64, delta: f64) -> Option<f64> {
    if w.abs() < 1e-3 * delta.abs().max(1e-12) {
        return None;
    }
    Some(delta * delta / (4.0 * w) - w)
}

fn trace_pair(
    config: &SpectraConfig,
    eps: EpsCase,
) -> Result<(TimeSeries, TimeSeries)> {
    let app = &config.apparatus;
    let omega0 = app.omega_mean();
    let delta = config.drive.delta;
    let drive = config.drive;
    let eval = move |t: f64| match eps {
        EpsCase::Attractive => drive.eps0 + drive.amplitude,
        EpsCase::Repulsive => drive.eps0 - drive.amplitude,
        EpsCase::Driven => drive.eps(t),
    };
    let init: InitialCondition = match config.regime {
        SpectraRegime::Rabi => init_single_pendulum(config.amplitude),
        SpectraRegime::Lzsm => init_out_of_phase(config.amplitude, 0.0),
    };
    match config.engine {
        Engine::Schrodinger => {
            let state0 = init.envelope_state(delta, eval(0.0));
            let traj = match config.regime {
                SpectraRegime::Rabi => tls::evolve(
                    state0,
                    |t| tls::hamiltonian_rabi(delta, eval(t)),
                    (0.0, config.duration),
                    config.sample_dt,
                )?,
                SpectraRegime::Lzsm => {
                    debug_assert_eq!(state0.basis, Basis::Modes);
                    tls::evolve(
                        state0,
                        |t| tls::hamiltonian_lz(delta, eval(t)),
                        (0.0, config.duration),
                        config.sample_dt,
                    )?
                }
            };
            Ok(traj.reconstruct_carrier(omega0))
        }
        Engine::NewtonLinear => {
            let (w1, w2) = (omega0 + 0.5 * delta, omega0 - 0.5 * delta);
            let traj = newton::integrate_strided(
                |s, t| Ok(newton::linear_rhs(s, eval(t), omega0, w1, w2)),
                init.newton_state(),
                (0.0, config.duration),
                1e-2,
                (config.sample_dt / 1e-2).round().max(1.0) as usize,
            )?;
            pair_from_trajectory(config, &traj)
        }
        Engine::NewtonNonlinear => {
            if !matches!(eps, EpsCase::Driven) {
                return Err(Error::domain(
                    "static sub-runs on the nonlinear engine need a parked drive; \
                     set drive_omega = 0 and flip the magnet instead"
                        .to_string(),
                ));
            }
            let state0 = newton::convert_frame(app, &init.newton_state(), 0.0, Frame::Lab)?;
            let traj = newton::integrate_strided(
                |s, t| newton::nonlinear_rhs(app, s, t),
                state0,
                (0.0, config.duration),
                1e-2,
                (config.sample_dt / 1e-2).round().max(1.0) as usize,
            )?;
            pair_from_trajectory(config, &traj)
        }
    }
}

fn pair_from_trajectory(
    config: &SpectraConfig,
    traj: &newton::Trajectory,
) -> Result<(TimeSeries, TimeSeries)> {
    let omega0 = config.apparatus.omega_mean();
    let mut phi1 = traj.phi1();
    let mut phi2 = traj.phi2();
    if traj.samples.first().map(|s| s.frame) == Some(Frame::Lab) {
        let chain = ChainSettings::for_carrier(omega0);
        phi1 = signal::split_timescales(&phi1, chain.split_sigma)?.1;
        phi2 = signal::split_timescales(&phi2, chain.split_sigma)?.1;
    }
    match config.regime {
        SpectraRegime::Rabi => Ok((phi1, phi2)),
        SpectraRegime::Lzsm => signal::mode_transform(&phi1, &phi2),
    }
}

#[derive(Debug, Clone, Copy)]
enum EpsCase {
    Attractive,
    Repulsive,
    Driven,
}

/// Run the three sub-cases and spectra of both traces each.
pub fn run_spectra_comparison(config: &SpectraConfig) -> Result<Vec<SpectraCase>> {
    let delta = config.drive.delta;
    let omega0 = config.apparatus.omega_mean();
    let (label_a, label_b) = match config.regime {
        SpectraRegime::Rabi => ("phi1", "phi2"),
        SpectraRegime::Lzsm => ("phi_plus", "phi_minus"),
    };
    let mut out = Vec::new();
    for (case, label) in [
        (EpsCase::Attractive, "attractive"),
        (EpsCase::Repulsive, "repulsive"),
        (EpsCase::Driven, "driven"),
    ] {
        let (a, b) = trace_pair(config, case)?;
        for (series, label_s) in [(&a, label_a), (&b, label_b)] {
            let spectrum = signal::spectrum_with_threshold(
                series,
                config.smoothing_sigma,
                config.peak_threshold,
            )?;
            let implied = spectrum
                .peaks
                .iter()
                .map(|p| {
                    let w = 2.0 * std::f64::consts::PI * p.freq_hz - omega0;
                    (p.freq_hz, implied_coupling(w, delta))
                })
                .collect();
            out.push(SpectraCase { case: label, series: label_s, spectrum, implied });
        }
    }
    Ok(out)
}

/// CSV export in long format: every spectrum bin and, tagged separately,
/// every extracted peak with its implied coupling.
pub fn write_spectra_csv<W: Write>(cases: &[SpectraCase], mut w: W) -> std::io::Result<()> {
    writeln!(w, "case,series,record,freq_hz,magnitude,smoothed,eps_implied")?;
    for c in cases {
        for (i, (m, s)) in c.spectrum.magnitudes.iter().zip(&c.spectrum.smoothed).enumerate() {
            writeln!(
                w,
                "{},{},bin,{},{},{},",
                c.case,
                c.series,
                c.spectrum.frequency(i),
                m,
                s
            )?;
        }
        for (peak, (freq, implied)) in c.spectrum.peaks.iter().zip(&c.implied) {
            debug_assert_eq!(peak.freq_hz, *freq);
            let implied = implied.map(|e| e.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},peak,{},{},,{}",
                c.case, c.series, peak.freq_hz, peak.magnitude, implied
            )?;
        }
    }
    Ok(())
}

/// Dominant pair of peaks of a case, sorted by frequency.
pub fn two_strongest_peaks(case: &SpectraCase) -> Option<(f64, f64)> {
    let mut peaks = case.spectrum.peaks.clone();
    if peaks.len() < 2 {
        return None;
    }
    peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    let mut pair = [peaks[0].freq_hz, peaks[1].freq_hz];
    pair.sort_by(f64::total_cmp);
    Some((pair[0], pair[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn find<'a>(cases: &'a [SpectraCase], case: &str, series: &str) -> &'a SpectraCase {
        cases
            .iter()
            .find(|c| c.case == case && c.series == series)
            .expect("case present")
    }

    #[test]
    fn static_splitting_matches_the_eigenvalue_gap() {
        // at strong coupling each mode trace carries essentially one
        // eigenline; the splitting spans the dominant lines of the
        // in-phase and out-of-phase traces
        let mut config = SpectraConfig::lzsm_defaults().unwrap();
        // fine smoothing for a position measurement
        config.smoothing_sigma = 5.0e-4;
        config.peak_threshold = 0.02;
        let cases = run_spectra_comparison(&config).unwrap();
        for (case, eps) in [
            ("attractive", config.drive.eps0 + config.drive.amplitude),
            ("repulsive", config.drive.eps0 - config.drive.amplitude),
        ] {
            let expected = (config.drive.delta.powi(2) + eps * eps).sqrt() / (2.0 * PI);
            let minus = find(&cases, case, "phi_minus");
            let plus = find(&cases, case, "phi_plus");
            let line_minus =
                minus.spectrum.dominant_peak().expect("out-of-phase line").freq_hz;
            // the in-phase trace also leaks the other mode's line; take its
            // peak farthest from it
            let line_plus = plus
                .spectrum
                .peaks
                .iter()
                .max_by(|a, b| {
                    (a.freq_hz - line_minus)
                        .abs()
                        .total_cmp(&(b.freq_hz - line_minus).abs())
                })
                .expect("in-phase line")
                .freq_hz;
            let measured = (line_plus - line_minus).abs();
            assert!(
                (measured - expected).abs() < 2.0 * minus.spectrum.df,
                "{case}: splitting {measured} Hz vs {expected} Hz"
            );
        }
    }

    #[test]
    fn attractive_runs_sit_below_repulsive_runs() {
        // the initially undeflected pendulum shows both eigenlines
        let mut config = SpectraConfig::rabi_defaults().unwrap();
        config.peak_threshold = 0.02;
        let cases = run_spectra_comparison(&config).unwrap();
        let att = two_strongest_peaks(find(&cases, "attractive", "phi2")).unwrap();
        let rep = two_strongest_peaks(find(&cases, "repulsive", "phi2")).unwrap();
        assert!(att.0 < rep.0, "lower branch: {} vs {}", att.0, rep.0);
        assert!(att.1 < rep.1, "upper branch: {} vs {}", att.1, rep.1);
        // the branch shift equals the coupling swing eps/2pi
        let df = find(&cases, "attractive", "phi2").spectrum.df;
        let eps = config.drive.eps0 + config.drive.amplitude;
        assert!(((rep.1 - att.1) - eps / (2.0 * PI)).abs() < 2.0 * df);
    }

    #[test]
    fn resonant_rabi_spectrum_shows_main_pair_and_sidebands() {
        let mut config = SpectraConfig::rabi_defaults().unwrap();
        config.peak_threshold = 0.02;
        let cases = run_spectra_comparison(&config).unwrap();
        let driven = find(&cases, "driven", "phi1");
        assert!(driven.spectrum.peaks.len() >= 6, "peaks: {:?}", driven.spectrum.peaks);
        // the two strongest lines are split by the effective Rabi frequency
        let (lo, hi) = two_strongest_peaks(driven).unwrap();
        let omega_r = 0.5 * config.drive.amplitude;
        let split = (hi - lo) * 2.0 * PI;
        assert!(
            (split - omega_r).abs() < 0.15 * omega_r,
            "main pair split {split} vs Omega_R {omega_r}"
        );
        // and sidebands split off by the drive frequency
        let side = hi + config.drive.omega / (2.0 * PI);
        let found = driven
            .spectrum
            .peaks
            .iter()
            .any(|p| (p.freq_hz - side).abs() < 2.0 * driven.spectrum.df);
        assert!(found, "no sideband near {side} Hz");
    }

    #[test]
    fn driven_comb_edges_estimate_the_drive_with_inward_bias() {
        let mut config = SpectraConfig::lzsm_defaults().unwrap();
        // resolve the comb edges but keep the published-style smoothing
        config.smoothing_sigma = 5.0e-3;
        config.peak_threshold = 0.30;
        let omega0 = config.apparatus.omega_mean();
        let cases = run_spectra_comparison(&config).unwrap();
        let minus = find(&cases, "driven", "phi_minus");
        let (lo, hi) = two_strongest_peaks(minus).expect("two main maxima");
        let a_est = 0.5 * (hi - lo) * 2.0 * PI;
        let eps0_est = omega0 - 0.5 * (hi + lo) * 2.0 * PI;
        let a = config.drive.amplitude;
        assert!(a_est < a, "no inward bias: {a_est} vs {a}");
        assert!(a_est > 0.75 * a, "maxima too far in: {a_est} vs {a}");
        assert!(
            (eps0_est - config.drive.eps0).abs() < 0.05 * a,
            "eps0 estimate {eps0_est} vs {}",
            config.drive.eps0
        );
    }

    #[test]
    fn driven_in_phase_mode_stays_at_the_carrier() {
        let config = SpectraConfig::lzsm_defaults().unwrap();
        let omega0 = config.apparatus.omega_mean();
        let cases = run_spectra_comparison(&config).unwrap();
        let plus = find(&cases, "driven", "phi_plus");
        let dominant = plus.spectrum.dominant_peak().unwrap().freq_hz;
        assert!(
            (dominant - omega0 / (2.0 * PI)).abs() < 2.0 * plus.spectrum.df,
            "in-phase line at {dominant} Hz"
        );
    }

    #[test]
    fn implied_coupling_inverts_the_eigenvalue_relation() {
        let delta = 0.042;
        for eps in [-0.3, -0.05, 0.08, 0.25] {
            let (w_plus, w_minus) = tls::adiabatic_eigenvalues(eps, delta);
            for w in [w_plus, w_minus] {
                if let Some(rec) = implied_coupling(w, delta) {
                    approx::assert_relative_eq!(rec, eps, max_relative = 1e-9);
                }
            }
        }
        assert_eq!(implied_coupling(0.0, 0.042), None);
    }
}
