//! The Schrödinger-like description of the coupled pendula: slowly varying
//! envelopes of the carrier oscillation obey a two-level equation
//! `i dPsi/dt = H(t) Psi` (angular-frequency units, `hbar = 1`).
//!
//! Two bases are carried throughout. In the individual-pendulum basis the
//! Hamiltonian has the detuning on the diagonal and the coupling `eps(t)`
//! everywhere; in the mode basis (in-phase / out-of-phase combinations)
//! the constant `Delta` moves off-diagonal while the drive `-2 eps(t)`
//! sits in one diagonal entry — the textbook Landau-Zener arrangement.
//! Propagation uses the exact exponential of the midpoint Hamiltonian, so
//! the norm is conserved to rounding by construction.

use crate::error::{Error, Result};
use crate::model::{Apparatus, TlsParams};
use crate::signal::{ComplexSeries, TimeSeries};
use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;

/// Basis of an envelope pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Amplitudes of the individual pendula.
    Individual,
    /// Amplitudes of the in-phase and out-of-phase modes.
    Modes,
}

impl Basis {
    pub fn label(&self) -> &'static str {
        match self {
            Basis::Individual => "individual",
            Basis::Modes => "modes",
        }
    }
}

/// A pair of complex envelope amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeState {
    pub a: Complex64,
    pub b: Complex64,
    pub basis: Basis,
}

impl EnvelopeState {
    pub fn new(a: Complex64, b: Complex64, basis: Basis) -> Self {
        EnvelopeState { a, b, basis }
    }

    /// `N = |a|^2 + |b|^2`, conserved by the evolution.
    pub fn norm_sq(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }

    /// Occupations `(|a|^2, |b|^2) / N`.
    pub fn populations(&self) -> (f64, f64) {
        let n = self.norm_sq();
        (self.a.norm_sqr() / n, self.b.norm_sqr() / n)
    }

    /// Change basis with the involutive unitary `(sigma_x + sigma_z)/sqrt(2)`,
    /// which maps individual amplitudes to `(a ± b)/sqrt(2)` and back.
    pub fn transformed(&self) -> EnvelopeState {
        EnvelopeState {
            a: (self.a + self.b) * FRAC_1_SQRT_2,
            b: (self.a - self.b) * FRAC_1_SQRT_2,
            basis: match self.basis {
                Basis::Individual => Basis::Modes,
                Basis::Modes => Basis::Individual,
            },
        }
    }
}

/// A 2x2 Hermitian matrix with real diagonal and one complex off-diagonal
/// entry (`h21 = conj(h12)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Herm2 {
    pub h11: f64,
    pub h22: f64,
    pub h12: Complex64,
}

impl Herm2 {
    pub fn is_finite(&self) -> bool {
        self.h11.is_finite() && self.h22.is_finite() && self.h12.is_finite()
    }

    pub fn trace(&self) -> f64 {
        self.h11 + self.h22
    }

    /// Eigenvalues, larger first.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.h11 + self.h22);
        let disc = (0.25 * (self.h11 - self.h22).powi(2) + self.h12.norm_sqr()).sqrt();
        (mean + disc, mean - disc)
    }

    /// Normalized eigenvector of the larger (`upper = true`) or smaller
    /// eigenvalue.
    pub fn eigenvector(&self, upper: bool) -> (Complex64, Complex64) {
        let (hi, lo) = self.eigenvalues();
        let lambda = if upper { hi } else { lo };
        // (H - lambda) v = 0; pick the better-conditioned row
        let r1 = (Complex64::from(self.h11 - lambda), self.h12);
        let r2 = (self.h12.conj(), Complex64::from(self.h22 - lambda));
        let (p, q) = if r1.0.norm_sqr() + r1.1.norm_sqr() >= r2.0.norm_sqr() + r2.1.norm_sqr() {
            (r1.1, -r1.0)
        } else {
            (r2.1, -r2.0)
        };
        let n = (p.norm_sqr() + q.norm_sqr()).sqrt();
        (p / n, q / n)
    }

    /// Conjugation with `(sigma_x + sigma_z)/sqrt(2)`, which swaps the
    /// roles of diagonal and off-diagonal Pauli components.
    pub fn transformed(&self) -> Herm2 {
        // write H = a I + bx sx + by sy + bz sz; S swaps bx <-> bz, by -> -by
        let a = 0.5 * (self.h11 + self.h22);
        let bz = 0.5 * (self.h11 - self.h22);
        let bx = self.h12.re;
        let by = -self.h12.im;
        Herm2 {
            h11: a + bx,
            h22: a - bx,
            h12: Complex64::new(bz, by),
        }
    }

    /// The unitary `exp(-i H dt)` in closed form.
    pub fn propagator(&self, dt: f64) -> [Complex64; 4] {
        let a = 0.5 * (self.h11 + self.h22);
        let bz = 0.5 * (self.h11 - self.h22);
        let bx = self.h12.re;
        let by = -self.h12.im;
        let b = (bx * bx + by * by + bz * bz).sqrt();
        let (sa, ca) = (a * dt).sin_cos();
        let phase = Complex64::new(ca, -sa);
        if b == 0.0 {
            return [phase, Complex64::default(), Complex64::default(), phase];
        }
        let (s, c) = (b * dt).sin_cos();
        let (nx, ny, nz) = (bx / b, by / b, bz / b);
        let i = Complex64::i();
        [
            phase * (c - i * nz * s),
            phase * (-i * Complex64::new(nx, -ny) * s),
            phase * (-i * Complex64::new(nx, ny) * s),
            phase * (c + i * nz * s),
        ]
    }
}

/// Hamiltonian in the individual-pendulum basis,
/// `H = 1/2 [[Delta - eps, eps], [eps, -Delta - eps]]`.
pub fn hamiltonian_rabi(delta: f64, eps: f64) -> Herm2 {
    Herm2 {
        h11: 0.5 * (delta - eps),
        h22: 0.5 * (-delta - eps),
        h12: Complex64::from(0.5 * eps),
    }
}

/// Hamiltonian in the mode basis, `H = 1/2 [[0, Delta], [Delta, -2 eps]]`.
pub fn hamiltonian_lz(delta: f64, eps: f64) -> Herm2 {
    Herm2 { h11: 0.0, h22: -eps, h12: Complex64::from(0.5 * delta) }
}

/// Mode-basis Hamiltonian shifted by `eps/2 * I` so it becomes traceless,
/// `H = Delta/2 sigma_x + eps/2 sigma_z`. Populations cannot tell the two
/// gauges apart.
pub fn hamiltonian_lz_traceless(delta: f64, eps: f64) -> Herm2 {
    Herm2 { h11: 0.5 * eps, h22: -0.5 * eps, h12: Complex64::from(0.5 * delta) }
}

/// The drive waveform feeding the Hamiltonians.
#[derive(Debug, Clone, PartialEq)]
pub enum DriveWaveform {
    /// `eps(t) = eps0 + A cos(Omega t)`.
    Sinusoid { eps0: f64, amplitude: f64, omega: f64 },
    /// Arbitrary uniformly sampled coupling, linearly interpolated.
    Table(TimeSeries),
}

impl DriveWaveform {
    pub fn from_params(p: &TlsParams) -> Self {
        DriveWaveform::Sinusoid { eps0: p.eps0, amplitude: p.amplitude, omega: p.omega }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            DriveWaveform::Sinusoid { eps0, amplitude, omega } => {
                eps0 + amplitude * (omega * t).cos()
            }
            DriveWaveform::Table(series) => {
                let x = (t - series.t0) / series.dt;
                let i = x.floor().clamp(0.0, (series.len() - 2) as f64) as usize;
                let frac = (x - i as f64).clamp(0.0, 1.0);
                series.values[i] * (1.0 - frac) + series.values[i + 1] * frac
            }
        }
    }

    /// Largest frequency scale of the drive, used for step-size choices.
    pub fn frequency_scale(&self) -> f64 {
        match self {
            DriveWaveform::Sinusoid { eps0, amplitude, omega } => {
                (eps0.abs() + amplitude.abs()).max(*omega)
            }
            DriveWaveform::Table(series) => {
                series.values.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
            }
        }
    }

    /// Step size keeping `dt * max(|Delta|, |eps0| + A, Omega)` at 0.01.
    pub fn recommended_dt(&self, delta: f64) -> f64 {
        0.01 / self.frequency_scale().max(delta.abs()).max(1e-12)
    }
}

/// A uniformly sampled envelope trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeTrajectory {
    pub t0: f64,
    pub dt: f64,
    pub basis: Basis,
    pub samples: Vec<[Complex64; 2]>,
}

impl EnvelopeTrajectory {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn state(&self, i: usize) -> EnvelopeState {
        EnvelopeState::new(self.samples[i][0], self.samples[i][1], self.basis)
    }

    pub fn final_state(&self) -> EnvelopeState {
        self.state(self.samples.len() - 1)
    }

    /// Normalized occupations of the two components over time.
    pub fn population_series(&self) -> (TimeSeries, TimeSeries) {
        let mut pa = Vec::with_capacity(self.samples.len());
        let mut pb = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            let n = s[0].norm_sqr() + s[1].norm_sqr();
            pa.push(s[0].norm_sqr() / n);
            pb.push(s[1].norm_sqr() / n);
        }
        (TimeSeries::new(self.t0, self.dt, pa), TimeSeries::new(self.t0, self.dt, pb))
    }

    /// The two complex envelopes as series.
    pub fn envelope_series(&self) -> (ComplexSeries, ComplexSeries) {
        (
            ComplexSeries::new(self.t0, self.dt, self.samples.iter().map(|s| s[0]).collect()),
            ComplexSeries::new(self.t0, self.dt, self.samples.iter().map(|s| s[1]).collect()),
        )
    }

    /// Reconstruct carrier-resolved signals `2 Re(Psi e^{-i omega0 t})` for
    /// both components.
    pub fn reconstruct_carrier(&self, omega0: f64) -> (TimeSeries, TimeSeries) {
        let build = |idx: usize| {
            TimeSeries::new(
                self.t0,
                self.dt,
                self.samples
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let phase = Complex64::new(0.0, -omega0 * self.time(i)).exp();
                        2.0 * (s[idx] * phase).re
                    })
                    .collect(),
            )
        };
        (build(0), build(1))
    }

    /// CSV export with the columns t, re_a, im_a, re_b, im_b, basis.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,re_a,im_a,re_b,im_b,basis")?;
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.time(i),
                s[0].re,
                s[0].im,
                s[1].re,
                s[1].im,
                self.basis.label()
            )?;
        }
        Ok(())
    }
}

/// Propagate an envelope state with per-step exponentials of the midpoint
/// Hamiltonian. Unitary by construction, so the norm is conserved to
/// rounding.
pub fn evolve<H>(
    state0: EnvelopeState,
    hamiltonian: H,
    t_span: (f64, f64),
    dt: f64,
) -> Result<EnvelopeTrajectory>
where
    H: Fn(f64) -> Herm2,
{
    if !(dt > 0.0) {
        return Err(Error::domain(format!("propagation step must be positive, got {dt}")));
    }
    let (t0, t1) = t_span;
    let n_steps = ((t1 - t0) / dt).round() as usize;
    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut a = state0.a;
    let mut b = state0.b;
    for i in 0..=n_steps {
        samples.push([a, b]);
        if i == n_steps {
            break;
        }
        let t_mid = t0 + (i as f64 + 0.5) * dt;
        let h = hamiltonian(t_mid);
        if !h.is_finite() {
            return Err(Error::Divergence { t: t_mid });
        }
        let u = h.propagator(dt);
        let (na, nb) = (u[0] * a + u[1] * b, u[2] * a + u[3] * b);
        a = na;
        b = nb;
    }
    Ok(EnvelopeTrajectory { t0, dt, basis: state0.basis, samples })
}

/// Closed-form Rabi frequency of the lower-magnets-only configuration,
/// `Omega_R = A/2 = 3 mu0 m_l^2 l_l^2 / (pi omega0 J0 L^5)` (rad/s).
pub fn rabi_frequency(app: &Apparatus) -> Result<f64> {
    if app.magnets.upper.is_some() {
        return Err(Error::domain(
            "the closed-form Rabi frequency assumes no upper magnets".to_string(),
        ));
    }
    let e = app.interaction_energies()?;
    Ok(0.5 * e.lower / (app.omega_mean() * app.j_mean()))
}

/// Effective Rabi frequency and visibility of near-resonant driving:
/// `Omega_eff = sqrt((Delta - Omega)^2 + Omega_R^2)`,
/// `nu = Omega_R^2 / Omega_eff^2`.
pub fn effective_rabi(delta: f64, omega: f64, omega_r: f64) -> Result<(f64, f64)> {
    if omega_r < 0.0 {
        return Err(Error::domain(format!("Rabi frequency must be nonnegative, got {omega_r}")));
    }
    let omega_eff = ((delta - omega).powi(2) + omega_r * omega_r).sqrt();
    if omega_eff == 0.0 {
        return Err(Error::domain(
            "visibility undefined: Omega_eff = 0 (Omega_R = 0 at exact resonance)".to_string(),
        ));
    }
    Ok((omega_eff, omega_r * omega_r / (omega_eff * omega_eff)))
}

/// Magnitude of the sweep velocity at the avoided crossing,
/// `|v| = Omega sqrt(A^2 - eps0^2)`; the sign alternates with the sweep
/// direction.
pub fn sweep_velocity(omega: f64, amplitude: f64, eps0: f64) -> Result<f64> {
    if amplitude < eps0.abs() {
        return Err(Error::NoCrossing { amplitude, eps0_abs: eps0.abs() });
    }
    Ok(omega * (amplitude * amplitude - eps0 * eps0).sqrt())
}

/// Landau-Zener probability of a diabatic passage,
/// `P_LZ = exp(-pi Delta^2 / 2 |v|)`.
pub fn lz_probability(delta: f64, v: f64) -> Result<f64> {
    if v == 0.0 {
        return Err(Error::domain("Landau-Zener probability undefined at v = 0".to_string()));
    }
    Ok((-std::f64::consts::PI * delta * delta / (2.0 * v.abs())).exp())
}

/// Adiabatic eigenvalues of the mode-basis Hamiltonian at frozen coupling,
/// `w_± = (-eps ± sqrt(Delta^2 + eps^2)) / 2`, upper first.
pub fn adiabatic_eigenvalues(eps: f64, delta: f64) -> (f64, f64) {
    hamiltonian_lz(delta, eps).eigenvalues()
}

/// Accumulated drive phase `B = ∫ eps dt` and adiabatic phase
/// `Phi_ad = ∫ sqrt(Delta^2 + eps^2) dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticPhase {
    pub b: f64,
    pub phi_ad: f64,
}

/// Trapezoid-rule accumulation of the drive and adiabatic phases over
/// `t_span`.
pub fn adiabatic_phase(
    drive: &DriveWaveform,
    delta: f64,
    t_span: (f64, f64),
    dt: f64,
) -> Result<AdiabaticPhase> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("phase accumulation step must be positive, got {dt}")));
    }
    let (t0, t1) = t_span;
    let n = ((t1 - t0) / dt).round().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    let mut b = 0.0;
    let mut phi = 0.0;
    let split = |t: f64| {
        let eps = drive.eval(t);
        (eps, (delta * delta + eps * eps).sqrt())
    };
    let (mut eps_prev, mut e_prev) = split(t0);
    for i in 1..=n {
        let (eps, e) = split(t0 + i as f64 * h);
        b += 0.5 * h * (eps_prev + eps);
        phi += 0.5 * h * (e_prev + e);
        eps_prev = eps;
        e_prev = e;
    }
    Ok(AdiabaticPhase { b, phi_ad: phi })
}
