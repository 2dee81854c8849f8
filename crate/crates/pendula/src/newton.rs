//! Classical dynamics of the coupled pendula: the full nonlinear equation of
//! motion with the exact dipole-dipole potential, the linearized equation
//! driven by an effective coupling, a fixed-step RK4 integrator, and the
//! frozen-coupling normal-mode spectrum used for consistency checks.

use crate::error::{Error, Result};
use crate::model::{Apparatus, DipoleConfiguration, TlsParams};
use crate::signal::TimeSeries;
use std::io::Write;

/// Step used for the central-difference torque of the dipole potential
/// (rad). The analytic gradient is deliberately not written out; the
/// potential stays the single source of truth.
pub const TORQUE_FD_STEP: f64 = 1e-7;

/// Reference frame of a mechanical state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Deflections measured from the vertical.
    Lab,
    /// Deflections measured from the momentary quasistatic equilibrium.
    QuasistaticRelative,
}

impl Frame {
    pub fn label(&self) -> &'static str {
        match self {
            Frame::Lab => "lab",
            Frame::QuasistaticRelative => "quasistatic-relative",
        }
    }
}

/// Instantaneous deflections and angular velocities of both pendula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonState {
    pub phi1: f64,
    pub phi2: f64,
    pub dphi1: f64,
    pub dphi2: f64,
    pub frame: Frame,
}

impl NewtonState {
    pub fn at_rest(frame: Frame) -> Self {
        NewtonState { phi1: 0.0, phi2: 0.0, dphi1: 0.0, dphi2: 0.0, frame }
    }

    pub fn is_finite(&self) -> bool {
        self.phi1.is_finite()
            && self.phi2.is_finite()
            && self.dphi1.is_finite()
            && self.dphi2.is_finite()
    }

    /// Sanity bound for physical pendula.
    pub fn is_physical(&self) -> bool {
        self.phi1.abs() < std::f64::consts::FRAC_PI_2
            && self.phi2.abs() < std::f64::consts::FRAC_PI_2
    }
}

/// Uniformly sampled mechanical trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<NewtonState>,
}

impl Trajectory {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn phi1(&self) -> TimeSeries {
        TimeSeries::new(self.t0, self.dt, self.samples.iter().map(|s| s.phi1).collect())
    }

    pub fn phi2(&self) -> TimeSeries {
        TimeSeries::new(self.t0, self.dt, self.samples.iter().map(|s| s.phi2).collect())
    }

    /// CSV export with the columns t, phi1, phi2, dphi1, dphi2, frame.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,phi1,phi2,dphi1,dphi2,frame")?;
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.time(i),
                s.phi1,
                s.phi2,
                s.dphi1,
                s.dphi2,
                s.frame.label()
            )?;
        }
        Ok(())
    }
}

/// Which magnet pair a potential evaluation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagnetPair {
    /// The pair at the rod ends; one magnet rotates at `Omega`.
    Lower,
    /// The static pair; mutually attracting, in the oscillation plane.
    Upper,
}

/// Exact dipole-dipole energy (J) of one magnet pair at lab-frame
/// deflections `(phi1, phi2)` and time `t`.
///
/// For the lower pair the rotation contributes the factor `cos(Omega t)`;
/// the upper pair is static with the in-plane attracting orientation.
pub fn dipole_potential(
    app: &Apparatus,
    pair: MagnetPair,
    phi1: f64,
    phi2: f64,
    t: f64,
) -> Result<f64> {
    let (moment, separation, arm, drive) = match pair {
        MagnetPair::Lower => (
            app.magnets.lower_moment,
            app.magnets.pivot_separation,
            app.pendula.lower_arm,
            (app.magnets.drive_omega * t).cos(),
        ),
        MagnetPair::Upper => match &app.magnets.upper {
            None => return Ok(0.0),
            Some(u) => (u.moment, u.separation, app.pendula.upper_arm, 1.0),
        },
    };
    if moment == 0.0 {
        return Ok(0.0);
    }
    let cfg = DipoleConfiguration::from_angles(separation, arm, phi1, phi2);
    if cfg.r <= 0.0 {
        return Err(Error::singular(format!(
            "magnet collision: separation {} m at ({phi1}, {phi2})",
            cfg.r
        )));
    }
    let bracket = (phi1 - phi2).cos() - 3.0 * (phi1 - cfg.psi).cos() * (phi2 - cfg.psi).cos();
    Ok(app.constants.mu0 * moment * moment / (4.0 * std::f64::consts::PI * cfg.r.powi(3))
        * bracket
        * drive)
}

/// Total coupling energy (J) of all present magnet pairs.
pub fn coupling_energy(app: &Apparatus, phi1: f64, phi2: f64, t: f64) -> Result<f64> {
    Ok(dipole_potential(app, MagnetPair::Lower, phi1, phi2, t)?
        + dipole_potential(app, MagnetPair::Upper, phi1, phi2, t)?)
}

/// Angular accelerations of the full nonlinear equation of motion,
/// `J_k ddphi_k = -J_k w_k^2 sin(phi_k) - dU/dphi_k`, with the torque from
/// central finite differences of the exact potential.
pub fn nonlinear_rhs(app: &Apparatus, state: &NewtonState, t: f64) -> Result<(f64, f64)> {
    debug_assert_eq!(state.frame, Frame::Lab);
    let g = app.constants.g;
    let p = &app.pendula;
    let h = TORQUE_FD_STEP;
    let du1 = (coupling_energy(app, state.phi1 + h, state.phi2, t)?
        - coupling_energy(app, state.phi1 - h, state.phi2, t)?)
        / (2.0 * h);
    let du2 = (coupling_energy(app, state.phi1, state.phi2 + h, t)?
        - coupling_energy(app, state.phi1, state.phi2 - h, t)?)
        / (2.0 * h);
    let a1 = -p.omega1 * p.omega1 * state.phi1.sin() - du1 / p.j1(g);
    let a2 = -p.omega2 * p.omega2 * state.phi2.sin() - du2 / p.j2(g);
    Ok((a1, a2))
}

/// Angular accelerations of the linearized equation of motion in the
/// quasistatic-relative frame:
/// `ddphi_1 = -w1^2 phi_1 + w0 eps(t) (phi_1 - phi_2)` and the mirror
/// equation for pendulum 2.
pub fn linear_rhs(
    state: &NewtonState,
    eps: f64,
    omega0: f64,
    omega1: f64,
    omega2: f64,
) -> (f64, f64) {
    debug_assert_eq!(state.frame, Frame::QuasistaticRelative);
    let x = state.phi1 - state.phi2;
    (
        -omega1 * omega1 * state.phi1 + omega0 * eps * x,
        -omega2 * omega2 * state.phi2 - omega0 * eps * x,
    )
}

/// Fixed-step classic Runge-Kutta integration of a second-order pair.
///
/// `rhs(state, t)` returns the two angular accelerations. Every step is
/// recorded, including the initial state.
pub fn integrate<F>(
    mut rhs: F,
    state0: NewtonState,
    t_span: (f64, f64),
    dt: f64,
) -> Result<Trajectory>
where
    F: FnMut(&NewtonState, f64) -> Result<(f64, f64)>,
{
    if !(dt > 0.0) {
        return Err(Error::domain(format!("integration step must be positive, got {dt}")));
    }
    let (t0, t1) = t_span;
    let n_steps = ((t1 - t0) / dt).round() as usize;
    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut y = [state0.phi1, state0.phi2, state0.dphi1, state0.dphi2];
    let frame = state0.frame;

    let eval = |y: &[f64; 4], t: f64, rhs: &mut F| -> Result<[f64; 4]> {
        let s = NewtonState { phi1: y[0], phi2: y[1], dphi1: y[2], dphi2: y[3], frame };
        let (a1, a2) = rhs(&s, t)?;
        Ok([y[2], y[3], a1, a2])
    };

    for i in 0..=n_steps {
        let t = t0 + i as f64 * dt;
        let state = NewtonState { phi1: y[0], phi2: y[1], dphi1: y[2], dphi2: y[3], frame };
        if !state.is_finite() {
            return Err(Error::Divergence { t });
        }
        samples.push(state);
        if i == n_steps {
            break;
        }
        let k1 = eval(&y, t, &mut rhs)?;
        let k2 = eval(&shifted(&y, &k1, 0.5 * dt), t + 0.5 * dt, &mut rhs)?;
        let k3 = eval(&shifted(&y, &k2, 0.5 * dt), t + 0.5 * dt, &mut rhs)?;
        let k4 = eval(&shifted(&y, &k3, dt), t + dt, &mut rhs)?;
        for j in 0..4 {
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    Ok(Trajectory { t0, dt, samples })
}

#[inline]
fn shifted(y: &[f64; 4], k: &[f64; 4], h: f64) -> [f64; 4] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3]]
}

/// As [`integrate`], but recording only every `stride`-th step. The
/// integration itself still advances at `dt`; the returned trajectory is
/// sampled at `stride * dt`. Long parameter scans use this to keep the
/// analysis grids small while the carrier stays well resolved.
pub fn integrate_strided<F>(
    mut rhs: F,
    state0: NewtonState,
    t_span: (f64, f64),
    dt: f64,
    stride: usize,
) -> Result<Trajectory>
where
    F: FnMut(&NewtonState, f64) -> Result<(f64, f64)>,
{
    if stride < 1 {
        return Err(Error::domain("sampling stride must be at least 1".to_string()));
    }
    let (t0, t1) = t_span;
    let n_steps = ((t1 - t0) / dt).round() as usize;
    let mut samples = Vec::with_capacity(n_steps / stride + 2);
    let mut y = [state0.phi1, state0.phi2, state0.dphi1, state0.dphi2];
    let frame = state0.frame;

    let eval = |y: &[f64; 4], t: f64, rhs: &mut F| -> Result<[f64; 4]> {
        let s = NewtonState { phi1: y[0], phi2: y[1], dphi1: y[2], dphi2: y[3], frame };
        let (a1, a2) = rhs(&s, t)?;
        Ok([y[2], y[3], a1, a2])
    };

    for i in 0..=n_steps {
        let t = t0 + i as f64 * dt;
        if i % stride == 0 {
            let state = NewtonState { phi1: y[0], phi2: y[1], dphi1: y[2], dphi2: y[3], frame };
            if !state.is_finite() {
                return Err(Error::Divergence { t });
            }
            samples.push(state);
        }
        if i == n_steps {
            break;
        }
        let k1 = eval(&y, t, &mut rhs)?;
        let k2 = eval(&shifted(&y, &k1, 0.5 * dt), t + 0.5 * dt, &mut rhs)?;
        let k3 = eval(&shifted(&y, &k2, 0.5 * dt), t + 0.5 * dt, &mut rhs)?;
        let k4 = eval(&shifted(&y, &k3, dt), t + dt, &mut rhs)?;
        for j in 0..4 {
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    Ok(Trajectory { t0, dt: dt * stride as f64, samples })
}

/// Integrate the full nonlinear dynamics of the apparatus in the lab frame.
pub fn integrate_nonlinear(
    app: &Apparatus,
    state0: NewtonState,
    t_span: (f64, f64),
    dt: f64,
) -> Result<Trajectory> {
    integrate(|s, t| nonlinear_rhs(app, s, t), state0, t_span, dt)
}

/// Integrate the linearized dynamics in the quasistatic-relative frame with
/// the drive `eps(t) = eps0 + A cos(Omega t)`.
pub fn integrate_linear(
    tls: &TlsParams,
    omega1: f64,
    omega2: f64,
    state0: NewtonState,
    t_span: (f64, f64),
    dt: f64,
) -> Result<Trajectory> {
    let omega0 = 0.5 * (omega1 + omega2);
    integrate(
        |s, t| Ok(linear_rhs(s, tls.eps(t), omega0, omega1, omega2)),
        state0,
        t_span,
        dt,
    )
}

/// Convert a state between the lab and quasistatic-relative frames. The
/// quasistatic velocity is neglected, consistent with the adiabatic
/// approximation behind the reference-point shift.
pub fn convert_frame(app: &Apparatus, state: &NewtonState, t: f64, target: Frame) -> Result<NewtonState> {
    if state.frame == target {
        return Ok(*state);
    }
    let (q1, q2) = app.quasistatic_deflection(t)?;
    let sign = match target {
        Frame::Lab => 1.0,
        Frame::QuasistaticRelative => -1.0,
    };
    Ok(NewtonState {
        phi1: state.phi1 + sign * q1,
        phi2: state.phi2 + sign * q2,
        dphi1: state.dphi1,
        dphi2: state.dphi2,
        frame: target,
    })
}

/// Mechanical energy (J) of the nonlinear system with potentials referenced
/// to the hanging configuration, `T + J w^2 (1 - cos phi) + U_dip - U_dip(0)`.
pub fn mechanical_energy(app: &Apparatus, state: &NewtonState, t: f64) -> Result<f64> {
    let g = app.constants.g;
    let p = &app.pendula;
    let (j1, j2) = (p.j1(g), p.j2(g));
    let kinetic = 0.5 * j1 * state.dphi1 * state.dphi1 + 0.5 * j2 * state.dphi2 * state.dphi2;
    let gravity = j1 * p.omega1 * p.omega1 * (1.0 - state.phi1.cos())
        + j2 * p.omega2 * p.omega2 * (1.0 - state.phi2.cos());
    let dip = coupling_energy(app, state.phi1, state.phi2, t)?
        - coupling_energy(app, 0.0, 0.0, t)?;
    Ok(kinetic + gravity + dip)
}

/// Frozen-coupling spectrum of the linearized system.
///
/// The eigenvalues `lambda` of `Q = M^{-1/2} V M^{-1/2}` give the four
/// mode frequencies `±sqrt(lambda)`; a negative `lambda` marks an unstable
/// (exponentially growing) mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSpectrum {
    /// Upper eigenvalue of `Q` (rad²/s²).
    pub lambda_upper: f64,
    /// Lower eigenvalue of `Q` (rad²/s²).
    pub lambda_lower: f64,
}

impl LinearSpectrum {
    pub fn unstable(&self) -> bool {
        self.lambda_lower < 0.0 || self.lambda_upper < 0.0
    }

    /// The positive oscillation frequencies (rad/s), `None` for an
    /// unstable branch.
    pub fn positive_frequencies(&self) -> [Option<f64>; 2] {
        let f = |l: f64| if l >= 0.0 { Some(l.sqrt()) } else { None };
        [f(self.lambda_upper), f(self.lambda_lower)]
    }

    /// Growth rates (1/s) of unstable branches, zero when oscillatory.
    pub fn growth_rates(&self) -> [f64; 2] {
        let f = |l: f64| if l < 0.0 { (-l).sqrt() } else { 0.0 };
        [f(self.lambda_upper), f(self.lambda_lower)]
    }

    /// All four eigenvalues `±sqrt(lambda)` as (real, imaginary) parts in
    /// rad/s, mirroring the symmetric spectrum of a second-order system.
    pub fn eigenvalues(&self) -> [(f64, f64); 4] {
        let mut out = [(0.0, 0.0); 4];
        for (i, l) in [self.lambda_upper, self.lambda_lower].into_iter().enumerate() {
            let (re, im) = if l >= 0.0 { (l.sqrt(), 0.0) } else { (0.0, (-l).sqrt()) };
            out[2 * i] = (re, im);
            out[2 * i + 1] = (-re, -im);
        }
        out
    }
}

/// Spectrum of the linearized system at frozen coupling `eps`.
///
/// The potential-curvature matrix is `V = [[J1 w1^2 - G, G], [G, J2 w2^2 - G]]`
/// with `G = omega0 * eps * J0`; masses enter through `M = diag(J1, J2)`.
pub fn linearized_eigenfrequencies(
    eps: f64,
    omega0: f64,
    j1: f64,
    j2: f64,
    omega1: f64,
    omega2: f64,
) -> LinearSpectrum {
    let j0 = 0.5 * (j1 + j2);
    let g = omega0 * eps * j0;
    let q11 = omega1 * omega1 - g / j1;
    let q22 = omega2 * omega2 - g / j2;
    let q12 = g / (j1 * j2).sqrt();
    let mean = 0.5 * (q11 + q22);
    let disc = (0.25 * (q11 - q22) * (q11 - q22) + q12 * q12).sqrt();
    LinearSpectrum { lambda_upper: mean + disc, lambda_lower: mean - disc }
}

/// Spectrum at frozen coupling for a given apparatus.
pub fn apparatus_spectrum(app: &Apparatus, eps: f64) -> LinearSpectrum {
    let g = app.constants.g;
    let p = &app.pendula;
    linearized_eigenfrequencies(eps, p.omega_mean(), p.j1(g), p.j2(g), p.omega1, p.omega2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UpperMagnets;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn rabi_apparatus(pivot: f64) -> Apparatus {
        let mut app = Apparatus::paper_default();
        app.magnets.pivot_separation = pivot;
        app
    }

    #[test]
    fn collinear_attracting_pair_energy() {
        let app = rabi_apparatus(0.33);
        let u = dipole_potential(&app, MagnetPair::Lower, 0.0, 0.0, 0.0).unwrap();
        let m = app.magnets.lower_moment;
        let expected = -2.0 * app.constants.mu0 * m * m
            / (4.0 * PI * app.magnets.pivot_separation.powi(3));
        assert_relative_eq!(u, expected, max_relative = 1e-14);
    }

    #[test]
    fn rotating_magnet_at_quarter_turn_decouples() {
        let app = rabi_apparatus(0.33);
        let quarter = 0.5 * PI / app.magnets.drive_omega;
        let u = dipole_potential(&app, MagnetPair::Lower, 0.01, -0.004, quarter).unwrap();
        assert_abs_diff_eq!(u, 0.0, epsilon = 1e-16);
    }

    #[test]
    fn potential_curvature_matches_linearized_energy() {
        // d^2 U / d(phi1-phi2)^2 at zero deflection vs -G of the expansion;
        // the neglected numerator carries ~1% of the curvature
        let mut app = rabi_apparatus(0.33);
        app.magnets.upper = Some(UpperMagnets { moment: 6.544, separation: 0.15 });
        let cpl = app.raw_modulation(0.0).unwrap();
        let h = 1e-4;
        let u = |x: f64| coupling_energy(&app, 0.5 * x, -0.5 * x, 0.0).unwrap();
        let curvature = (u(h) - 2.0 * u(0.0) + u(-h)) / (h * h);
        assert_relative_eq!(curvature, -cpl.quadratic, max_relative = 0.02);
    }

    #[test]
    fn free_pendulum_reduces_to_gravity() {
        let mut app = rabi_apparatus(0.33);
        app.magnets.lower_moment = 0.0;
        let state =
            NewtonState { phi1: 0.3, phi2: 0.0, dphi1: 0.0, dphi2: 0.0, frame: Frame::Lab };
        let (a1, a2) = nonlinear_rhs(&app, &state, 0.0).unwrap();
        assert_relative_eq!(
            a1,
            -app.pendula.omega1 * app.pendula.omega1 * 0.3_f64.sin(),
            max_relative = 1e-12
        );
        assert_abs_diff_eq!(a2, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn static_symmetric_torques_balance() {
        let mut app = rabi_apparatus(0.33);
        app.pendula.omega1 = app.pendula.omega2;
        app.pendula.com1 = app.pendula.com2;
        app.magnets.drive_omega = 0.0;
        let state = NewtonState::at_rest(Frame::Lab);
        let (a1, a2) = nonlinear_rhs(&app, &state, 0.0).unwrap();
        assert_relative_eq!(a1, -a2, max_relative = 1e-6);
    }

    #[test]
    fn torque_matches_richardson_extrapolation() {
        let app = rabi_apparatus(0.28);
        let t = 40.0;
        let (phi1, phi2) = (0.012, -0.007);
        let d = |h: f64| {
            (coupling_energy(&app, phi1 + h, phi2, t).unwrap()
                - coupling_energy(&app, phi1 - h, phi2, t).unwrap())
                / (2.0 * h)
        };
        let h = TORQUE_FD_STEP;
        let richardson = (4.0 * d(0.5 * h) - d(h)) / 3.0;
        assert_relative_eq!(d(h), richardson, max_relative = 1e-6);
    }

    #[test]
    fn linear_rhs_uncoupled_oscillators_conserve_energy() {
        let state0 = NewtonState {
            phi1: 0.01,
            phi2: -0.004,
            dphi1: 0.0,
            dphi2: 0.002,
            frame: Frame::QuasistaticRelative,
        };
        let (w1, w2) = (3.36, 3.28);
        let traj = integrate(
            |s, _| Ok(linear_rhs(s, 0.0, 0.5 * (w1 + w2), w1, w2)),
            state0,
            (0.0, 200.0),
            1e-3,
        )
        .unwrap();
        let energy = |s: &NewtonState| {
            (
                0.5 * (s.dphi1 * s.dphi1 + w1 * w1 * s.phi1 * s.phi1),
                0.5 * (s.dphi2 * s.dphi2 + w2 * w2 * s.phi2 * s.phi2),
            )
        };
        let (e1_0, e2_0) = energy(&traj.samples[0]);
        for s in traj.samples.iter().step_by(5000) {
            let (e1, e2) = energy(s);
            assert_relative_eq!(e1, e1_0, max_relative = 1e-6);
            assert_relative_eq!(e2, e2_0, max_relative = 1e-6);
        }
    }

    #[test]
    fn in_phase_mode_ignores_coupling() {
        // equal frequencies, phi1 = phi2: the coupling term cancels and the
        // mode oscillates at exactly omega0 whatever eps(t) does
        let w0 = 3.32;
        let state0 = NewtonState {
            phi1: 0.01,
            phi2: 0.01,
            dphi1: 0.0,
            dphi2: 0.0,
            frame: Frame::QuasistaticRelative,
        };
        let wild_eps = |t: f64| 0.4 * (0.05 * t).cos() + 0.2 * (0.013 * t).sin();
        let traj = integrate(
            |s, t| Ok(linear_rhs(s, wild_eps(t), w0, w0, w0)),
            state0,
            (0.0, 4.0 * 2.0 * PI / w0),
            1e-4,
        )
        .unwrap();
        for (i, s) in traj.samples.iter().enumerate().step_by(1000) {
            let expected = 0.01 * (w0 * traj.time(i)).cos();
            assert_abs_diff_eq!(s.phi1, expected, epsilon = 1e-8);
            assert_abs_diff_eq!(s.phi1, s.phi2, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_coupling_beat_matches_adiabatic_splitting() {
        let (w1, w2) = (3.36_f64, 3.30_f64);
        let w0 = 0.5 * (w1 + w2);
        let eps = 0.09_f64;
        let delta = w1 - w2;
        let splitting = (delta * delta + eps * eps).sqrt();
        let state0 = NewtonState {
            phi1: 0.01,
            phi2: 0.0,
            dphi1: 0.0,
            dphi2: 0.0,
            frame: Frame::QuasistaticRelative,
        };
        let traj = integrate(
            |s, _| Ok(linear_rhs(s, eps, w0, w1, w2)),
            state0,
            (0.0, 1.6 * 2.0 * PI / splitting),
            2e-3,
        )
        .unwrap();
        // pendulum-2 energy returns to its node after one full beat period
        let e2 = crate::signal::TimeSeries::new(
            traj.t0,
            traj.dt,
            traj.samples
                .iter()
                .map(|s| s.dphi2 * s.dphi2 + w2 * w2 * s.phi2 * s.phi2)
                .collect(),
        );
        let smooth = crate::signal::gaussian_lowpass(&e2, 1.0).unwrap();
        let beat = 2.0 * PI / splitting;
        let lo = smooth.index_at(0.5 * beat);
        let hi = smooth.index_at(1.5 * beat);
        let node = (lo..hi)
            .min_by(|a, b| smooth.values[*a].total_cmp(&smooth.values[*b]))
            .unwrap();
        assert_relative_eq!(smooth.time(node), beat, max_relative = 0.02);
    }

    #[test]
    fn harmonic_energy_drift_stays_small() {
        let w = 3.3;
        let state0 = NewtonState {
            phi1: 0.014,
            phi2: 0.0,
            dphi1: 0.0,
            dphi2: 0.0,
            frame: Frame::QuasistaticRelative,
        };
        let traj = integrate(
            |s, _| Ok(linear_rhs(s, 0.0, w, w, w)),
            state0,
            (0.0, 100.0 * 2.0 * PI / w),
            1e-3,
        )
        .unwrap();
        let e = |s: &NewtonState| 0.5 * (s.dphi1 * s.dphi1 + w * w * s.phi1 * s.phi1);
        let e0 = e(&traj.samples[0]);
        let drift = traj.samples.iter().map(|s| (e(s) - e0).abs()).fold(0.0, f64::max);
        assert!(drift / e0 < 1e-6, "relative drift {}", drift / e0);
    }

    #[test]
    fn zero_state_stays_zero() {
        let mut app = rabi_apparatus(0.33);
        app.magnets.lower_moment = 0.0;
        let traj =
            integrate_nonlinear(&app, NewtonState::at_rest(Frame::Lab), (0.0, 10.0), 1e-3)
                .unwrap();
        for s in &traj.samples {
            assert_eq!((s.phi1, s.phi2, s.dphi1, s.dphi2), (0.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn integrator_converges_at_fourth_order() {
        let w = 3.3;
        let state0 = NewtonState {
            phi1: 0.01,
            phi2: 0.0,
            dphi1: 0.0,
            dphi2: 0.0,
            frame: Frame::QuasistaticRelative,
        };
        let run = |dt: f64| {
            let traj =
                integrate(|s, _| Ok(linear_rhs(s, 0.0, w, w, w)), state0, (0.0, 10.0), dt)
                    .unwrap();
            let s = traj.samples.last().unwrap();
            (s.phi1 - 0.01 * (w * 10.0f64).cos()).abs()
        };
        let (e1, e2) = (run(4e-3), run(2e-3));
        let order = (e1 / e2).log2();
        assert!(order >= 3.8, "measured order {order}");
    }

    #[test]
    fn divergent_state_is_reported_with_time() {
        let state0 = NewtonState {
            phi1: 0.01,
            phi2: 0.0,
            dphi1: 0.0,
            dphi2: 0.0,
            frame: Frame::QuasistaticRelative,
        };
        let err = integrate(|_, t| if t < 1.0 { Ok((0.0, 0.0)) } else { Ok((f64::NAN, 0.0)) },
            state0, (0.0, 5.0), 0.1)
        .unwrap_err();
        match err {
            Error::Divergence { t } => assert!(t > 0.9 && t < 1.5, "t = {t}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn uncoupled_spectrum_is_exact() {
        let s = linearized_eigenfrequencies(0.0, 3.3, 3.1, 3.2, 3.36, 3.24);
        let [f_hi, f_lo] = s.positive_frequencies();
        assert_relative_eq!(f_hi.unwrap(), 3.36, max_relative = 1e-14);
        assert_relative_eq!(f_lo.unwrap(), 3.24, max_relative = 1e-14);
    }

    #[test]
    fn symmetric_spectrum_splits_as_closed_form() {
        let w0 = 3.3;
        let eps = 0.05;
        let s = linearized_eigenfrequencies(eps, w0, 3.2, 3.2, w0, w0);
        let [f_hi, f_lo] = s.positive_frequencies();
        assert_relative_eq!(f_hi.unwrap(), w0, max_relative = 1e-12);
        assert_relative_eq!(
            f_lo.unwrap(),
            (w0 * w0 - 2.0 * w0 * eps).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn overcritical_coupling_is_flagged_unstable() {
        let w0 = 3.3;
        let s = linearized_eigenfrequencies(1.1 * w0, w0, 3.2, 3.2, w0, w0);
        assert!(s.unstable());
        let eigs = s.eigenvalues();
        let imaginary = eigs.iter().filter(|(re, im)| *re == 0.0 && *im != 0.0).count();
        assert_eq!(imaginary, 2);
    }

    #[test]
    fn spectrum_is_symmetric_about_zero() {
        let s = linearized_eigenfrequencies(0.21, 3.3, 3.0, 3.3, 3.35, 3.25);
        let eigs = s.eigenvalues();
        for pair in eigs.chunks(2) {
            assert_eq!(pair[0].0, -pair[1].0);
            assert_eq!(pair[0].1, -pair[1].1);
        }
    }

    #[test]
    fn linearization_matches_nonlinear_torques_at_small_angles() {
        // weak-coupling configuration; each deflection within the published
        // |phi| < 0.014 rad operating range
        let app = rabi_apparatus(0.4965);
        let omega0 = app.omega_mean();
        let (w1, w2) = (app.pendula.omega1, app.pendula.omega2);
        let mut worst = 0.0_f64;
        for it in 0..6 {
            let t = it as f64 * 70.0;
            let eps = app.effective_coupling(t).unwrap();
            let (q1, q2) = app.quasistatic_deflection(t).unwrap();
            for &p1 in &[-0.014, -0.007, 0.0, 0.01, 0.014] {
                for &p2 in &[-0.014, -0.004, 0.0, 0.008, 0.014] {
                    let rel = NewtonState {
                        phi1: p1,
                        phi2: p2,
                        dphi1: 0.0,
                        dphi2: 0.0,
                        frame: Frame::QuasistaticRelative,
                    };
                    let lab = NewtonState {
                        phi1: p1 + q1,
                        phi2: p2 + q2,
                        dphi1: 0.0,
                        dphi2: 0.0,
                        frame: Frame::Lab,
                    };
                    let (n1, n2) = nonlinear_rhs(&app, &lab, t).unwrap();
                    let (l1, l2) = linear_rhs(&rel, eps, omega0, w1, w2);
                    let mag = (n1 * n1 + n2 * n2).sqrt().max(1e-3);
                    let miss = ((n1 - l1).powi(2) + (n2 - l2).powi(2)).sqrt() / mag;
                    worst = worst.max(miss);
                }
            }
        }
        assert!(worst < 1e-3, "worst relative torque mismatch {worst}");
    }

    #[test]
    fn frame_conversion_round_trips() {
        let app = rabi_apparatus(0.28);
        let state = NewtonState {
            phi1: 0.009,
            phi2: -0.002,
            dphi1: 0.001,
            dphi2: 0.0,
            frame: Frame::Lab,
        };
        let rel = convert_frame(&app, &state, 12.0, Frame::QuasistaticRelative).unwrap();
        let back = convert_frame(&app, &rel, 12.0, Frame::Lab).unwrap();
        assert_relative_eq!(back.phi1, state.phi1, max_relative = 1e-14);
        assert_relative_eq!(back.phi2, state.phi2, max_relative = 1e-14);
    }

    #[test]
    fn trajectory_csv_has_header_and_frame_column() {
        let state0 = NewtonState::at_rest(Frame::Lab);
        let traj = Trajectory { t0: 0.0, dt: 0.5, samples: vec![state0, state0] };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,phi1,phi2,dphi1,dphi2,frame");
        assert!(lines.next().unwrap().ends_with(",lab"));
    }
}
