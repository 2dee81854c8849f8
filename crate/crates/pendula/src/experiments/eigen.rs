//! Consistency of the envelope approximation: the eigenvalues of the
//! two-level description, shifted up by the carrier frequency, must match
//! the positive eigenfrequencies of the linearized mechanical system for
//! small coupling.

use crate::model::Apparatus;
use crate::newton::apparatus_spectrum;
use crate::tls::adiabatic_eigenvalues;
use std::io::Write;

/// One frozen-coupling comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigencheckRow {
    pub eps: f64,
    /// Positive mechanical eigenfrequencies, upper branch first (rad/s);
    /// `NaN` when the branch is unstable.
    pub newton_upper: f64,
    pub newton_lower: f64,
    /// Two-level eigenvalues shifted by the carrier (rad/s).
    pub tls_upper_shifted: f64,
    pub tls_lower_shifted: f64,
    pub unstable: bool,
}

impl EigencheckRow {
    /// Largest branch-wise deviation (rad/s); `NaN` when unstable.
    pub fn deviation(&self) -> f64 {
        (self.newton_upper - self.tls_upper_shifted)
            .abs()
            .max((self.newton_lower - self.tls_lower_shifted).abs())
    }
}

/// Evaluate both spectra over a coupling grid.
pub fn run_eigenvalue_consistency(app: &Apparatus, eps_grid: &[f64]) -> Vec<EigencheckRow> {
    let omega0 = app.omega_mean();
    let delta = app.pendula.delta();
    eps_grid
        .iter()
        .map(|&eps| {
            let spectrum = apparatus_spectrum(app, eps);
            let [hi, lo] = spectrum.positive_frequencies();
            let (w_plus, w_minus) = adiabatic_eigenvalues(eps, delta);
            EigencheckRow {
                eps,
                newton_upper: hi.unwrap_or(f64::NAN),
                newton_lower: lo.unwrap_or(f64::NAN),
                tls_upper_shifted: omega0 + w_plus,
                tls_lower_shifted: omega0 + w_minus,
                unstable: spectrum.unstable(),
            }
        })
        .collect()
}

/// CSV export, one row per coupling value.
pub fn write_eigencheck_csv<W: Write>(rows: &[EigencheckRow], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "eps,newton_upper,newton_lower,tls_upper_shifted,tls_lower_shifted,deviation,unstable"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.eps,
            r.newton_upper,
            r.newton_lower,
            r.tls_upper_shifted,
            r.tls_lower_shifted,
            r.deviation(),
            u8::from(r.unstable)
        )?;
    }
    Ok(())
}
