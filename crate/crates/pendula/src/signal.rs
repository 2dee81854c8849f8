//! The data-analysis chain applied to deflection traces: time-scale
//! separation by Gaussian low-pass filtering, envelope and population
//! extraction, smoothed Fourier spectra, and Husimi time-frequency maps.
//!
//! The raw motion `phi_lab(t)` decomposes into a slowly moving center
//! `xi(t)` (the quasistatic equilibrium) plus fast oscillations near the
//! carrier `omega0`. Squaring the fast part and removing the `2 omega0`
//! component leaves `2 |Psi(t)|^2`, the squared envelope that plays the
//! role of an occupation.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::io::Write;

/// A uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Self {
        assert!(dt > 0.0, "sampling step must be positive");
        TimeSeries { t0, dt, values }
    }

    pub fn from_fn(t0: f64, dt: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> Self {
        TimeSeries::new(t0, dt, (0..n).map(|i| f(t0 + i as f64 * dt)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    /// Index of the sample closest to `t`, clamped to the span.
    pub fn index_at(&self, t: f64) -> usize {
        let i = ((t - self.t0) / self.dt).round();
        (i.max(0.0) as usize).min(self.len().saturating_sub(1))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Keep every `stride`-th sample.
    pub fn decimate(&self, stride: usize) -> TimeSeries {
        assert!(stride >= 1);
        TimeSeries::new(
            self.t0,
            self.dt * stride as f64,
            self.values.iter().step_by(stride).copied().collect(),
        )
    }

    /// Restrict to samples with time in `[lo, hi]`.
    pub fn slice_time(&self, lo: f64, hi: f64) -> TimeSeries {
        let i0 = ((lo - self.t0) / self.dt).ceil().max(0.0) as usize;
        let i1 = (((hi - self.t0) / self.dt).floor() as usize).min(self.len() - 1);
        TimeSeries::new(self.time(i0), self.dt, self.values[i0..=i1].to_vec())
    }

    fn same_grid(&self, other: &TimeSeries) -> bool {
        self.len() == other.len()
            && (self.t0 - other.t0).abs() <= 1e-9 * self.dt
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
    }
}

/// A uniformly sampled complex signal (an envelope).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<Complex64>,
}

impl ComplexSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<Complex64>) -> Self {
        assert!(dt > 0.0, "sampling step must be positive");
        ComplexSeries { t0, dt, values }
    }

    pub fn from_real(series: &TimeSeries) -> Self {
        ComplexSeries::new(
            series.t0,
            series.dt,
            series.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn decimate(&self, stride: usize) -> ComplexSeries {
        assert!(stride >= 1);
        ComplexSeries::new(
            self.t0,
            self.dt * stride as f64,
            self.values.iter().step_by(stride).copied().collect(),
        )
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward FFT, shared with the runners for windowed peak extraction.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    fft_in_place(buf, false);
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let fft = if inverse {
            p.borrow_mut().plan_fft_inverse(buf.len())
        } else {
            p.borrow_mut().plan_fft_forward(buf.len())
        };
        fft.process(buf);
    });
}

/// Normalized Gaussian kernel truncated at `±4 sigma`, in units of samples.
fn gaussian_kernel(sigma_samples: f64) -> Vec<f64> {
    let h = (4.0 * sigma_samples).ceil() as usize;
    let mut k: Vec<f64> = (0..=2 * h)
        .map(|j| {
            let x = j as f64 - h as f64;
            (-0.5 * x * x / (sigma_samples * sigma_samples)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Reflect-padded values: index `-k` maps to `k`, index `n-1+k` to `n-1-k`.
fn reflected(values: &[f64], h: usize) -> Vec<f64> {
    let n = values.len();
    let mut out = Vec::with_capacity(n + 2 * h);
    for k in (1..=h).rev() {
        out.push(values[k.min(n - 1)]);
    }
    out.extend_from_slice(values);
    for k in 1..=h {
        out.push(values[n - 1 - k.min(n - 1).min(n - 1)]);
    }
    out
}

/// Convolve `values` with the symmetric `kernel` (odd length), reflect-padded
/// so the output has the same length. Switches to an FFT product when the
/// direct sum would be large.
fn convolve_same(values: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = values.len();
    let h = kernel.len() / 2;
    let padded = reflected(values, h);
    if n * kernel.len() <= 1 << 22 {
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &w) in kernel.iter().enumerate() {
                acc += w * padded[i + j];
            }
            *o = acc;
        }
        return out;
    }
    // circular FFT convolution with a centered kernel; the zero padding is
    // long enough that no wraparound reaches the extracted interior
    let m = padded.len();
    let size = (m + kernel.len()).next_power_of_two();
    let mut sig = vec![Complex64::default(); size];
    for (s, &v) in sig.iter_mut().zip(&padded) {
        *s = Complex64::new(v, 0.0);
    }
    let mut ker = vec![Complex64::default(); size];
    for (j, &w) in kernel.iter().enumerate() {
        let idx = (j + size - h) % size;
        ker[idx] = Complex64::new(w, 0.0);
    }
    fft_in_place(&mut sig, false);
    fft_in_place(&mut ker, false);
    for (s, k) in sig.iter_mut().zip(&ker) {
        *s *= k;
    }
    fft_in_place(&mut sig, true);
    let scale = 1.0 / size as f64;
    (h..h + n).map(|i| sig[i].re * scale).collect()
}

/// Discrete convolution with a normalized Gaussian of width `sigma`
/// (seconds), truncated at `±4 sigma`, reflect-padded boundaries.
pub fn gaussian_lowpass(series: &TimeSeries, sigma: f64) -> Result<TimeSeries> {
    if !(sigma > series.dt) {
        return Err(Error::Resolution(format!(
            "low-pass width sigma = {sigma} s must exceed the sampling step {} s",
            series.dt
        )));
    }
    let kernel = gaussian_kernel(sigma / series.dt);
    Ok(TimeSeries::new(series.t0, series.dt, convolve_same(&series.values, &kernel)))
}

/// Split a lab-frame trace into its slow center `xi` (the quasistatic
/// component) and the fast oscillations around it: `xi = lowpass(series)`,
/// `fast = series - xi`.
pub fn split_timescales(series: &TimeSeries, sigma: f64) -> Result<(TimeSeries, TimeSeries)> {
    let xi = gaussian_lowpass(series, sigma)?;
    let fast = TimeSeries::new(
        series.t0,
        series.dt,
        series.values.iter().zip(&xi.values).map(|(v, s)| v - s).collect(),
    );
    Ok((xi, fast))
}

/// Squared envelope `|Psi(t)|^2` of a fast oscillation: the square of the
/// trace contains `2 |Psi|^2` plus terms at twice the carrier frequency,
/// which the low-pass removes.
pub fn envelope_sq(phi_fast: &TimeSeries, sigma: f64) -> Result<TimeSeries> {
    let squared = TimeSeries::new(
        phi_fast.t0,
        phi_fast.dt,
        phi_fast.values.iter().map(|v| v * v).collect(),
    );
    let smooth = gaussian_lowpass(&squared, sigma)?;
    Ok(TimeSeries::new(
        smooth.t0,
        smooth.dt,
        smooth.values.iter().map(|v| 0.5 * v).collect(),
    ))
}

/// In-phase and out-of-phase mode combinations `(phi1 ± phi2) / 2`.
pub fn mode_transform(phi1: &TimeSeries, phi2: &TimeSeries) -> Result<(TimeSeries, TimeSeries)> {
    if !phi1.same_grid(phi2) {
        return Err(Error::GridMismatch(format!(
            "mode transform needs equal grids: ({}, {}, {}) vs ({}, {}, {})",
            phi1.t0,
            phi1.dt,
            phi1.len(),
            phi2.t0,
            phi2.dt,
            phi2.len()
        )));
    }
    let plus = TimeSeries::new(
        phi1.t0,
        phi1.dt,
        phi1.values.iter().zip(&phi2.values).map(|(a, b)| 0.5 * (a + b)).collect(),
    );
    let minus = TimeSeries::new(
        phi1.t0,
        phi1.dt,
        phi1.values.iter().zip(&phi2.values).map(|(a, b)| 0.5 * (a - b)).collect(),
    );
    Ok((plus, minus))
}

/// Pointwise normalization of squared envelopes to unit total, turning them
/// into occupations with `sum_k P_k(t) = 1`.
pub fn populations(envelopes: &[&TimeSeries]) -> Result<Vec<TimeSeries>> {
    let first = envelopes.first().ok_or_else(|| Error::domain("no envelopes given"))?;
    for e in envelopes {
        if !first.same_grid(e) {
            return Err(Error::GridMismatch("population inputs differ in grid".to_string()));
        }
    }
    let n = first.len();
    let mut out: Vec<Vec<f64>> = envelopes.iter().map(|_| Vec::with_capacity(n)).collect();
    for i in 0..n {
        let total: f64 = envelopes.iter().map(|e| e.values[i]).sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateSignal { t: first.time(i) });
        }
        for (k, e) in envelopes.iter().enumerate() {
            out[k].push(e.values[i] / total);
        }
    }
    Ok(out
        .into_iter()
        .map(|v| TimeSeries::new(first.t0, first.dt, v))
        .collect())
}

/// One refined spectral maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak {
    /// Peak position (Hz), refined by quadratic interpolation around the bin.
    pub freq_hz: f64,
    /// Smoothed magnitude at the peak.
    pub magnitude: f64,
}

/// Discrete magnitude spectrum on the physical frequency grid, with a
/// Gaussian-smoothed copy and its local maxima.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Frequency spacing (Hz); bin `k` sits at `k * df`.
    pub df: f64,
    /// Raw DFT magnitudes for bins `0 ..= n/2`.
    pub magnitudes: Vec<f64>,
    /// Gaussian-smoothed magnitudes.
    pub smoothed: Vec<f64>,
    /// Smoothing width (Hz).
    pub smoothing_sigma: f64,
    /// Local maxima of the smoothed spectrum above the relative threshold,
    /// the zero-frequency bin excluded.
    pub peaks: Vec<SpectralPeak>,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.df
    }

    /// The strongest peak, if any.
    pub fn dominant_peak(&self) -> Option<SpectralPeak> {
        self.peaks
            .iter()
            .copied()
            .max_by(|a, b| a.magnitude.total_cmp(&b.magnitude))
    }

    /// CSV export with the columns freq_hz, magnitude, smoothed.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "freq_hz,magnitude,smoothed")?;
        for (i, (m, s)) in self.magnitudes.iter().zip(&self.smoothed).enumerate() {
            writeln!(w, "{},{},{}", self.frequency(i), m, s)?;
        }
        Ok(())
    }
}

/// Relative height (against the global maximum away from zero frequency)
/// below which smoothed local maxima are not reported.
pub const PEAK_THRESHOLD: f64 = 0.05;

/// Magnitude spectrum of a real series with Gaussian smoothing of width
/// `smoothing_sigma` (Hz) and peak extraction.
pub fn spectrum(series: &TimeSeries, smoothing_sigma: f64) -> Result<Spectrum> {
    spectrum_with_threshold(series, smoothing_sigma, PEAK_THRESHOLD)
}

/// As [`spectrum`], with a configurable peak threshold.
pub fn spectrum_with_threshold(
    series: &TimeSeries,
    smoothing_sigma: f64,
    threshold: f64,
) -> Result<Spectrum> {
    let n = series.len();
    if n < 64 {
        return Err(Error::TooShort { needed: 64, got: n });
    }
    let mut buf: Vec<Complex64> =
        series.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf, false);
    let half = n / 2;
    let magnitudes: Vec<f64> = buf[..=half].iter().map(|c| c.norm()).collect();
    let df = 1.0 / (n as f64 * series.dt);

    let sigma_bins = smoothing_sigma / df;
    let smoothed = if sigma_bins > 0.5 {
        convolve_same(&magnitudes, &gaussian_kernel(sigma_bins))
    } else {
        magnitudes.clone()
    };

    let floor = threshold
        * smoothed
            .iter()
            .skip(1)
            .fold(0.0_f64, |a, &b| a.max(b));
    let mut peaks = Vec::new();
    for i in 1..smoothed.len().saturating_sub(1) {
        if smoothed[i] > smoothed[i - 1] && smoothed[i] >= smoothed[i + 1] && smoothed[i] >= floor
        {
            let (offset, height) = refine_parabolic(smoothed[i - 1], smoothed[i], smoothed[i + 1]);
            peaks.push(SpectralPeak { freq_hz: (i as f64 + offset) * df, magnitude: height });
        }
    }
    Ok(Spectrum { df, magnitudes, smoothed, smoothing_sigma, peaks })
}

/// Sub-bin peak refinement through a parabola on the log magnitudes
/// (exact for a Gaussian line shape); falls back to the plain values when
/// any of them is not positive.
fn refine_parabolic(left: f64, center: f64, right: f64) -> (f64, f64) {
    let (a, b, c) = if left > 0.0 && center > 0.0 && right > 0.0 {
        (left.ln(), center.ln(), right.ln())
    } else {
        (left, center, right)
    };
    let denom = a - 2.0 * b + c;
    if denom == 0.0 {
        return (0.0, center);
    }
    let offset = 0.5 * (a - c) / denom;
    let offset = offset.clamp(-0.5, 0.5);
    (offset, center)
}

/// Time-frequency map built from overlaps with Gaussian wave packets.
#[derive(Debug, Clone, PartialEq)]
pub struct HusimiMap {
    /// Evaluation times (s).
    pub times: Vec<f64>,
    /// Probe angular frequencies (rad/s).
    pub omegas: Vec<f64>,
    /// `Q(t, omega) = |q|^2`, row-major over `(times, omegas)`.
    pub q: Vec<f64>,
    /// Wave-packet width (s).
    pub sigma: f64,
}

impl HusimiMap {
    pub fn value(&self, it: usize, iw: usize) -> f64 {
        self.q[it * self.omegas.len() + iw]
    }

    /// For every time, the probe frequency of maximal `Q`.
    pub fn ridge(&self) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .enumerate()
            .map(|(it, &t)| {
                let row = &self.q[it * self.omegas.len()..(it + 1) * self.omegas.len()];
                let iw = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                (t, self.omegas[iw])
            })
            .collect()
    }

    /// CSV export as (t, omega, Q) triples.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,omega,q")?;
        for (it, &t) in self.times.iter().enumerate() {
            for (iw, &omega) in self.omegas.iter().enumerate() {
                writeln!(w, "{},{},{}", t, omega, self.value(it, iw))?;
            }
        }
        Ok(())
    }
}

/// Husimi map of a complex envelope: `Q(t, omega)` is the squared modulus
/// of the overlap of the signal with a Gaussian wave packet of width
/// `sigma` centered at `t` and oscillating at `omega`. For a signal
/// `exp(-i E t)` the map peaks at `omega = E`.
pub fn husimi(
    series: &ComplexSeries,
    sigma: f64,
    omegas: &[f64],
    times: &[f64],
) -> Result<HusimiMap> {
    if series.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: series.len() });
    }
    if sigma < 3.0 * series.dt {
        return Err(Error::Resolution(format!(
            "wave-packet width {sigma} s must span at least 3 samples of {} s",
            series.dt
        )));
    }
    if omegas.is_empty() || times.is_empty() {
        return Err(Error::domain("husimi grids must be non-empty"));
    }
    for &t in times {
        if t < series.t0 - 0.5 * series.dt || t > series.end_time() + 0.5 * series.dt {
            return Err(Error::domain(format!(
                "husimi time {t} s outside the series span [{}, {}] s",
                series.t0,
                series.end_time()
            )));
        }
    }
    let h = (4.0 * sigma / series.dt).ceil() as isize;
    let n = series.len() as isize;
    let dt = series.dt;

    // per-omega complex kernels; rows are independent
    let rows: Vec<Vec<f64>> = omegas
        .par_iter()
        .map(|&omega| {
            let kernel: Vec<Complex64> = (-h..=h)
                .map(|j| {
                    let tau = j as f64 * dt;
                    let gauss = (-0.5 * tau * tau / (sigma * sigma)).exp();
                    // e^{i omega t'} with t' = t + tau, the e^{i omega t}
                    // prefactor dropped (it cancels in |q|^2)
                    gauss * Complex64::new(0.0, omega * tau).exp() * dt
                })
                .collect();
            times
                .iter()
                .map(|&t| {
                    let i0 = ((t - series.t0) / dt).round() as isize;
                    let mut acc = Complex64::default();
                    for (jj, k) in kernel.iter().enumerate() {
                        let idx = i0 + jj as isize - h;
                        if idx >= 0 && idx < n {
                            acc += k * series.values[idx as usize];
                        }
                    }
                    acc.norm_sqr()
                })
                .collect()
        })
        .collect();

    let mut q = vec![0.0; times.len() * omegas.len()];
    for (iw, row) in rows.iter().enumerate() {
        for (it, &v) in row.iter().enumerate() {
            q[it * omegas.len() + iw] = v;
        }
    }
    Ok(HusimiMap { times: times.to_vec(), omegas: omegas.to_vec(), q, sigma })
}

/// Arithmetic mean of the samples with time in `[center - hw, center + hw]`.
pub fn window_average(series: &TimeSeries, center: f64, half_width: f64) -> Result<f64> {
    let lo = center - half_width;
    let hi = center + half_width;
    let mut acc = 0.0;
    let mut count = 0usize;
    for (i, &v) in series.values.iter().enumerate() {
        let t = series.time(i);
        if t >= lo && t <= hi {
            acc += v;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyWindow { lo, hi });
    }
    Ok(acc / count as f64)
}
