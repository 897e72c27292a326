//! Discrete Fourier transforms of uniformly sampled delay traces.
//!
//! Transforms use the unitary convention `X_k = N^{-1/2} sum_n x_n e^{-2 pi i k n / N}`,
//! so `sum |x|^2 = sum |X|^2`. Frequencies are reported in units of the
//! pump frequency `omega_p`, with bin `k` at `2 pi k / (N dtau)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-sided magnitude spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    /// Angular frequency in units of `omega_p`.
    pub omega: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Pump angular frequency used for the axis (rad/s).
    pub omega_p: f64,
}

impl SpectrumTrace {
    /// Restriction to `lo <= omega <= hi` (units of `omega_p`).
    pub fn window(&self, lo: f64, hi: f64) -> SpectrumTrace {
        let (omega, magnitude) = self
            .omega
            .iter()
            .zip(&self.magnitude)
            .filter(|(w, _)| **w >= lo && **w <= hi)
            .map(|(w, m)| (*w, *m))
            .unzip();
        SpectrumTrace {
            omega,
            magnitude,
            omega_p: self.omega_p,
        }
    }

    pub fn bin_width(&self) -> f64 {
        if self.omega.len() > 1 {
            self.omega[1] - self.omega[0]
        } else {
            0.0
        }
    }
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Full unitary DFT.
pub fn unitary_dft(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    plan(n, false).process(&mut buf);
    let s = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|z| *z *= s);
    buf
}

/// Inverse of [`unitary_dft`].
pub fn unitary_idft(spectrum: &[Complex64]) -> Vec<Complex64> {
    let n = spectrum.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = spectrum.to_vec();
    plan(n, true).process(&mut buf);
    let s = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|z| *z *= s);
    buf
}

/// Step of a uniform grid, or an error if the spacing varies by more than
/// one part in 10^6.
pub fn uniform_step(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: grid.len(),
        });
    }
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if !(h > 0.0) {
        return Err(Error::NonMonotoneGrid { index: 1 });
    }
    let deviation = grid
        .windows(2)
        .map(|w| ((w[1] - w[0]) - h).abs() / h)
        .fold(0.0, f64::max);
    if deviation > 1e-6 {
        return Err(Error::NonUniformGrid { deviation });
    }
    Ok(h)
}

fn check_step(delay_step: f64) -> Result<()> {
    if !(delay_step > 0.0 && delay_step.is_finite()) {
        return Err(Error::invalid("delay_step", format!("must be positive, got {delay_step}")));
    }
    Ok(())
}

/// One-sided unitary magnitude spectrum of a trace sampled every
/// `delay_step` seconds, on an axis in units of `omega_p`.
pub fn dft_magnitude(values: &[f64], delay_step: f64, omega_p: f64) -> Result<SpectrumTrace> {
    check_step(delay_step)?;
    if values.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len();
    let spec = unitary_dft(values);
    let bin = 2.0 * PI / (n as f64 * delay_step) / omega_p;
    let half = n / 2 + 1;
    Ok(SpectrumTrace {
        omega: (0..half).map(|k| k as f64 * bin).collect(),
        magnitude: spec[..half].iter().map(|z| z.norm()).collect(),
        omega_p,
    })
}

/// Nyquist angular frequency of the grid in units of `omega_p`.
pub fn nyquist(delay_step: f64, omega_p: f64) -> f64 {
    PI / delay_step / omega_p
}

/// Removes every Fourier component above `cutoff` (units of `omega_p`)
/// with a hard rectangular mask and returns the real inverse transform.
pub fn lowpass_extract(values: &[f64], delay_step: f64, omega_p: f64, cutoff: f64) -> Result<Vec<f64>> {
    check_step(delay_step)?;
    let ny = nyquist(delay_step, omega_p);
    if !(cutoff > 0.0 && cutoff < ny) {
        return Err(Error::invalid(
            "cutoff",
            format!("must lie in (0, {ny:.4}) omega_p, got {cutoff}"),
        ));
    }
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mut spec = unitary_dft(values);
    let bin = 2.0 * PI / (n as f64 * delay_step) / omega_p;
    for (k, z) in spec.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * bin;
        if f > cutoff {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    Ok(unitary_idft(&spec).iter().map(|z| z.re).collect())
}

/// Analytic signal: negative frequencies removed, positive ones doubled.
pub fn analytic_signal(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut spec = unitary_dft(values);
    for (k, z) in spec.iter_mut().enumerate() {
        let positive = k > 0 && (2 * k < n);
        let negative = 2 * k > n;
        if positive {
            *z *= 2.0;
        } else if negative {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    unitary_idft(&spec)
}

/// Mean of the one-sided power spectra `|X_k|^2` over several traces of
/// equal length. Uncorrelated parts add in power, so this is the quantity
/// whose peaks keep their shape under seed averaging.
pub fn mean_power_spectrum(traces: &[Vec<f64>], delay_step: f64, omega_p: f64) -> Result<SpectrumTrace> {
    let first = traces
        .first()
        .ok_or_else(|| Error::invalid("traces", "need at least one trace"))?;
    let mut acc: Option<SpectrumTrace> = None;
    for t in traces {
        if t.len() != first.len() {
            return Err(Error::invalid("traces", "traces differ in length"));
        }
        let s = dft_magnitude(t, delay_step, omega_p)?;
        match acc.as_mut() {
            None => {
                acc = Some(SpectrumTrace {
                    magnitude: s.magnitude.iter().map(|m| m * m).collect(),
                    ..s
                })
            }
            Some(a) => a.magnitude.iter_mut().zip(&s.magnitude).for_each(|(a, m)| *a += m * m),
        }
    }
    let mut out = acc.expect("at least one trace");
    let k = traces.len() as f64;
    out.magnitude.iter_mut().for_each(|m| *m /= k);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const WP: f64 = 2.87e15;

    #[test]
    fn cosine_at_pump_frequency() {
        let step = 2.0 * PI / WP / 10.0;
        let x: Vec<f64> = (0..1000).map(|k| (WP * k as f64 * step).cos()).collect();
        let s = dft_magnitude(&x, step, WP).unwrap();
        let (k, _) = s.magnitude.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((s.omega[k] - 1.0).abs() <= s.bin_width());
    }

    #[test]
    fn gaussian_dip_transforms_to_gaussian_at_zero() {
        let step = 1e-15;
        let sigma = 2e-14;
        let x: Vec<f64> = (0..2048)
            .map(|k| {
                let t = (k as f64 - 1024.0) * step;
                1.0 - 0.5 * (-0.5 * t * t / (sigma * sigma)).exp()
            })
            .collect();
        let s = dft_magnitude(&x, step, WP).unwrap();
        // DC holds the mean; the dip's spectrum has std 1/sigma around 0.
        let a1 = s.magnitude[1];
        let a2 = s.magnitude[2];
        let w1 = s.omega[1] * WP;
        let w2 = s.omega[2] * WP;
        let ratio = (-0.5 * (w2 * w2 - w1 * w1) * sigma * sigma).exp();
        assert!((a2 / a1 - ratio).abs() < 1e-6);
    }

    #[test]
    fn lowpass_identity_on_band_limited_input() {
        let n = 512;
        let step = 1e-15;
        let bin = 2.0 * PI / (n as f64 * step) / WP;
        let x: Vec<f64> = (0..n)
            .map(|k| 3.0 + (2.0 * PI * 2.0 * k as f64 / n as f64).cos() + 0.5 * (2.0 * PI * 3.0 * k as f64 / n as f64).sin())
            .collect();
        let y = lowpass_extract(&x, step, WP, 4.5 * bin).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lowpass_rejects_bad_cutoff() {
        let x = vec![1.0; 64];
        assert!(lowpass_extract(&x, 1e-15, WP, 0.0).is_err());
        let ny = nyquist(1e-15, WP);
        assert!(lowpass_extract(&x, 1e-15, WP, ny).is_err());
    }

    #[test]
    fn lowpass_preserves_dc() {
        let x: Vec<f64> = (0..300).map(|k| ((k * 7919) % 101) as f64).collect();
        let y = lowpass_extract(&x, 1e-16, WP, 0.01).unwrap();
        let mx: f64 = x.iter().sum::<f64>() / 300.0;
        let my: f64 = y.iter().sum::<f64>() / 300.0;
        assert!((mx - my).abs() < 1e-9);
    }

    #[test]
    fn analytic_signal_envelope_of_cosine() {
        let n = 1024;
        let x: Vec<f64> = (0..n).map(|k| 2.0 * (2.0 * PI * 50.0 * k as f64 / n as f64).cos()).collect();
        let z = analytic_signal(&x);
        assert!(z.iter().all(|z| (z.norm() - 2.0).abs() < 1e-9));
    }

    #[test]
    fn non_uniform_grid_detected() {
        assert!(matches!(uniform_step(&[0.0, 1.0, 2.5, 3.0]), Err(Error::NonUniformGrid { .. })));
        assert!((uniform_step(&[0.0, 0.5, 1.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn parseval(x in proptest::collection::vec(-100.0f64..100.0, 2..300)) {
            let e_t: f64 = x.iter().map(|v| v * v).sum();
            let e_f: f64 = unitary_dft(&x).iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((e_t - e_f).abs() <= 1e-9 * e_t.max(1.0));
        }

        #[test]
        fn lowpass_idempotent(x in proptest::collection::vec(-10.0f64..10.0, 16..200), c in 0.05f64..0.9) {
            let step = 1e-16;
            let cutoff = c * nyquist(step, WP);
            let once = lowpass_extract(&x, step, WP, cutoff).unwrap();
            let twice = lowpass_extract(&once, step, WP, cutoff).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-12 * 10.0);
            }
        }
    }
}
