//! Optical-path jitter acting on the carrier phases.
//!
//! A path error `delta L` delays the reference arm by `eps = delta L / c`.
//! Only the oscillating terms feel it to first order: the `omega_p / 2`
//! carrier of `M1` gains `omega_p eps / 2`, the `omega_p` carrier of `M2`
//! gains `omega_p eps`. `Mc` and `M0` have no carrier and are untouched.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::uniform_step;
use crate::error::{Error, Result};
use crate::interferometer::InterferogramTerms;
use crate::units::SPEED_OF_LIGHT;

/// Stream reserved for jitter draws so they never overlap the per-point
/// shot-noise streams.
const JITTER_STREAM: u64 = u64::MAX;

/// Gaussian path jitter. With `correlation = 0` every point is drawn
/// independently; otherwise the errors form a stationary Gaussian process
/// whose autocorrelation is `exp(-s^2 / (2 correlation^2))` in optical path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseJitter {
    /// RMS optical-path error (m).
    pub path_std: f64,
    /// Correlation length along the scan, as an optical path (m).
    pub correlation: f64,
}

impl PhaseJitter {
    pub fn validate(&self) -> Result<()> {
        if !(self.path_std >= 0.0 && self.path_std.is_finite()) {
            return Err(Error::invalid("path_jitter_std", "must be finite and >= 0"));
        }
        if !(self.correlation >= 0.0 && self.correlation.is_finite()) {
            return Err(Error::invalid("jitter_correlation", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn delay_std(&self) -> f64 {
        self.path_std / SPEED_OF_LIGHT
    }
}

/// Delay errors (s) for each point of `tau`.
pub fn delay_errors(tau: &[f64], jitter: &PhaseJitter, seed: u64) -> Result<Vec<f64>> {
    jitter.validate()?;
    let n = tau.len();
    if jitter.path_std == 0.0 || n == 0 {
        return Ok(vec![0.0; n]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(JITTER_STREAM);
    let sigma = jitter.delay_std();
    let width = if jitter.correlation > 0.0 && n > 1 {
        let step = uniform_step(tau)?;
        jitter.correlation / SPEED_OF_LIGHT / step
    } else {
        0.0
    };
    if width < 0.5 {
        return Ok((0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            })
            .collect());
    }
    // white noise through exp(-j^2 / w^2): autocorrelation std is w samples
    let half = (4.0 * width).ceil() as usize;
    let kernel: Vec<f64> = (0..=2 * half)
        .map(|j| {
            let z = (j as f64 - half as f64) / width;
            (-z * z).exp()
        })
        .collect();
    let norm = kernel.iter().map(|k| k * k).sum::<f64>().sqrt();
    let white: Vec<f64> = (0..n + 2 * half)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Ok((0..n)
        .map(|i| {
            let s: f64 = kernel.iter().zip(&white[i..i + 2 * half + 1]).map(|(k, w)| k * w).sum();
            sigma * s / norm
        })
        .collect())
}

fn rebuild(mut terms: InterferogramTerms) -> InterferogramTerms {
    terms.m1 = terms.m1_analytic.iter().map(|z| z.re).collect();
    terms.m2 = terms.m2_analytic.iter().map(|z| z.re).collect();
    terms
}

/// Quasi-static jitter: one delay error per acquisition point.
pub fn apply_phase_jitter(
    terms: &InterferogramTerms,
    omega_p: f64,
    jitter: &PhaseJitter,
    seed: u64,
) -> Result<InterferogramTerms> {
    if !(omega_p > 0.0) {
        return Err(Error::NonPositiveFrequency(omega_p));
    }
    let eps = delay_errors(&terms.tau, jitter, seed)?;
    if eps.iter().all(|e| *e == 0.0) {
        return Ok(terms.clone());
    }
    let mut out = terms.clone();
    for (k, e) in eps.iter().enumerate() {
        out.m1_analytic[k] *= Complex64::from_polar(1.0, 0.5 * omega_p * e);
        out.m2_analytic[k] *= Complex64::from_polar(1.0, omega_p * e);
    }
    Ok(rebuild(out))
}

/// Fringe visibility left at angular frequency `omega` when the path
/// fluctuates many times within one exposure, `exp(-omega^2 sigma^2 / 2)`.
pub fn coherence_factor(omega: f64, jitter: &PhaseJitter) -> f64 {
    let s = omega * jitter.delay_std();
    (-0.5 * s * s).exp()
}

/// Fast jitter averaged within each exposure: carriers lose visibility
/// instead of acquiring random phases.
pub fn average_phase_jitter(
    terms: &InterferogramTerms,
    omega_p: f64,
    jitter: &PhaseJitter,
) -> Result<InterferogramTerms> {
    jitter.validate()?;
    if !(omega_p > 0.0) {
        return Err(Error::NonPositiveFrequency(omega_p));
    }
    let f1 = coherence_factor(0.5 * omega_p, jitter);
    let f2 = coherence_factor(omega_p, jitter);
    let mut out = terms.clone();
    out.m1_analytic.iter_mut().for_each(|z| *z *= f1);
    out.m2_analytic.iter_mut().for_each(|z| *z *= f2);
    Ok(rebuild(out))
}
