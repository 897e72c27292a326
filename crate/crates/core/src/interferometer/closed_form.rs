//! Closed-form terms for a dispersionless single layer and the magnitudes
//! of their Fourier transforms.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_grid, InterferogramTerms};
use crate::error::{Error, Result};
use crate::sample::{Sample, SingleLayer};
use crate::spectra::{gauss, SpdcSource};

fn single_layer(sample: &Sample) -> Result<SingleLayer> {
    match sample {
        Sample::Layer(l) => Ok(*l),
        other => Err(Error::Unsupported(format!(
            "closed-form terms need a dispersionless single layer, got {}; use quadrature_terms",
            match other {
                Sample::Slab(_) => "a dispersive slab",
                Sample::Gap(_) => "a two-interface gap",
                Sample::Layer(_) => unreachable!(),
            }
        ))),
    }
}

/// Terms for `H = r exp(i omega T)`:
/// `Mc = (1+R)^2/4`, `M0 = (R/2) exp(-(T-tau)^2 Delta^2 / 2)`,
/// `M1 = r(1+R) exp(-(T-tau)^2 Delta_+^2 / 8) cos(omega_p (T-tau) / 2)`,
/// `M2 = (R/2) exp(-(T-tau)^2 delta^2 / 2) cos(omega_p (T-tau))`.
pub fn closed_form_terms(
    src: &SpdcSource,
    sample: &Sample,
    tau: &[f64],
) -> Result<InterferogramTerms> {
    let layer = single_layer(sample)?;
    check_grid(tau)?;
    let (r, big_r) = (layer.r, layer.reflectivity());
    let (d, p, dp) = (src.phasematch_std, src.pump_std, src.delta_plus());
    let wp = src.pump_center;
    let per_point: Vec<(f64, Complex64, Complex64)> = tau
        .par_iter()
        .map(|&t| {
            let s = t - layer.delay;
            let m0 = 0.5 * big_r * (-0.5 * s * s * d * d).exp();
            let m1 = r * (1.0 + big_r) * (-s * s * dp * dp / 8.0).exp()
                * Complex64::from_polar(1.0, 0.5 * wp * s);
            let m2 = 0.5 * big_r * (-0.5 * s * s * p * p).exp() * Complex64::from_polar(1.0, wp * s);
            (m0, m1, m2)
        })
        .collect();
    Ok(InterferogramTerms::from_analytic(
        tau.to_vec(),
        0.25 * (1.0 + big_r).powi(2),
        per_point.iter().map(|v| v.0).collect(),
        per_point.iter().map(|v| v.1).collect(),
        per_point.iter().map(|v| v.2).collect(),
    ))
}

/// `amplitude * G(omega | center, std)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEnvelope {
    pub center: f64,
    pub std: f64,
    pub amplitude: f64,
}

impl PeakEnvelope {
    pub fn value_at(&self, omega: f64) -> f64 {
        self.amplitude * gauss(omega, self.center, self.std)
    }

    pub fn peak(&self) -> f64 {
        self.value_at(self.center)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierMagnitudes {
    pub m0: PeakEnvelope,
    pub m1: PeakEnvelope,
    pub m2: PeakEnvelope,
    /// True when the HOM peak can be separated from the `omega_p / 2`
    /// peak, `Delta < omega_p / 3`.
    pub separated: bool,
}

/// Magnitudes of the Fourier transforms of `M0`, `M1`, `M2`, keeping the
/// `sqrt(pi)` prefactors of the transform convention used for them.
pub fn fourier_magnitudes(src: &SpdcSource, sample: &Sample) -> Result<FourierMagnitudes> {
    let layer = single_layer(sample)?;
    let (r, big_r) = (layer.r, layer.reflectivity());
    let sp = PI.sqrt();
    Ok(FourierMagnitudes {
        m0: PeakEnvelope {
            center: 0.0,
            std: src.phasematch_std,
            amplitude: sp * big_r / 2.0,
        },
        m1: PeakEnvelope {
            center: 0.5 * src.pump_center,
            std: 0.5 * src.delta_plus(),
            amplitude: sp * r * (1.0 + big_r) / 2.0,
        },
        m2: PeakEnvelope {
            center: src.pump_center,
            std: src.pump_std,
            amplitude: sp * big_r / 4.0,
        },
        separated: src.phasematch_std < src.pump_center / 3.0,
    })
}
