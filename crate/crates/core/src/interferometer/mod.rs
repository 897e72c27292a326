//! Michelson interference of single photons and photon pairs.
//!
//! A photon of frequency `omega` leaves the interferometer in output `a`
//! with amplitude `alpha = (e^{i omega tau} + H) / 2` and in output `b` with
//! `beta = i (e^{i omega tau} - H) / 2`. Coincidence interferograms are
//! assembled from five spectral integrals: a constant `Mc`, the HOM term
//! `M0`, the single-photon carrier term `M1` (at `omega_p / 2`) and the pair
//! carrier term `M2` (at `omega_p`).

mod closed_form;
mod quadrature;
mod single;

pub use closed_form::{closed_form_terms, fourier_magnitudes, FourierMagnitudes, PeakEnvelope};
pub use quadrature::{
    gauss_hermite, outcome_probabilities, quadrature_terms, OutcomeProbabilities, QuadratureGrid,
    QuadratureRule,
};
pub use single::{single_photon_interferogram, single_photon_terms, PhotonSpectrum, SingleTerms};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Sample;
use crate::spectra::SpdcSource;

/// Output-mode amplitudes of one photon at frequency `omega` and delay `tau`.
pub fn alpha_beta(h: Complex64, omega: f64, tau: f64) -> (Complex64, Complex64) {
    let e = Complex64::from_polar(1.0, omega * tau);
    let alpha = 0.5 * (e + h);
    let beta = Complex64::new(0.0, 0.5) * (e - h);
    (alpha, beta)
}

/// The constant and the three delay-dependent interferogram terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferogramTerms {
    /// Delays (s).
    pub tau: Vec<f64>,
    pub mc: f64,
    pub m0: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    /// Complex terms whose real parts are `m1` and `m2`; their phases carry
    /// the optical carriers and are what path jitter perturbs.
    pub m1_analytic: Vec<Complex64>,
    pub m2_analytic: Vec<Complex64>,
}

impl InterferogramTerms {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub(crate) fn from_analytic(
        tau: Vec<f64>,
        mc: f64,
        m0: Vec<f64>,
        m1_analytic: Vec<Complex64>,
        m2_analytic: Vec<Complex64>,
    ) -> Self {
        let m1 = m1_analytic.iter().map(|z| z.re).collect();
        let m2 = m2_analytic.iter().map(|z| z.re).collect();
        Self {
            tau,
            mc,
            m0,
            m1,
            m2,
            m1_analytic,
            m2_analytic,
        }
    }
}

/// Coincidence detection scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Both photons in output `b`.
    Auto,
    /// One photon in each output.
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferogramKind {
    Single,
    Auto,
    Cross,
}

impl From<Scheme> for InterferogramKind {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Auto => InterferogramKind::Auto,
            Scheme::Cross => InterferogramKind::Cross,
        }
    }
}

impl std::fmt::Display for InterferogramKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InterferogramKind::Single => "single",
            InterferogramKind::Auto => "auto",
            InterferogramKind::Cross => "cross",
        })
    }
}

impl std::str::FromStr for InterferogramKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Self::Single),
            "auto" => Ok(Self::Auto),
            "cross" => Ok(Self::Cross),
            other => Err(Error::Parse(format!("unknown interferogram kind `{other}`"))),
        }
    }
}

/// Descriptors carried alongside an interferogram for provenance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InterferogramMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SpdcSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<Sample>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

/// Values over a delay grid: probabilities per pair (or per photon) before
/// acquisition, count rates afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interferogram {
    pub tau: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: InterferogramKind,
    #[serde(default)]
    pub meta: InterferogramMeta,
}

/// `auto = (Mc + M0 - M1 + M2) / 4`, `cross = (Mc - M0 - M2) / 2`.
pub fn compose(terms: &InterferogramTerms, scheme: Scheme) -> Interferogram {
    let values = match scheme {
        Scheme::Auto => (0..terms.len())
            .map(|k| 0.25 * (terms.mc + terms.m0[k] - terms.m1[k] + terms.m2[k]))
            .collect(),
        Scheme::Cross => (0..terms.len())
            .map(|k| 0.5 * (terms.mc - terms.m0[k] - terms.m2[k]))
            .collect(),
    };
    Interferogram {
        tau: terms.tau.clone(),
        values,
        kind: scheme.into(),
        meta: InterferogramMeta::default(),
    }
}

/// Coefficient of `M0` in the composed interferogram of `scheme`.
pub fn m0_coefficient(scheme: Scheme) -> f64 {
    match scheme {
        Scheme::Auto => 0.25,
        Scheme::Cross => -0.5,
    }
}

pub(crate) fn check_grid(tau: &[f64]) -> Result<()> {
    if let Some(k) = tau.iter().position(|t| !t.is_finite()) {
        return Err(Error::invalid("tau", format!("non-finite delay at index {k}")));
    }
    for (i, w) in tau.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonMonotoneGrid { index: i + 1 });
        }
    }
    Ok(())
}

/// Uniform delay grid of `n` points from `start` to `end` inclusive.
pub fn uniform_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let h = (end - start) / (n - 1) as f64;
            (0..n).map(|k| start + k as f64 * h).collect()
        }
    }
}
