//! Single-photon (classical OCT) interferogram in output `b`:
//! `M(tau) = int rho(omega) |beta(omega)|^2 d omega
//!         = int rho (1 + |H|^2) / 4 - Re int rho e^{-i omega tau} H / 2`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_grid, Interferogram, InterferogramKind, InterferogramMeta};
use crate::error::{Error, Result};
use crate::sample::Sample;
use crate::spectra::{gauss, GaussianSpectrum, TabulatedSpectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhotonSpectrum {
    Gaussian(GaussianSpectrum),
    Tabulated(TabulatedSpectrum),
}

impl From<GaussianSpectrum> for PhotonSpectrum {
    fn from(g: GaussianSpectrum) -> Self {
        PhotonSpectrum::Gaussian(g)
    }
}

impl From<TabulatedSpectrum> for PhotonSpectrum {
    fn from(t: TabulatedSpectrum) -> Self {
        PhotonSpectrum::Tabulated(t)
    }
}

impl PhotonSpectrum {
    fn support(&self) -> (f64, f64) {
        match self {
            PhotonSpectrum::Gaussian(g) => (g.center - 9.0 * g.std, g.center + 9.0 * g.std),
            PhotonSpectrum::Tabulated(t) => (t.omega[0], t.omega[t.omega.len() - 1]),
        }
    }

    fn density(&self, omega: f64) -> f64 {
        match self {
            PhotonSpectrum::Gaussian(g) => gauss(omega, g.center, g.std),
            PhotonSpectrum::Tabulated(t) => t.density_at(omega),
        }
    }

    fn mean(&self) -> f64 {
        match self {
            PhotonSpectrum::Gaussian(g) => g.center,
            PhotonSpectrum::Tabulated(t) => {
                let (w, d) = (&t.omega, &t.density);
                let (mut m, mut z) = (0.0, 0.0);
                for k in 0..w.len() - 1 {
                    let h = 0.5 * (w[k + 1] - w[k]);
                    m += h * (w[k] * d[k] + w[k + 1] * d[k + 1]);
                    z += h * (d[k] + d[k + 1]);
                }
                if z > 0.0 { m / z } else { 0.5 * (w[0] + w[w.len() - 1]) }
            }
        }
    }

    fn width(&self) -> f64 {
        match self {
            PhotonSpectrum::Gaussian(g) => g.std,
            PhotonSpectrum::Tabulated(t) => {
                let n = t.normalized().ok();
                n.map(|t| {
                    let (w, d) = (&t.omega, &t.density);
                    let mut m = 0.0;
                    let mut m2 = 0.0;
                    for k in 0..w.len() - 1 {
                        let h = 0.5 * (w[k + 1] - w[k]);
                        m += h * (w[k] * d[k] + w[k + 1] * d[k + 1]);
                        m2 += h * (w[k] * w[k] * d[k] + w[k + 1] * w[k + 1] * d[k + 1]);
                    }
                    (m2 - m * m).max(0.0).sqrt()
                })
                .unwrap_or(0.0)
            }
        }
    }
}

const TOLERANCE: f64 = 1e-10;
const MAX_NODES: usize = 1 << 21;

/// Trapezoid sums `(constant, carrier(tau))` on `n` uniform nodes.
fn evaluate(
    spectrum: &PhotonSpectrum,
    sample: &Sample,
    tau: &[f64],
    n: usize,
) -> Result<(f64, Vec<Complex64>)> {
    let (lo, hi) = spectrum.support();
    let h = (hi - lo) / (n - 1) as f64;
    let mut weights = Vec::with_capacity(n);
    let mut constant = 0.0;
    let mut norm = 0.0;
    for k in 0..n {
        let w = lo + k as f64 * h;
        let end = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let rho = end * h * spectrum.density(w);
        let hv = if rho > 0.0 { sample.respond(w)? } else { Complex64::new(0.0, 0.0) };
        constant += 0.25 * rho * (1.0 + hv.norm_sqr());
        norm += rho;
        weights.push(rho * hv);
    }
    if !(norm > 0.0) {
        return Err(Error::Degenerate("spectrum has zero weight".into()));
    }
    let constant = constant / norm;
    let carrier = tau
        .par_iter()
        .map(|&t| {
            // e^{-i omega_k tau} by recurrence from the first node
            let step = Complex64::from_polar(1.0, -h * t);
            let mut e = Complex64::from_polar(1.0, -lo * t);
            let mut s = Complex64::new(0.0, 0.0);
            for (k, w) in weights.iter().enumerate() {
                if k % 256 == 0 {
                    e = Complex64::from_polar(1.0, -(lo + k as f64 * h) * t);
                }
                s += w * e;
                e *= step;
            }
            -0.5 * s / norm
        })
        .collect();
    Ok((constant, carrier))
}

/// Single-photon interferogram split into its flat part and its complex
/// carrier, `M(tau) = constant + Re carrier(tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleTerms {
    pub tau: Vec<f64>,
    pub constant: f64,
    pub carrier: Vec<Complex64>,
    /// Mean angular frequency of the probing spectrum.
    pub center: f64,
    pub sample: Sample,
}

impl SingleTerms {
    pub fn values(&self) -> Vec<f64> {
        self.carrier.iter().map(|c| self.constant + c.re).collect()
    }

    pub fn into_interferogram(self) -> Interferogram {
        Interferogram {
            values: self.values(),
            tau: self.tau,
            kind: InterferogramKind::Single,
            meta: InterferogramMeta {
                sample: Some(self.sample),
                ..Default::default()
            },
        }
    }

    /// Delay errors `eps` (s) applied to the carrier phase at the mean
    /// frequency, the same carrier-only model used for coincidence terms.
    pub fn with_delay_errors(&self, eps: &[f64]) -> Result<SingleTerms> {
        if eps.len() != self.tau.len() {
            return Err(Error::invalid("eps", "length differs from the delay grid"));
        }
        let mut out = self.clone();
        for (c, e) in out.carrier.iter_mut().zip(eps) {
            *c *= Complex64::from_polar(1.0, -self.center * e);
        }
        Ok(out)
    }

    /// Carrier scaled by `factor` (fringe visibility loss).
    pub fn with_carrier_scale(&self, factor: f64) -> SingleTerms {
        let mut out = self.clone();
        out.carrier.iter_mut().for_each(|c| *c *= factor);
        out
    }
}

/// Single-photon interferogram of `sample` probed by `spectrum`.
///
/// The spectral integral is refined by doubling the node count until two
/// successive results agree to `1e-10`; tabulated spectra are normalised
/// to unit integral first.
pub fn single_photon_interferogram(
    spectrum: &PhotonSpectrum,
    sample: &Sample,
    tau: &[f64],
) -> Result<Interferogram> {
    Ok(single_photon_terms(spectrum, sample, tau)?.into_interferogram())
}

pub fn single_photon_terms(spectrum: &PhotonSpectrum, sample: &Sample, tau: &[f64]) -> Result<SingleTerms> {
    check_grid(tau)?;
    let spectrum = match spectrum {
        PhotonSpectrum::Tabulated(t) => PhotonSpectrum::Tabulated(t.normalized()?),
        g => g.clone(),
    };
    let (lo, hi) = spectrum.support();
    let (dlo, dhi) = sample.delay_extent(lo.max(f64::MIN_POSITIVE), hi)?;
    let offset = match (tau.first(), tau.last()) {
        (Some(a), Some(b)) => (b - dlo).abs().max((a - dhi).abs()),
        _ => 0.0,
    };
    let width = spectrum.width().max(f64::MIN_POSITIVE);
    let h0 = 2.0 * std::f64::consts::PI / (offset + 9.0 / width);
    let mut n = (((hi - lo) / h0).ceil() as usize + 1).max(65);
    if let PhotonSpectrum::Tabulated(t) = &spectrum {
        n = n.max(2 * t.omega.len());
    }

    let (mut constant, mut carrier) = evaluate(&spectrum, sample, tau, n)?;
    loop {
        let n2 = 2 * n - 1;
        if n2 > MAX_NODES {
            return Err(Error::QuadratureNotConverged(format!(
                "single-photon integral unresolved with {n} nodes"
            )));
        }
        let (c2, car2) = evaluate(&spectrum, sample, tau, n2)?;
        let change = carrier
            .iter()
            .zip(&car2)
            .map(|(a, b)| (a - b).norm())
            .fold((constant - c2).abs(), f64::max);
        constant = c2;
        carrier = car2;
        n = n2;
        if change <= TOLERANCE {
            break;
        }
    }
    Ok(SingleTerms {
        tau: tau.to_vec(),
        constant,
        carrier,
        center: spectrum.mean(),
        sample: sample.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::uniform_grid;
    use crate::sample::SingleLayer;
    use crate::units::wavelength_to_omega;

    fn spectrum() -> GaussianSpectrum {
        GaussianSpectrum::new(wavelength_to_omega(1313e-9), 2.7e13).unwrap()
    }

    fn eq5(r: f64, t_layer: f64, g: &GaussianSpectrum, t: f64) -> f64 {
        let s = t - t_layer;
        (1.0 + r * r) / 4.0 - 0.5 * r * (-0.5 * g.std * g.std * s * s).exp() * (g.center * s).cos()
    }

    #[test]
    fn mirror_at_matched_delay_is_dark() {
        let g = spectrum();
        let m = single_photon_interferogram(&g.into(), &SingleLayer::mirror(1e-13).into(), &[1e-13]).unwrap();
        assert!(m.values[0].abs() < 1e-10);
    }

    #[test]
    fn far_delay_gives_constant() {
        let g = spectrum();
        let layer = SingleLayer::new(0.6, 0.0).unwrap();
        let t = 60.0 / g.std;
        let m = single_photon_interferogram(&g.into(), &layer.into(), &[t]).unwrap();
        assert!((m.values[0] - (1.0 + 0.36) / 4.0).abs() < 1e-10);
    }

    #[test]
    fn matches_closed_form_for_layer() {
        let g = spectrum();
        let layer = SingleLayer::new(0.8, 2e-14).unwrap();
        let tau = uniform_grid(-1e-13, 1.4e-13, 2001);
        let m = single_photon_interferogram(&g.into(), &layer.into(), &tau).unwrap();
        for (t, v) in tau.iter().zip(&m.values) {
            assert!((v - eq5(0.8, 2e-14, &g, *t)).abs() < 1e-9);
        }
    }

    #[test]
    fn tabulated_gaussian_matches_analytic() {
        let g = spectrum();
        let rows: Vec<(f64, f64)> = (0..401)
            .map(|k| {
                let w = g.center + (k as f64 - 200.0) * 0.05 * g.std;
                (w, 3.0 * g.pdf(w))
            })
            .collect();
        let tab = crate::spectra::load_tabulated(&rows).unwrap();
        let layer = SingleLayer::new(1.0, 0.0).unwrap();
        let tau = uniform_grid(-5e-14, 5e-14, 101);
        let m = single_photon_interferogram(&tab.into(), &layer.into(), &tau).unwrap();
        for (t, v) in tau.iter().zip(&m.values) {
            // linear interpolation of the table limits agreement
            assert!((v - eq5(1.0, 0.0, &g, *t)).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_delay_errors_change_nothing() {
        let g = spectrum();
        let layer = SingleLayer::new(0.5, 0.0).unwrap();
        let tau = uniform_grid(-2e-14, 2e-14, 11);
        let t = single_photon_terms(&g.into(), &layer.into(), &tau).unwrap();
        assert_eq!(t.with_delay_errors(&[0.0; 11]).unwrap().values(), t.values());
    }

    #[test]
    fn small_delay_error_matches_shifted_delay() {
        // a shift far below the coherence time acts on the carrier only
        let g = spectrum();
        let layer = SingleLayer::new(1.0, 0.0).unwrap();
        let eps = 1e-17;
        let t = single_photon_terms(&g.into(), &layer.into(), &[3e-15]).unwrap();
        let shifted = single_photon_terms(&g.into(), &layer.into(), &[3e-15 + eps]).unwrap();
        let j = t.with_delay_errors(&[eps]).unwrap();
        // residual is the envelope slope times the shift, about 1e-5 here
        assert!((j.values()[0] - shifted.values()[0]).abs() < 1e-4);
    }

    #[test]
    fn values_are_nonnegative() {
        let g = spectrum();
        let layer = SingleLayer::new(0.3, 0.0).unwrap();
        let tau = uniform_grid(-5e-14, 5e-14, 501);
        let m = single_photon_interferogram(&g.into(), &layer.into(), &tau).unwrap();
        assert!(m.values.iter().all(|v| *v >= -1e-12));
    }
}
