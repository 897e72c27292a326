//! Spectral densities: normalised Gaussians, the SPDC two-photon joint
//! density and its single-photon marginal, and tabulated measured spectra.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dsp::lm::{damped_least_squares, FitOptions, FitResult};
use crate::error::{Error, Result};
use crate::units::{wavelength_to_omega, FWHM_PER_SIGMA, SPEED_OF_LIGHT};

/// Normalised Gaussian density `G(omega | center, std)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpectrum {
    /// Centre angular frequency (rad/s).
    pub center: f64,
    /// Standard deviation (rad/s).
    pub std: f64,
}

impl GaussianSpectrum {
    pub fn new(center: f64, std: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::invalid("center", "must be finite"));
        }
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::invalid("std", format!("must be positive and finite, got {std}")));
        }
        Ok(Self { center, std })
    }

    pub fn pdf(&self, omega: f64) -> f64 {
        gaussian_pdf(omega, self)
    }

    pub fn fwhm(&self) -> f64 {
        self.std * FWHM_PER_SIGMA
    }
}

/// `G(omega | center, std) = exp(-(omega - center)^2 / (2 std^2)) / (sqrt(2 pi) std)`.
///
/// A zero width is treated as the delta limit: infinite at the centre, zero
/// elsewhere.
pub fn gaussian_pdf(omega: f64, g: &GaussianSpectrum) -> f64 {
    gauss(omega, g.center, g.std)
}

#[inline]
pub(crate) fn gauss(x: f64, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return if x == mean { f64::INFINITY } else { 0.0 };
    }
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * std)
}

/// Photon-pair source: narrow-band pump and Gaussian phase matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdcSource {
    /// Pump centre frequency `omega_p` (rad/s).
    pub pump_center: f64,
    /// Pump spectral std `delta` (rad/s).
    pub pump_std: f64,
    /// Phase-matching std `Delta` (rad/s).
    pub phasematch_std: f64,
}

impl SpdcSource {
    /// A zero pump width is accepted here (the closed-form engine handles the
    /// monochromatic limit); the quadrature engine rejects it.
    pub fn new(pump_center: f64, pump_std: f64, phasematch_std: f64) -> Result<Self> {
        if !(pump_center > 0.0 && pump_center.is_finite()) {
            return Err(Error::NonPositiveFrequency(pump_center));
        }
        if !(pump_std >= 0.0 && pump_std.is_finite()) {
            return Err(Error::invalid("pump_std", format!("must be >= 0, got {pump_std}")));
        }
        if !(phasematch_std > 0.0 && phasematch_std.is_finite()) {
            return Err(Error::invalid(
                "phasematch_std",
                format!("must be positive, got {phasematch_std}"),
            ));
        }
        if pump_std > phasematch_std / 10.0 {
            log::warn!(
                "pump width {pump_std:.3e} rad/s is not small against the phase-matching width {phasematch_std:.3e} rad/s"
            );
        }
        Ok(Self {
            pump_center,
            pump_std,
            phasematch_std,
        })
    }

    /// `Delta_+ = sqrt(Delta^2 + delta^2)`.
    pub fn delta_plus(&self) -> f64 {
        self.phasematch_std.hypot(self.pump_std)
    }

    pub fn joint_density(&self, omega_s: f64, omega_i: f64) -> f64 {
        joint_density(omega_s, omega_i, self)
    }

    pub fn marginal(&self) -> GaussianSpectrum {
        marginal(self)
    }

    /// Pump wavelength (m).
    pub fn pump_wavelength(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.pump_center
    }
}

/// `|F(omega_s, omega_i)|^2 = 2 G(omega_s - omega_i | 0, Delta) G(omega_s + omega_i | omega_p, delta)`.
pub fn joint_density(omega_s: f64, omega_i: f64, src: &SpdcSource) -> f64 {
    2.0 * gauss(omega_s - omega_i, 0.0, src.phasematch_std)
        * gauss(omega_s + omega_i, src.pump_center, src.pump_std)
}

/// Single-photon spectrum: centred at `omega_p / 2` with std `Delta_+ / 2`.
pub fn marginal(src: &SpdcSource) -> GaussianSpectrum {
    GaussianSpectrum {
        center: 0.5 * src.pump_center,
        std: 0.5 * src.delta_plus(),
    }
}

/// Measured spectrum on a strictly increasing angular-frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedSpectrum {
    pub omega: Vec<f64>,
    pub density: Vec<f64>,
    /// Optional per-row weights used by [`fit_gaussian`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Vec<f64>>,
}

const MIN_TABULATED_ROWS: usize = 8;

/// Builds a tabulated spectrum from `(omega, density)` rows.
pub fn load_tabulated(rows: &[(f64, f64)]) -> Result<TabulatedSpectrum> {
    if rows.len() < MIN_TABULATED_ROWS {
        return Err(Error::TooFewSamples {
            needed: MIN_TABULATED_ROWS,
            got: rows.len(),
        });
    }
    for (i, w) in rows.windows(2).enumerate() {
        if !(w[1].0 > w[0].0) {
            return Err(Error::NonMonotoneGrid { index: i + 1 });
        }
    }
    if let Some((w, d)) = rows.iter().find(|(w, d)| !w.is_finite() || !d.is_finite()) {
        return Err(Error::invalid("rows", format!("non-finite row ({w}, {d})")));
    }
    if let Some((_, d)) = rows.iter().find(|(_, d)| *d < 0.0) {
        return Err(Error::invalid("density", format!("negative density {d}")));
    }
    Ok(TabulatedSpectrum {
        omega: rows.iter().map(|r| r.0).collect(),
        density: rows.iter().map(|r| r.1).collect(),
        weight: None,
    })
}

impl TabulatedSpectrum {
    /// Parses CSV text with either an `omega_rad_s,density` header or a
    /// `wavelength_nm,counts` header. Wavelength rows are converted to
    /// angular frequency with the Jacobian `|d lambda / d omega|` so the
    /// density stays a density. An optional third column `weight` is kept.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .clone();
        let names: Vec<&str> = headers.iter().collect();
        let wavelength = match names.get(..2) {
            Some(["omega_rad_s", "density"]) => false,
            Some(["wavelength_nm", "counts"]) => true,
            _ => {
                return Err(Error::Parse(format!(
                    "expected header `omega_rad_s,density` or `wavelength_nm,counts`, got `{}`",
                    names.join(",")
                )))
            }
        };
        let has_weight = names.get(2) == Some(&"weight");
        let mut rows = Vec::new();
        let mut weights = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let field = |k: usize| -> Result<f64> {
                record
                    .get(k)
                    .ok_or_else(|| Error::Parse(format!("line {}: missing column {k}", line + 2)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", line + 2)))
            };
            let (a, b) = (field(0)?, field(1)?);
            if wavelength {
                let lambda = a * 1e-9;
                let omega = wavelength_to_omega(lambda);
                // |d lambda / d omega| = lambda^2 / (2 pi c), in nm per rad/s
                let jac = lambda * lambda / (2.0 * PI * SPEED_OF_LIGHT) * 1e9;
                rows.push((omega, b * jac));
            } else {
                rows.push((a, b));
            }
            if has_weight {
                weights.push(field(2)?);
            }
        }
        if wavelength {
            rows.reverse();
            weights.reverse();
        }
        let mut spec = load_tabulated(&rows)?;
        if has_weight {
            spec.weight = Some(weights);
        }
        Ok(spec)
    }

    /// Linear interpolation; zero outside the tabulated range.
    pub fn density_at(&self, omega: f64) -> f64 {
        let n = self.omega.len();
        if omega < self.omega[0] || omega > self.omega[n - 1] {
            return 0.0;
        }
        let k = self.omega.partition_point(|&w| w <= omega).clamp(1, n - 1);
        let (w0, w1) = (self.omega[k - 1], self.omega[k]);
        let t = (omega - w0) / (w1 - w0);
        self.density[k - 1] * (1.0 - t) + self.density[k] * t
    }

    /// Trapezoid integral of the density.
    pub fn integral(&self) -> f64 {
        self.omega
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(w, d)| 0.5 * (w[1] - w[0]) * (d[0] + d[1]))
            .sum()
    }

    /// Copy rescaled to unit integral.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.integral();
        if !(norm > 0.0) {
            return Err(Error::Degenerate("spectrum has zero integral".into()));
        }
        let mut out = self.clone();
        out.density.iter_mut().for_each(|d| *d /= norm);
        Ok(out)
    }
}

/// Result of fitting `a G(omega | center, std)` to a tabulated spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianFit {
    pub spectrum: GaussianSpectrum,
    /// Integral of the fitted curve.
    pub amplitude: f64,
    pub residual_norm: f64,
    pub fit: FitResult,
}

/// Least-squares Gaussian fit, unweighted unless the spectrum carries weights.
pub fn fit_gaussian(spec: &TabulatedSpectrum) -> Result<GaussianFit> {
    let n = spec.omega.len();
    if n < MIN_TABULATED_ROWS {
        return Err(Error::TooFewSamples {
            needed: MIN_TABULATED_ROWS,
            got: n,
        });
    }
    let (lo, hi) = spec
        .density
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return Err(Error::Degenerate("all densities are equal".into()));
    }

    // Work in units centred on the data and scaled to its span so the
    // parameters are all O(1).
    let shift = 0.5 * (spec.omega[0] + spec.omega[n - 1]);
    let scale = 0.5 * (spec.omega[n - 1] - spec.omega[0]);
    let x: Vec<f64> = spec.omega.iter().map(|w| (w - shift) / scale).collect();
    let y_scale = hi;
    let y: Vec<f64> = spec.density.iter().map(|d| d / y_scale).collect();

    let peak = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mass: f64 = y.iter().map(|v| v.max(0.0)).sum();
    let mean: f64 = x.iter().zip(&y).map(|(x, v)| x * v.max(0.0)).sum::<f64>() / mass;
    let var: f64 = x
        .iter()
        .zip(&y)
        .map(|(x, v)| (x - mean).powi(2) * v.max(0.0))
        .sum::<f64>()
        / mass;
    let width0 = var.sqrt().max(2.0 * (x[1] - x[0]).abs());
    let p0 = [y[peak], x[peak], width0];

    let model = |p: &[f64]| -> Vec<f64> {
        x.iter()
            .map(|&xi| {
                let z = (xi - p[1]) / p[2];
                p[0] * (-0.5 * z * z).exp()
            })
            .collect()
    };
    let mut options = FitOptions::default()
        .with_names(&["height", "center", "std"])
        .with_bounds(
            vec![0.0, f64::NEG_INFINITY, 1e-9],
            vec![f64::INFINITY, f64::INFINITY, f64::INFINITY],
        );
    if let Some(w) = &spec.weight {
        options = options.with_weights(w.clone());
    }
    let fit = damped_least_squares(model, &p0, &y, &options)?;

    let center = shift + fit.values[1] * scale;
    let std = fit.values[2].abs() * scale;
    let height = fit.values[0] * y_scale;
    let mut reported = fit.clone();
    reported.values = vec![height, center, std];
    reported.uncertainties = vec![
        fit.uncertainties[0] * y_scale,
        fit.uncertainties[1] * scale,
        fit.uncertainties[2] * scale,
    ];
    let factors = [y_scale, scale, scale];
    for (i, row) in reported.covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c *= factors[i] * factors[j];
        }
    }
    reported.residual_norm = fit.residual_norm * y_scale;
    Ok(GaussianFit {
        spectrum: GaussianSpectrum { center, std },
        amplitude: height * (2.0 * PI).sqrt() * std,
        residual_norm: reported.residual_norm,
        fit: reported,
    })
}
