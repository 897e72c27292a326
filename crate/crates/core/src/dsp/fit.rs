//! Shape fits built on the damped least-squares solver: a single Gaussian
//! dip or peak, a sinc envelope of an oscillating trace, and the
//! two-Gaussian model of an interferogram spectrum.

use serde::{Deserialize, Serialize};

use super::fft::{analytic_signal, uniform_step, unitary_dft, SpectrumTrace};
use super::lm::{damped_least_squares, FitOptions, FitResult};
use crate::error::{Error, Result};
use crate::units::FWHM_PER_SIGMA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSign {
    Dip,
    Peak,
}

impl FeatureSign {
    pub fn factor(self) -> f64 {
        match self {
            FeatureSign::Dip => -1.0,
            FeatureSign::Peak => 1.0,
        }
    }
}

/// `offset + sign * amplitude * exp(-(x - center)^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianFeature {
    pub center: f64,
    pub sigma: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub sign: FeatureSign,
    pub fwhm: f64,
    pub center_uncertainty: f64,
    pub sigma_uncertainty: f64,
    pub fwhm_uncertainty: f64,
    pub fit: FitResult,
}

impl GaussianFeature {
    pub fn value_at(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.sigma;
        self.offset + self.sign.factor() * self.amplitude * (-0.5 * z * z).exp()
    }
}

fn check_xy(x: &[f64], y: &[f64], needed: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid("trace", "x and y lengths differ"));
    }
    if x.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: x.len(),
        });
    }
    for (i, w) in x.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonMonotoneGrid { index: i + 1 });
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("trace", "non-finite values"));
    }
    Ok(())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Affine map of the abscissa onto roughly `[-1, 1]` so the fitted
/// parameters are of order one.
struct Scale {
    shift: f64,
    half: f64,
}

impl Scale {
    fn of(x: &[f64]) -> Self {
        let (a, b) = (x[0], x[x.len() - 1]);
        Self {
            shift: 0.5 * (a + b),
            half: 0.5 * (b - a),
        }
    }

    fn to(&self, x: f64) -> f64 {
        (x - self.shift) / self.half
    }

    fn from(&self, z: f64) -> f64 {
        self.shift + z * self.half
    }
}

/// Fits one dominant Gaussian dip or peak. The sign is decided from the
/// larger excursion from the median before fitting.
pub fn fit_gaussian_feature(x: &[f64], y: &[f64]) -> Result<GaussianFeature> {
    check_xy(x, y, 5)?;
    let med = median(y);
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if !(range > f64::EPSILON * med.abs().max(1e-300)) || range == 0.0 {
        return Err(Error::Degenerate("flat trace has no feature".into()));
    }
    let sign = if med - lo > hi - med {
        FeatureSign::Dip
    } else {
        FeatureSign::Peak
    };
    let sx = Scale::of(x);
    let xs: Vec<f64> = x.iter().map(|v| sx.to(*v)).collect();
    let ys: Vec<f64> = y.iter().map(|v| (v - med) / range).collect();
    let s = sign.factor();
    let k_ext = (0..ys.len())
        .max_by(|&a, &b| (s * ys[a]).total_cmp(&(s * ys[b])))
        .unwrap_or(0);
    let amp0 = (s * ys[k_ext]).max(f64::MIN_POSITIVE);
    let above = ys.iter().filter(|v| s * **v > 0.5 * amp0).count().max(1);
    let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    let sigma0 = (above as f64 * dx / FWHM_PER_SIGMA).max(2.0 * dx);

    let model = |p: &[f64]| -> Vec<f64> {
        xs.iter()
            .map(|&xi| {
                let z = (xi - p[2]) / p[3];
                p[0] + s * p[1] * (-0.5 * z * z).exp()
            })
            .collect()
    };
    let opts = FitOptions::default()
        .with_names(&["offset", "amplitude", "center", "sigma"])
        .with_bounds(
            vec![f64::NEG_INFINITY, 0.0, -2.0, 0.05 * dx],
            vec![f64::INFINITY, f64::INFINITY, 2.0, 4.0],
        );
    let raw = damped_least_squares(model, &[0.0, amp0, xs[k_ext], sigma0], &ys, &opts)?;
    let v = &raw.values;
    let u = &raw.uncertainties;
    let mut fit = raw.clone();
    fit.values = vec![med + v[0] * range, v[1] * range, sx.from(v[2]), v[3] * sx.half];
    fit.uncertainties = vec![u[0] * range, u[1] * range, u[2] * sx.half, u[3] * sx.half];
    let factors = [range, range, sx.half, sx.half];
    for (i, row) in fit.covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c *= factors[i] * factors[j];
        }
    }
    fit.residual_norm = raw.residual_norm * range;
    Ok(GaussianFeature {
        offset: fit.values[0],
        amplitude: fit.values[1],
        center: fit.values[2],
        sigma: fit.values[3],
        sign,
        fwhm: fit.values[3] * FWHM_PER_SIGMA,
        center_uncertainty: fit.uncertainties[2],
        sigma_uncertainty: fit.uncertainties[3],
        fwhm_uncertainty: fit.uncertainties[3] * FWHM_PER_SIGMA,
        fit,
    })
}

/// `sin(pi z) / (pi z)`.
pub fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - (std::f64::consts::PI * z).powi(2) / 6.0
    } else {
        let a = std::f64::consts::PI * z;
        a.sin() / a
    }
}

/// Half width at half maximum of `|sinc|` in units of its width parameter.
fn sinc_half_max() -> f64 {
    let (mut a, mut b) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if sinc(m) > 0.5 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Result of fitting `offset + amplitude |sinc((x - center) / width)|` to the
/// analytic-signal envelope of an oscillating trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SincEnvelopeFit {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub fwhm: f64,
    pub fwhm_uncertainty: f64,
    pub fit: FitResult,
    /// The extracted envelope the fit was made to.
    pub envelope: Vec<f64>,
    /// A Gaussian fitted to the same envelope, for model comparison.
    pub gaussian: Option<GaussianFeature>,
}

/// Envelope of an oscillating trace: magnitude of the analytic signal of
/// the mean-removed values.
pub fn envelope(y: &[f64]) -> Vec<f64> {
    let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
    let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
    analytic_signal(&centred).iter().map(|z| z.norm()).collect()
}

/// Minimum number of carrier periods across the record for an envelope to
/// be meaningful.
const MIN_CARRIER_CYCLES: usize = 8;

pub fn fit_sinc_envelope(x: &[f64], y: &[f64]) -> Result<SincEnvelopeFit> {
    check_xy(x, y, 16)?;
    uniform_step(x)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let spec = unitary_dft(&centred);
    let half = spec.len() / 2;
    let dominant = (1..=half)
        .max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm()))
        .unwrap_or(0);
    if dominant < MIN_CARRIER_CYCLES {
        return Err(Error::Degenerate(format!(
            "no carrier to take an envelope of (dominant component at {dominant} cycles per record)"
        )));
    }
    let env = envelope(y);

    let sx = Scale::of(x);
    let xs: Vec<f64> = x.iter().map(|v| sx.to(*v)).collect();
    let emax = env.iter().cloned().fold(0.0, f64::max);
    if !(emax > 0.0) {
        return Err(Error::Degenerate("zero envelope".into()));
    }
    let es: Vec<f64> = env.iter().map(|v| v / emax).collect();
    let k = (0..es.len()).max_by(|&a, &b| es[a].total_cmp(&es[b])).unwrap_or(0);
    let base = median(&es).min(0.5);
    let above = es.iter().filter(|v| **v > 0.5 * (1.0 + base)).count().max(2);
    let dx = xs[1] - xs[0];
    let hm = sinc_half_max();
    let w0 = above as f64 * dx / (2.0 * hm);

    let model = |p: &[f64]| -> Vec<f64> {
        xs.iter()
            .map(|&xi| p[0] + p[1] * sinc((xi - p[2]) / p[3]).abs())
            .collect()
    };
    let opts = FitOptions::default()
        .with_names(&["offset", "amplitude", "center", "width"])
        .with_bounds(
            vec![f64::NEG_INFINITY, 0.0, -2.0, 0.5 * dx],
            vec![f64::INFINITY, f64::INFINITY, 2.0, 8.0],
        );
    let raw = damped_least_squares(model, &[base, 1.0 - base, xs[k], w0], &es, &opts)?;
    let v = &raw.values;
    let u = &raw.uncertainties;
    let mut fit = raw.clone();
    fit.values = vec![v[0] * emax, v[1] * emax, sx.from(v[2]), v[3] * sx.half];
    fit.uncertainties = vec![u[0] * emax, u[1] * emax, u[2] * sx.half, u[3] * sx.half];
    fit.residual_norm = raw.residual_norm * emax;
    let gaussian = fit_gaussian_feature(x, &env).ok();
    Ok(SincEnvelopeFit {
        offset: fit.values[0],
        amplitude: fit.values[1],
        center: fit.values[2],
        width: fit.values[3],
        fwhm: 2.0 * hm * fit.values[3],
        fwhm_uncertainty: 2.0 * hm * fit.uncertainties[3],
        fit,
        envelope: env,
        gaussian,
    })
}

/// `c + a1 exp(-(w - 1/2)^2 / (2 s1^2)) + a2 exp(-(w - 1)^2 / (2 s2^2))`
/// with `w` in units of `omega_p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoGaussianSpectralFit {
    pub c: f64,
    pub a1: f64,
    pub a2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub c_uncertainty: f64,
    pub a1_uncertainty: f64,
    pub a2_uncertainty: f64,
    pub sigma1_uncertainty: f64,
    pub sigma2_uncertainty: f64,
    pub sigma1_fixed: bool,
    pub fit: FitResult,
}

impl TwoGaussianSpectralFit {
    pub fn value_at(&self, w: f64) -> f64 {
        two_gaussian(w, &[self.c, self.a1, self.sigma1, self.a2, self.sigma2])
    }
}

fn two_gaussian(w: f64, p: &[f64]) -> f64 {
    let z1 = (w - 0.5) / p[2];
    let z2 = (w - 1.0) / p[4];
    p[0] + p[1] * (-0.5 * z1 * z1).exp() + p[3] * (-0.5 * z2 * z2).exp()
}

/// Frequency window (units of `omega_p`) the two-Gaussian model is fitted on.
pub const TWO_GAUSSIAN_WINDOW: (f64, f64) = (0.2, 1.4);

/// Fits the two carrier peaks of an interferogram spectrum with centres
/// locked at `omega_p / 2` and `omega_p`; `sigma1_fixed` pins the first width.
pub fn fit_two_gaussian_spectrum(
    spec: &SpectrumTrace,
    sigma1_fixed: Option<f64>,
) -> Result<TwoGaussianSpectralFit> {
    let (lo, hi) = TWO_GAUSSIAN_WINDOW;
    let bin = spec.bin_width();
    let covers = spec.omega.first().is_some_and(|w| *w <= lo + bin)
        && spec.omega.last().is_some_and(|w| *w >= hi - bin);
    if !covers {
        return Err(Error::invalid(
            "spectrum",
            format!("must cover [{lo}, {hi}] omega_p"),
        ));
    }
    if let Some(s) = sigma1_fixed {
        if !(s > 0.0) {
            return Err(Error::invalid("sigma1_fixed", "must be positive"));
        }
    }
    let win = spec.window(lo, hi);
    let scale = win.magnitude.iter().cloned().fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Degenerate("spectrum is identically zero".into()));
    }
    let w = &win.omega;
    let y: Vec<f64> = win.magnitude.iter().map(|m| m / scale).collect();

    let value_near = |target: f64| {
        let k = w.partition_point(|v| *v < target).min(w.len() - 1);
        y[k]
    };
    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let c0 = sorted[sorted.len() / 10];
    let a10 = (value_near(0.5) - c0).max(0.0);
    let a20 = (value_near(1.0) - c0).max(0.0);
    let half_width = |center: f64, amp: f64| {
        let k0 = w.partition_point(|v| *v < center).min(w.len() - 1);
        let mut k = k0;
        while k + 1 < w.len() && y[k] > c0 + 0.5 * amp {
            k += 1;
        }
        ((w[k] - center).abs() / (0.5 * FWHM_PER_SIGMA)).clamp(2.0 * bin, 0.5)
    };

    let model = |p: &[f64]| -> Vec<f64> { w.iter().map(|&wi| two_gaussian(wi, p)).collect() };
    let min_sigma = bin.max(1e-4);
    let opts = FitOptions::default()
        .with_names(&["c", "a1", "sigma1", "a2", "sigma2"])
        .with_bounds(
            vec![f64::NEG_INFINITY, 0.0, min_sigma, 0.0, min_sigma],
            vec![f64::INFINITY, f64::INFINITY, 2.0, f64::INFINITY, 2.0],
        )
        .with_fixed(vec![false, false, sigma1_fixed.is_some(), false, false]);

    let s1_guesses: Vec<f64> = match sigma1_fixed {
        Some(s) => vec![s],
        None => vec![half_width(0.5, a10), 0.05, 0.2],
    };
    let s2_guesses = [half_width(1.0, a20), 0.05, 0.3];
    let mut best: Option<FitResult> = None;
    let mut last_err = None;
    for &s1 in &s1_guesses {
        for &s2 in &s2_guesses {
            match damped_least_squares(model, &[c0, a10, s1, a20, s2], &y, &opts) {
                Ok(f) => {
                    if best.as_ref().is_none_or(|b| f.residual_norm < b.residual_norm) {
                        best = Some(f);
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
    }
    let raw = match best {
        Some(b) => b,
        None => return Err(last_err.unwrap_or(Error::Singular)),
    };
    let v = &raw.values;
    let u = &raw.uncertainties;
    let mut fit = raw.clone();
    fit.values = vec![v[0] * scale, v[1] * scale, v[2], v[3] * scale, v[4]];
    fit.uncertainties = vec![u[0] * scale, u[1] * scale, u[2], u[3] * scale, u[4]];
    let factors = [scale, scale, 1.0, scale, 1.0];
    for (i, row) in fit.covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c *= factors[i] * factors[j];
        }
    }
    fit.residual_norm = raw.residual_norm * scale;
    Ok(TwoGaussianSpectralFit {
        c: fit.values[0],
        a1: fit.values[1],
        sigma1: fit.values[2],
        a2: fit.values[3],
        sigma2: fit.values[4],
        c_uncertainty: fit.uncertainties[0],
        a1_uncertainty: fit.uncertainties[1],
        sigma1_uncertainty: fit.uncertainties[2],
        a2_uncertainty: fit.uncertainties[3],
        sigma2_uncertainty: fit.uncertainties[4],
        sigma1_fixed: sigma1_fixed.is_some(),
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::uniform_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Poisson};

    fn gaussian_trace(x: &[f64], c: f64, s: f64, a: f64, off: f64) -> Vec<f64> {
        x.iter()
            .map(|v| off - a * (-0.5 * ((v - c) / s).powi(2)).exp())
            .collect()
    }

    #[test]
    fn exact_dip_recovered() {
        let x = uniform_grid(-50.0, 50.0, 401);
        let y = gaussian_trace(&x, 3.3, 4.1, 0.8, 2.0);
        let f = fit_gaussian_feature(&x, &y).unwrap();
        assert_eq!(f.sign, FeatureSign::Dip);
        assert!((f.center - 3.3).abs() < 1e-8);
        assert!((f.sigma - 4.1).abs() < 1e-8);
        assert!((f.amplitude - 0.8).abs() < 1e-8);
        assert!((f.offset - 2.0).abs() < 1e-8);
    }

    #[test]
    fn peak_sign_detected() {
        let x = uniform_grid(0.0, 10.0, 101);
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 3.0 * (-0.5 * (v - 6.0f64).powi(2)).exp()).collect();
        let f = fit_gaussian_feature(&x, &y).unwrap();
        assert_eq!(f.sign, FeatureSign::Peak);
        assert!((f.center - 6.0).abs() < 1e-8);
    }

    #[test]
    fn flat_trace_is_degenerate() {
        let x = uniform_grid(0.0, 10.0, 50);
        assert!(matches!(fit_gaussian_feature(&x, &vec![3.0; 50]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn noisy_dip_center_spread() {
        // Poisson counts with a dip of depth ~30 sqrt(counts)
        let x = uniform_grid(-40.0, 40.0, 321);
        let fwhm = 9.4;
        let sigma = fwhm / FWHM_PER_SIGMA;
        let base: f64 = 2000.0;
        let depth = 30.0 * base.sqrt();
        let mut centers = Vec::new();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = gaussian_trace(&x, 0.0, sigma, depth, base)
                .iter()
                .map(|m| Poisson::new(*m).unwrap().sample(&mut rng))
                .collect();
            let f = fit_gaussian_feature(&x, &y).unwrap();
            assert!(f.center_uncertainty < fwhm / 20.0);
            centers.push(f.center);
        }
        let mean = centers.iter().sum::<f64>() / 20.0;
        let sd = (centers.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 19.0).sqrt();
        assert!(sd < fwhm / 20.0, "{sd}");
    }

    fn carrier_trace(x: &[f64], env: impl Fn(f64) -> f64, period: f64) -> Vec<f64> {
        x.iter()
            .map(|v| 5.0 + env(*v) * (2.0 * std::f64::consts::PI * v / period).cos())
            .collect()
    }

    #[test]
    fn sinc_envelope_recovered() {
        let x = uniform_grid(-100.0, 100.0, 4001);
        let w = 12.0;
        let y = carrier_trace(&x, |v| 2.0 * sinc(v / w), 0.7);
        let f = fit_sinc_envelope(&x, &y).unwrap();
        let expected = 2.0 * sinc_half_max() * w;
        assert!((f.fwhm - expected).abs() < 0.01 * expected, "{} vs {expected}", f.fwhm);
    }

    #[test]
    fn rectangular_spectrum_gives_sinc_envelope() {
        // sum of equal-amplitude cosines across a flat band
        let x = uniform_grid(-100.0, 100.0, 4001);
        let (k0, bw) = (2.0 * std::f64::consts::PI / 0.7, 0.5);
        let m = 400;
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                (0..m)
                    .map(|j| (v * (k0 - bw / 2.0 + bw * (j as f64 + 0.5) / m as f64)).cos())
                    .sum::<f64>()
                    / m as f64
            })
            .collect();
        let f = fit_sinc_envelope(&x, &y).unwrap();
        // envelope sin(bw x / 2) / (bw x / 2) = sinc(bw x / (2 pi))
        let w = 2.0 * std::f64::consts::PI / bw;
        assert!((f.width - w).abs() < 0.01 * w, "{} vs {w}", f.width);
    }

    #[test]
    fn gaussian_spectrum_prefers_gaussian_model() {
        let x = uniform_grid(-100.0, 100.0, 4001);
        let y = carrier_trace(&x, |v| 2.0 * (-0.5 * (v / 10.0).powi(2)).exp(), 0.7);
        let f = fit_sinc_envelope(&x, &y).unwrap();
        let g = f.gaussian.as_ref().unwrap();
        assert!(f.fit.residual_norm > g.fit.residual_norm);
    }

    #[test]
    fn non_oscillatory_input_rejected() {
        let x = uniform_grid(-100.0, 100.0, 501);
        let y = gaussian_trace(&x, 0.0, 10.0, 1.0, 2.0);
        assert!(matches!(fit_sinc_envelope(&x, &y), Err(Error::Degenerate(_))));
    }

    fn synthetic_spectrum(c: f64, a1: f64, s1: f64, a2: f64, s2: f64) -> SpectrumTrace {
        let omega = uniform_grid(0.0, 2.0, 801);
        let magnitude = omega.iter().map(|w| two_gaussian(*w, &[c, a1, s1, a2, s2])).collect();
        SpectrumTrace {
            omega,
            magnitude,
            omega_p: 1.0,
        }
    }

    #[test]
    fn two_gaussian_exact_recovery() {
        let s = synthetic_spectrum(4.6, 112.0, 0.16, 39.0, 0.40);
        let f = fit_two_gaussian_spectrum(&s, None).unwrap();
        for (a, b) in [(f.c, 4.6), (f.a1, 112.0), (f.sigma1, 0.16), (f.a2, 39.0), (f.sigma2, 0.40)] {
            assert!((a - b).abs() <= 1e-6 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn two_gaussian_noisy_table_values() {
        let mut s = synthetic_spectrum(4.6, 112.0, 0.16, 39.0, 0.40);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 3.0).unwrap();
        s.magnitude.iter_mut().for_each(|m| *m += noise.sample(&mut rng));
        let f = fit_two_gaussian_spectrum(&s, Some(0.16)).unwrap();
        assert_eq!(f.sigma1, 0.16);
        // three-sigma band of the reported fit uncertainties
        assert!((f.c - 4.6).abs() <= 3.0 * f.c_uncertainty);
        assert!((f.a1 - 112.0).abs() <= 3.0 * f.a1_uncertainty);
        assert!((f.a2 - 39.0).abs() <= 3.0 * f.a2_uncertainty);
        assert!((f.sigma2 - 0.40).abs() <= 3.0 * f.sigma2_uncertainty);
    }

    #[test]
    fn cross_like_spectrum_has_no_first_peak() {
        let s = synthetic_spectrum(4.6, 0.0, 0.16, 148.0, 0.40);
        let f = fit_two_gaussian_spectrum(&s, Some(0.16)).unwrap();
        assert!(f.a1 < 0.01 * f.a2);
    }

    #[test]
    fn flat_spectrum_gives_zero_amplitudes() {
        let s = synthetic_spectrum(4.6, 0.0, 0.16, 0.0, 0.40);
        let f = fit_two_gaussian_spectrum(&s, Some(0.16)).unwrap();
        assert!((f.c - 4.6).abs() < 1e-6);
        assert!(f.a1 < 1e-6 && f.a2 < 1e-6);
    }

    #[test]
    fn narrow_spectrum_rejected() {
        let omega = uniform_grid(0.0, 1.0, 101);
        let s = SpectrumTrace {
            magnitude: vec![1.0; 101],
            omega,
            omega_p: 1.0,
        };
        assert!(fit_two_gaussian_spectrum(&s, None).is_err());
    }
}
