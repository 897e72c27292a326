//! Locating the interfaces of a two-interface sample from a coincidence
//! interferogram.
//!
//! The trace (on the mirror axis, um) is modelled as
//! `C - sum_j A_j exp(-(x - x1 - (j-1) d/2)^2 / (2 sigma^2)) + k x`
//! for `j = 1..5`: the direct reflection at `x1`, the first echo at
//! `x1 + d`, the second at `x1 + 2d`, and cross terms midway between them.
//! Dips have positive `A_j`.

mod model;

pub use model::{approximate_physical, predict_amplitudes, FeatureModel, PhysicalApproximation};

use serde::{Deserialize, Serialize};

use crate::dsp::{damped_least_squares, fit_gaussian_feature, FitOptions, FitResult};
use crate::error::{Error, Result};

pub const FEATURES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconFit {
    pub c: f64,
    pub amplitudes: [f64; FEATURES],
    pub sigma: f64,
    pub x1: f64,
    pub d: f64,
    pub k: f64,
}

impl ReconFit {
    pub fn centers(&self) -> [f64; FEATURES] {
        std::array::from_fn(|j| self.x1 + j as f64 * 0.5 * self.d)
    }

    pub fn value_at(&self, x: f64) -> f64 {
        let dips: f64 = self
            .centers()
            .iter()
            .zip(&self.amplitudes)
            .map(|(c, a)| a * (-0.5 * ((x - c) / self.sigma).powi(2)).exp())
            .sum();
        self.c - dips + self.k * x
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reconstruction {
    pub fit: ReconFit,
    pub result: FitResult,
    /// False when only the direct reflection is significant, in which case
    /// `d` carries no information.
    pub d_identifiable: bool,
    pub amplitudes_fixed: bool,
}

const NAMES: [&str; 10] = ["C", "A1", "A2", "A3", "A4", "A5", "sigma", "x1", "d", "k"];

fn check_trace(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid("trace", "x and y lengths differ"));
    }
    if x.len() < 16 {
        return Err(Error::TooFewSamples { needed: 16, got: x.len() });
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

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Robust noise level from first differences (MAD scaled to a Gaussian
/// standard deviation).
fn robust_noise(y: &[f64]) -> f64 {
    let diffs: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    1.4826 * median(&diffs) / std::f64::consts::SQRT_2
}

/// Feature positions found by peak picking: local extrema of the lightly
/// smoothed deviation from a straight baseline that stand out by five noise
/// levels and by 5% of the largest deviation.
pub fn pick_features(x: &[f64], y: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_trace(x, y)?;
    let n = x.len();
    // median of slopes across half the record; localized dips barely move it
    let m = n / 2;
    let slopes: Vec<f64> = (0..n - m).map(|i| (y[i + m] - y[i]) / (x[i + m] - x[i])).collect();
    let slope = median(&slopes);
    let resid: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - slope * a).collect();
    let base = median(&resid);
    let half = 2usize;
    let dev: Vec<f64> = (0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(half), (i + half).min(n - 1));
            base - resid[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let noise = robust_noise(y) / ((2 * half + 1) as f64).sqrt();
    let biggest = dev.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(biggest > 5.0 * noise) {
        return Ok(Vec::new());
    }
    let threshold = (5.0 * noise).max(0.05 * biggest);
    let dx = (x[n - 1] - x[0]) / (n - 1) as f64;
    let reach = (((x[n - 1] - x[0]) / 50.0) / dx).round().max(3.0) as usize;
    let mut found = Vec::new();
    for i in 0..n {
        let a = dev[i].abs();
        if a < threshold {
            continue;
        }
        let lo = i.saturating_sub(reach);
        let hi = (i + reach).min(n - 1);
        // ties resolve to the leftmost point of a plateau
        let is_max = (lo..=hi).all(|j| dev[j].abs() < a || (dev[j].abs() == a && j >= i));
        if is_max {
            found.push((x[i], dev[i]));
        }
    }
    Ok(found)
}

/// Starting point from peak picking: `x1` at the first feature, `d` twice
/// the spacing to the next one, `sigma` from a Gaussian fit to the first.
pub fn initial_guess(x: &[f64], y: &[f64]) -> Result<(ReconFit, bool)> {
    let features = pick_features(x, y)?;
    let Some(&(x1, a1)) = features.first() else {
        return Err(Error::NoFeatures);
    };
    let c = median(y);
    let span = x[x.len() - 1] - x[0];
    let half_spacing = features.get(1).map(|f| f.0 - x1);
    let window = half_spacing.unwrap_or(span / 10.0) * 0.5;
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(xi, _)| (**xi - x1).abs() <= window)
        .map(|(a, b)| (*a, *b))
        .unzip();
    let dx = span / (x.len() - 1) as f64;
    let sigma = fit_gaussian_feature(&xs, &ys)
        .map(|g| g.sigma)
        .unwrap_or(2.0 * dx)
        .clamp(dx, window.max(2.0 * dx));
    let d = half_spacing.map(|h| 2.0 * h).unwrap_or(f64::NAN);
    let mut fit = ReconFit {
        c,
        amplitudes: [a1, 0.0, 0.0, 0.0, 0.0],
        sigma,
        x1,
        d,
        k: 0.0,
    };
    if d.is_finite() {
        let centers = fit.centers();
        for j in 1..FEATURES {
            let idx = x.partition_point(|v| *v < centers[j]).min(x.len() - 1);
            fit.amplitudes[j] = c - y[idx];
        }
    }
    Ok((fit, d.is_finite()))
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    x_ref: f64,
}

impl Problem<'_> {
    /// Parameters with the slope about `x_ref`, so offset and slope are
    /// nearly uncorrelated during the fit.
    fn to_params(&self, f: &ReconFit) -> Vec<f64> {
        let mut p = vec![f.c + f.k * self.x_ref];
        p.extend_from_slice(&f.amplitudes);
        p.extend_from_slice(&[f.sigma, f.x1, f.d, f.k]);
        p
    }

    fn from_params(&self, p: &[f64]) -> ReconFit {
        ReconFit {
            c: p[0] - p[9] * self.x_ref,
            amplitudes: [p[1], p[2], p[3], p[4], p[5]],
            sigma: p[6],
            x1: p[7],
            d: p[8],
            k: p[9],
        }
    }

    fn eval(&self, p: &[f64]) -> Vec<f64> {
        let centers: [f64; FEATURES] = std::array::from_fn(|j| p[7] + j as f64 * 0.5 * p[8]);
        self.x
            .iter()
            .map(|&xi| {
                let mut v = p[0] + p[9] * (xi - self.x_ref);
                for j in 0..FEATURES {
                    let z = (xi - centers[j]) / p[6];
                    v -= p[1 + j] * (-0.5 * z * z).exp();
                }
                v
            })
            .collect()
    }

    fn solve(&self, start: &ReconFit, fixed: &[bool; 10]) -> Result<(ReconFit, FitResult)> {
        let span = self.x[self.x.len() - 1] - self.x[0];
        let dx = span / (self.x.len() - 1) as f64;
        let inf = f64::INFINITY;
        let opts = FitOptions {
            max_iterations: 500,
            ..FitOptions::default()
        }
        .with_names(&NAMES)
        .with_bounds(
            vec![-inf, -inf, -inf, -inf, -inf, -inf, 0.1 * dx, self.x[0] - span, 0.0, -inf],
            vec![inf, inf, inf, inf, inf, inf, span, self.x[self.x.len() - 1] + span, 4.0 * span, inf],
        )
        .with_fixed(fixed.to_vec());
        let p0 = self.to_params(start);
        let raw = damped_least_squares(|p: &[f64]| self.eval(p), &p0, self.y, &opts)?;
        let fit = self.from_params(&raw.values);
        let mut result = raw.clone();
        result.values[0] = fit.c;
        // C = C' - k x_ref
        let cov = &raw.covariance;
        let var_c = cov[0][0] + self.x_ref * self.x_ref * cov[9][9] - 2.0 * self.x_ref * cov[0][9];
        result.uncertainties[0] = var_c.max(0.0).sqrt();
        Ok((fit, result))
    }
}

fn x_reference(x: &[f64]) -> f64 {
    0.5 * (x[0] + x[x.len() - 1])
}

fn finish(fit: ReconFit, result: FitResult, amplitudes_fixed: bool) -> Result<Reconstruction> {
    // fixed amplitudes carry no uncertainty; they count when non-negligible
    let significant = (1..FEATURES).any(|j| {
        let u = result.uncertainties[1 + j];
        let a = fit.amplitudes[j].abs();
        a > 1e-3 * fit.amplitudes[0].abs() && (amplitudes_fixed || a > 3.0 * u)
    });
    let d_identifiable = fit.d.is_finite() && significant;
    if d_identifiable && fit.d < 4.0 * fit.sigma {
        return Err(Error::Unresolvable {
            d: fit.d,
            sigma: fit.sigma,
        });
    }
    Ok(Reconstruction {
        fit,
        result,
        d_identifiable,
        amplitudes_fixed,
    })
}

/// Fits all parameters. Without `init` the starting point comes from peak
/// picking; a trace with a single feature is fitted with one Gaussian and
/// flagged as carrying no gap information.
pub fn fit_reconstruction(x: &[f64], y: &[f64], init: Option<ReconFit>) -> Result<Reconstruction> {
    check_trace(x, y)?;
    let (start, two) = match init {
        Some(f) => (f, f.d.is_finite()),
        None => initial_guess(x, y)?,
    };
    let problem = Problem {
        x,
        y,
        x_ref: x_reference(x),
    };
    if !two {
        let mut s = start;
        s.amplitudes[1..].iter_mut().for_each(|a| *a = 0.0);
        s.d = x[x.len() - 1] - x[0];
        let fixed = [false, false, true, true, true, true, false, false, true, false];
        let (mut fit, result) = problem.solve(&s, &fixed)?;
        fit.d = f64::NAN;
        return Ok(Reconstruction {
            fit,
            result,
            d_identifiable: false,
            amplitudes_fixed: false,
        });
    }
    let last_feature = start.x1 + 2.0 * start.d;
    if x[x.len() - 1] < last_feature {
        return Err(Error::invalid(
            "trace",
            format!(
                "ends at {:.3} before the last feature expected near {last_feature:.3}",
                x[x.len() - 1]
            ),
        ));
    }
    let (fit, result) = problem.solve(&start, &[false; 10])?;
    finish(fit, result, false)
}

/// Refit with the five amplitudes held at `amplitudes`, leaving offset,
/// width, positions and slope free.
pub fn refit_fixed_amplitudes(
    x: &[f64],
    y: &[f64],
    previous: &ReconFit,
    amplitudes: &[f64; FEATURES],
) -> Result<Reconstruction> {
    check_trace(x, y)?;
    if !previous.d.is_finite() {
        return Err(Error::invalid("previous", "gap must be finite to refit"));
    }
    let problem = Problem {
        x,
        y,
        x_ref: x_reference(x),
    };
    let start = ReconFit {
        amplitudes: *amplitudes,
        ..*previous
    };
    let mut fixed = [false; 10];
    fixed[1..=FEATURES].iter_mut().for_each(|f| *f = true);
    let (fit, result) = problem.solve(&start, &fixed)?;
    finish(fit, result, true)
}

/// Gap and its 1-sigma uncertainty from a reconstruction.
pub fn extract_gap(recon: &Reconstruction) -> Result<(f64, f64)> {
    if !recon.d_identifiable {
        return Err(Error::Degenerate("only one feature is significant; the gap is not identifiable".into()));
    }
    let d = recon.result.value("d").ok_or(Error::Singular)?;
    let u = recon.result.uncertainty("d").ok_or(Error::Singular)?;
    Ok((d, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::uniform_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn truth() -> ReconFit {
        ReconFit {
            c: 1000.0,
            amplitudes: [196.0, 237.0, 50.0, -40.0, 17.0],
            sigma: 2.8,
            x1: 40.0,
            d: 110.67,
            k: 0.05,
        }
    }

    fn trace(f: &ReconFit, noise: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let x = uniform_grid(0.0, 300.0, 1001);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, noise.max(1e-300)).unwrap();
        let y = x
            .iter()
            .map(|v| f.value_at(*v) + if noise > 0.0 { n.sample(&mut rng) } else { 0.0 })
            .collect();
        (x, y)
    }

    #[test]
    fn noise_free_round_trip() {
        let t = truth();
        let (x, y) = trace(&t, 0.0, 0);
        let r = fit_reconstruction(&x, &y, None).unwrap();
        assert!(r.d_identifiable);
        assert!((r.fit.d - t.d).abs() < 1e-6, "{}", r.fit.d);
        for j in 0..FEATURES {
            assert!((r.fit.amplitudes[j] - t.amplitudes[j]).abs() < 1e-6);
        }
        assert!((r.fit.c - t.c).abs() < 1e-6);
    }

    #[test]
    fn centers_are_ordered_and_evenly_spaced() {
        let (x, y) = trace(&truth(), 2.0, 3);
        let r = fit_reconstruction(&x, &y, None).unwrap();
        let c = r.fit.centers();
        for w in c.windows(2) {
            assert!(w[1] > w[0]);
            assert!(((w[1] - w[0]) - 0.5 * r.fit.d).abs() <= r.fit.sigma / 10.0);
        }
    }

    #[test]
    fn noise_raises_uncertainty_without_bias() {
        let t = truth();
        let mut spread = Vec::new();
        for noise in [2.0, 4.0] {
            let mut ds = Vec::new();
            let mut us = Vec::new();
            for seed in 0..20 {
                let (x, y) = trace(&t, noise, seed);
                let r = fit_reconstruction(&x, &y, None).unwrap();
                let (d, u) = extract_gap(&r).unwrap();
                ds.push(d);
                us.push(u);
            }
            let mean = ds.iter().sum::<f64>() / 20.0;
            let mean_u = us.iter().sum::<f64>() / 20.0;
            // unbiased within the uncertainty of the 20-seed mean
            assert!((mean - t.d).abs() < 3.0 * mean_u / 20f64.sqrt(), "{mean} {mean_u}");
            spread.push(mean_u);
        }
        assert!(spread[1] > spread[0]);
    }

    #[test]
    fn blur_raises_uncertainty() {
        let mut last = 0.0;
        for factor in [1.0, 2.0, 3.0, 5.0] {
            let mut t = truth();
            t.sigma *= factor;
            let (x, y) = trace(&t, 2.0, 11);
            let r = fit_reconstruction(&x, &y, Some(t)).unwrap();
            let (_, u) = extract_gap(&r).unwrap();
            assert!(u > last, "{factor}: {u} <= {last}");
            last = u;
        }
    }

    #[test]
    fn single_mirror_flags_gap() {
        let mut t = truth();
        t.amplitudes = [196.0, 0.0, 0.0, 0.0, 0.0];
        let (x, y) = trace(&t, 0.0, 0);
        let r = fit_reconstruction(&x, &y, None).unwrap();
        assert!(!r.d_identifiable);
        assert!((r.fit.x1 - t.x1).abs() < 1e-6);
        assert!(extract_gap(&r).is_err());
    }

    #[test]
    fn flat_trace_has_no_features() {
        let x = uniform_grid(0.0, 100.0, 200);
        assert!(matches!(fit_reconstruction(&x, &vec![5.0; 200], None), Err(Error::NoFeatures)));
    }

    #[test]
    fn overlapping_features_unresolvable() {
        let mut t = truth();
        t.d = 6.0;
        t.sigma = 3.0;
        let (x, y) = trace(&t, 0.0, 0);
        let r = fit_reconstruction(&x, &y, Some(t));
        assert!(matches!(r, Err(Error::Unresolvable { .. })), "{r:?}");
    }

    #[test]
    fn refit_with_single_feature_loses_gap() {
        let t = truth();
        let (x, y) = trace(&t, 2.0, 5);
        let r = fit_reconstruction(&x, &y, None).unwrap();
        let refit = refit_fixed_amplitudes(&x, &y, &r.fit, &[196.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(!refit.d_identifiable);
        assert!(extract_gap(&refit).is_err());
    }

    #[test]
    fn frozen_amplitudes_refit() {
        let t = truth();
        let (x, y) = trace(&t, 2.0, 5);
        let r = fit_reconstruction(&x, &y, None).unwrap();
        let approx = approximate_physical(&r.fit.amplitudes).unwrap();
        let refit = refit_fixed_amplitudes(&x, &y, &r.fit, &approx.predicted).unwrap();
        assert!(refit.amplitudes_fixed);
        assert_eq!(refit.fit.amplitudes, approx.predicted);
        let (d, u) = extract_gap(&refit).unwrap();
        assert!((d - t.d).abs() < 4.0 * u.max(1e-3));
    }
}
