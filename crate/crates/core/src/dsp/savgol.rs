//! Savitzky-Golay smoothing and the upper/lower envelope of repeated runs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Least-squares projector of a centred window onto polynomials of degree
/// `order`: row `j` maps window values to the `j`-th coefficient in the
/// scaled coordinate `z = k / half`.
fn projector(half: usize, order: usize) -> Result<DMatrix<f64>> {
    let m = 2 * half + 1;
    let scale = half.max(1) as f64;
    let a = DMatrix::from_fn(m, order + 1, |i, j| ((i as f64 - half as f64) / scale).powi(j as i32));
    a.pseudo_inverse(1e-12)
        .map_err(|e| Error::Degenerate(format!("Savitzky-Golay design matrix: {e}")))
}

fn poly_at(p: &DMatrix<f64>, z: f64, window: &[f64]) -> f64 {
    let mut zp = 1.0;
    let mut out = 0.0;
    for j in 0..p.nrows() {
        let c: f64 = (0..window.len()).map(|i| p[(j, i)] * window[i]).sum();
        out += c * zp;
        zp *= z;
    }
    out
}

/// Smooths `values` sampled every `step` with a window spanning roughly
/// `window` in the same unit (rounded to an odd sample count). Edges are
/// handled by evaluating the polynomial fitted to the first or last full
/// window, so polynomials of degree `order` pass through unchanged.
pub fn savgol_smooth(values: &[f64], step: f64, window: f64, order: usize) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("step", "must be positive"));
    }
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::invalid("window", "must be positive"));
    }
    let mut m = (window / step).round() as usize;
    if m % 2 == 0 {
        m += 1;
    }
    let m = m.max(order + 2 + (order + 1) % 2);
    let n = values.len();
    if n < m {
        return Err(Error::TooFewSamples { needed: m, got: n });
    }
    let half = m / 2;
    let p = projector(half, order)?;
    let centre: Vec<f64> = (0..m).map(|i| p[(0, i)]).collect();
    let mut out = vec![0.0; n];
    for k in half..n - half {
        out[k] = centre.iter().zip(&values[k - half..=k + half]).map(|(c, v)| c * v).sum();
    }
    let scale = half.max(1) as f64;
    let head = &values[..m];
    let tail = &values[n - m..];
    for k in 0..half {
        out[k] = poly_at(&p, (k as f64 - half as f64) / scale, head);
        out[n - 1 - k] = poly_at(&p, (half as f64 - k as f64) / scale, tail);
    }
    Ok(out)
}

/// Upper and lower envelopes of repeated runs over the same grid.
///
/// Each run is standardised to zero mean and unit variance, then rescaled
/// with the run-averaged mean and standard deviation, so runs at different
/// overall rates become comparable. The pointwise maximum and
/// minimum are then smoothed.
pub fn envelope_minmax(
    runs: &[Vec<f64>],
    step: f64,
    window: f64,
    order: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = runs
        .first()
        .map(|r| r.len())
        .ok_or_else(|| Error::invalid("runs", "need at least one run"))?;
    if runs.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("runs", "runs differ in length"));
    }
    if runs.len() == 1 {
        log::warn!("envelope of a single run: upper and lower envelopes coincide");
    }
    let stats = |v: &[f64]| {
        let len = v.len() as f64;
        let mean = v.iter().sum::<f64>() / len;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / len;
        (mean, var.sqrt())
    };
    let per_run: Vec<(f64, f64)> = runs.iter().map(|r| stats(r)).collect();
    let k = runs.len() as f64;
    let gm = per_run.iter().map(|s| s.0).sum::<f64>() / k;
    let gs = per_run.iter().map(|s| s.1).sum::<f64>() / k;
    let rescaled: Vec<Vec<f64>> = runs
        .iter()
        .zip(&per_run)
        .map(|(r, &(m, s))| {
            if s > 0.0 {
                r.iter().map(|x| gm + gs * (x - m) / s).collect()
            } else {
                r.clone()
            }
        })
        .collect();
    let upper: Vec<f64> = (0..n)
        .map(|k| rescaled.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let lower: Vec<f64> = (0..n)
        .map(|k| rescaled.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min))
        .collect();
    Ok((
        savgol_smooth(&upper, step, window, order)?,
        savgol_smooth(&lower, step, window, order)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_passes_unchanged() {
        let x: Vec<f64> = (0..200).map(|k| k as f64 * 0.1 - 7.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v * v * v - v * v + 2.0 * v - 5.0).collect();
        let s = savgol_smooth(&y, 0.1, 1.7, 3).unwrap();
        for (a, b) in y.iter().zip(&s) {
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn reduces_white_noise() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let d = Normal::new(0.0, 1.0).unwrap();
        let y: Vec<f64> = (0..2000).map(|_| d.sample(&mut rng)).collect();
        let s = savgol_smooth(&y, 1.0, 41.0, 3).unwrap();
        let var = s.iter().map(|v| v * v).sum::<f64>() / 2000.0;
        assert!(var < 0.2, "{var}");
    }

    #[test]
    fn short_input_rejected() {
        assert!(matches!(
            savgol_smooth(&[1.0; 5], 1.0, 11.0, 3),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn envelope_brackets_runs() {
        let base: Vec<f64> = (0..300).map(|k| (k as f64 * 0.05).sin()).collect();
        let runs: Vec<Vec<f64>> = (0..3)
            .map(|j| base.iter().map(|v| 10.0 + v * (1.0 + 0.2 * j as f64)).collect())
            .collect();
        let (up, lo) = envelope_minmax(&runs, 1.0, 9.0, 3).unwrap();
        assert!(up.iter().zip(&lo).all(|(u, l)| u + 1e-9 >= *l));
    }

    #[test]
    fn identical_runs_give_coincident_envelopes() {
        let r: Vec<f64> = (0..100).map(|k| (k as f64 * 0.1).cos()).collect();
        let (up, lo) = envelope_minmax(&[r.clone(), r], 1.0, 7.0, 3).unwrap();
        assert!(up.iter().zip(&lo).all(|(u, l)| (u - l).abs() < 1e-12));
    }
}
