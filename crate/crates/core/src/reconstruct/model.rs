//! Amplitudes of the five interferogram features of a two-interface sample
//! and the inverse problem of finding interface parameters that explain
//! measured amplitudes.
//!
//! Echo `k` returns with complex amplitude `h_k`: `h_1 = r1`,
//! `h_2 = r1 r2 t1^2 e^{i psi}`, then `h_k = r1 r2 h_{k-1}`. A dip of
//! depth `V_k = (A/2)|h_k|^2` sits at echo `k`, a cross term
//! `V_kl = A Re[h_k h_l^* e^{i(k-l) phi0}]` midway between echoes `k` and
//! `l`. Feature `j` (at `x1 + (j-1) d/2`) collects every term at that
//! position: `{V1, V12, V2 + V13, V23 + V14, V3 + V24 + V15}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dsp::{damped_least_squares, FitOptions};
use crate::error::{Error, Result};

/// Interface parameters behind the feature amplitudes. `t1` follows from
/// `r1` for lossless interfaces; `psi` is the phase of the first echo
/// relative to the direct reflection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    /// Common amplitude (counts/s).
    pub a: f64,
    pub r1: f64,
    pub r2: f64,
    pub t1: f64,
    /// Round-trip phase of the gap (rad).
    pub phi0: f64,
    pub psi: f64,
}

const ECHOES: usize = 5;

impl FeatureModel {
    pub fn lossless(a: f64, r1: f64, r2: f64, phi0: f64, psi: f64) -> Result<Self> {
        let m = Self {
            a,
            r1,
            r2,
            t1: (1.0 - r1 * r1).max(0.0).sqrt(),
            phi0,
            psi,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::invalid("A", "must be finite and >= 0"));
        }
        for (name, v) in [("r1", self.r1), ("r2", self.r2), ("t1", self.t1)] {
            if !(v.abs() <= 1.0) {
                return Err(Error::invalid(name, format!("|{name}| must not exceed 1, got {v}")));
            }
        }
        if !(self.phi0.is_finite() && self.psi.is_finite()) {
            return Err(Error::invalid("phase", "must be finite"));
        }
        Ok(())
    }

    fn echoes(&self) -> [Complex64; ECHOES] {
        let mut h = [Complex64::new(0.0, 0.0); ECHOES];
        h[0] = Complex64::new(self.r1, 0.0);
        h[1] = self.r1 * self.r2 * self.t1 * self.t1 * Complex64::from_polar(1.0, self.psi);
        for k in 2..ECHOES {
            h[k] = self.r1 * self.r2 * h[k - 1];
        }
        h
    }

    /// Same amplitudes, canonical phases: `phi0` in `[0, pi]`, `psi` in
    /// `(-pi, pi]`, and `psi >= 0` when `phi0` is 0 or `pi`. Conjugating
    /// every phase leaves all amplitudes unchanged.
    pub fn canonical(&self) -> Self {
        let wrap = |p: f64| {
            let w = p.rem_euclid(2.0 * PI);
            if w > PI {
                w - 2.0 * PI
            } else {
                w
            }
        };
        let mut m = *self;
        let mut phi = self.phi0.rem_euclid(2.0 * PI);
        let mut psi = wrap(self.psi);
        if phi > PI {
            phi = 2.0 * PI - phi;
            psi = wrap(-psi);
        }
        let edge = 1e-9;
        if (phi < edge || (PI - phi) < edge) && psi < 0.0 {
            psi = wrap(-psi);
        }
        m.phi0 = phi;
        m.psi = psi;
        m
    }
}

/// The five composite feature amplitudes (dips positive).
pub fn predict_amplitudes(model: &FeatureModel) -> [f64; 5] {
    let h = model.echoes();
    let a = model.a;
    let v = |k: usize| 0.5 * a * h[k - 1].norm_sqr();
    let x = |k: usize, l: usize| {
        let dk = k as f64 - l as f64;
        a * (h[k - 1] * h[l - 1].conj() * Complex64::from_polar(1.0, dk * model.phi0)).re
    };
    [
        v(1),
        x(1, 2),
        v(2) + x(1, 3),
        x(2, 3) + x(1, 4),
        v(3) + x(2, 4) + x(1, 5),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicalApproximation {
    pub model: FeatureModel,
    pub target: [f64; 5],
    pub predicted: [f64; 5],
    /// `predicted - target` per feature.
    pub residuals: [f64; 5],
    pub residual_norm: f64,
    pub starts: usize,
}

/// Least-squares interface parameters for five measured amplitudes.
///
/// Lossless interfaces are assumed (`t1^2 = 1 - r1^2`), which leaves five
/// unknowns `A, r1, r2, phi0, psi` for five amplitudes; the gauge puts the
/// sign of `r1 r2` into `phi0` so `r1, r2 >= 0`. A deterministic grid of
/// starting points guards against local minima.
pub fn approximate_physical(amplitudes: &[f64; 5]) -> Result<PhysicalApproximation> {
    if amplitudes.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("amplitudes", "must be finite"));
    }
    let scale = amplitudes.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::Degenerate("all amplitudes are zero, so A = 0".into()));
    }
    if !(amplitudes[0] > 0.0) {
        return Err(Error::Degenerate(
            "the direct reflection must be a dip (first amplitude > 0)".into(),
        ));
    }
    let target: Vec<f64> = amplitudes.iter().map(|v| v / scale).collect();
    let model = |p: &[f64]| -> Vec<f64> {
        let t1 = (1.0 - p[1] * p[1]).max(0.0).sqrt();
        let m = FeatureModel {
            a: p[0],
            r1: p[1],
            r2: p[2],
            t1,
            phi0: p[3],
            psi: p[4],
        };
        predict_amplitudes(&m).to_vec()
    };
    let opts = FitOptions::default()
        .with_names(&["A", "r1", "r2", "phi0", "psi"])
        .with_bounds(
            vec![0.0, 0.0, 0.0, -4.0 * PI, -4.0 * PI],
            vec![f64::INFINITY, 1.0, 1.0, 4.0 * PI, 4.0 * PI],
        );
    let grid = |n: usize, lo: f64, hi: f64| -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut starts = 0;
    'search: for &r1 in &grid(6, 0.0, 1.0) {
        for &r2 in &grid(6, 0.0, 1.0) {
            for &phi in &grid(4, 0.0, 2.0 * PI) {
                for &psi in &grid(4, -PI, PI) {
                    starts += 1;
                    // the direct-reflection amplitude fixes A for a given r1
                    let a0 = 2.0 * target[0] / (r1 * r1);
                    let Ok(f) = damped_least_squares(model, &[a0, r1, r2, phi, psi], &target, &opts)
                    else {
                        continue;
                    };
                    if best.as_ref().is_none_or(|b| f.residual_norm < b.0) {
                        best = Some((f.residual_norm, f.values));
                    }
                    if best.as_ref().is_some_and(|b| b.0 < 1e-13) {
                        break 'search;
                    }
                }
            }
        }
    }
    let (_, p) = best.ok_or_else(|| Error::NonConvergence {
        iterations: starts,
        reason: "no start converged".into(),
    })?;
    let model = FeatureModel::lossless(p[0] * scale, p[1], p[2], p[3], p[4])?.canonical();
    let predicted = predict_amplitudes(&model);
    let mut residuals = [0.0; 5];
    for k in 0..5 {
        residuals[k] = predicted[k] - amplitudes[k];
    }
    Ok(PhysicalApproximation {
        model,
        target: *amplitudes,
        predicted,
        residual_norm: residuals.iter().map(|r| r * r).sum::<f64>().sqrt(),
        residuals,
        starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_second_interface_leaves_one_feature() {
        let m = FeatureModel::lossless(1000.0, 0.5, 0.0, 0.3, 0.2).unwrap();
        let a = predict_amplitudes(&m);
        assert!((a[0] - 125.0).abs() < 1e-12);
        assert!(a[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn phase_periodicity() {
        let m = FeatureModel::lossless(1000.0, 0.5, 0.6, 0.3, 0.2).unwrap();
        let n = FeatureModel {
            phi0: m.phi0 + 2.0 * PI,
            ..m
        };
        let (a, b) = (predict_amplitudes(&m), predict_amplitudes(&n));
        for k in 0..5 {
            assert!((a[k] - b[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn cross_term_flips_with_half_turn() {
        let m = FeatureModel::lossless(1000.0, 0.5, 0.6, 0.3, 0.2).unwrap();
        let n = FeatureModel {
            phi0: m.phi0 + PI,
            ..m
        };
        let (a, b) = (predict_amplitudes(&m), predict_amplitudes(&n));
        assert!((a[1] + b[1]).abs() < 1e-9);
        assert!((a[0] - b[0]).abs() < 1e-9);
    }

    #[test]
    fn conjugate_phases_are_equivalent() {
        let m = FeatureModel::lossless(1000.0, 0.5, 0.6, 0.9, -1.3).unwrap();
        let n = FeatureModel {
            phi0: -m.phi0,
            psi: -m.psi,
            ..m
        };
        let (a, b) = (predict_amplitudes(&m), predict_amplitudes(&n));
        for k in 0..5 {
            assert!((a[k] - b[k]).abs() < 1e-9);
        }
        let (cm, cn) = (m.canonical(), n.canonical());
        assert!((cm.phi0 - cn.phi0).abs() < 1e-12 && (cm.psi - cn.psi).abs() < 1e-12);
        assert_eq!((cm.a, cm.r1, cm.r2), (cn.a, cn.r1, cn.r2));
    }

    #[test]
    fn round_trip_reproduces_amplitudes() {
        let truth = FeatureModel::lossless(2500.0, 0.45, 0.7, 2.2, 0.8).unwrap();
        let amps = predict_amplitudes(&truth);
        let fit = approximate_physical(&amps).unwrap();
        for k in 0..5 {
            assert!((fit.predicted[k] - amps[k]).abs() < 1e-6 * 280.0, "{fit:?}");
        }
    }

    #[test]
    fn distinct_models_can_share_amplitudes() {
        // five amplitudes do not always pin down the five parameters
        let a = FeatureModel::lossless(2500.0, 0.45, 0.7, 2.2, 0.8).unwrap();
        let b = FeatureModel::lossless(3442.278332771016, 0.3834948414980988, 0.8213930564736469, 2.2, 0.27973460646099113).unwrap();
        let (pa, pb) = (predict_amplitudes(&a), predict_amplitudes(&b));
        for k in 0..5 {
            assert!((pa[k] - pb[k]).abs() < 1e-6, "{pa:?} {pb:?}");
        }
    }

    #[test]
    fn zero_amplitudes_are_degenerate() {
        assert!(matches!(approximate_physical(&[0.0; 5]), Err(Error::Degenerate(_))));
    }
}
