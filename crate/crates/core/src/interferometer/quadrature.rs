//! Numerical evaluation of the interferogram terms for an arbitrary sample.
//!
//! The pair density factorises in the rotated frame `u = nu1 - nu2`,
//! `v = nu1 + nu2` (offsets from `omega_p / 2`) into `G(u | 0, Delta)
//! G(v | 0, delta)`, so a tensor-product rule in `(u, v)` with the Gaussian
//! folded into the weights converges quickly. With `e_j = exp(i omega_j tau)`
//! and `H_j = H(omega_p/2 + nu_j)` the terms are
//!
//! ```text
//! Mc  = < (1 + |H1|^2)(1 + |H2|^2) / 4 >
//! M0  = < Re[e1* e2 H1 H2*] / 2 >
//! M1  = < Re[e1 H1* (1 + |H2|^2)] >        M1' = same with 1 <-> 2
//! M2  = < Re[e1 e2 (H1 H2)*] / 2 >
//! ```

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{alpha_beta, check_grid, InterferogramTerms};
use crate::error::{Error, Result};
use crate::sample::Sample;
use crate::spectra::{gauss, SpdcSource};

/// Gauss-Hermite nodes and weights for `int exp(-x^2) f(x) dx`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const EPS: f64 = 3e-15;
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // orthonormal Hermite recurrence
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= EPS * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Gauss-Hermite nodes matched to each Gaussian; best for smooth
    /// integrands (single layers near the delay of interest).
    GaussHermite,
    /// Uniform nodes over `+-extent` standard deviations; robust for chirped
    /// responses and long delays.
    Trapezoid,
}

/// Tensor-product rule in the rotated `(u, v)` frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub rule: QuadratureRule,
    /// Nodes along `u` (width `Delta`).
    pub nodes_u: usize,
    /// Nodes along `v` (width `delta`).
    pub nodes_v: usize,
    /// Half-width of the trapezoid support in standard deviations.
    pub extent: f64,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self::gauss_hermite(64)
    }
}

const MIN_EXTENT: f64 = 6.0;

impl QuadratureGrid {
    pub fn gauss_hermite(n: usize) -> Self {
        Self {
            rule: QuadratureRule::GaussHermite,
            nodes_u: n,
            nodes_v: n,
            extent: 8.0,
        }
    }

    pub fn trapezoid(nodes_u: usize, nodes_v: usize, extent: f64) -> Self {
        Self {
            rule: QuadratureRule::Trapezoid,
            nodes_u,
            nodes_v,
            extent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_u < 2 || self.nodes_v < 2 {
            return Err(Error::invalid("grid", "need at least two nodes per axis"));
        }
        if !(self.extent >= MIN_EXTENT) {
            return Err(Error::invalid(
                "grid",
                format!("extent {} is below {MIN_EXTENT} standard deviations", self.extent),
            ));
        }
        Ok(())
    }

    /// Same rule with roughly twice the nodes per axis.
    pub fn refined(&self) -> Self {
        Self {
            nodes_u: 2 * self.nodes_u - 1,
            nodes_v: 2 * self.nodes_v - 1,
            ..*self
        }
    }

    /// Picks a rule for `sample` over the delays `tau`. The trapezoid step
    /// along each axis resolves the fastest oscillation of the integrand,
    /// set by the largest distance between a probe delay and a delay at
    /// which the sample reflects.
    pub fn automatic(src: &SpdcSource, sample: &Sample, tau: &[f64]) -> Result<Self> {
        let extent = 8.0;
        let s = max_delay_offset(src, sample, tau, extent)?;
        let (d, p) = (src.phasematch_std, src.pump_std.max(f64::MIN_POSITIVE));
        if matches!(sample, Sample::Layer(_)) && d * s <= 12.0 {
            return Ok(Self::default());
        }
        const MARGIN: f64 = 9.0;
        let count = |std: f64| {
            let h = 2.0 * std::f64::consts::PI / (s + MARGIN / std);
            let n = (2.0 * extent * std / h).ceil() as usize + 1;
            (n | 1).max(33)
        };
        Ok(Self::trapezoid(count(d), count(p), extent))
    }

    fn axis(&self, std: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        match self.rule {
            QuadratureRule::GaussHermite => {
                let (x, w) = gauss_hermite(n);
                let s2 = std::f64::consts::SQRT_2 * std;
                let norm = std::f64::consts::PI.sqrt();
                (
                    x.iter().map(|x| x * s2).collect(),
                    w.iter().map(|w| w / norm).collect(),
                )
            }
            QuadratureRule::Trapezoid => {
                let h = 2.0 * self.extent * std / (n - 1) as f64;
                let mid = 0.5 * (n - 1) as f64;
                let x: Vec<f64> = (0..n).map(|i| (i as f64 - mid) * h).collect();
                let last = n - 1;
                let w = x
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        let end = if i == 0 || i == last { 0.5 } else { 1.0 };
                        end * h * gauss(x, 0.0, std)
                    })
                    .collect();
                (x, w)
            }
        }
    }

    /// `(u, w_u, v, w_v)` with the Gaussian densities folded into the weights.
    pub fn rotated_nodes(&self, src: &SpdcSource) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.validate()?;
        if !(src.pump_std > 0.0) {
            return Err(Error::invalid(
                "pump_std",
                "quadrature needs a pump of nonzero width; use closed_form_terms for the monochromatic limit",
            ));
        }
        let (u, wu) = self.axis(src.phasematch_std, self.nodes_u);
        let (v, wv) = self.axis(src.pump_std, self.nodes_v);
        Ok((u, wu, v, wv))
    }

    /// Flattened `(nu1, nu2, weight)` over the tensor grid.
    pub fn frequency_nodes(&self, src: &SpdcSource) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (u, wu, v, wv) = self.rotated_nodes(src)?;
        let mut nu1 = Vec::with_capacity(u.len() * v.len());
        let mut nu2 = Vec::with_capacity(u.len() * v.len());
        let mut w = Vec::with_capacity(u.len() * v.len());
        for (vj, wvj) in v.iter().zip(&wv) {
            for (ui, wui) in u.iter().zip(&wu) {
                nu1.push(0.5 * (vj + ui));
                nu2.push(0.5 * (vj - ui));
                w.push(wui * wvj);
            }
        }
        Ok((nu1, nu2, w))
    }
}

fn max_delay_offset(src: &SpdcSource, sample: &Sample, tau: &[f64], extent: f64) -> Result<f64> {
    let half_band = 0.5 * extent * (src.phasematch_std + src.pump_std);
    let w0 = 0.5 * src.pump_center;
    let (lo, hi) = sample.delay_extent(w0 - half_band, w0 + half_band)?;
    let (tmin, tmax) = match (tau.first(), tau.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Ok(0.0),
    };
    Ok((tmax - lo).abs().max((tmin - hi).abs()).max((tmax - hi).abs()).max((tmin - lo).abs()))
}

/// Relative tolerance of the `M1 = M1'` symmetry check.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

struct Prepared {
    u: Vec<f64>,
    v: Vec<f64>,
    /// `w H1* (1 + |H2|^2)`, row-major in `v`.
    a1: Vec<Complex64>,
    /// `w H2* (1 + |H1|^2)`.
    a1p: Vec<Complex64>,
    /// `sum_j w (H1 H2)* / 2` per `v` node.
    b2: Vec<Complex64>,
    /// `sum_j w H1 H2* / 2` per `u` node.
    c0: Vec<Complex64>,
    mc: f64,
}

fn prepare(src: &SpdcSource, sample: &Sample, grid: &QuadratureGrid) -> Result<Prepared> {
    let (u, wu, v, wv) = grid.rotated_nodes(src)?;
    let w0 = 0.5 * src.pump_center;
    let (nu, nv) = (u.len(), v.len());
    let rows: Vec<Vec<(Complex64, Complex64)>> = v
        .par_iter()
        .map(|&vj| {
            u.iter()
                .map(|&ui| {
                    let h1 = sample.respond(w0 + 0.5 * (vj + ui))?;
                    let h2 = sample.respond(w0 + 0.5 * (vj - ui))?;
                    Ok((h1, h2))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut a1 = Vec::with_capacity(nu * nv);
    let mut a1p = Vec::with_capacity(nu * nv);
    let mut b2 = vec![Complex64::new(0.0, 0.0); nv];
    let mut c0 = vec![Complex64::new(0.0, 0.0); nu];
    let mut mc = 0.0;
    for (j, row) in rows.iter().enumerate() {
        for (i, &(h1, h2)) in row.iter().enumerate() {
            let w = wu[i] * wv[j];
            let (p1, p2) = (h1.norm_sqr(), h2.norm_sqr());
            a1.push(w * h1.conj() * (1.0 + p2));
            a1p.push(w * h2.conj() * (1.0 + p1));
            b2[j] += 0.5 * w * (h1 * h2).conj();
            c0[i] += 0.5 * w * h1 * h2.conj();
            mc += 0.25 * w * (1.0 + p1) * (1.0 + p2);
        }
    }
    Ok(Prepared {
        u,
        v,
        a1,
        a1p,
        b2,
        c0,
        mc,
    })
}

/// All interferogram terms by numerical quadrature over the pair spectrum.
///
/// `M1` and `M1'` are evaluated separately; a disagreement beyond
/// [`SYMMETRY_TOLERANCE`] (relative to the largest term) is reported as an
/// error. The returned `M1` is their mean.
pub fn quadrature_terms(
    src: &SpdcSource,
    sample: &Sample,
    tau: &[f64],
    grid: &QuadratureGrid,
) -> Result<InterferogramTerms> {
    check_grid(tau)?;
    let prep = prepare(src, sample, grid)?;
    let w0 = 0.5 * src.pump_center;
    let nu = prep.u.len();

    let per_point: Vec<(f64, Complex64, Complex64, Complex64)> = tau
        .par_iter()
        .map(|&t| {
            let eu: Vec<Complex64> = prep.u.iter().map(|u| Complex64::from_polar(1.0, 0.5 * u * t)).collect();
            let mut z1 = Complex64::new(0.0, 0.0);
            let mut z1p = Complex64::new(0.0, 0.0);
            let mut z2 = Complex64::new(0.0, 0.0);
            for (j, vj) in prep.v.iter().enumerate() {
                let row = &prep.a1[j * nu..(j + 1) * nu];
                let rowp = &prep.a1p[j * nu..(j + 1) * nu];
                let mut s1 = Complex64::new(0.0, 0.0);
                let mut s1p = Complex64::new(0.0, 0.0);
                for i in 0..nu {
                    s1 += eu[i] * row[i];
                    s1p += eu[i].conj() * rowp[i];
                }
                let ev = Complex64::from_polar(1.0, 0.5 * vj * t);
                z1 += ev * s1;
                z1p += ev * s1p;
                z2 += ev * ev * prep.b2[j];
            }
            let m0: f64 = eu
                .iter()
                .zip(&prep.c0)
                .map(|(e, c)| (e.conj() * e.conj() * c).re)
                .sum();
            let carrier = Complex64::from_polar(1.0, w0 * t);
            (m0, carrier * z1, carrier * z1p, carrier * carrier * z2)
        })
        .collect();

    let scale = prep
        .mc
        .max(per_point.iter().map(|p| p.1.re.abs()).fold(0.0, f64::max));
    let max_diff = per_point
        .iter()
        .map(|p| (p.1.re - p.2.re).abs())
        .fold(0.0, f64::max);
    if max_diff > SYMMETRY_TOLERANCE * scale {
        return Err(Error::SymmetryViolation {
            max_diff,
            tolerance: SYMMETRY_TOLERANCE,
        });
    }

    Ok(InterferogramTerms::from_analytic(
        tau.to_vec(),
        prep.mc,
        per_point.iter().map(|p| p.0).collect(),
        per_point.iter().map(|p| 0.5 * (p.1 + p.2)).collect(),
        per_point.iter().map(|p| p.3).collect(),
    ))
}

/// Two-photon outcome probabilities at one delay, computed directly from
/// the mode amplitudes rather than from the term decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProbabilities {
    /// Both photons in output `a`.
    pub aa: f64,
    /// One photon in each output.
    pub ab: f64,
    /// Both photons in output `b`.
    pub bb: f64,
    /// Pair norm surviving the sample, `< (|a1|^2+|b1|^2)(|a2|^2+|b2|^2) >`.
    pub total: f64,
}

pub fn outcome_probabilities(
    src: &SpdcSource,
    sample: &Sample,
    tau: f64,
    grid: &QuadratureGrid,
) -> Result<OutcomeProbabilities> {
    let (nu1, nu2, w) = grid.frequency_nodes(src)?;
    let w0 = 0.5 * src.pump_center;
    let mut out = OutcomeProbabilities {
        aa: 0.0,
        ab: 0.0,
        bb: 0.0,
        total: 0.0,
    };
    for k in 0..w.len() {
        let (o1, o2) = (w0 + nu1[k], w0 + nu2[k]);
        let (a1, b1) = alpha_beta(sample.respond(o1)?, o1, tau);
        let (a2, b2) = alpha_beta(sample.respond(o2)?, o2, tau);
        let (pa1, pb1, pa2, pb2) = (a1.norm_sqr(), b1.norm_sqr(), a2.norm_sqr(), b2.norm_sqr());
        out.aa += w[k] * pa1 * pa2;
        out.ab += 2.0 * w[k] * pa1 * pb2;
        out.bb += w[k] * pb1 * pb2;
        out.total += w[k] * (pa1 + pb1) * (pa2 + pb2);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::{closed_form_terms, compose, uniform_grid, Scheme};
    use crate::sample::{GapSample, SingleLayer};
    use crate::units::{thz_to_omega, wavelength_to_omega};

    fn src() -> SpdcSource {
        SpdcSource::new(wavelength_to_omega(656.5e-9), thz_to_omega(6.9e-3), thz_to_omega(8.7))
            .unwrap()
    }

    #[test]
    fn hermite_moments() {
        let (x, w) = gauss_hermite(64);
        let norm = std::f64::consts::PI.sqrt();
        let m0: f64 = w.iter().sum::<f64>() / norm;
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| 2.0 * x * x * w).sum::<f64>() / norm;
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| 4.0 * x.powi(4) * w).sum::<f64>() / norm;
        assert!((m0 - 1.0).abs() < 1e-14);
        assert!((m2 - 1.0).abs() < 1e-13);
        assert!((m4 - 3.0).abs() < 1e-12);
        for a in [0.5, 2.0, 5.0, 8.0] {
            let c: f64 = x
                .iter()
                .zip(&w)
                .map(|(x, w)| w * (a * std::f64::consts::SQRT_2 * x).cos())
                .sum::<f64>()
                / norm;
            assert!((c - (-a * a / 2.0f64).exp()).abs() < 1e-13, "a={a}: {c}");
        }
    }

    #[test]
    fn hermite_small_orders() {
        let (x, w) = gauss_hermite(3);
        let r = (1.5f64).sqrt();
        assert!((x[0] - r).abs() < 1e-14 && x[1].abs() < 1e-15 && (x[2] + r).abs() < 1e-14);
        let sp = std::f64::consts::PI.sqrt();
        assert!((w[1] - 2.0 * sp / 3.0).abs() < 1e-14);
        assert!((w[0] - sp / 6.0).abs() < 1e-14);
    }

    #[test]
    fn blocked_sample() {
        let s = Sample::from(SingleLayer::new(0.0, 0.0).unwrap());
        let tau = uniform_grid(-5e-14, 5e-14, 21);
        let t = quadrature_terms(&src(), &s, &tau, &QuadratureGrid::default()).unwrap();
        assert!((t.mc - 0.25).abs() < 1e-14);
        assert!(t.m0.iter().chain(&t.m1).chain(&t.m2).all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn hom_integrand_is_half_for_mirror_at_zero() {
        // K0 integrand Re[e1* e2 H1 H2*]/2 with H = 1 and tau = 0
        let s = Sample::from(SingleLayer::mirror(0.0));
        let grid = QuadratureGrid::gauss_hermite(8);
        let (nu1, nu2, _) = grid.frequency_nodes(&src()).unwrap();
        let w0 = 0.5 * src().pump_center;
        for k in 0..nu1.len() {
            let h1 = s.respond(w0 + nu1[k]).unwrap();
            let h2 = s.respond(w0 + nu2[k]).unwrap();
            assert!((0.5 * (h1 * h2.conj()).re - 0.5).abs() < 1e-15);
        }
        let t = quadrature_terms(&src(), &s, &[0.0], &grid).unwrap();
        assert!((t.m0[0] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn matches_closed_form_for_single_layer() {
        let s = src();
        let tau = uniform_grid(-60e-15, 60e-15, 301);
        for (r, tk) in [(0.3, -3.0), (0.7, 0.0), (1.0, 2.0)] {
            let layer = Sample::from(SingleLayer::new(r, tk / s.phasematch_std).unwrap());
            let q = quadrature_terms(&s, &layer, &tau, &QuadratureGrid::default()).unwrap();
            let c = closed_form_terms(&s, &layer, &tau).unwrap();
            assert!((q.mc - c.mc).abs() <= 1e-12 * c.mc);
            for k in 0..tau.len() {
                for (a, b) in [(q.m0[k], c.m0[k]), (q.m1[k], c.m1[k]), (q.m2[k], c.m2[k])] {
                    assert!((a - b).abs() / c.mc <= 1e-6, "r={r} k={k}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn trapezoid_agrees_with_hermite() {
        let s = src();
        let layer = Sample::from(SingleLayer::new(0.6, 10e-15).unwrap());
        let tau = uniform_grid(-30e-15, 50e-15, 81);
        let gh = quadrature_terms(&s, &layer, &tau, &QuadratureGrid::default()).unwrap();
        let tr = quadrature_terms(&s, &layer, &tau, &QuadratureGrid::trapezoid(161, 41, 9.0)).unwrap();
        for k in 0..tau.len() {
            assert!((gh.m1[k] - tr.m1[k]).abs() < 1e-10);
            assert!((gh.m0[k] - tr.m0[k]).abs() < 1e-10);
            assert!((gh.m2[k] - tr.m2[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn probabilities_conserve_pair_norm_and_match_composition() {
        let s = src();
        let grid = QuadratureGrid::gauss_hermite(24);
        let samples: Vec<Sample> = vec![
            SingleLayer::mirror(3e-15).into(),
            SingleLayer::new(0.4, -5e-15).unwrap().into(),
            GapSample::lossless(0.55, 0.55, 4e-6, 0.0).unwrap().into(),
        ];
        for sample in &samples {
            for t in [-10e-15, 0.0, 2e-15, 7e-15] {
                let p = outcome_probabilities(&s, sample, t, &grid).unwrap();
                assert!((p.aa + p.ab + p.bb - p.total).abs() < 1e-6);
                let terms = quadrature_terms(&s, sample, &[t], &grid).unwrap();
                assert!((p.total - terms.mc).abs() < 1e-12);
                assert!((compose(&terms, Scheme::Auto).values[0] - p.bb).abs() < 1e-12);
                assert!((compose(&terms, Scheme::Cross).values[0] - p.ab).abs() < 1e-12);
            }
        }
        let p = outcome_probabilities(&s, &samples[0], 0.0, &grid).unwrap();
        assert!((p.total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monochromatic_pump_rejected() {
        let s = SpdcSource::new(1e15, 0.0, 1e13).unwrap();
        let layer = Sample::from(SingleLayer::mirror(0.0));
        assert!(quadrature_terms(&s, &layer, &[0.0], &QuadratureGrid::default()).is_err());
    }

    #[test]
    fn refinement_is_stable() {
        let s = src();
        let layer = Sample::from(SingleLayer::new(0.8, 0.0).unwrap());
        let tau = uniform_grid(-40e-15, 40e-15, 41);
        let a = quadrature_terms(&s, &layer, &tau, &QuadratureGrid::default()).unwrap();
        let b = quadrature_terms(&s, &layer, &tau, &QuadratureGrid::default().refined()).unwrap();
        for k in 0..tau.len() {
            for (x, y) in [(a.m0[k], b.m0[k]), (a.m1[k], b.m1[k]), (a.m2[k], b.m2[k])] {
                assert!((x - y).abs() <= 1e-8 * a.mc);
            }
        }
    }

    #[test]
    fn gap_sample_dips_at_both_interfaces() {
        let s = src();
        let gap = GapSample::lossless(0.55, 0.55, 60e-6, 0.0).unwrap();
        let sample = Sample::from(gap);
        let tau = uniform_grid(-40e-15, 4.4e-13, 481);
        let grid = QuadratureGrid::automatic(&s, &sample, &tau).unwrap();
        assert_eq!(grid.rule, QuadratureRule::Trapezoid);
        let t = quadrature_terms(&s, &sample, &tau, &grid).unwrap();
        let at = |x: f64| {
            let k = tau.iter().position(|&v| v >= x).unwrap();
            t.m0[k]
        };
        // direct reflection at 0, first echo at 2 gap / c
        let echo = gap.echo_delay();
        assert!(at(0.0) > 0.1);
        assert!(at(echo) > 0.05);
        assert!(at(0.25 * echo).abs() < 1e-6);
    }
}
