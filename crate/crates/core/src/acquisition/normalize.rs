//! Brightness normalisation across repeated runs.
//!
//! Singles of the two outputs fringe in antiphase, so a weighted sum
//! `R1 + k2 R2 + k3 R3` with `<R1> = 2 k2 <R2> = 2 k3 <R3>` is free of
//! interference and follows only the source brightness. Every trace is
//! divided by that sum relative to its mean.

use serde::{Deserialize, Serialize};

use super::{Channel, MeasuredTrace};
use crate::error::{Error, Result};

/// One scan: singles of D1, D2, D3 and any coincidence traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub singles: [MeasuredTrace; 3],
    pub coincidences: Vec<MeasuredTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSet {
    pub runs: Vec<Run>,
}

impl RunSet {
    pub fn new(runs: Vec<Run>) -> Result<Self> {
        let set = Self { runs };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .runs
            .first()
            .ok_or_else(|| Error::invalid("runs", "need at least one run"))?;
        let grid = &first.singles[0].tau;
        let channels: Vec<Channel> = first.coincidences.iter().map(|t| t.channel).collect();
        for (i, run) in self.runs.iter().enumerate() {
            for t in run.singles.iter().chain(&run.coincidences) {
                if &t.tau != grid {
                    return Err(Error::invalid("runs", format!("run {i} is on a different grid")));
                }
                if t.exposure.len() != t.tau.len() || t.counts.len() != t.tau.len() {
                    return Err(Error::invalid("runs", format!("run {i} has ragged columns")));
                }
            }
            let expected = [Channel::D1, Channel::D2, Channel::D3];
            if run.singles.iter().map(|t| t.channel).ne(expected) {
                return Err(Error::invalid("runs", format!("run {i}: singles must be d1, d2, d3")));
            }
            if run.coincidences.iter().map(|t| t.channel).ne(channels.iter().copied()) {
                return Err(Error::invalid("runs", format!("run {i} has different coincidence channels")));
            }
        }
        Ok(())
    }

    pub fn tau(&self) -> &[f64] {
        &self.runs[0].singles[0].tau
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRuns {
    pub tau: Vec<f64>,
    pub kappa2: f64,
    pub kappa3: f64,
    /// `R_norm` of every run.
    pub norm: Vec<Vec<f64>>,
    /// Normalised single rates of every run, D1..D3.
    pub singles: Vec<[Vec<f64>; 3]>,
    /// Normalised coincidence rates of every run, in input order.
    pub coincidences: Vec<Vec<Vec<f64>>>,
    pub channels: Vec<Channel>,
}

impl NormalizedRuns {
    /// Run-averaged normalised coincidence rate of one channel.
    pub fn mean_coincidence(&self, channel: Channel) -> Option<Vec<f64>> {
        let idx = self.channels.iter().position(|c| *c == channel)?;
        let n = self.tau.len();
        let k = self.coincidences.len() as f64;
        Some(
            (0..n)
                .map(|i| self.coincidences.iter().map(|r| r[idx][i]).sum::<f64>() / k)
                .collect(),
        )
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Normalises all runs with `k2`, `k3` and the mean of `R_norm` taken over
/// every run, so both drift within a run and differences between runs are
/// removed.
pub fn normalize_runs(set: &RunSet) -> Result<NormalizedRuns> {
    set.validate()?;
    let rates: Vec<[Vec<f64>; 3]> = set
        .runs
        .iter()
        .map(|r| [r.singles[0].rates(), r.singles[1].rates(), r.singles[2].rates()])
        .collect();
    let pooled = |d: usize| mean(&rates.iter().flat_map(|r| r[d].iter().copied()).collect::<Vec<_>>());
    let (m1, m2, m3) = (pooled(0), pooled(1), pooled(2));
    for (name, m) in [("R1", m1), ("R2", m2), ("R3", m3)] {
        if !(m > 0.0) {
            return Err(Error::Degenerate(format!("detector channel {name} has zero mean rate")));
        }
    }
    let kappa2 = m1 / (2.0 * m2);
    let kappa3 = m1 / (2.0 * m3);
    let sums: Vec<Vec<f64>> = rates
        .iter()
        .map(|r| (0..r[0].len()).map(|i| r[0][i] + kappa2 * r[1][i] + kappa3 * r[2][i]).collect())
        .collect();
    let overall = mean(&sums.iter().flatten().copied().collect::<Vec<_>>());
    let norm: Vec<Vec<f64>> = sums
        .iter()
        .map(|s| s.iter().map(|v| v / overall).collect())
        .collect();
    let divide = |v: Vec<f64>, n: &[f64]| -> Vec<f64> { v.iter().zip(n).map(|(a, b)| a / b).collect() };
    let singles = rates
        .into_iter()
        .zip(&norm)
        .map(|([a, b, c], n)| [divide(a, n), divide(b, n), divide(c, n)])
        .collect();
    let coincidences = set
        .runs
        .iter()
        .zip(&norm)
        .map(|(r, n)| r.coincidences.iter().map(|t| divide(t.rates(), n)).collect())
        .collect();
    Ok(NormalizedRuns {
        tau: set.tau().to_vec(),
        kappa2,
        kappa3,
        norm,
        singles,
        coincidences,
        channels: set.runs[0].coincidences.iter().map(|t| t.channel).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(channel: Channel, rates: &[f64]) -> MeasuredTrace {
        MeasuredTrace {
            tau: (0..rates.len()).map(|k| k as f64 * 1e-15).collect(),
            // exposure 1 s so counts equal rates
            counts: rates.iter().map(|r| r.round() as u64).collect(),
            exposure: vec![1.0; rates.len()],
            channel,
        }
    }

    fn run(brightness: impl Fn(usize) -> f64, n: usize) -> Run {
        // fringes in antiphase between the outputs
        let fringe = |i: usize| (2.0 * std::f64::consts::PI * (10 * i) as f64 / n as f64).cos();
        let r1: Vec<f64> = (0..n).map(|i| brightness(i) * 1e5 * (1.0 + 0.5 * fringe(i))).collect();
        let r2: Vec<f64> = (0..n).map(|i| brightness(i) * 2.5e4 * (1.0 - 0.5 * fringe(i))).collect();
        let r3: Vec<f64> = (0..n).map(|i| brightness(i) * 5e4 * (1.0 - 0.5 * fringe(i))).collect();
        let cc: Vec<f64> = (0..n).map(|i| brightness(i) * 1e4).collect();
        Run {
            singles: [trace(Channel::D1, &r1), trace(Channel::D2, &r2), trace(Channel::D3, &r3)],
            coincidences: vec![trace(Channel::Cross, &cc)],
        }
    }

    #[test]
    fn kappa_from_definition() {
        let set = RunSet::new(vec![Run {
            singles: [
                trace(Channel::D1, &[100.0; 4]),
                trace(Channel::D2, &[25.0; 4]),
                trace(Channel::D3, &[50.0; 4]),
            ],
            coincidences: vec![],
        }])
        .unwrap();
        let n = normalize_runs(&set).unwrap();
        assert_eq!(n.kappa2, 2.0);
        assert_eq!(n.kappa3, 1.0);
    }

    #[test]
    fn constant_brightness_is_untouched() {
        let set = RunSet::new(vec![run(|_| 1.0, 200)]).unwrap();
        let n = normalize_runs(&set).unwrap();
        assert!(n.norm[0].iter().all(|v| (v - 1.0).abs() < 1e-4));
    }

    #[test]
    fn linear_drift_is_removed() {
        let n_pts = 400;
        let drift = |i: usize| 1.0 + 0.1 * i as f64 / (n_pts - 1) as f64;
        let set = RunSet::new(vec![run(drift, n_pts), run(|_| 1.05, n_pts)]).unwrap();
        let n = normalize_runs(&set).unwrap();
        for r in &n.coincidences {
            let c = &r[0];
            let m = mean(c);
            let worst = c.iter().map(|v| (v / m - 1.0).abs()).fold(0.0, f64::max);
            assert!(worst < 0.01, "{worst}");
        }
    }

    #[test]
    fn dead_channel_rejected() {
        let set = RunSet::new(vec![Run {
            singles: [
                trace(Channel::D1, &[100.0; 4]),
                trace(Channel::D2, &[0.0; 4]),
                trace(Channel::D3, &[50.0; 4]),
            ],
            coincidences: vec![],
        }])
        .unwrap();
        assert!(matches!(normalize_runs(&set), Err(Error::Degenerate(_))));
    }

    #[test]
    fn mismatched_grids_rejected() {
        let mut b = run(|_| 1.0, 10);
        b.singles[1].tau[3] += 1e-16;
        assert!(RunSet::new(vec![run(|_| 1.0, 10), b]).is_err());
    }
}
