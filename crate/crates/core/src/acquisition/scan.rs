//! Mirror scans and photon counting.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Channel, RateTrace};
use crate::error::{Error, Result};
use crate::units::{delay_to_mirror, mirror_to_delay};

/// How the reference mirror moves. Lengths are mirror displacements (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanMode {
    /// Piezo steps with a fixed exposure at each stop.
    Step { step_size: f64, exposure: f64 },
    /// Constant velocity with counts binned over `bin_width`.
    Continuous { velocity: f64, bin_width: f64 },
}

impl ScanMode {
    pub fn default_step() -> Self {
        ScanMode::Step {
            step_size: 70e-9,
            exposure: 0.1,
        }
    }

    pub fn default_continuous() -> Self {
        ScanMode::Continuous {
            velocity: 16.7e-9,
            bin_width: 300e-9,
        }
    }
}

/// A scan over the delay span `[start, end]` (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    pub mode: ScanMode,
    pub start: f64,
    pub end: f64,
}

impl ScanPlan {
    pub fn new(mode: ScanMode, start: f64, end: f64) -> Result<Self> {
        let plan = Self { mode, start, end };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite() && self.end > self.start) {
            return Err(Error::invalid("span", "needs start < end"));
        }
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        match self.mode {
            ScanMode::Step { step_size, exposure } => {
                positive("step_size", step_size)?;
                positive("exposure", exposure)
            }
            ScanMode::Continuous { velocity, bin_width } => {
                positive("velocity", velocity)?;
                positive("bin_width", bin_width)?;
                if mirror_to_delay(bin_width) > self.end - self.start {
                    return Err(Error::invalid("bin_width", "wider than the scan span"));
                }
                Ok(())
            }
        }
    }

    /// Delay spacing between acquisition points.
    pub fn delay_step(&self) -> f64 {
        match self.mode {
            ScanMode::Step { step_size, .. } => mirror_to_delay(step_size),
            ScanMode::Continuous { bin_width, .. } => mirror_to_delay(bin_width),
        }
    }

    pub fn exposure(&self) -> f64 {
        match self.mode {
            ScanMode::Step { exposure, .. } => exposure,
            ScanMode::Continuous { velocity, bin_width } => bin_width / velocity,
        }
    }

    fn count(&self) -> usize {
        let h = self.delay_step();
        let span = self.end - self.start;
        let slack = 1e-9;
        match self.mode {
            ScanMode::Step { .. } => (span / h + slack).floor() as usize + 1,
            ScanMode::Continuous { .. } => (span / h + slack).floor() as usize,
        }
    }

    /// Bin edges `[a, b)` in delay; a step scan has zero-width bins.
    pub fn bins(&self) -> Vec<(f64, f64)> {
        let h = self.delay_step();
        (0..self.count())
            .map(|k| {
                let a = self.start + k as f64 * h;
                match self.mode {
                    ScanMode::Step { .. } => (a, a),
                    ScanMode::Continuous { .. } => (a, a + h),
                }
            })
            .collect()
    }

    /// Delay assigned to each acquisition point (bin centres).
    pub fn positions(&self) -> Vec<f64> {
        self.bins().iter().map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Delay grid on which rates should be evaluated: the positions for a
    /// step scan, `oversample` points per bin for a continuous one.
    pub fn rate_grid(&self, oversample: usize) -> Vec<f64> {
        match self.mode {
            ScanMode::Step { .. } => self.positions(),
            ScanMode::Continuous { .. } => {
                let m = oversample.max(2);
                let n = self.count() * m;
                let h = self.delay_step() / m as f64;
                (0..=n).map(|k| self.start + k as f64 * h).collect()
            }
        }
    }
}

/// Integer counts recorded along a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredTrace {
    /// Delay of each point (s).
    pub tau: Vec<f64>,
    pub counts: Vec<u64>,
    /// Exposure of each point (s).
    pub exposure: Vec<f64>,
    pub channel: Channel,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    position_um: f64,
    counts: u64,
    exposure_s: f64,
    channel: String,
}

impl MeasuredTrace {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Counts per second.
    pub fn rates(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.exposure)
            .map(|(c, e)| *c as f64 / e)
            .collect()
    }

    /// Mirror displacement of each point (um).
    pub fn position_um(&self) -> Vec<f64> {
        self.tau.iter().map(|t| delay_to_mirror(*t) * 1e6).collect()
    }

    /// `position_um,counts,exposure_s,channel`.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (k, x) in self.position_um().iter().enumerate() {
            w.serialize(CsvRow {
                position_um: *x,
                counts: self.counts[k],
                exposure_s: self.exposure[k],
                channel: self.channel.to_string(),
            })
            .map_err(|e| Error::Parse(format!("csv: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(format!("csv: {e}")))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        let expected = ["position_um", "counts", "exposure_s", "channel"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse(format!(
                "measured trace header must be `{}`",
                expected.join(",")
            )));
        }
        let mut out = MeasuredTrace {
            tau: Vec::new(),
            counts: Vec::new(),
            exposure: Vec::new(),
            channel: Channel::Cross,
        };
        let mut channel: Option<Channel> = None;
        for (line, row) in r.deserialize::<CsvRow>().enumerate() {
            let row = row.map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))?;
            let c: Channel = row.channel.parse()?;
            if channel.is_some_and(|p| p != c) {
                return Err(Error::Parse(format!("row {}: mixed channels in one trace", line + 2)));
            }
            if !(row.exposure_s > 0.0) {
                return Err(Error::Parse(format!("row {}: exposure must be positive", line + 2)));
            }
            channel = Some(c);
            out.tau.push(mirror_to_delay(row.position_um * 1e-6));
            out.counts.push(row.counts);
            out.exposure.push(row.exposure_s);
        }
        out.channel = channel.ok_or_else(|| Error::Parse("trace has no rows".into()))?;
        Ok(out)
    }
}

fn interp(tau: &[f64], v: &[f64], x: f64) -> f64 {
    let k = tau.partition_point(|t| *t <= x);
    if k == 0 {
        v[0]
    } else if k == tau.len() {
        v[v.len() - 1]
    } else {
        let w = (x - tau[k - 1]) / (tau[k] - tau[k - 1]);
        v[k - 1] + w * (v[k] - v[k - 1])
    }
}

/// Mean of the piecewise-linear interpolant of `v` over `[a, b]`.
fn interval_mean(tau: &[f64], v: &[f64], a: f64, b: f64) -> f64 {
    if b <= a {
        return interp(tau, v, a);
    }
    let lo = tau.partition_point(|t| *t <= a);
    let hi = tau.partition_point(|t| *t < b);
    let mut xs = Vec::with_capacity(hi.saturating_sub(lo) + 2);
    xs.push(a);
    xs.extend_from_slice(&tau[lo..hi.max(lo)]);
    xs.push(b);
    let mut total = 0.0;
    for w in xs.windows(2) {
        total += 0.5 * (w[1] - w[0]) * (interp(tau, v, w[0]) + interp(tau, v, w[1]));
    }
    total / (b - a)
}

fn check_scan(rates: &RateTrace, plan: &ScanPlan) -> Result<()> {
    plan.validate()?;
    let (tau, v) = (&rates.tau, &rates.rates);
    if tau.len() != v.len() {
        return Err(Error::invalid("rates", "grid and values differ in length"));
    }
    if tau.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: tau.len() });
    }
    if let Some(k) = v.iter().position(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(Error::invalid("rates", format!("negative or non-finite rate at index {k}")));
    }
    let (g0, g1) = (tau[0], tau[tau.len() - 1]);
    let slack = 1e-9 * (plan.end - plan.start);
    let bins = plan.bins();
    let (first, last) = match (bins.first(), bins.last()) {
        (Some(a), Some(b)) => (a.0, b.1),
        _ => return Err(Error::invalid("plan", "scan has no acquisition points")),
    };
    if first < g0 - slack || last > g1 + slack {
        return Err(Error::SpanMismatch {
            start: plan.start,
            end: plan.end,
            grid_start: g0,
            grid_end: g1,
        });
    }
    if let ScanMode::Continuous { .. } = plan.mode {
        let coarsest = tau.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        if coarsest > 0.25 * plan.delay_step() {
            log::warn!("rate grid is coarse compared with the bin width; bin averages may be inaccurate");
        }
    }
    Ok(())
}

/// Mean rate in every bin of `plan`: what the counts divided by the
/// exposure converge to.
pub fn expected_rates(rates: &RateTrace, plan: &ScanPlan) -> Result<Vec<f64>> {
    check_scan(rates, plan)?;
    Ok(plan
        .bins()
        .iter()
        .map(|&(a, b)| interval_mean(&rates.tau, &rates.rates, a, b))
        .collect())
}

/// Poisson counts of `rates` along `plan`. Each point draws from its own
/// random stream derived from `seed`, so results do not depend on thread
/// scheduling.
pub fn simulate_scan(rates: &RateTrace, plan: &ScanPlan, seed: u64) -> Result<MeasuredTrace> {
    check_scan(rates, plan)?;
    let (tau, v) = (&rates.tau, &rates.rates);
    let bins = plan.bins();
    let exposure = plan.exposure();
    let salt = rates.channel.salt() << 40;
    let counts = bins
        .par_iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let mean = interval_mean(tau, v, a, b) * exposure;
            if mean <= 0.0 {
                return 0;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(salt + k as u64);
            // a positive finite mean always builds a valid distribution
            Poisson::new(mean).map(|p| p.sample(&mut rng) as u64).unwrap_or(0)
        })
        .collect();
    Ok(MeasuredTrace {
        tau: bins.iter().map(|(a, b)| 0.5 * (a + b)).collect(),
        counts,
        exposure: vec![exposure; bins.len()],
        channel: rates.channel,
    })
}
