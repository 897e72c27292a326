//! From ideal interferograms to measured counts: detector wiring and
//! efficiencies, the auto-scheme splitting loss, accidental coincidences,
//! path jitter, scanning with Poisson shot noise, and run normalisation.
//!
//! Detector wiring: output `a` of the interferometer is routed to `D1`,
//! output `b` to a 50/50 splitter feeding `D2` and `D3`. The auto scheme
//! counts `D2`-`D3` coincidences, the cross scheme sums `D1`-`D2` and
//! `D1`-`D3`.

mod campaign;
mod jitter;
mod normalize;
mod scan;

pub use campaign::{acquire_runs, coincidence, run_seed};
pub use jitter::{
    apply_phase_jitter, average_phase_jitter, coherence_factor, delay_errors, PhaseJitter,
};
pub use normalize::{normalize_runs, NormalizedRuns, Run, RunSet};
pub use scan::{expected_rates, simulate_scan, MeasuredTrace, ScanMode, ScanPlan};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interferometer::{Interferogram, InterferogramKind, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    D1,
    D2,
    D3,
}

impl Detector {
    pub const ALL: [Detector; 3] = [Detector::D1, Detector::D2, Detector::D3];

    pub fn index(self) -> usize {
        match self {
            Detector::D1 => 0,
            Detector::D2 => 1,
            Detector::D3 => 2,
        }
    }
}

/// What a trace counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Single counts of one detector.
    D1,
    D2,
    D3,
    /// Single counts of output `b`, `D2 + D3`.
    SingleB,
    Auto,
    Cross,
}

impl Channel {
    pub fn of_detector(d: Detector) -> Self {
        match d {
            Detector::D1 => Channel::D1,
            Detector::D2 => Channel::D2,
            Detector::D3 => Channel::D3,
        }
    }

    pub fn of_scheme(s: Scheme) -> Self {
        match s {
            Scheme::Auto => Channel::Auto,
            Scheme::Cross => Channel::Cross,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::D1 => "d1",
            Channel::D2 => "d2",
            Channel::D3 => "d3",
            Channel::SingleB => "single_b",
            Channel::Auto => "auto",
            Channel::Cross => "cross",
        }
    }

    /// Stream offset used to decorrelate the shot noise of channels
    /// simulated from one seed.
    pub(crate) fn salt(self) -> u64 {
        match self {
            Channel::D1 => 1,
            Channel::D2 => 2,
            Channel::D3 => 3,
            Channel::SingleB => 4,
            Channel::Auto => 5,
            Channel::Cross => 6,
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "d1" => Channel::D1,
            "d2" => Channel::D2,
            "d3" => Channel::D3,
            "single_b" => Channel::SingleB,
            "auto" => Channel::Auto,
            "cross" => Channel::Cross,
            other => return Err(Error::Parse(format!("unknown channel `{other}`"))),
        })
    }
}

/// Detection and noise parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// RMS optical-path fluctuation per acquisition point (m).
    pub path_jitter_std: f64,
    /// Correlation length of the path fluctuation along the scan, as an
    /// optical path (m). Zero draws every point independently.
    pub jitter_correlation: f64,
    /// Pair generation rate (pairs/s); a calibration scale.
    pub pair_rate: f64,
    /// Efficiencies of D1, D2, D3.
    pub efficiency: [f64; 3],
    /// Dark count rates of D1, D2, D3 (counts/s).
    pub dark_rate: [f64; 3],
    /// Coincidence window for accidentals (s).
    pub coincidence_window: f64,
    /// Mean photons per pair leaving each interferometer output, used only
    /// for the accidental floor. A perfect mirror sample gives 1.
    pub photons_per_output: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            path_jitter_std: 0.0,
            jitter_correlation: 0.0,
            pair_rate: 1.0,
            efficiency: [1.0; 3],
            dark_rate: [0.0; 3],
            coincidence_window: 1e-9,
            photons_per_output: 1.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")))
            }
        };
        nonneg("path_jitter_std", self.path_jitter_std)?;
        nonneg("jitter_correlation", self.jitter_correlation)?;
        nonneg("pair_rate", self.pair_rate)?;
        nonneg("coincidence_window", self.coincidence_window)?;
        nonneg("photons_per_output", self.photons_per_output)?;
        for e in self.efficiency {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::invalid("efficiency", format!("must lie in [0, 1], got {e}")));
            }
        }
        for d in self.dark_rate {
            nonneg("dark_rate", d)?;
        }
        Ok(())
    }

    pub fn jitter(&self) -> PhaseJitter {
        PhaseJitter {
            path_std: self.path_jitter_std,
            correlation: self.jitter_correlation,
        }
    }

    fn eta(&self, d: Detector) -> f64 {
        self.efficiency[d.index()]
    }

    /// Flat single rate of a detector used for accidentals.
    fn background_single(&self, d: Detector) -> f64 {
        let share = if d == Detector::D1 { 1.0 } else { 0.5 };
        self.dark_rate[d.index()] + self.pair_rate * self.eta(d) * self.photons_per_output * share
    }

    /// Accidental coincidence rate of a scheme.
    pub fn accidental_rate(&self, scheme: Scheme) -> f64 {
        let s = |d| self.background_single(d);
        self.coincidence_window
            * match scheme {
                Scheme::Auto => s(Detector::D2) * s(Detector::D3),
                Scheme::Cross => s(Detector::D1) * (s(Detector::D2) + s(Detector::D3)),
            }
    }

    /// Fraction of pairs registered as a coincidence in `scheme`, given
    /// the pair ends up in the outputs the scheme looks at.
    pub fn pair_efficiency(&self, scheme: Scheme) -> f64 {
        match scheme {
            // both photons in `b`: the splitter separates them half the time
            Scheme::Auto => 0.5 * self.eta(Detector::D2) * self.eta(Detector::D3),
            Scheme::Cross => {
                self.eta(Detector::D1) * 0.5 * (self.eta(Detector::D2) + self.eta(Detector::D3))
            }
        }
    }
}

/// Expected counts per second over a delay grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTrace {
    pub tau: Vec<f64>,
    pub rates: Vec<f64>,
    pub channel: Channel,
}

/// Coincidence rates of a composed interferogram (probabilities per pair).
pub fn detection_rates(ifg: &Interferogram, scheme: Scheme, noise: &NoiseModel) -> Result<RateTrace> {
    noise.validate()?;
    let expected: InterferogramKind = scheme.into();
    if ifg.kind != expected {
        return Err(Error::SchemeMismatch {
            expected: expected.to_string(),
            found: ifg.kind.to_string(),
        });
    }
    let gain = noise.pair_rate * noise.pair_efficiency(scheme);
    let floor = noise.accidental_rate(scheme);
    Ok(RateTrace {
        tau: ifg.tau.clone(),
        rates: ifg.values.iter().map(|p| gain * p + floor).collect(),
        channel: Channel::of_scheme(scheme),
    })
}

/// Single-count rates of D1, D2, D3 from the single-photon interferogram
/// of output `b`. `exit_probability` is the flat total probability that a
/// photon leaves the interferometer at all, `(1 + <|H|^2>) / 2`.
pub fn single_rates(single_b: &Interferogram, exit_probability: f64, noise: &NoiseModel) -> Result<[RateTrace; 3]> {
    noise.validate()?;
    if single_b.kind != InterferogramKind::Single {
        return Err(Error::SchemeMismatch {
            expected: InterferogramKind::Single.to_string(),
            found: single_b.kind.to_string(),
        });
    }
    if !(0.0..=1.0).contains(&exit_probability) {
        return Err(Error::invalid("exit_probability", "must lie in [0, 1]"));
    }
    let photons = 2.0 * noise.pair_rate;
    let trace = |d: Detector| {
        let eta = noise.eta(d);
        let dark = noise.dark_rate[d.index()];
        let rates = single_b
            .values
            .iter()
            .map(|m| {
                let p = match d {
                    Detector::D1 => (exit_probability - m).max(0.0),
                    _ => 0.5 * m,
                };
                photons * eta * p + dark
            })
            .collect();
        RateTrace {
            tau: single_b.tau.clone(),
            rates,
            channel: Channel::of_detector(d),
        }
    };
    Ok([trace(Detector::D1), trace(Detector::D2), trace(Detector::D3)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::{closed_form_terms, compose, InterferogramMeta};
    use crate::sample::SingleLayer;
    use crate::spectra::SpdcSource;
    use crate::units::{thz_to_omega, wavelength_to_omega};

    fn ifg(kind: InterferogramKind, values: Vec<f64>) -> Interferogram {
        Interferogram {
            tau: (0..values.len()).map(|k| k as f64 * 1e-15).collect(),
            values,
            kind,
            meta: InterferogramMeta::default(),
        }
    }

    #[test]
    fn unit_gains_return_probability() {
        let noise = NoiseModel {
            coincidence_window: 0.0,
            ..Default::default()
        };
        let p = vec![0.1, 0.3, 0.2];
        let r = detection_rates(&ifg(InterferogramKind::Cross, p.clone()), Scheme::Cross, &noise).unwrap();
        assert_eq!(r.rates, p);
    }

    #[test]
    fn dark_counts_alone_give_flat_floor() {
        let noise = NoiseModel {
            pair_rate: 0.0,
            dark_rate: [500.0, 300.0, 200.0],
            ..Default::default()
        };
        let r = detection_rates(&ifg(InterferogramKind::Auto, vec![0.1, 0.9, 0.4]), Scheme::Auto, &noise).unwrap();
        let expected = 1e-9 * 300.0 * 200.0;
        assert!(r.rates.iter().all(|v| (v - expected).abs() < 1e-18));
    }

    #[test]
    fn scheme_mismatch_rejected() {
        let r = detection_rates(&ifg(InterferogramKind::Auto, vec![0.1]), Scheme::Cross, &NoiseModel::default());
        assert!(matches!(r, Err(Error::SchemeMismatch { .. })));
    }

    #[test]
    fn bad_efficiency_rejected() {
        let noise = NoiseModel {
            efficiency: [1.2, 1.0, 1.0],
            ..Default::default()
        };
        assert!(noise.validate().is_err());
    }

    #[test]
    fn measured_modulation_ratio_is_four() {
        let src = SpdcSource::new(wavelength_to_omega(656.5e-9), thz_to_omega(6.9e-3), thz_to_omega(8.7)).unwrap();
        // far from the carriers only the HOM term modulates
        let tau: Vec<f64> = vec![0.0, 1e-9];
        let mut t = closed_form_terms(&src, &SingleLayer::mirror(0.0).into(), &tau).unwrap();
        t.m1 = vec![0.0; 2];
        t.m2 = vec![0.0; 2];
        let noise = NoiseModel {
            efficiency: [0.7, 0.7, 0.7],
            coincidence_window: 0.0,
            ..Default::default()
        };
        let depth = |s| {
            let r = detection_rates(&compose(&t, s), s, &noise).unwrap();
            (r.rates[0] - r.rates[1]).abs()
        };
        assert!((depth(Scheme::Cross) / depth(Scheme::Auto) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn singles_complement_between_outputs() {
        let noise = NoiseModel::default();
        let s = ifg(InterferogramKind::Single, vec![0.0, 0.5, 1.0]);
        let [d1, d2, d3] = single_rates(&s, 1.0, &noise).unwrap();
        for k in 0..3 {
            assert!((d1.rates[k] + d2.rates[k] + d3.rates[k] - 2.0).abs() < 1e-15);
        }
    }
}
