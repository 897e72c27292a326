//! Repeated scans of the same interferograms, as in a measurement made of
//! several runs.

use super::{detection_rates, simulate_scan, single_rates, Channel, NoiseModel, Run, RunSet, ScanPlan};
use crate::error::{Error, Result};
use crate::interferometer::{Interferogram, Scheme};

/// Seed of run `index`, spread so neighbouring runs share no streams.
pub fn run_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// `runs` independent scans of the singles and of every coincidence
/// interferogram. All interferograms must share the rate grid.
pub fn acquire_runs(
    coincidences: &[(Scheme, &Interferogram)],
    single_b: &Interferogram,
    exit_probability: f64,
    noise: &NoiseModel,
    plan: &ScanPlan,
    runs: usize,
) -> Result<RunSet> {
    if runs == 0 {
        return Err(Error::invalid("runs", "need at least one run"));
    }
    if coincidences.iter().any(|(_, i)| i.tau != single_b.tau) {
        return Err(Error::invalid("interferograms", "coincidence and single grids differ"));
    }
    let singles = single_rates(single_b, exit_probability, noise)?;
    let coinc = coincidences
        .iter()
        .map(|(s, i)| detection_rates(i, *s, noise))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(runs);
    for r in 0..runs {
        let seed = run_seed(noise.seed, r);
        let s = [
            simulate_scan(&singles[0], plan, seed)?,
            simulate_scan(&singles[1], plan, seed)?,
            simulate_scan(&singles[2], plan, seed)?,
        ];
        let c = coinc
            .iter()
            .map(|t| simulate_scan(t, plan, seed))
            .collect::<Result<Vec<_>>>()?;
        out.push(Run {
            singles: s,
            coincidences: c,
        });
    }
    RunSet::new(out)
}

/// Convenience lookup of a coincidence channel in a run.
pub fn coincidence(run: &Run, channel: Channel) -> Option<&super::MeasuredTrace> {
    run.coincidences.iter().find(|t| t.channel == channel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::{uniform_grid, InterferogramKind, InterferogramMeta};
    use crate::acquisition::{normalize_runs, ScanMode};

    fn ifg(kind: InterferogramKind, v: f64) -> Interferogram {
        Interferogram {
            tau: uniform_grid(0.0, 1e-12, 201),
            values: vec![v; 201],
            kind,
            meta: InterferogramMeta::default(),
        }
    }

    #[test]
    fn runs_differ_but_repeat() {
        let cross = ifg(InterferogramKind::Cross, 0.5);
        let single = ifg(InterferogramKind::Single, 0.5);
        let noise = NoiseModel {
            pair_rate: 1e5,
            seed: 9,
            ..Default::default()
        };
        let plan = ScanPlan::new(
            ScanMode::Step {
                step_size: 1e-6,
                exposure: 0.1,
            },
            0.0,
            1e-12,
        )
        .unwrap();
        let a = acquire_runs(&[(Scheme::Cross, &cross)], &single, 1.0, &noise, &plan, 3).unwrap();
        let b = acquire_runs(&[(Scheme::Cross, &cross)], &single, 1.0, &noise, &plan, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.runs[0].coincidences[0].counts, a.runs[1].coincidences[0].counts);
        assert!(coincidence(&a.runs[0], Channel::Cross).is_some());
        assert!(coincidence(&a.runs[0], Channel::Auto).is_none());
        let n = normalize_runs(&a).unwrap();
        assert!((n.kappa2 - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_runs_rejected() {
        let cross = ifg(InterferogramKind::Cross, 0.5);
        let single = ifg(InterferogramKind::Single, 0.5);
        let plan = ScanPlan::new(ScanMode::default_step(), 0.0, 1e-13).unwrap();
        assert!(acquire_runs(&[(Scheme::Cross, &cross)], &single, 1.0, &NoiseModel::default(), &plan, 0).is_err());
    }
}
