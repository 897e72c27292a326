//! The measurement a scenario describes: ideal interferograms on the rate
//! grid, then repeated noisy scans.

use qoct_core::acquisition::{
    acquire_runs, apply_phase_jitter, average_phase_jitter, coherence_factor, delay_errors, normalize_runs,
    run_seed, Channel, NoiseModel, RunSet, ScanPlan,
};
use qoct_core::interferometer::{
    closed_form_terms, compose, quadrature_terms, single_photon_terms, Interferogram, InterferogramTerms,
    InterferogramKind, PhotonSpectrum, QuadratureGrid, Scheme, SingleTerms,
};
use qoct_core::sample::Sample;

use crate::config::{Engine, JitterMode, Scenario};
use crate::error::{CliError, CliResult};

pub struct Simulation {
    pub plan: ScanPlan,
    /// Jitter-free coincidence probabilities per pair, auto then cross.
    pub ideal: [Interferogram; 2],
    /// Jitter-free probability per photon of reaching output `b`.
    pub single: Interferogram,
    /// Noise model with the pair rate and output occupation resolved.
    pub noise: NoiseModel,
    pub runs: RunSet,
}

impl Simulation {
    /// Run-averaged normalised rates at the scan positions.
    pub fn measured(&self, kind: InterferogramKind) -> CliResult<Vec<f64>> {
        measured(&self.runs, kind)
    }
}

/// Run-averaged normalised trace of one kind; singles are `D2 + D3`.
pub fn measured(runs: &RunSet, kind: InterferogramKind) -> CliResult<Vec<f64>> {
    let norm = normalize_runs(runs)?;
    let channel = match kind {
        InterferogramKind::Single => None,
        InterferogramKind::Auto => Some(Channel::Auto),
        InterferogramKind::Cross => Some(Channel::Cross),
    };
    match channel {
        None => {
            let k = norm.singles.len() as f64;
            Ok((0..norm.tau.len())
                .map(|i| norm.singles.iter().map(|s| s[1][i] + s[2][i]).sum::<f64>() / k)
                .collect())
        }
        Some(c) => norm
            .mean_coincidence(c)
            .ok_or_else(|| CliError::config(format!("the runs hold no {} channel", c.name()))),
    }
}

pub fn scenario_parts(sc: &Scenario) -> CliResult<(&Sample, &crate::config::ScanSpec)> {
    let sample = sc
        .sample
        .as_ref()
        .ok_or_else(|| CliError::config(format!("scenario `{}` has no [sample] section", sc.name)))?;
    let scan = sc
        .scan
        .as_ref()
        .ok_or_else(|| CliError::config(format!("scenario `{}` has no [scan] section", sc.name)))?;
    Ok((sample, scan))
}

fn terms(sc: &Scenario, sample: &Sample, grid: &[f64]) -> CliResult<InterferogramTerms> {
    let closed = match sc.analysis.engine {
        Engine::ClosedForm => true,
        Engine::Quadrature => false,
        Engine::Auto => matches!(sample, Sample::Layer(_)),
    };
    Ok(if closed {
        closed_form_terms(&sc.source, sample, grid)?
    } else {
        let q = QuadratureGrid::automatic(&sc.source, sample, grid)?;
        quadrature_terms(&sc.source, sample, grid, &q)?
    })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

pub fn simulate(sc: &Scenario, seed: u64) -> CliResult<Simulation> {
    let (sample, scan) = scenario_parts(sc)?;
    let plan = scan.plan;
    let grid = plan.rate_grid(scan.oversample);
    let wp = sc.source.pump_center;
    let ideal_terms = terms(sc, sample, &grid)?;
    let spectrum: PhotonSpectrum = match &sc.spectrum {
        Some(t) => t.clone().into(),
        None => sc.source.marginal().into(),
    };
    let single: SingleTerms = single_photon_terms(&spectrum, sample, &grid)?;
    let exit = 2.0 * single.constant;

    let mut noise = sc.noise.model.clone();
    noise.photons_per_output = 0.5 * exit;
    let ideal_cross = compose(&ideal_terms, Scheme::Cross);
    if let Some(target) = sc.noise.cross_baseline {
        let level = median(&ideal_cross.values) * noise.pair_efficiency(Scheme::Cross);
        if !(level > 0.0) {
            return Err(CliError::config(
                "cross_baseline_cps: the sample returns no coincidences to scale to".to_string(),
            ));
        }
        noise.pair_rate = target / level;
    }

    let jitter = noise.jitter();
    let averaged = match sc.noise.jitter_mode {
        JitterMode::Averaged => Some((
            average_phase_jitter(&ideal_terms, wp, &jitter)?,
            single.with_carrier_scale(coherence_factor(single.center, &jitter)),
        )),
        JitterMode::PerPoint => None,
    };

    let mut runs = Vec::with_capacity(sc.noise.runs);
    for r in 0..sc.noise.runs {
        let s = run_seed(seed, r);
        let (t, single_r) = match &averaged {
            Some((t, single_r)) => (t.clone(), single_r.clone()),
            None => (
                apply_phase_jitter(&ideal_terms, wp, &jitter, s)?,
                single.with_delay_errors(&delay_errors(&grid, &jitter, s)?)?,
            ),
        };
        let auto = compose(&t, Scheme::Auto);
        let cross = compose(&t, Scheme::Cross);
        let run_noise = NoiseModel { seed: s, ..noise.clone() };
        let set = acquire_runs(
            &[(Scheme::Auto, &auto), (Scheme::Cross, &cross)],
            &single_r.into_interferogram(),
            exit,
            &run_noise,
            &plan,
            1,
        )?;
        runs.extend(set.runs);
    }
    noise.seed = seed;
    Ok(Simulation {
        plan,
        ideal: [compose(&ideal_terms, Scheme::Auto), ideal_cross],
        single: single.into_interferogram(),
        noise,
        runs: RunSet::new(runs)?,
    })
}
