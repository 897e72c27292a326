use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use qoct_core::acquisition::run_seed;
use qoct_core::dsp::{
    dft_magnitude, fit_gaussian_feature, fit_sinc_envelope, fit_two_gaussian_spectrum, lowpass_extract,
    mean_power_spectrum, nyquist, uniform_step, GaussianFeature, SpectrumTrace, TWO_GAUSSIAN_WINDOW,
};
use qoct_core::interferometer::{Interferogram, InterferogramKind, InterferogramMeta};
use qoct_core::io::{
    interferogram_csv, interferogram_from_csv, read_run_set, spectrum_csv, table_csv, write_run_set, OutputDir,
    INTERFEROGRAM_COLUMNS, SPECTRUM_COLUMNS, SPECTRUM_CONVENTION,
};
use qoct_core::reconstruct::{
    approximate_physical, extract_gap, fit_reconstruction, refit_fixed_amplitudes, PhysicalApproximation,
    Reconstruction,
};
use qoct_core::sample::{broadening_factors, Material};
use qoct_core::spectra::{fit_gaussian, TabulatedSpectrum};
use qoct_core::units::{delay_to_mirror, sigma_to_fwhm, SPEED_OF_LIGHT};

use crate::config::Scenario;
use crate::error::{CliError, CliResult};
use crate::sim;

/// Approximation residuals above this fraction of the amplitude norm mean
/// the physical model does not describe the trace; the free fit is kept.
const APPROXIMATION_TOLERANCE: f64 = 0.1;

/// Width (units of `omega_p`) of the running mean applied to a single
/// trace's power spectrum before fitting. Path noise turns the carrier
/// peaks of one realisation into speckle; the fits want their envelope.
const SPECTRAL_SMOOTHING: f64 = 0.03;

fn smooth_power(power: &SpectrumTrace, width: f64) -> SpectrumTrace {
    let half = (0.5 * width / power.bin_width()).round() as usize;
    let n = power.magnitude.len();
    let magnitude = (0..n)
        .map(|k| {
            let (a, b) = (k.saturating_sub(half), (k + half + 1).min(n));
            power.magnitude[a..b].iter().sum::<f64>() / (b - a) as f64
        })
        .collect();
    SpectrumTrace {
        magnitude,
        ..power.clone()
    }
}

#[derive(Serialize)]
struct Series<'a> {
    file: &'a str,
    x: &'a str,
    y: &'a str,
    label: &'a str,
}

/// Renderer-neutral description of what to draw from which CSV columns.
#[derive(Serialize)]
struct PlotSpec<'a> {
    title: &'a str,
    series: Vec<Series<'a>>,
}

fn plot<'a>(title: &'a str, series: &[(&'a str, &'a str, &'a str, &'a str)]) -> PlotSpec<'a> {
    PlotSpec {
        title,
        series: series
            .iter()
            .map(|(file, x, y, label)| Series { file, x, y, label })
            .collect(),
    }
}

fn write_interferogram(out: &mut OutputDir, name: &str, ifg: &Interferogram, quantity: &str) -> CliResult<()> {
    out.write_with_sidecar(
        name,
        interferogram_csv(ifg).as_bytes(),
        &INTERFEROGRAM_COLUMNS,
        "delay_um is the mirror displacement c tau / 2",
        json!({ "kind": ifg.kind, "quantity": quantity, "points": ifg.values.len() }),
    )?;
    Ok(())
}

fn mirror_um(tau: &[f64]) -> Vec<f64> {
    tau.iter().map(|t| delay_to_mirror(*t) * 1e6).collect()
}

fn finish(command: &str, out: OutputDir) -> CliResult<()> {
    let root = out.root().to_path_buf();
    let manifest = out.finish()?;
    println!("{command}: wrote {} files to {}", manifest.files.len() + 1, root.display());
    Ok(())
}

pub fn simulate(sc: &Scenario, seed: u64, out: &Path) -> CliResult<()> {
    let s = sim::simulate(sc, seed)?;
    let mut dir = OutputDir::create(out, "simulate", Some(seed))?;
    dir.write_json(
        "scenario.json",
        &json!({ "seed": seed, "scenario": sc, "noise": s.noise, "plan": s.plan }),
    )?;
    write_interferogram(&mut dir, "ideal_auto.csv", &s.ideal[0], "coincidence probability per pair")?;
    write_interferogram(&mut dir, "ideal_cross.csv", &s.ideal[1], "coincidence probability per pair")?;
    write_interferogram(&mut dir, "ideal_single.csv", &s.single, "probability per photon of reaching output b")?;
    write_run_set(&mut dir, "runs", &s.runs)?;
    let positions = s.plan.positions();
    for kind in [InterferogramKind::Single, InterferogramKind::Auto, InterferogramKind::Cross] {
        let ifg = Interferogram {
            tau: positions.clone(),
            values: s.measured(kind)?,
            kind,
            meta: InterferogramMeta::default(),
        };
        write_interferogram(
            &mut dir,
            &format!("measured_{kind}.csv"),
            &ifg,
            "run-averaged normalised rate (counts/s)",
        )?;
    }
    dir.write_json(
        "plot.json",
        &plot(
            &sc.name,
            &[
                ("measured_single.csv", "delay_um", "value", "single counts D2 + D3"),
                ("measured_auto.csv", "delay_um", "value", "auto-correlation coincidences"),
                ("measured_cross.csv", "delay_um", "value", "cross-correlation coincidences"),
            ],
        ),
    )?;
    finish("simulate", dir)
}

/// An interferogram CSV, or a run directory averaged into one trace.
fn load_trace(input: &Path, kind: InterferogramKind) -> CliResult<Interferogram> {
    if input.is_dir() {
        let runs = read_run_set(input)?;
        return Ok(Interferogram {
            tau: runs.tau().to_vec(),
            values: sim::measured(&runs, kind)?,
            kind,
            meta: InterferogramMeta::default(),
        });
    }
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", input.display())))?;
    interferogram_from_csv(&text).map_err(|e| CliError::config(format!("{}: {e}", input.display())))
}

fn feature_summary(f: &GaussianFeature) -> serde_json::Value {
    json!({
        "center_um": f.center,
        "center_uncertainty_um": f.center_uncertainty,
        "fwhm_um": f.fwhm,
        "fwhm_uncertainty_um": f.fwhm_uncertainty,
        "amplitude": f.amplitude,
        "offset": f.offset,
        "sign": f.sign,
    })
}

pub fn analyze(
    sc: &Scenario,
    input: &Path,
    kind: Option<InterferogramKind>,
    cutoff: f64,
    seed: u64,
    out: &Path,
) -> CliResult<()> {
    let ifg = load_trace(input, kind.unwrap_or(sc.analysis.scheme.into()))?;
    if ifg.values.len() < 16 {
        return Err(CliError::config(format!(
            "{}: need at least 16 samples, got {}",
            input.display(),
            ifg.values.len()
        )));
    }
    let dtau = uniform_step(&ifg.tau)?;
    let wp = sc.source.pump_center;
    let ny = nyquist(dtau, wp);
    if !(cutoff > 0.0 && cutoff < ny) {
        return Err(CliError::config(format!(
            "cutoff {cutoff} omega_p must lie in (0, {ny:.4}), the Nyquist frequency of this trace"
        )));
    }
    let x = mirror_um(&ifg.tau);
    let mut dir = OutputDir::create(out, "analyze", Some(seed))?;

    let spectrum = dft_magnitude(&ifg.values, dtau, wp)?;
    dir.write_with_sidecar(
        "spectrum.csv",
        spectrum_csv(&spectrum).as_bytes(),
        &SPECTRUM_COLUMNS,
        SPECTRUM_CONVENTION,
        json!({ "kind": ifg.kind, "omega_p_rad_s": wp }),
    )?;
    let power = smooth_power(
        &mean_power_spectrum(std::slice::from_ref(&ifg.values), dtau, wp)?,
        SPECTRAL_SMOOTHING,
    );
    let mut report = json!({
        "input": input.display().to_string(),
        "kind": ifg.kind,
        "points": ifg.values.len(),
        "delay_step_s": dtau,
        "nyquist_omega_p": ny,
        "cutoff_omega_p": cutoff,
        "spectral_smoothing_omega_p": SPECTRAL_SMOOTHING,
    });
    let mut series = vec![("spectrum.csv", "omega_over_omega_p", "magnitude", "spectrum magnitude")];

    if ifg.kind == InterferogramKind::Single {
        let env = fit_sinc_envelope(&x, &ifg.values)?;
        report["envelope"] = json!({
            "fwhm_um": env.fwhm,
            "fwhm_uncertainty_um": env.fwhm_uncertainty,
            "center_um": env.center,
        });
        report["spectral_fit"] = if ny >= 0.95 {
            let (w, p): (Vec<f64>, Vec<f64>) = power
                .omega
                .iter()
                .zip(&power.magnitude)
                .filter(|(w, _)| **w >= 0.05 && **w <= 0.95)
                .map(|(w, p)| (*w, *p))
                .unzip();
            let g = fit_gaussian_feature(&w, &p)?;
            json!({ "center_omega_p": g.center, "sigma_omega_p": g.sigma, "fwhm_omega_p": g.fwhm })
        } else {
            json!({ "skipped": format!("spectrum ends at {ny:.3} omega_p, below the carrier band") })
        };
    } else {
        let hom = lowpass_extract(&ifg.values, dtau, wp, cutoff)?;
        let filtered = Interferogram {
            tau: ifg.tau.clone(),
            values: hom,
            kind: ifg.kind,
            meta: InterferogramMeta::default(),
        };
        write_interferogram(&mut dir, "hom.csv", &filtered, "low-pass filtered trace")?;
        let f = fit_gaussian_feature(&x, &filtered.values)?;
        report["hom"] = feature_summary(&f);
        series.push(("hom.csv", "delay_um", "value", "low-pass filtered"));
        report["spectral_fit"] = if ny >= TWO_GAUSSIAN_WINDOW.1 {
            let t = fit_two_gaussian_spectrum(&power, None)?;
            json!({
                "a1": t.a1, "a1_uncertainty": t.a1_uncertainty,
                "a2": t.a2, "a2_uncertainty": t.a2_uncertainty,
                "sigma1_omega_p": t.sigma1, "sigma2_omega_p": t.sigma2,
                "a1_over_a2": t.a1 / t.a2,
                "sigma2_over_sigma1": t.sigma2 / t.sigma1,
                "domain": "smoothed power spectrum",
            })
        } else {
            json!({ "skipped": format!("spectrum ends at {ny:.3} omega_p, below the carrier band") })
        };
    }
    dir.write_json("report.json", &report)?;
    dir.write_json("plot.json", &plot("analysis", &series))?;
    finish("analyze", dir)
}

pub fn dispersion(
    sc: &Scenario,
    material: Option<&str>,
    thickness_mm: Option<f64>,
    points: Option<usize>,
    out: &Path,
) -> CliResult<()> {
    let name = material.unwrap_or(&sc.dispersion.material);
    let mat = Material::named(name)?;
    let thickness = match thickness_mm {
        Some(t) if !(t >= 0.0 && t.is_finite()) => {
            return Err(CliError::config(format!("--thickness-mm must be >= 0, got {t}")))
        }
        Some(t) => t * 1e-3,
        None => sc.dispersion.thickness,
    };
    let points = points.unwrap_or(sc.dispersion.points);
    if points < 2 {
        return Err(CliError::config("--points needs at least 2"));
    }
    let report = broadening_factors(&sc.source, &mat, thickness)?;
    let mut dir = OutputDir::create(out, "dispersion", None)?;
    dir.write_json(
        "report.json",
        &json!({
            "material": name,
            "thickness_mm": thickness * 1e3,
            "pump_wavelength_nm": sc.source.pump_wavelength() * 1e9,
            "single_photon_broadening": report.alpha1,
            "hom_broadening": report.alpha0,
            "report": report,
        }),
    )?;
    let rows = (0..points)
        .map(|k| {
            let t = thickness * k as f64 / (points - 1) as f64;
            let r = broadening_factors(&sc.source, &mat, t)?;
            Ok(vec![t * 1e3, r.alpha0, r.alpha1])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let columns = ["thickness_mm", "alpha0", "alpha1"];
    dir.write_with_sidecar(
        "sweep.csv",
        table_csv(&columns, &rows).as_bytes(),
        &columns,
        "alpha0: HOM dip broadening, alpha1: single-photon envelope broadening",
        json!({ "material": name }),
    )?;
    dir.write_json(
        "plot.json",
        &plot(
            "dispersion broadening",
            &[
                ("sweep.csv", "thickness_mm", "alpha1", "single-photon envelope"),
                ("sweep.csv", "thickness_mm", "alpha0", "HOM dip"),
            ],
        ),
    )?;
    finish("dispersion", dir)
}

#[derive(Serialize)]
struct GapEstimate {
    gap_um: f64,
    gap_uncertainty_um: f64,
    method: &'static str,
    note: String,
}

struct Solved {
    free: Reconstruction,
    approx: Option<PhysicalApproximation>,
    refit: Option<Reconstruction>,
    estimate: GapEstimate,
}

fn solve(x: &[f64], y: &[f64]) -> CliResult<Solved> {
    let free = fit_reconstruction(x, y, None)?;
    let (d_free, u_free) = extract_gap(&free)?;
    let norm = free.fit.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
    let approx = approximate_physical(&free.fit.amplitudes).ok();
    let mut estimate = GapEstimate {
        gap_um: d_free,
        gap_uncertainty_um: u_free,
        method: "free_fit",
        note: String::new(),
    };
    let mut refit = None;
    match &approx {
        None => estimate.note = "amplitudes admit no physical approximation".into(),
        Some(a) if a.residual_norm > APPROXIMATION_TOLERANCE * norm => {
            estimate.note = format!(
                "approximation residual {:.3} exceeds {APPROXIMATION_TOLERANCE} of the amplitude norm {norm:.3}",
                a.residual_norm
            )
        }
        Some(a) => {
            let r = refit_fixed_amplitudes(x, y, &free.fit, &a.predicted)?;
            match extract_gap(&r) {
                Ok((d, u)) => {
                    estimate = GapEstimate {
                        gap_um: d,
                        gap_uncertainty_um: u,
                        method: "amplitude_refit",
                        note: String::new(),
                    };
                }
                Err(e) => estimate.note = format!("refit with fixed amplitudes unusable: {e}"),
            }
            refit = Some(r);
        }
    }
    Ok(Solved {
        free,
        approx,
        refit,
        estimate,
    })
}

fn recon_summary(r: &Reconstruction) -> serde_json::Value {
    let u = &r.result.uncertainties;
    json!({
        "amplitudes": r.fit.amplitudes,
        "amplitude_uncertainties": &u[1..6],
        "sigma_um": r.fit.sigma,
        "x1_um": r.fit.x1,
        "d_um": r.fit.d,
        "d_uncertainty_um": u[8],
        "feature_centers_um": r.fit.centers(),
        "d_identifiable": r.d_identifiable,
        "amplitudes_fixed": r.amplitudes_fixed,
        "residual_norm": r.result.residual_norm,
    })
}

fn trace_for_reconstruction(sc: Option<&Scenario>, trace: Option<&Path>, seed: u64) -> CliResult<(Vec<f64>, Vec<f64>)> {
    match (trace, sc) {
        (Some(p), _) => {
            let kind = sc.map_or(InterferogramKind::Cross, |s| s.analysis.scheme.into());
            let ifg = load_trace(p, kind)?;
            Ok((mirror_um(&ifg.tau), ifg.values))
        }
        (None, Some(sc)) => {
            let s = sim::simulate(sc, seed)?;
            Ok((mirror_um(&s.plan.positions()), s.measured(sc.analysis.scheme.into())?))
        }
        (None, None) => Err(CliError::config("reconstruct needs --trace or a scenario (--preset or --config)")),
    }
}

pub fn reconstruct(
    sc: Option<&Scenario>,
    trace: Option<&Path>,
    sweep: usize,
    seed: u64,
    out: &Path,
) -> CliResult<()> {
    if sweep > 0 && trace.is_some() {
        return Err(CliError::config("--sweep simulates new data and cannot be combined with --trace"));
    }
    let (x, y) = trace_for_reconstruction(sc, trace, seed)?;
    let solved = solve(&x, &y)?;
    let mut dir = OutputDir::create(out, "reconstruct", Some(seed))?;

    let best = solved.refit.as_ref().filter(|_| solved.estimate.method == "amplitude_refit").unwrap_or(&solved.free);
    let rows: Vec<Vec<f64>> = x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| vec![*xi, *yi, solved.free.fit.value_at(*xi), best.fit.value_at(*xi)])
        .collect();
    let columns = ["delay_um", "data", "free_fit", "final_fit"];
    dir.write_with_sidecar(
        "fit.csv",
        table_csv(&columns, &rows).as_bytes(),
        &columns,
        "five Gaussian features at x1 + j d / 2 on a linear baseline",
        json!({}),
    )?;

    let mut report = json!({
        "estimate": solved.estimate,
        "free_fit": recon_summary(&solved.free),
        "refit": solved.refit.as_ref().map(recon_summary),
        "approximation": solved.approx.as_ref().map(|a| json!({
            "model": a.model,
            "predicted": a.predicted,
            "residuals": a.residuals,
            "residual_norm": a.residual_norm,
        })),
    });

    if sweep > 0 {
        let sc = sc.expect("checked above");
        let mut rows = Vec::new();
        let mut failures = Vec::new();
        for i in 0..sweep {
            let s = run_seed(seed, i + 1);
            let (x, y) = trace_for_reconstruction(Some(sc), None, s)?;
            match solve(&x, &y) {
                Ok(r) => rows.push(vec![i as f64, s as f64, r.estimate.gap_um, r.estimate.gap_uncertainty_um]),
                Err(e) => failures.push(format!("seed {s}: {e}")),
            }
        }
        if rows.is_empty() {
            return Err(CliError::Numerical(format!("every sweep member failed: {}", failures.join("; "))));
        }
        let columns = ["index", "seed", "gap_um", "uncertainty_um"];
        dir.write_with_sidecar(
            "gap_sweep.csv",
            table_csv(&columns, &rows).as_bytes(),
            &columns,
            "",
            json!({ "base_seed": seed }),
        )?;
        let d: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        let u: Vec<f64> = rows.iter().map(|r| r[3]).collect();
        let hist = histogram(&d);
        let hcols = ["lower_um", "upper_um", "count"];
        dir.write_with_sidecar(
            "gap_histogram.csv",
            table_csv(&hcols, &hist).as_bytes(),
            &hcols,
            "",
            json!({ "members": d.len() }),
        )?;
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let spread = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        report["sweep"] = json!({
            "members": d.len(),
            "failures": failures,
            "mean_gap_um": mean,
            "std_gap_um": spread,
            "mean_reported_uncertainty_um": u.iter().sum::<f64>() / n,
        });
    }
    dir.write_json("reconstruction.json", &report)?;
    dir.write_json(
        "plot.json",
        &plot(
            "gap reconstruction",
            &[
                ("fit.csv", "delay_um", "data", "data"),
                ("fit.csv", "delay_um", "final_fit", "fit"),
            ],
        ),
    )?;
    println!(
        "gap {:.3} +- {:.3} um ({})",
        solved.estimate.gap_um, solved.estimate.gap_uncertainty_um, solved.estimate.method
    );
    finish("reconstruct", dir)
}

/// `ceil(sqrt(n))` equal bins spanning the data.
fn histogram(v: &[f64]) -> Vec<Vec<f64>> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bins = ((v.len() as f64).sqrt().ceil() as usize).max(1);
    if hi <= lo {
        return vec![vec![lo, hi, v.len() as f64]];
    }
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in v {
        counts[(((x - lo) / w) as usize).min(bins - 1)] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(k, c)| vec![lo + k as f64 * w, lo + (k + 1) as f64 * w, *c as f64])
        .collect()
}

pub fn spectrum_fit(sc: &Scenario, input: Option<&Path>, out: &Path) -> CliResult<()> {
    let path = input
        .map(Path::to_path_buf)
        .or_else(|| sc.spectrum_path.clone())
        .ok_or_else(|| CliError::config("no spectrum: pass --input or set source.spectrum_path"))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let spec =
        TabulatedSpectrum::from_csv_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let fit = fit_gaussian(&spec)?;
    let g = fit.spectrum;
    let wavelength = 2.0 * PI * SPEED_OF_LIGHT / g.center;
    let fwhm = sigma_to_fwhm(g.std);
    let marginal = sc.source.marginal();
    let mut dir = OutputDir::create(out, "spectrum-fit", None)?;
    dir.write_json(
        "report.json",
        &json!({
            "input": path.display().to_string(),
            "center_rad_s": g.center,
            "std_rad_s": g.std,
            "center_wavelength_nm": wavelength * 1e9,
            "fwhm_thz": fwhm / (2.0 * PI) / 1e12,
            "fwhm_nm": wavelength * wavelength * fwhm / (2.0 * PI * SPEED_OF_LIGHT) * 1e9,
            "amplitude": fit.amplitude,
            "residual_norm": fit.residual_norm,
            "source_marginal_std_rad_s": marginal.std,
            "std_over_source_marginal": g.std / marginal.std,
        }),
    )?;
    let rows: Vec<Vec<f64>> = spec
        .omega
        .iter()
        .zip(&spec.density)
        .map(|(w, d)| vec![*w, *d, fit.amplitude * g.pdf(*w)])
        .collect();
    let columns = ["omega_rad_s", "density", "model"];
    dir.write_with_sidecar(
        "fit.csv",
        table_csv(&columns, &rows).as_bytes(),
        &columns,
        "model = amplitude * Gaussian density",
        json!({}),
    )?;
    dir.write_json(
        "plot.json",
        &plot(
            "spectrum fit",
            &[
                ("fit.csv", "omega_rad_s", "density", "measured"),
                ("fit.csv", "omega_rad_s", "model", "Gaussian fit"),
            ],
        ),
    )?;
    finish("spectrum-fit", dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_everything() {
        let v: Vec<f64> = (0..50).map(|k| (k as f64 * 0.37).sin()).collect();
        let h = histogram(&v);
        assert_eq!(h.len(), 8);
        assert_eq!(h.iter().map(|r| r[2]).sum::<f64>(), 50.0);
        assert_eq!(histogram(&[1.0, 1.0]), vec![vec![1.0, 1.0, 2.0]]);
    }
}
