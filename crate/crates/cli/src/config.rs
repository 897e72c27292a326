//! Scenario files. Every dimensional number names its unit in the key
//! (`gap_um = 110.67`); a bare number is only accepted for the quantities
//! listed in [`DIMENSIONLESS`].

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Serialize;
use toml_edit::{Document, Item, Table, Value};

use qoct_core::acquisition::{NoiseModel, ScanMode, ScanPlan};
use qoct_core::interferometer::Scheme;
use qoct_core::sample::{DispersiveSlab, GapSample, Material, Sample, SingleLayer};
use qoct_core::spectra::{SpdcSource, TabulatedSpectrum};
use qoct_core::units::{fwhm_to_sigma, mirror_to_delay, wavelength_to_omega};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Length,
    Frequency,
    Time,
    Rate,
    Velocity,
    /// Angular frequency in units of the pump frequency.
    PumpUnits,
}

/// Key suffix, quantity and factor to SI. Frequencies are ordinary
/// frequencies and become angular ones here. Longer suffixes come first.
const UNITS: &[(&str, Quantity, f64)] = &[
    ("_nm_per_s", Quantity::Velocity, 1e-9),
    ("_um_per_s", Quantity::Velocity, 1e-6),
    ("_nm", Quantity::Length, 1e-9),
    ("_um", Quantity::Length, 1e-6),
    ("_mm", Quantity::Length, 1e-3),
    ("_m", Quantity::Length, 1.0),
    ("_thz", Quantity::Frequency, 2.0 * PI * 1e12),
    ("_ghz", Quantity::Frequency, 2.0 * PI * 1e9),
    ("_fs", Quantity::Time, 1e-15),
    ("_ns", Quantity::Time, 1e-9),
    ("_ms", Quantity::Time, 1e-3),
    ("_s", Quantity::Time, 1.0),
    ("_kcps", Quantity::Rate, 1e3),
    ("_cps", Quantity::Rate, 1.0),
    ("_wp", Quantity::PumpUnits, 1.0),
];

/// Keys whose values are pure numbers.
pub const DIMENSIONLESS: &[&str] = &[
    "seed",
    "runs",
    "oversample",
    "echo_count",
    "reflectance",
    "r1",
    "r2",
    "t1",
    "efficiency",
    "points",
];

fn unit_of(key: &str) -> Option<(&'static str, Quantity, f64)> {
    UNITS.iter().copied().find(|(s, _, _)| key.len() > s.len() && key.ends_with(s))
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn is_numeric(v: &Value) -> bool {
    match v {
        Value::Integer(_) | Value::Float(_) => true,
        Value::Array(a) => a.iter().any(is_numeric),
        _ => false,
    }
}

/// Rejects numbers whose key carries no unit and is not dimensionless.
fn check_units(table: &Table, prefix: &str, text: &str) -> CliResult<()> {
    for (key, item) in table.iter() {
        let name = if prefix.is_empty() { key.to_string() } else { format!("{prefix}.{key}") };
        match item {
            Item::Value(v) if is_numeric(v) => {
                if unit_of(key).is_none() && !DIMENSIONLESS.contains(&key) {
                    let line = table.key(key).and_then(|k| k.span()).map_or(0, |s| line_at(text, s.start));
                    let suffixes: Vec<&str> = UNITS.iter().map(|u| u.0).collect();
                    return Err(CliError::config(format!(
                        "line {line}: `{name}` is a number without a unit suffix; use one of {}",
                        suffixes.join(", ")
                    )));
                }
            }
            Item::Table(t) => check_units(t, &name, text)?,
            _ => {}
        }
    }
    Ok(())
}

/// Typed access to one table, remembering which keys were read so the rest
/// can be reported as unknown.
pub struct Section<'a> {
    path: String,
    table: &'a Table,
    text: &'a str,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Section<'a> {
    fn new(path: &str, table: &'a Table, text: &'a str) -> Self {
        Self {
            path: path.to_string(),
            table,
            text,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    fn line(&self, key: &str) -> usize {
        self.table
            .key(key)
            .and_then(|k| k.span())
            .or_else(|| self.table.span())
            .map_or(0, |s| line_at(self.text, s.start))
    }

    fn qualified(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    pub fn error(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::config(format!("line {}: `{}`: {msg}", self.line(key), self.qualified(key)))
    }

    fn value(&self, key: &str) -> CliResult<Option<&'a Value>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Item::Value(v)) => {
                self.used.borrow_mut().insert(key.to_string());
                Ok(Some(v))
            }
            Some(_) => Err(self.error(key, "expected a value, found a table")),
        }
    }

    fn as_number(&self, key: &str, v: &Value) -> CliResult<f64> {
        match v {
            Value::Float(f) => Ok(*f.value()),
            Value::Integer(i) => Ok(*i.value() as f64),
            _ => Err(self.error(key, "expected a number")),
        }
    }

    pub fn plain(&self, key: &str) -> CliResult<Option<f64>> {
        self.value(key)?.map(|v| self.as_number(key, v)).transpose()
    }

    pub fn integer(&self, key: &str) -> CliResult<Option<u64>> {
        match self.value(key)? {
            None => Ok(None),
            Some(Value::Integer(i)) if *i.value() >= 0 => Ok(Some(*i.value() as u64)),
            Some(_) => Err(self.error(key, "expected a non-negative integer")),
        }
    }

    pub fn string(&self, key: &str) -> CliResult<Option<String>> {
        match self.value(key)? {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.value().clone())),
            Some(_) => Err(self.error(key, "expected a string")),
        }
    }

    /// The one key among `base_<unit>` that is present, as
    /// `(key, quantity, SI value)`.
    fn any_quantity(&self, base: &str) -> CliResult<Option<(String, Quantity, Vec<f64>)>> {
        let present: Vec<(String, Quantity, f64)> = UNITS
            .iter()
            .map(|(s, q, f)| (format!("{base}{s}"), *q, *f))
            .filter(|(k, _, _)| self.table.contains_key(k))
            .collect();
        match present.as_slice() {
            [] => Ok(None),
            [(key, q, factor)] => {
                let v = self.value(key)?.expect("present");
                let values = match v {
                    Value::Array(a) => a.iter().map(|x| self.as_number(key, x)).collect::<CliResult<Vec<_>>>()?,
                    x => vec![self.as_number(key, x)?],
                };
                Ok(Some((key.clone(), *q, values.iter().map(|x| x * factor).collect())))
            }
            [(a, ..), (b, ..), ..] => Err(self.error(b, format!("given twice, also as `{a}`"))),
        }
    }

    pub fn quantity(&self, base: &str, q: Quantity) -> CliResult<Option<f64>> {
        match self.any_quantity(base)? {
            None => Ok(None),
            Some((key, found, v)) => {
                if found != q {
                    return Err(self.error(&key, format!("expected a {q:?} unit, found a {found:?} unit")));
                }
                if v.len() != 1 {
                    return Err(self.error(&key, "expected a single number"));
                }
                if !v[0].is_finite() {
                    return Err(self.error(&key, "must be finite"));
                }
                Ok(Some(v[0]))
            }
        }
    }

    pub fn require_quantity(&self, base: &str, q: Quantity) -> CliResult<f64> {
        self.quantity(base, q)?.ok_or_else(|| self.missing(&format!("{base}_<unit>")))
    }

    /// Three per-detector values, or one value for all of them.
    pub fn triple(&self, base: &str, q: Option<Quantity>) -> CliResult<Option<[f64; 3]>> {
        let (key, values) = match q {
            None => match self.value(base)? {
                None => return Ok(None),
                Some(Value::Array(a)) => (
                    base.to_string(),
                    a.iter().map(|x| self.as_number(base, x)).collect::<CliResult<Vec<_>>>()?,
                ),
                Some(x) => (base.to_string(), vec![self.as_number(base, x)?]),
            },
            Some(q) => match self.any_quantity(base)? {
                None => return Ok(None),
                Some((key, found, v)) => {
                    if found != q {
                        return Err(self.error(&key, format!("expected a {q:?} unit, found a {found:?} unit")));
                    }
                    (key, v)
                }
            },
        };
        match values.as_slice() {
            [v] => Ok(Some([*v; 3])),
            [a, b, c] => Ok(Some([*a, *b, *c])),
            _ => Err(self.error(&key, "expected one value or three (D1, D2, D3)")),
        }
    }

    pub fn missing(&self, key: &str) -> CliError {
        let at = self.table.span().map_or(0, |s| line_at(self.text, s.start));
        CliError::config(format!("line {at}: [{}] is missing `{key}`", self.path))
    }

    pub fn sub(&self, name: &str) -> CliResult<Option<Section<'a>>> {
        match self.table.get(name) {
            None => Ok(None),
            Some(Item::Table(t)) => {
                self.used.borrow_mut().insert(name.to_string());
                Ok(Some(Section::new(&self.qualified(name), t, self.text)))
            }
            Some(_) => Err(self.error(name, "expected a [table]")),
        }
    }

    /// Errors on the first key that was never read.
    pub fn finish(&self) -> CliResult<()> {
        let used = self.used.borrow();
        for (key, _) in self.table.iter() {
            if !used.contains(key) {
                return Err(self.error(key, "unknown key"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Closed form for single reflectors, quadrature otherwise.
    Auto,
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterMode {
    /// One path error per grid point, frozen during the exposure.
    PerPoint,
    /// Path fluctuating many times within each exposure.
    Averaged,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanSpec {
    pub plan: ScanPlan,
    pub oversample: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseSpec {
    pub model: NoiseModel,
    /// Target cross-scheme coincidence rate away from any feature; sets the
    /// pair rate when given.
    pub cross_baseline: Option<f64>,
    pub jitter_mode: JitterMode,
    pub runs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisSpec {
    pub scheme: Scheme,
    /// Low-pass cutoff in units of `omega_p`.
    pub cutoff: f64,
    pub engine: Engine,
}

#[derive(Debug, Clone, Serialize)]
pub struct DispersionSpec {
    pub material: String,
    pub thickness: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub source: SpdcSource,
    pub spectrum_path: Option<PathBuf>,
    #[serde(skip)]
    pub spectrum: Option<TabulatedSpectrum>,
    pub sample: Option<Sample>,
    pub scan: Option<ScanSpec>,
    pub noise: NoiseSpec,
    pub analysis: AnalysisSpec,
    pub dispersion: DispersionSpec,
}

pub const PRESETS: &[(&str, &str)] = &[
    ("proof_of_concept", include_str!("../presets/proof_of_concept.toml")),
    ("defectoscopy", include_str!("../presets/defectoscopy.toml")),
    ("dispersion", include_str!("../presets/dispersion.toml")),
];

pub fn preset(name: &str) -> CliResult<Scenario> {
    let name = name.trim_end_matches(".toml");
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
        CliError::config(format!("unknown preset `{name}`; available: {}", known.join(", ")))
    })?;
    parse_scenario(text, None).map_err(|e| match e {
        CliError::Config(m) => CliError::config(format!("preset {name}: {m}")),
        other => other,
    })
}

pub fn load(path: &Path) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text, path.parent()).map_err(|e| match e {
        CliError::Config(m) => CliError::config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// `base` resolves relative file references; `None` means the scenario has
/// no directory of its own and relative paths are taken as given.
pub fn parse_scenario(text: &str, base: Option<&Path>) -> CliResult<Scenario> {
    let doc = Document::parse(text).map_err(|e| CliError::config(e.to_string().trim_end().to_string()))?;
    let root_table = doc.as_table();
    check_units(root_table, "", text)?;
    let root = Section::new("", root_table, text);

    let name = root.string("name")?.unwrap_or_else(|| "scenario".into());
    let seed = root.integer("seed")?.unwrap_or(0);
    let src_sec = root.sub("source")?.ok_or_else(|| root.missing("[source]"))?;
    let (source, spectrum_path) = parse_source(&src_sec, base)?;
    src_sec.finish()?;
    let spectrum = match &spectrum_path {
        None => None,
        Some(p) => {
            let t = std::fs::read_to_string(p)
                .map_err(|e| src_sec.error("spectrum_path", format!("cannot read {}: {e}", p.display())))?;
            Some(TabulatedSpectrum::from_csv_str(&t).map_err(|e| src_sec.error("spectrum_path", e))?)
        }
    };

    let sample = match root.sub("sample")? {
        None => None,
        Some(s) => {
            let v = parse_sample(&s, &source)?;
            s.finish()?;
            Some(v)
        }
    };
    let scan = match root.sub("scan")? {
        None => None,
        Some(s) => {
            let v = parse_scan(&s)?;
            s.finish()?;
            Some(v)
        }
    };
    let noise = match root.sub("noise")? {
        None => NoiseSpec {
            model: NoiseModel::default(),
            cross_baseline: None,
            jitter_mode: JitterMode::PerPoint,
            runs: 1,
        },
        Some(s) => {
            let v = parse_noise(&s)?;
            s.finish()?;
            v
        }
    };
    let analysis = match root.sub("analysis")? {
        None => AnalysisSpec {
            scheme: Scheme::Cross,
            cutoff: 0.015,
            engine: Engine::Auto,
        },
        Some(s) => {
            let v = parse_analysis(&s)?;
            s.finish()?;
            v
        }
    };
    let dispersion = match root.sub("dispersion")? {
        None => DispersionSpec {
            material: "silicon".into(),
            thickness: 5e-3,
            points: 21,
        },
        Some(s) => {
            let v = parse_dispersion(&s)?;
            s.finish()?;
            v
        }
    };
    root.finish()?;
    Ok(Scenario {
        name,
        seed,
        source,
        spectrum_path,
        spectrum,
        sample,
        scan,
        noise,
        analysis,
        dispersion,
    })
}

fn parse_source(s: &Section, base: Option<&Path>) -> CliResult<(SpdcSource, Option<PathBuf>)> {
    let kind = s.string("bandwidth_kind")?.ok_or_else(|| s.missing("bandwidth_kind"))?;
    let to_std = match kind.as_str() {
        "std" => 1.0,
        "fwhm" => fwhm_to_sigma(1.0),
        other => return Err(s.error("bandwidth_kind", format!("expected \"std\" or \"fwhm\", got \"{other}\""))),
    };
    let pump = match (
        s.quantity("pump_wavelength", Quantity::Length)?,
        s.quantity("pump_frequency", Quantity::Frequency)?,
    ) {
        (Some(l), None) => wavelength_to_omega(l),
        (None, Some(w)) => w,
        (Some(_), Some(_)) => {
            return Err(s.error("pump_frequency_thz", "give the pump as a wavelength or a frequency, not both"))
        }
        (None, None) => return Err(s.missing("pump_wavelength_<unit>")),
    };
    let pump_bw = s.quantity("pump_bandwidth", Quantity::Frequency)?.unwrap_or(0.0) * to_std;
    let pm_bw = s.require_quantity("phasematch_bandwidth", Quantity::Frequency)? * to_std;
    let src = SpdcSource::new(pump, pump_bw, pm_bw).map_err(|e| s.error("phasematch_bandwidth", e))?;
    let path = s.string("spectrum_path")?.map(|p| match base {
        Some(b) => b.join(p),
        None => PathBuf::from(p),
    });
    if let Some(p) = &path {
        if !p.is_file() {
            return Err(s.error("spectrum_path", format!("file {} does not exist", p.display())));
        }
    }
    Ok((src, path))
}

fn unit_interval(s: &Section, key: &str, v: f64) -> CliResult<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(s.error(key, format!("must lie in [0, 1], got {v}")))
    }
}

fn parse_sample(s: &Section, src: &SpdcSource) -> CliResult<Sample> {
    let kind = s.string("kind")?.ok_or_else(|| s.missing("kind"))?;
    let position = s.quantity("position", Quantity::Length)?.unwrap_or(0.0);
    let reflectance = |default: f64| -> CliResult<f64> {
        let r = s.plain("reflectance")?.unwrap_or(default);
        unit_interval(s, "reflectance", r)
    };
    let sample: Sample = match kind.as_str() {
        "mirror" | "layer" => SingleLayer::new(reflectance(1.0)?.sqrt(), mirror_to_delay(position))
            .map_err(|e| s.error("reflectance", e))?
            .into(),
        "slab" => {
            let name = s.string("material")?.unwrap_or_else(|| "silicon".into());
            let material = Material::named(&name).map_err(|e| s.error("material", e))?;
            let thickness = s.require_quantity("thickness", Quantity::Length)?;
            DispersiveSlab::new(material, thickness, reflectance(1.0)?.sqrt(), 0.5 * src.pump_center)
                .map_err(|e| s.error("thickness_mm", e))?
                .into()
        }
        "gap" => {
            let r1 = unit_interval(s, "r1", s.plain("r1")?.ok_or_else(|| s.missing("r1"))?)?;
            let r2 = unit_interval(s, "r2", s.plain("r2")?.ok_or_else(|| s.missing("r2"))?)?;
            let t1 = match s.plain("t1")? {
                Some(t) => unit_interval(s, "t1", t)?,
                None => (1.0 - r1 * r1).sqrt(),
            };
            let gap = s.require_quantity("gap", Quantity::Length)?;
            let echoes = s.integer("echo_count")?.unwrap_or(4) as usize;
            GapSample::new(r1, r2, t1, gap, position, echoes)
                .map_err(|e| s.error("gap_um", e))?
                .into()
        }
        other => {
            return Err(s.error(
                "kind",
                format!("expected \"mirror\", \"layer\", \"slab\" or \"gap\", got \"{other}\""),
            ))
        }
    };
    Ok(sample)
}

fn parse_scan(s: &Section) -> CliResult<ScanSpec> {
    let mode = s.string("mode")?.ok_or_else(|| s.missing("mode"))?;
    let start = s.require_quantity("start", Quantity::Length)?;
    let end = s.require_quantity("end", Quantity::Length)?;
    let mode = match mode.as_str() {
        "step" => ScanMode::Step {
            step_size: s.require_quantity("step", Quantity::Length)?,
            exposure: s.require_quantity("exposure", Quantity::Time)?,
        },
        "continuous" => ScanMode::Continuous {
            velocity: s.require_quantity("velocity", Quantity::Velocity)?,
            bin_width: s.require_quantity("bin", Quantity::Length)?,
        },
        other => return Err(s.error("mode", format!("expected \"step\" or \"continuous\", got \"{other}\""))),
    };
    let oversample = s.integer("oversample")?.unwrap_or(16) as usize;
    let plan = ScanPlan::new(mode, mirror_to_delay(start), mirror_to_delay(end)).map_err(|e| s.error("mode", e))?;
    Ok(ScanSpec { plan, oversample })
}

fn parse_noise(s: &Section) -> CliResult<NoiseSpec> {
    let mut model = NoiseModel::default();
    let pair_rate = s.quantity("pair_rate", Quantity::Rate)?;
    let baseline = s.quantity("cross_baseline", Quantity::Rate)?;
    match (pair_rate, baseline) {
        (Some(_), Some(_)) => {
            return Err(s.error("cross_baseline_cps", "give either pair_rate or cross_baseline, not both"))
        }
        (Some(r), None) => model.pair_rate = r,
        _ => {}
    }
    if let Some(e) = s.triple("efficiency", None)? {
        model.efficiency = e;
    }
    if let Some(d) = s.triple("dark_rate", Some(Quantity::Rate))? {
        model.dark_rate = d;
    }
    if let Some(w) = s.quantity("coincidence_window", Quantity::Time)? {
        model.coincidence_window = w;
    }
    model.path_jitter_std = s.quantity("path_jitter", Quantity::Length)?.unwrap_or(0.0);
    model.jitter_correlation = s.quantity("jitter_correlation", Quantity::Length)?.unwrap_or(0.0);
    model.validate().map_err(|e| s.error("efficiency", e))?;
    let jitter_mode = match s.string("jitter_mode")?.as_deref() {
        None | Some("per_point") => JitterMode::PerPoint,
        Some("averaged") => JitterMode::Averaged,
        Some(other) => {
            return Err(s.error("jitter_mode", format!("expected \"per_point\" or \"averaged\", got \"{other}\"")))
        }
    };
    let runs = s.integer("runs")?.unwrap_or(1) as usize;
    if runs == 0 {
        return Err(s.error("runs", "need at least one run"));
    }
    if let Some(b) = baseline {
        if !(b > 0.0) {
            return Err(s.error("cross_baseline_cps", "must be positive"));
        }
    }
    Ok(NoiseSpec {
        model,
        cross_baseline: baseline,
        jitter_mode,
        runs,
    })
}

fn parse_analysis(s: &Section) -> CliResult<AnalysisSpec> {
    let scheme = match s.string("scheme")?.as_deref() {
        None | Some("cross") => Scheme::Cross,
        Some("auto") => Scheme::Auto,
        Some(other) => return Err(s.error("scheme", format!("expected \"cross\" or \"auto\", got \"{other}\""))),
    };
    let cutoff = s.quantity("cutoff", Quantity::PumpUnits)?.unwrap_or(0.015);
    if !(cutoff > 0.0) {
        return Err(s.error("cutoff_wp", "must be positive"));
    }
    let engine = match s.string("engine")?.as_deref() {
        None | Some("auto") => Engine::Auto,
        Some("closed_form") => Engine::ClosedForm,
        Some("quadrature") => Engine::Quadrature,
        Some(other) => {
            return Err(s.error(
                "engine",
                format!("expected \"auto\", \"closed_form\" or \"quadrature\", got \"{other}\""),
            ))
        }
    };
    Ok(AnalysisSpec { scheme, cutoff, engine })
}

fn parse_dispersion(s: &Section) -> CliResult<DispersionSpec> {
    let material = s.string("material")?.unwrap_or_else(|| "silicon".into());
    Material::named(&material).map_err(|e| s.error("material", e))?;
    let thickness = s.require_quantity("thickness", Quantity::Length)?;
    if !(thickness >= 0.0) {
        return Err(s.error("thickness_mm", "must be >= 0"));
    }
    let points = s.integer("points")?.unwrap_or(21) as usize;
    if points < 2 {
        return Err(s.error("points", "need at least two sweep points"));
    }
    Ok(DispersionSpec {
        material,
        thickness,
        points,
    })
}
