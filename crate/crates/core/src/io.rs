//! File formats and output plumbing: CSV writers and readers, JSON sidecars
//! with content hashes, run-set directories and atomic writes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::{MeasuredTrace, Run, RunSet};
use crate::dsp::SpectrumTrace;
use crate::error::{Error, Result};
use crate::interferometer::{Interferogram, InterferogramKind, InterferogramMeta};
use crate::units::SPEED_OF_LIGHT as C;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid("path", format!("`{}` has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

/// JSON document written next to a data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub convention: String,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: Option<u64>,
    pub files: Vec<ManifestEntry>,
}

/// Single writer for a command's output directory. Every file written
/// through it is hashed into the manifest.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    manifest: Manifest,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>, command: &str, seed: Option<u64>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            manifest: Manifest {
                command: command.to_string(),
                seed,
                files: Vec::new(),
            },
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, relative: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(relative);
        atomic_write(&path, bytes)?;
        self.manifest.files.retain(|e| e.path != relative);
        self.manifest.files.push(ManifestEntry {
            path: relative.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, relative: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(relative, text.as_bytes())
    }

    /// Data file plus `<name>.json` sidecar carrying its hash.
    pub fn write_with_sidecar(
        &mut self,
        relative: &str,
        bytes: &[u8],
        columns: &[&str],
        convention: &str,
        metadata: serde_json::Value,
    ) -> Result<PathBuf> {
        let path = self.write(relative, bytes)?;
        let sidecar = Sidecar {
            file: Path::new(relative)
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
            columns: columns.iter().map(|s| s.to_string()).collect(),
            convention: convention.to_string(),
            metadata,
        };
        self.write_json(&format!("{relative}.json"), &sidecar)?;
        Ok(path)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Writes `manifest.json` with entries sorted by path.
    pub fn finish(mut self) -> Result<Manifest> {
        self.manifest.files.sort_by(|a, b| a.path.cmp(&b.path));
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        atomic_write(&self.root.join("manifest.json"), text.as_bytes())?;
        Ok(self.manifest)
    }
}

/// Recomputes the hashes listed in `dir/manifest.json` and returns the
/// paths that no longer match.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let mut bad = Vec::new();
    for e in &manifest.files {
        match fs::read(dir.join(&e.path)) {
            Ok(bytes) if sha256_hex(&bytes) == e.sha256 => {}
            _ => bad.push(e.path.clone()),
        }
    }
    Ok(bad)
}

pub const INTERFEROGRAM_COLUMNS: [&str; 4] = ["tau_s", "delay_um", "value", "kind"];
pub const SPECTRUM_COLUMNS: [&str; 2] = ["omega_over_omega_p", "magnitude"];
pub const SPECTRUM_CONVENTION: &str =
    "unitary DFT, X_k = N^-1/2 sum_n x_n exp(-2 pi i k n / N); one-sided magnitudes";

/// `delay_um` is the mirror displacement `c tau / 2`.
pub fn interferogram_csv(ifg: &Interferogram) -> String {
    let mut out = INTERFEROGRAM_COLUMNS.join(",");
    out.push('\n');
    for (t, v) in ifg.tau.iter().zip(&ifg.values) {
        let _ = writeln!(out, "{t:e},{},{v:e},{}", 0.5 * C * t * 1e6, ifg.kind);
    }
    out
}

pub fn interferogram_from_csv(text: &str) -> Result<Interferogram> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("csv: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != INTERFEROGRAM_COLUMNS {
        return Err(Error::Parse(format!(
            "expected header `{}`, got `{}`",
            INTERFEROGRAM_COLUMNS.join(","),
            header.join(",")
        )));
    }
    let (mut tau, mut values, mut kind) = (Vec::new(), Vec::new(), None);
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("csv: {e}")))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad number `{}`", line + 2, &rec[i])))
        };
        tau.push(num(0)?);
        values.push(num(2)?);
        let k: InterferogramKind = rec[3].parse()?;
        if kind.is_some_and(|p| p != k) {
            return Err(Error::Parse(format!("line {}: mixed interferogram kinds", line + 2)));
        }
        kind = Some(k);
    }
    let kind = kind.ok_or_else(|| Error::Parse("interferogram file has no rows".into()))?;
    Ok(Interferogram {
        tau,
        values,
        kind,
        meta: InterferogramMeta::default(),
    })
}

pub fn spectrum_csv(spec: &SpectrumTrace) -> String {
    let mut out = SPECTRUM_COLUMNS.join(",");
    out.push('\n');
    for (w, m) in spec.omega.iter().zip(&spec.magnitude) {
        let _ = writeln!(out, "{w},{m:e}");
    }
    out
}

/// Plain numeric table with a header row.
pub fn table_csv(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunSetManifest {
    runs: Vec<Vec<String>>,
}

fn trace_name(run: usize, t: &MeasuredTrace) -> String {
    format!("run{run:03}_{}.csv", t.channel)
}

/// Writes one CSV per trace plus `runset.json` listing the files of each
/// run, singles first.
pub fn write_run_set(out: &mut OutputDir, subdir: &str, set: &RunSet) -> Result<()> {
    set.validate()?;
    let mut listing = Vec::new();
    for (i, run) in set.runs.iter().enumerate() {
        let mut files = Vec::new();
        for t in run.singles.iter().chain(&run.coincidences) {
            let name = trace_name(i, t);
            out.write(&format!("{subdir}/{name}"), t.to_csv_string()?.as_bytes())?;
            files.push(name);
        }
        listing.push(files);
    }
    out.write_json(&format!("{subdir}/runset.json"), &RunSetManifest { runs: listing })?;
    Ok(())
}

pub fn read_run_set(dir: &Path) -> Result<RunSet> {
    let listing: RunSetManifest = serde_json::from_str(&fs::read_to_string(dir.join("runset.json"))?)?;
    let mut runs = Vec::new();
    for files in &listing.runs {
        if files.len() < 3 {
            return Err(Error::Parse("each run needs three singles files".into()));
        }
        let traces = files
            .iter()
            .map(|f| MeasuredTrace::from_csv_str(&fs::read_to_string(dir.join(f))?))
            .collect::<Result<Vec<_>>>()?;
        let mut it = traces.into_iter();
        let singles = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
        runs.push(Run {
            singles,
            coincidences: it.collect(),
        });
    }
    RunSet::new(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::Channel;
    use crate::interferometer::uniform_grid;

    fn trace(channel: Channel, scale: u64) -> MeasuredTrace {
        let tau = uniform_grid(0.0, 1e-13, 11);
        MeasuredTrace {
            counts: (0..11).map(|k| k * scale).collect(),
            tau,
            exposure: vec![0.1; 11],
            channel,
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        let leftovers = fs::read_dir(p.parent().unwrap()).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn manifest_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path(), "test", Some(1)).unwrap();
        out.write("x.csv", b"a,b\n1,2\n").unwrap();
        out.write_with_sidecar("y.csv", b"c\n3\n", &["c"], "", serde_json::json!({"k": 1})).unwrap();
        let m = out.finish().unwrap();
        assert_eq!(m.files.len(), 3);
        assert!(verify_manifest(dir.path()).unwrap().is_empty());
        fs::write(dir.path().join("x.csv"), b"a,b\n1,3\n").unwrap();
        assert_eq!(verify_manifest(dir.path()).unwrap(), vec!["x.csv".to_string()]);
        let side: Sidecar = serde_json::from_str(&fs::read_to_string(dir.path().join("y.csv.json")).unwrap()).unwrap();
        assert_eq!(side.sha256, sha256_hex(b"c\n3\n"));
    }

    #[test]
    fn interferogram_round_trip() {
        let ifg = Interferogram {
            tau: vec![-1e-13, 0.0, 2.5e-13],
            values: vec![0.5, 0.25, 1.0 / 3.0],
            kind: InterferogramKind::Cross,
            meta: InterferogramMeta::default(),
        };
        let text = interferogram_csv(&ifg);
        assert!(text.starts_with("tau_s,delay_um,value,kind\n"));
        let back = interferogram_from_csv(&text).unwrap();
        assert_eq!(back.tau, ifg.tau);
        assert_eq!(back.values, ifg.values);
        assert_eq!(back.kind, ifg.kind);
    }

    #[test]
    fn interferogram_rejects_mixed_kinds_and_empty() {
        let text = "tau_s,delay_um,value,kind\n0,0,1,auto\n1e-15,0.1,1,cross\n";
        assert!(interferogram_from_csv(text).is_err());
        assert!(interferogram_from_csv("tau_s,delay_um,value,kind\n").is_err());
    }

    #[test]
    fn run_set_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let run = |s| Run {
            singles: [trace(Channel::D1, s), trace(Channel::D2, s), trace(Channel::D3, s)],
            coincidences: vec![trace(Channel::Cross, s + 1)],
        };
        let set = RunSet::new(vec![run(1), run(2)]).unwrap();
        let mut out = OutputDir::create(dir.path(), "test", None).unwrap();
        write_run_set(&mut out, "runs", &set).unwrap();
        out.finish().unwrap();
        let back = read_run_set(&dir.path().join("runs")).unwrap();
        assert_eq!(back.runs.len(), 2);
        for (a, b) in back.runs.iter().zip(&set.runs) {
            assert_eq!(a.coincidences[0].counts, b.coincidences[0].counts);
            assert_eq!(a.singles[2].channel, Channel::D3);
            for (x, y) in a.singles[0].tau.iter().zip(&b.singles[0].tau) {
                assert!((x - y).abs() < 1e-25);
            }
        }
    }
}
