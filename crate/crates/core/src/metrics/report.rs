use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sisdr::{activity_ranges, si_sdr, si_sdr_active, ACTIVITY_PAD_S};
use super::wilcoxon::{wilcoxon_bonferroni, WilcoxonOptions};
use crate::error::{Error, Result};
use crate::signal::{read_wav, AudioBuffer};
use crate::synthesis::{scene_name, IndexEntry, SceneManifest};
use crate::util::{percentile, write_atomic, write_json_pretty};
use crate::SCHEMA_VERSION;

/// Written next to separation outputs so evaluation knows what produced them.
pub const RUN_INFO_FILE: &str = "run.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Impulsive track over the whole scene.
    Impulse,
    /// Impulsive track over the padded ground-truth activity only.
    ImpulseActive,
    Background,
    Mixture,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Impulse, Metric::ImpulseActive, Metric::Background, Metric::Mixture];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Impulse => "impulse",
            Metric::ImpulseActive => "impulse_active",
            Metric::Background => "background",
            Metric::Mixture => "mixture",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Metadata of one separation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub schema_version: u32,
    pub method: String,
    /// The two tracks always sum back to the input.
    pub perfect_reconstruction: bool,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl RunInfo {
    pub fn read(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(RUN_INFO_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json_pretty(&dir.join(RUN_INFO_FILE), self)
    }
}

/// A method to evaluate and the directory holding its
/// `impulsive/<scene>.wav` and `stationary/<scene>.wav` estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub name: String,
    pub dir: PathBuf,
    pub perfect_reconstruction: bool,
}

impl MethodRun {
    /// Uses `run.json` in `dir` when present; `name` overrides its method.
    pub fn from_dir(name: Option<&str>, dir: &Path) -> Result<Self> {
        let info = RunInfo::read(dir)?;
        let name = match (name, &info) {
            (Some(n), _) => n.to_string(),
            (None, Some(i)) => i.method.clone(),
            (None, None) => dir
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "estimate".into()),
        };
        Ok(Self {
            name,
            dir: dir.to_path_buf(),
            perfect_reconstruction: info.is_some_and(|i| i.perfect_reconstruction),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub activity_pad_s: f64,
    pub wilcoxon: WilcoxonOptions,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            activity_pad_s: ACTIVITY_PAD_S,
            wilcoxon: WilcoxonOptions::default(),
        }
    }
}

/// One scene scored for one method. `None` where the reference is silent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub scene: String,
    pub method: String,
    pub si_sdr_impulse: Option<f64>,
    pub si_sdr_impulse_active: Option<f64>,
    pub si_sdr_background: Option<f64>,
    pub si_sdr_mixture: Option<f64>,
}

impl EvalRow {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Impulse => self.si_sdr_impulse,
            Metric::ImpulseActive => self.si_sdr_impulse_active,
            Metric::Background => self.si_sdr_background,
            Metric::Mixture => self.si_sdr_mixture,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub scene: String,
    pub method: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub metric: Metric,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub reference: String,
    pub method: String,
    pub metric: Metric,
    pub n_pairs: usize,
    pub n_batches: usize,
    pub batch_size: usize,
    pub raw_p: f64,
    pub corrected_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodInfo {
    pub name: String,
    pub perfect_reconstruction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub methods: Vec<MethodInfo>,
    pub rows: Vec<EvalRow>,
    pub skipped: Vec<Skipped>,
    pub aggregates: Vec<Aggregate>,
    pub stats: Vec<StatRow>,
}

impl EvalReport {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: Self = serde_json::from_str(&text)?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid_input(format!(
                "{} has schema version {}, expected {SCHEMA_VERSION}",
                path.display(),
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// Mean, median and quartiles per method and metric, from `rows`.
    pub fn compute_aggregates(methods: &[MethodInfo], rows: &[EvalRow]) -> Vec<Aggregate> {
        let mut out = Vec::new();
        for m in methods {
            for metric in Metric::ALL {
                let v: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.method == m.name)
                    .filter_map(|r| r.get(metric))
                    .collect();
                if v.is_empty() {
                    continue;
                }
                out.push(Aggregate {
                    method: m.name.clone(),
                    metric,
                    count: v.len(),
                    mean: v.iter().sum::<f64>() / v.len() as f64,
                    median: percentile(&v, 50.0),
                    q1: percentile(&v, 25.0),
                    q3: percentile(&v, 75.0),
                });
            }
        }
        out
    }

    pub fn aggregate(&self, method: &str, metric: Metric) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.metric == metric)
    }

    /// Per-scene values of one column, keyed by scene.
    pub fn column(&self, method: &str, metric: Metric) -> BTreeMap<String, f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.get(metric).map(|v| (r.scene.clone(), v)))
            .collect()
    }

    pub fn scenes(&self) -> BTreeSet<String> {
        self.rows.iter().map(|r| r.scene.clone()).collect()
    }

    pub fn perfect(&self, method: &str) -> bool {
        self.methods
            .iter()
            .any(|m| m.name == method && m.perfect_reconstruction)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_json_pretty(path, self)
    }

    /// One row per (scene, method); missing values are empty fields.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid_input(e.to_string()))?;
        write_atomic(path, &bytes)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid_input(format!("csv: {e}"))
}

/// Paired signed-rank tests for each `(method in a, method in b)` pair and
/// metric, Bonferroni-corrected over the number of pairs. Scores are matched
/// by scene; the mixture column is skipped when either side reconstructs
/// perfectly.
pub fn compare_methods(
    a: &EvalReport,
    b: &EvalReport,
    pairs: &[(String, String)],
    opts: &WilcoxonOptions,
) -> Result<Vec<StatRow>> {
    let mut out = Vec::new();
    for metric in Metric::ALL {
        for (ma, mb) in pairs {
            if metric == Metric::Mixture && (a.perfect(ma) || b.perfect(mb)) {
                continue;
            }
            let ra = a.column(ma, metric);
            let rb = b.column(mb, metric);
            let (xa, xb): (Vec<f64>, Vec<f64>) = ra
                .iter()
                .filter_map(|(s, &va)| rb.get(s).map(|&vb| (va, vb)))
                .unzip();
            if xa.is_empty() {
                continue;
            }
            let res = wilcoxon_bonferroni(&xa, &xb, opts, pairs.len())?;
            out.push(StatRow {
                reference: ma.clone(),
                method: mb.clone(),
                metric,
                n_pairs: xa.len(),
                n_batches: res.n_batches,
                batch_size: res.batch_size,
                raw_p: res.raw_p,
                corrected_p: res.corrected_p,
            });
        }
    }
    Ok(out)
}

struct SceneRefs {
    impulsive: AudioBuffer,
    stationary: AudioBuffer,
    mixture: AudioBuffer,
    activity: Vec<std::ops::Range<usize>>,
}

fn load_refs(dataset_dir: &Path, entry: &IndexEntry, pad_s: f64) -> Result<SceneRefs> {
    let mixture = read_wav(dataset_dir.join(&entry.mixture))?;
    let impulsive = read_wav(dataset_dir.join(&entry.impulsive))?;
    let stationary = read_wav(dataset_dir.join(&entry.stationary))?;
    let manifest = SceneManifest::from_path(&dataset_dir.join(&entry.manifest))?;
    let activity = activity_ranges(&manifest.intervals(), pad_s, mixture.sample_rate(), mixture.len());
    Ok(SceneRefs {
        impulsive,
        stationary,
        mixture,
        activity,
    })
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedReference) => Ok(None),
        Err(e) => Err(e),
    }
}

fn score(refs: &SceneRefs, scene: &str, method: &MethodRun) -> Result<EvalRow> {
    let est_i = read_wav(method.dir.join("impulsive").join(format!("{scene}.wav")))?;
    let est_s = read_wav(method.dir.join("stationary").join(format!("{scene}.wav")))?;
    for est in [&est_i, &est_s] {
        if est.len() != refs.mixture.len() || est.sample_rate() != refs.mixture.sample_rate() {
            return Err(Error::invalid_input(format!(
                "estimate of {scene} has {} samples at {} Hz, reference {} at {} Hz",
                est.len(),
                est.sample_rate(),
                refs.mixture.len(),
                refs.mixture.sample_rate()
            )));
        }
    }
    let est_m = est_i.add(&est_s)?;
    let ri = refs.impulsive.samples();
    Ok(EvalRow {
        scene: scene.to_string(),
        method: method.name.clone(),
        si_sdr_impulse: defined(si_sdr(est_i.samples(), ri))?,
        si_sdr_impulse_active: defined(si_sdr_active(est_i.samples(), ri, &refs.activity))?,
        si_sdr_background: defined(si_sdr(est_s.samples(), refs.stationary.samples()))?,
        si_sdr_mixture: defined(si_sdr(est_m.samples(), refs.mixture.samples()))?,
    })
}

/// Scores every method on every indexed scene. A scene whose estimate
/// cannot be read is skipped for that method and listed in the report. The
/// first method is the reference of the significance table.
pub fn evaluate_run(
    dataset_dir: &Path,
    index: &[IndexEntry],
    methods: &[MethodRun],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let names: BTreeSet<&str> = methods.iter().map(|m| m.name.as_str()).collect();
    if names.len() != methods.len() {
        return Err(Error::invalid_input("method names must be unique"));
    }
    let per_scene: Vec<(Vec<EvalRow>, Vec<Skipped>)> = index
        .par_iter()
        .map(|entry| {
            let scene = scene_name(entry.id);
            let refs = load_refs(dataset_dir, entry, opts.activity_pad_s)?;
            let mut rows = Vec::new();
            let mut skipped = Vec::new();
            for m in methods {
                match score(&refs, &scene, m) {
                    Ok(row) => rows.push(row),
                    Err(e @ (Error::Io { .. } | Error::Wav { .. } | Error::InvalidInput(_))) => {
                        log::warn!("skipping {scene} for {}: {e}", m.name);
                        skipped.push(Skipped {
                            scene: scene.clone(),
                            method: m.name.clone(),
                            reason: e.to_string(),
                        });
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok((rows, skipped))
        })
        .collect::<Result<_>>()?;
    let (rows, skipped): (Vec<_>, Vec<_>) = per_scene.into_iter().unzip();
    let rows: Vec<EvalRow> = rows.into_iter().flatten().collect();
    let skipped: Vec<Skipped> = skipped.into_iter().flatten().collect();
    let infos: Vec<MethodInfo> = methods
        .iter()
        .map(|m| MethodInfo {
            name: m.name.clone(),
            perfect_reconstruction: m.perfect_reconstruction,
        })
        .collect();
    let mut report = EvalReport {
        schema_version: SCHEMA_VERSION,
        aggregates: EvalReport::compute_aggregates(&infos, &rows),
        methods: infos,
        rows,
        skipped,
        stats: Vec::new(),
    };
    if let Some((first, rest)) = methods.split_first() {
        let pairs: Vec<(String, String)> = rest.iter().map(|m| (first.name.clone(), m.name.clone())).collect();
        report.stats = compare_methods(&report, &report, &pairs, &opts.wilcoxon)?;
    }
    Ok(report)
}
