use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::background::gen_pink_background;
use super::config::SceneConfig;
use super::impulse::{gen_synthetic_impulse, ImpulseKind};
use super::mix::{mix_scene, SceneManifest, ScenePaths, SceneStems, SourceAudio, SourceRecord};
use crate::error::{Error, Result};
use crate::signal::{read_wav, resample, write_wav_f32, AudioBuffer};
use crate::util::{mix_seed, write_atomic, write_json_pretty};

pub const PINK_LABEL: &str = "pink";

/// One file of a corpus, with its corpus-specific label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub path: PathBuf,
    pub label: String,
}

/// Reads a JSON array of `{path, label}` objects. Relative paths resolve
/// against the manifest's directory.
pub fn load_corpus_manifest(path: &Path) -> Result<Vec<CorpusEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<CorpusEntry> = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for e in &mut entries {
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
    }
    Ok(entries)
}

/// Corpus labels mapped to unified class names. Empty maps pass labels
/// through unchanged.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelMap {
    pub backgrounds: BTreeMap<String, String>,
    pub impulses: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceRole {
    Background,
    Impulse,
}

impl LabelMap {
    /// JSON when the extension is `.json`, TOML otherwise.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            Ok(toml::from_str(&text)?)
        }
    }

    pub fn resolve(&self, role: SourceRole, label: &str) -> Option<String> {
        let map = match role {
            SourceRole::Background => &self.backgrounds,
            SourceRole::Impulse => &self.impulses,
        };
        if map.is_empty() {
            return Some(label.to_string());
        }
        map.get(label).cloned()
    }
}

/// Class-balanced sampler: a class is drawn first, then an item within it.
/// Classes smaller than `floor` get weight `size / floor` so they are not
/// oversampled.
#[derive(Debug, Clone)]
pub struct ClassSampler<T> {
    classes: Vec<(String, Vec<T>)>,
    cumulative: Vec<f64>,
}

impl<T: Clone> ClassSampler<T> {
    pub fn new(pool: BTreeMap<String, Vec<T>>, floor: usize) -> Self {
        let classes: Vec<(String, Vec<T>)> = pool
            .into_iter()
            .filter(|(label, items)| {
                if items.is_empty() {
                    log::warn!("class {label} is empty, dropped");
                }
                !items.is_empty()
            })
            .collect();
        let mut acc = 0.0;
        let cumulative = classes
            .iter()
            .map(|(_, items)| {
                acc += if floor > 0 { (items.len() as f64 / floor as f64).min(1.0) } else { 1.0 };
                acc
            })
            .collect();
        Self { classes, cumulative }
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_names(&self) -> Vec<&str> {
        self.classes.iter().map(|(c, _)| c.as_str()).collect()
    }

    pub fn draw(&self, rng: &mut impl Rng) -> Option<(&str, T)> {
        let total = *self.cumulative.last()?;
        let u = rng.random_range(0.0..total);
        let c = self.cumulative.partition_point(|&x| x <= u).min(self.classes.len() - 1);
        let (label, items) = &self.classes[c];
        Some((label, items[rng.random_range(0..items.len())].clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    /// Scene ids of different splits come from disjoint ranges.
    pub fn id_base(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Val => 1_000_000,
            Split::Test => 2_000_000,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::invalid_input(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Corpora {
    pub backgrounds: Vec<CorpusEntry>,
    pub impulses: Vec<CorpusEntry>,
}

#[derive(Debug, Clone)]
pub struct DatasetOptions {
    pub count: usize,
    pub split: Split,
    pub synthetic_only: bool,
}

/// One line of `index.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: u64,
    pub split: String,
    pub manifest: String,
    pub mixture: String,
    pub impulsive: String,
    pub stationary: String,
    pub background_label: String,
    pub impulse_labels: Vec<String>,
}

#[derive(Debug, Clone)]
enum Pick {
    Synthetic(ImpulseKind),
    Pink,
    File(PathBuf),
}

fn build_pool(entries: &[CorpusEntry], role: SourceRole, labels: &LabelMap) -> BTreeMap<String, Vec<Pick>> {
    let mut pool: BTreeMap<String, Vec<Pick>> = BTreeMap::new();
    for e in entries {
        let Some(class) = labels.resolve(role, &e.label) else {
            log::warn!("{}: label {:?} is not in the label map, skipped", e.path.display(), e.label);
            continue;
        };
        if !e.path.is_file() {
            log::warn!("{}: missing file, skipped", e.path.display());
            pool.entry(class).or_default();
            continue;
        }
        pool.entry(class).or_default().push(Pick::File(e.path.clone()));
    }
    pool
}

pub fn scene_name(id: u64) -> String {
    format!("scene_{id:07}")
}

fn load_at_rate(path: &Path, rate: u32) -> Result<AudioBuffer> {
    resample(&read_wav(path)?, rate)
}

/// Cuts a random excerpt of `n` samples, tiling short files.
fn fit_length(audio: &AudioBuffer, n: usize, rng: &mut impl Rng) -> (AudioBuffer, usize) {
    let x = audio.samples();
    if x.len() >= n {
        let off = rng.random_range(0..=x.len() - n);
        (audio.slice(off, off + n), off)
    } else {
        let tiled = x.iter().copied().cycle().take(n).collect();
        (AudioBuffer::new(tiled, audio.sample_rate()).expect("finite samples"), 0)
    }
}

struct Sources {
    backgrounds: ClassSampler<Pick>,
    impulses: ClassSampler<Pick>,
}

fn scene_sources(cfg: &SceneConfig, sources: &Sources, id: u64) -> Result<(SourceAudio, Vec<SourceAudio>, u64)> {
    let scene_seed = mix_seed(cfg.seed, id);
    let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
    let rate = cfg.sample_rate;
    let n = cfg.n_samples();

    let (bg_label, bg_pick) = sources.backgrounds.draw(&mut rng).expect("non-empty background pool");
    let background = match bg_pick {
        Pick::Pink => {
            let (audio, params) = gen_pink_background(&cfg.pink, cfg.duration_s, rate, rng.random())?;
            SourceAudio {
                label: bg_label.to_string(),
                source: SourceRecord::Pink { params },
                audio,
            }
        }
        Pick::File(path) => {
            let full = load_at_rate(&path, rate)?;
            let (audio, off) = fit_length(&full, n, &mut rng);
            SourceAudio {
                label: bg_label.to_string(),
                source: SourceRecord::File {
                    path: path.display().to_string(),
                    offset_s: off as f64 / rate as f64,
                },
                audio,
            }
        }
        Pick::Synthetic(_) => unreachable!("impulse kinds are not backgrounds"),
    };

    let k = rng.random_range(cfg.impulses_per_scene.min..=cfg.impulses_per_scene.max);
    let mut impulses = Vec::with_capacity(k);
    for _ in 0..k {
        let (label, pick) = sources.impulses.draw(&mut rng).expect("non-empty impulse pool");
        let item = match pick {
            Pick::Synthetic(kind) => {
                let (audio, params) = gen_synthetic_impulse(kind, rate, rng.random())?;
                SourceAudio {
                    label: label.to_string(),
                    source: SourceRecord::Synthetic { kind, params },
                    audio,
                }
            }
            Pick::File(path) => SourceAudio {
                label: label.to_string(),
                source: SourceRecord::File {
                    path: path.display().to_string(),
                    offset_s: 0.0,
                },
                audio: load_at_rate(&path, rate)?,
            },
            Pick::Pink => unreachable!("pink is a background"),
        };
        impulses.push(item);
    }
    Ok((background, impulses, mix_seed(scene_seed, 1)))
}

fn write_scene(out: &Path, id: u64, stems: &SceneStems, manifest: &mut SceneManifest) -> Result<IndexEntry> {
    let name = scene_name(id);
    let rel = |dir: &str| format!("{dir}/{name}.wav");
    let paths = ScenePaths {
        mixture: rel("mix"),
        impulsive: rel("impulsive"),
        stationary: rel("stationary"),
        dry_impulsive: rel("dry/impulsive"),
        dry_stationary: rel("dry/stationary"),
    };
    for (p, x) in [
        (&paths.mixture, &stems.mixture),
        (&paths.impulsive, &stems.impulsive),
        (&paths.stationary, &stems.stationary),
        (&paths.dry_impulsive, &stems.dry_impulsive),
        (&paths.dry_stationary, &stems.dry_stationary),
    ] {
        write_wav_f32(out.join(p), x, stems.sample_rate)?;
    }
    manifest.paths = Some(paths.clone());
    let manifest_rel = format!("manifests/{name}.json");
    let manifest_path = out.join(&manifest_rel);
    write_json_pretty(&manifest_path, manifest)?;
    Ok(IndexEntry {
        id,
        split: manifest.split.clone().unwrap_or_default(),
        manifest: manifest_rel,
        mixture: paths.mixture,
        impulsive: paths.impulsive,
        stationary: paths.stationary,
        background_label: manifest.background.label.clone(),
        impulse_labels: manifest.impulses.iter().map(|r| r.label.clone()).collect(),
    })
}

fn synthetic_backgrounds() -> BTreeMap<String, Vec<Pick>> {
    BTreeMap::from([(PINK_LABEL.to_string(), vec![Pick::Pink])])
}

fn synthetic_impulses() -> BTreeMap<String, Vec<Pick>> {
    ImpulseKind::ALL
        .into_iter()
        .map(|k| (k.label().to_string(), vec![Pick::Synthetic(k)]))
        .collect()
}

/// Generates `opts.count` scenes into `out_dir` and writes `index.jsonl`.
/// Output depends only on the config, the corpora and the options; thread
/// count does not matter.
pub fn build_dataset(
    cfg: &SceneConfig,
    labels: &LabelMap,
    corpora: &Corpora,
    opts: &DatasetOptions,
    out_dir: &Path,
) -> Result<Vec<IndexEntry>> {
    cfg.validate()?;
    let (bg_pool, imp_pool) = if opts.synthetic_only {
        (synthetic_backgrounds(), synthetic_impulses())
    } else {
        let mut bg = build_pool(&corpora.backgrounds, SourceRole::Background, labels);
        let mut imp = build_pool(&corpora.impulses, SourceRole::Impulse, labels);
        if corpora.backgrounds.is_empty() {
            log::warn!("no background corpus given, using synthetic backgrounds");
            bg = synthetic_backgrounds();
        }
        if corpora.impulses.is_empty() {
            log::warn!("no impulse corpus given, using synthetic impulses");
            imp = synthetic_impulses();
        }
        (bg, imp)
    };
    let sources = Sources {
        backgrounds: ClassSampler::new(bg_pool, cfg.class_floor),
        impulses: ClassSampler::new(imp_pool, cfg.class_floor),
    };
    if sources.backgrounds.is_empty() || sources.impulses.is_empty() {
        return Err(Error::invalid_input("no usable background or impulse classes"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let base = opts.split.id_base();
    let entries: Vec<IndexEntry> = (0..opts.count as u64)
        .into_par_iter()
        .map(|i| {
            let id = base + i;
            let (background, impulses, mix_seed) = scene_sources(cfg, &sources, id)?;
            let (stems, mut manifest) = mix_scene(background, impulses, cfg, id, mix_seed)?;
            manifest.split = Some(opts.split.name().to_string());
            write_scene(out_dir, id, &stems, &mut manifest)
        })
        .collect::<Result<_>>()?;

    let index_path = out_dir.join("index.jsonl");
    let mut index = Vec::new();
    for e in &entries {
        serde_json::to_writer(&mut index, e)?;
        index.push(b'\n');
    }
    write_atomic(&index_path, &index)?;
    Ok(entries)
}

/// Parses `index.jsonl`.
pub fn read_index(path: &Path) -> Result<Vec<IndexEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
