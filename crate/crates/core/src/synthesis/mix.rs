use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::background::{draw_eq, uniform, EqBand, PinkParams};
use super::config::{Range, SceneConfig};
use super::impulse::{ImpulseKind, ImpulseParams};
use super::placement::place_intervals;
use super::room::{draw_room, room_ir, RoomIrParams};
use crate::error::{Error, Result};
use crate::signal::filters::{cascade, fft_convolve_truncated, Biquad};
use crate::signal::{a_weighted_level, resample_by_ratio, AudioBuffer};
use crate::util::db_to_amp;
use crate::SCHEMA_VERSION;

/// Impulse edges below this fraction of the peak count as silence.
const TRIM_FRAC: f64 = 1e-3;
/// Mixture peak after normalisation when the sum would clip.
const NORMALIZED_PEAK: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SourceRecord {
    Pink { params: PinkParams },
    Synthetic { kind: ImpulseKind, params: ImpulseParams },
    File { path: String, offset_s: f64 },
}

/// Audio plus where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceAudio {
    pub label: String,
    pub source: SourceRecord,
    pub audio: AudioBuffer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub eq: Vec<EqBand>,
    pub reverb_decay_s: Option<f64>,
    pub stretch: f64,
    pub pitch_semitones: f64,
    /// Output/input length ratio of the resampler.
    pub rate_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseRecord {
    pub label: String,
    pub source: SourceRecord,
    pub onset_s: f64,
    pub duration_s: f64,
    pub target_snr_db: f64,
    pub achieved_snr_db: f64,
    pub gain_db: f64,
    pub augmentation: AugmentationRecord,
}

impl ImpulseRecord {
    pub fn end_s(&self) -> f64 {
        self.onset_s + self.duration_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundRecord {
    pub label: String,
    pub source: SourceRecord,
    pub target_dba: f64,
    pub gain_db: f64,
}

/// Paths relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenePaths {
    pub mixture: String,
    pub impulsive: String,
    pub stationary: String,
    pub dry_impulsive: String,
    pub dry_stationary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub schema_version: u32,
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    pub seed: u64,
    pub sample_rate: u32,
    pub duration_s: f64,
    pub background: BackgroundRecord,
    pub impulses: Vec<ImpulseRecord>,
    pub dropped_impulses: usize,
    pub room_ir: RoomIrParams,
    /// Common factor applied to every track to avoid clipping; 1 if unused.
    pub normalization_gain: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<ScenePaths>,
}

impl SceneManifest {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Impulse intervals in seconds, ordered by onset.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.impulses.iter().map(|r| (r.onset_s, r.end_s())).collect()
    }
}

/// Float32 tracks ready for export. `mixture` is the f32 sum of the two wet
/// stems; the dry stems are the same signals before the room IR.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneStems {
    pub sample_rate: u32,
    pub mixture: Vec<f32>,
    pub impulsive: Vec<f32>,
    pub stationary: Vec<f32>,
    pub dry_impulsive: Vec<f32>,
    pub dry_stationary: Vec<f32>,
}

fn trim(x: &[f64]) -> &[f64] {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return &x[..0];
    }
    let thr = TRIM_FRAC * peak;
    let a = x.iter().position(|v| v.abs() >= thr).unwrap();
    let b = x.iter().rposition(|v| v.abs() >= thr).unwrap();
    &x[a..=b]
}

fn augment(x: &[f64], cfg: &SceneConfig, rng: &mut impl Rng) -> (Vec<f64>, AugmentationRecord) {
    let aug = &cfg.augmentation;
    let rate = cfg.sample_rate;
    let stretch = uniform(rng, aug.stretch);
    let pitch = uniform(rng, aug.pitch_semitones);
    let rate_factor = stretch * 2f64.powf(-pitch / 12.0);
    let eq = draw_eq(
        rng,
        aug.eq_bands,
        Range::new(60.0, 12_000.0),
        Range::new(1.0, 2.0),
        aug.eq_gain_db,
        rate,
    );
    let reverb_decay_s = rng.random_bool(aug.reverb_probability).then(|| uniform(rng, aug.reverb_decay_s));
    let ir_seed: u64 = rng.random();

    let mut y = if (rate_factor - 1.0).abs() > 1e-12 {
        resample_by_ratio(x, rate_factor)
    } else {
        x.to_vec()
    };
    let sections: Vec<Biquad> = eq.iter().map(|b| b.biquad(rate)).collect();
    cascade(&sections, &mut y);
    if let Some(decay) = reverb_decay_s {
        let ir = room_ir(decay, rate, ir_seed);
        y.resize(y.len() + ir.len(), 0.0);
        y = fft_convolve_truncated(&y, &ir);
    }
    let y = trim(&y).to_vec();
    (
        y,
        AugmentationRecord {
            eq,
            reverb_decay_s,
            stretch,
            pitch_semitones: pitch,
            rate_factor,
        },
    )
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn to_f32(x: &[f64], gain: f64) -> Vec<f32> {
    x.iter().map(|&v| (v * gain) as f32).collect()
}

/// Scales, augments, places and sums one scene. Everything random is drawn
/// from `seed`.
pub fn mix_scene(
    background: SourceAudio,
    impulses: Vec<SourceAudio>,
    cfg: &SceneConfig,
    id: u64,
    seed: u64,
) -> Result<(SceneStems, SceneManifest)> {
    cfg.validate()?;
    let rate = cfg.sample_rate;
    let n = cfg.n_samples();
    if background.audio.sample_rate() != rate || background.audio.len() != n {
        return Err(Error::invalid_input(format!(
            "background must be {n} samples at {rate} Hz, got {} at {}",
            background.audio.len(),
            background.audio.sample_rate()
        )));
    }
    if let Some(bad) = impulses.iter().find(|s| s.audio.sample_rate() != rate) {
        return Err(Error::invalid_input(format!(
            "impulse {} is at {} Hz, scene rate is {rate}",
            bad.label,
            bad.audio.sample_rate()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let level = cfg.level_for(&background.label);
    let target_dba = Normal::new(level.mean, level.sd)
        .map_err(|e| Error::invalid_config(e.to_string()))?
        .sample(&mut rng);
    let measured = a_weighted_level(&background.audio)?;
    if !measured.is_finite() {
        return Err(Error::invalid_input("background is digital silence"));
    }
    let bg_gain_db = target_dba - measured;
    let stationary_dry: Vec<f64> = background.audio.samples().iter().map(|v| v * db_to_amp(bg_gain_db)).collect();

    let mut prepared = Vec::with_capacity(impulses.len());
    for src in impulses {
        let (mut x, record) = augment(src.audio.samples(), cfg, &mut rng);
        x.truncate(n);
        let snr = uniform(&mut rng, cfg.snr_db_range);
        prepared.push((src, x, record, snr));
    }
    prepared.retain(|(src, x, _, _)| {
        if x.is_empty() {
            log::warn!("scene {id}: impulse {} is silent, skipped", src.label);
        }
        !x.is_empty()
    });
    let lengths: Vec<usize> = prepared.iter().map(|p| p.1.len()).collect();
    let guard = (cfg.guard_s * rate as f64).round() as usize;
    let slots = place_intervals(n, &lengths, guard, &mut rng)?;
    let (room, ir) = draw_room(&mut rng, cfg.room_decay_s.min, cfg.room_decay_s.max, rate);

    let mut impulsive_dry = vec![0.0; n];
    let mut records = Vec::with_capacity(slots.len());
    for slot in &slots {
        let (src, x, augmentation, target) = &prepared[slot.index];
        let span = slot.start..slot.start + x.len();
        let bg_rms = rms(&stationary_dry[span.clone()]);
        let imp_rms = rms(x);
        let gain = if bg_rms > 0.0 { db_to_amp(*target) * bg_rms / imp_rms } else { 1.0 };
        for (dst, v) in impulsive_dry[span.clone()].iter_mut().zip(x) {
            *dst = gain * v;
        }
        let achieved = 20.0 * (rms(&impulsive_dry[span]) / bg_rms).log10();
        records.push(ImpulseRecord {
            label: src.label.clone(),
            source: src.source.clone(),
            onset_s: slot.start as f64 / rate as f64,
            duration_s: x.len() as f64 / rate as f64,
            target_snr_db: *target,
            achieved_snr_db: achieved,
            gain_db: 20.0 * gain.log10(),
            augmentation: augmentation.clone(),
        });
    }

    let impulsive_wet = fft_convolve_truncated(&impulsive_dry, &ir);
    let stationary_wet = fft_convolve_truncated(&stationary_dry, &ir);
    let sum = |a: &[f32], b: &[f32]| -> Vec<f32> { a.iter().zip(b).map(|(x, y)| x + y).collect() };
    let peak_of = |x: &[f32]| x.iter().fold(0.0f32, |m, v| m.max(v.abs()));

    let mut norm = 1.0;
    let mut impulsive = to_f32(&impulsive_wet, norm);
    let mut stationary = to_f32(&stationary_wet, norm);
    let mut mixture = sum(&impulsive, &stationary);
    let peak = peak_of(&mixture) as f64;
    if peak > 1.0 {
        norm = NORMALIZED_PEAK / peak;
        impulsive = to_f32(&impulsive_wet, norm);
        stationary = to_f32(&stationary_wet, norm);
        mixture = sum(&impulsive, &stationary);
        log::debug!("scene {id}: normalised by {:.2} dB", 20.0 * norm.log10());
    }
    let stems = SceneStems {
        sample_rate: rate,
        mixture,
        impulsive,
        stationary,
        dry_impulsive: to_f32(&impulsive_dry, norm),
        dry_stationary: to_f32(&stationary_dry, norm),
    };
    let manifest = SceneManifest {
        schema_version: SCHEMA_VERSION,
        id,
        split: None,
        seed,
        sample_rate: rate,
        duration_s: cfg.duration_s,
        background: BackgroundRecord {
            label: background.label,
            source: background.source,
            target_dba,
            gain_db: bg_gain_db,
        },
        dropped_impulses: lengths.len() - records.len(),
        impulses: records,
        room_ir: room,
        normalization_gain: norm,
        paths: None,
    };
    Ok((stems, manifest))
}
