use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn check(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::invalid_config(format!(
                "{name}: empty range [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

/// Normal distribution of a level in dBFS-A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelDistribution {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentationConfig {
    /// Peak gain of each random EQ band, applied as ±value.
    pub eq_gain_db: f64,
    pub eq_bands: usize,
    pub reverb_decay_s: Range,
    /// Probability that an impulse gets its own reverb before the shared room.
    pub reverb_probability: f64,
    pub stretch: Range,
    pub pitch_semitones: Range,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            eq_gain_db: 6.0,
            eq_bands: 2,
            reverb_decay_s: Range::new(0.05, 0.2),
            reverb_probability: 0.3,
            stretch: Range::new(0.8, 1.25),
            pitch_semitones: Range::new(-3.0, 3.0),
        }
    }
}

/// Parameters of the synthetic pink background generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PinkConfig {
    pub eq_bands: usize,
    pub eq_gain_db: f64,
    pub eq_q: Range,
    pub eq_freq_hz: Range,
    pub contour_db: f64,
    pub contour_segment_s: Range,
    pub reverb_decay_s: Range,
    pub noise_floor_db: f64,
}

impl Default for PinkConfig {
    fn default() -> Self {
        Self {
            eq_bands: 3,
            eq_gain_db: 6.0,
            eq_q: Range::new(1.0, 2.0),
            eq_freq_hz: Range::new(60.0, 12_000.0),
            contour_db: 3.0,
            contour_segment_s: Range::new(1.0, 2.0),
            reverb_decay_s: Range::new(0.05, 0.3),
            noise_floor_db: -40.0,
        }
    }
}

impl PinkConfig {
    pub fn validate(&self) -> Result<()> {
        self.eq_q.check("pink.eq_q")?;
        self.eq_freq_hz.check("pink.eq_freq_hz")?;
        self.contour_segment_s.check("pink.contour_segment_s")?;
        self.reverb_decay_s.check("pink.reverb_decay_s")?;
        if self.eq_q.min <= 0.0 || self.eq_freq_hz.min <= 0.0 || self.contour_segment_s.min <= 0.0 {
            return Err(Error::invalid_config("pink EQ and contour ranges must be positive"));
        }
        if !(0.05..=1.0).contains(&self.reverb_decay_s.min) || !(0.05..=1.0).contains(&self.reverb_decay_s.max) {
            return Err(Error::invalid_config("pink.reverb_decay_s must lie in [0.05, 1]"));
        }
        Ok(())
    }
}

/// Everything that shapes a generated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub duration_s: f64,
    pub sample_rate: u32,
    pub impulses_per_scene: CountRange,
    pub snr_db_range: Range,
    /// Level used for every label without an override.
    pub default_dba: LevelDistribution,
    pub dba_distributions: BTreeMap<String, LevelDistribution>,
    pub room_decay_s: Range,
    pub guard_s: f64,
    /// Classes with fewer items than this are drawn proportionally less
    /// often instead of being oversampled.
    pub class_floor: usize,
    pub augmentation: AugmentationConfig,
    pub pink: PinkConfig,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            duration_s: 5.0,
            sample_rate: 44_100,
            impulses_per_scene: CountRange { min: 1, max: 6 },
            snr_db_range: Range::new(-5.0, 25.0),
            default_dba: LevelDistribution { mean: -28.0, sd: 5.0 },
            dba_distributions: BTreeMap::new(),
            room_decay_s: Range::new(0.05, 0.3),
            guard_s: 0.05,
            class_floor: 5,
            augmentation: AugmentationConfig::default(),
            pink: PinkConfig::default(),
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }

    pub fn level_for(&self, label: &str) -> LevelDistribution {
        self.dba_distributions.get(label).copied().unwrap_or(self.default_dba)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 || !(self.duration_s > 0.0) {
            return Err(Error::invalid_config("duration and sample rate must be positive"));
        }
        let samples = self.duration_s * self.sample_rate as f64;
        if (samples - samples.round()).abs() > 1e-6 {
            return Err(Error::invalid_config(format!(
                "duration {} s is not a whole number of samples at {} Hz",
                self.duration_s, self.sample_rate
            )));
        }
        if self.impulses_per_scene.min > self.impulses_per_scene.max {
            return Err(Error::invalid_config("impulses_per_scene: min exceeds max"));
        }
        self.snr_db_range.check("snr_db_range")?;
        self.room_decay_s.check("room_decay_s")?;
        if self.room_decay_s.min < 0.05 || self.room_decay_s.max > 1.0 {
            return Err(Error::invalid_config("room_decay_s must lie in [0.05, 1]"));
        }
        let aug = &self.augmentation;
        aug.reverb_decay_s.check("augmentation.reverb_decay_s")?;
        aug.stretch.check("augmentation.stretch")?;
        aug.pitch_semitones.check("augmentation.pitch_semitones")?;
        if aug.stretch.min <= 0.0 || !(0.0..=1.0).contains(&aug.reverb_probability) || aug.eq_gain_db < 0.0 {
            return Err(Error::invalid_config("augmentation ranges out of bounds"));
        }
        if aug.reverb_decay_s.min < 0.05 || aug.reverb_decay_s.max > 1.0 {
            return Err(Error::invalid_config("augmentation.reverb_decay_s must lie in [0.05, 1]"));
        }
        for (label, d) in std::iter::once(("default", &self.default_dba)).chain(
            self.dba_distributions.iter().map(|(k, v)| (k.as_str(), v)),
        ) {
            if !(d.sd >= 0.0 && d.mean.is_finite()) {
                return Err(Error::invalid_config(format!("level distribution for {label} is invalid")));
            }
        }
        if !(self.guard_s >= 0.0) {
            return Err(Error::invalid_config("guard_s must be non-negative"));
        }
        self.pink.validate()
    }
}
