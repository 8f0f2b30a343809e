use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{analyze_frames, resample, AudioBuffer, WindowKind};

/// Analysis rate for onset detection and Gabor validation.
pub const ANALYSIS_RATE: u32 = 16_000;

/// What the `delta_frac` threshold is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    /// Normalised onset envelope must exceed its local mean by `delta_frac`.
    #[default]
    Envelope,
    /// Waveform peak near the onset must reach `delta_frac` of the file's peak.
    Waveform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnsetConfig {
    pub hop: usize,
    pub n_fft: usize,
    pub delta_frac: f64,
    pub delta_mode: DeltaMode,
    pub min_gap_ms: f64,
    /// Envelopes whose largest mean flux stays below this many dB carry no
    /// onsets at all.
    pub min_strength_db: f64,
    /// Magnitudes are compressed as `20·log10(1 + compression·|X|/max|X|)`.
    pub compression: f64,
}

impl Default for OnsetConfig {
    fn default() -> Self {
        Self {
            hop: 512,
            n_fft: 1024,
            delta_frac: 0.2,
            delta_mode: DeltaMode::Envelope,
            min_gap_ms: 50.0,
            min_strength_db: 1.0,
            compression: 100.0,
        }
    }
}

impl OnsetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 2 || self.hop == 0 || self.hop > self.n_fft {
            return Err(Error::invalid_config(format!(
                "onset analysis needs 0 < hop <= n_fft, got hop={} n_fft={}",
                self.hop, self.n_fft
            )));
        }
        if !(0.0..1.0).contains(&self.delta_frac) {
            return Err(Error::invalid_config("delta_frac must be in [0, 1)"));
        }
        if !(self.min_gap_ms >= 0.0) || !(self.compression > 0.0) || !(self.min_strength_db >= 0.0) {
            return Err(Error::invalid_config("onset gap and strength must be non-negative, compression positive"));
        }
        Ok(())
    }

    fn frame_seconds(&self) -> f64 {
        self.hop as f64 / ANALYSIS_RATE as f64
    }
}

/// Detected onsets; `strengths` are normalised envelope values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OnsetList {
    pub times: Vec<f64>,
    pub strengths: Vec<f64>,
}

impl OnsetList {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub(crate) fn to_analysis_rate(audio: &AudioBuffer) -> Result<AudioBuffer> {
    resample(audio, ANALYSIS_RATE)
}

/// Mean positive increase of compressed log magnitude per bin, one value
/// per frame, in dB.
pub fn onset_envelope(audio16k: &AudioBuffer, cfg: &OnsetConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if audio16k.sample_rate() != ANALYSIS_RATE {
        return Err(Error::invalid_input(format!(
            "onset envelope expects {ANALYSIS_RATE} Hz input, got {}",
            audio16k.sample_rate()
        )));
    }
    let window = WindowKind::Hann.coefficients(cfg.n_fft);
    let n_frames = audio16k.len() / cfg.hop + 1;
    let spec = analyze_frames(audio16k.samples(), &window, cfg.hop, n_frames, true);
    let peak = spec.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let scale = if peak > 0.0 { cfg.compression / peak } else { 0.0 };
    let db = spec.mapv(|c| 20.0 * (scale * c.norm()).ln_1p() / std::f64::consts::LN_10);
    let n_bins = db.ncols() as f64;
    let mut env = vec![0.0; db.nrows()];
    // Flux is measured only between frames lying wholly inside the signal.
    let first = (cfg.n_fft / 2).div_ceil(cfg.hop) + 1;
    let end = if audio16k.len() >= cfg.n_fft / 2 {
        ((audio16k.len() - cfg.n_fft / 2) / cfg.hop + 1).min(db.nrows())
    } else {
        0
    };
    for k in first..end {
        let (prev, cur) = (db.row(k - 1), db.row(k));
        env[k] = cur.iter().zip(prev).map(|(c, p)| (c - p).max(0.0)).sum::<f64>() / n_bins;
    }
    // Padded frames repeat the nearest valid value so they neither fire nor
    // drag down the local mean used in peak picking.
    if first < end {
        let (head, tail) = (env[first], env[end - 1]);
        env[..first].fill(head);
        env[end..].fill(tail);
    }
    Ok(env)
}

/// Onset times in seconds. Input at any rate is resampled to 16 kHz first.
pub fn detect_onsets(audio: &AudioBuffer, cfg: &OnsetConfig) -> Result<OnsetList> {
    cfg.validate()?;
    if audio.is_empty() {
        return Ok(OnsetList::default());
    }
    let x = to_analysis_rate(audio)?;
    let env = onset_envelope(&x, cfg)?;
    let max = env.iter().copied().fold(0.0, f64::max);
    if max < cfg.min_strength_db {
        return Ok(OnsetList::default());
    }
    let norm: Vec<f64> = env.iter().map(|v| v / max).collect();

    let frame_s = cfg.frame_seconds();
    let avg_radius = (0.1 / frame_s).round().max(1.0) as usize;
    let wait = (cfg.min_gap_ms / 1000.0 / frame_s).ceil() as usize;
    let peak_amp = x.peak();
    let mut frames = Vec::new();
    let mut last: Option<usize> = None;
    for k in 1..norm.len() {
        let v = norm[k];
        let is_max = v >= norm[k - 1] && norm.get(k + 1).is_none_or(|&n| v > n);
        if !is_max || v <= 0.0 {
            continue;
        }
        let lo = k.saturating_sub(avg_radius);
        let hi = (k + avg_radius + 1).min(norm.len());
        let mean = norm[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        let passes = match cfg.delta_mode {
            DeltaMode::Envelope => v >= mean + cfg.delta_frac,
            DeltaMode::Waveform => v >= mean && frame_peak(&x, k, cfg) >= cfg.delta_frac * peak_amp,
        };
        if passes && last.is_none_or(|l| k - l >= wait) {
            frames.push(k);
            last = Some(k);
        }
    }

    let mut out = OnsetList::default();
    for k in frames {
        let t = refine(&x, k, cfg);
        if out.times.last().is_some_and(|&prev| t <= prev) {
            continue;
        }
        out.times.push(t);
        out.strengths.push(norm[k]);
    }
    Ok(out)
}

fn frame_span(x: &AudioBuffer, k: usize, cfg: &OnsetConfig) -> (usize, usize) {
    let centre = k * cfg.hop;
    let lo = centre.saturating_sub(cfg.n_fft / 2).min(x.len());
    let hi = (centre + cfg.n_fft / 2).min(x.len());
    (lo, hi)
}

fn frame_peak(x: &AudioBuffer, k: usize, cfg: &OnsetConfig) -> f64 {
    let (lo, hi) = frame_span(x, k, cfg);
    x.samples()[lo..hi].iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Sharpens a frame-level onset to the 1 ms block inside the frame whose
/// energy rises most above the preceding 16 ms.
fn refine(x: &AudioBuffer, k: usize, cfg: &OnsetConfig) -> f64 {
    const BLOCK: usize = (ANALYSIS_RATE / 1000) as usize;
    const HISTORY: usize = 16;
    let (lo, hi) = frame_span(x, k, cfg);
    let s = x.samples();
    let block_energy = |b: usize| -> f64 {
        let start = b * BLOCK;
        s[start.min(s.len())..(start + BLOCK).min(s.len())].iter().map(|v| v * v).sum()
    };
    let mut best = (k * cfg.hop) as f64;
    let mut best_score = f64::NEG_INFINITY;
    for b in lo / BLOCK..hi.div_ceil(BLOCK) {
        let first = b.saturating_sub(HISTORY);
        let history = if b > first {
            (first..b).map(block_energy).sum::<f64>() / (b - first) as f64
        } else {
            0.0
        };
        let score = block_energy(b) / (history + 1e-20);
        if score > best_score {
            best_score = score;
            best = (b * BLOCK) as f64;
        }
    }
    best / ANALYSIS_RATE as f64
}
