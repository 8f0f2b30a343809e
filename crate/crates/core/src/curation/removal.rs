use serde::{Deserialize, Serialize};

use super::gabor::{multi_gabor_scores, GaborConfig};
use super::onset::{detect_onsets, to_analysis_rate, OnsetConfig, OnsetList};
use crate::error::{Error, Result};
use crate::signal::AudioBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemovalConfig {
    pub pre_ms: f64,
    pub post_ms: f64,
    pub crossfade_ms: f64,
}

impl Default for RemovalConfig {
    fn default() -> Self {
        Self {
            pre_ms: 50.0,
            post_ms: 450.0,
            crossfade_ms: 50.0,
        }
    }
}

impl RemovalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pre_ms >= 0.0 && self.post_ms > 0.0 && self.crossfade_ms >= 0.0) {
            return Err(Error::invalid_config("removal interval must be non-empty"));
        }
        if self.crossfade_ms > self.pre_ms + self.post_ms {
            return Err(Error::invalid_config("crossfade longer than the removed interval"));
        }
        Ok(())
    }
}

/// Everything background curation needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurationConfig {
    pub onset: OnsetConfig,
    pub gabor: GaborConfig,
    pub removal: RemovalConfig,
}

impl CurationConfig {
    pub fn validate(&self) -> Result<()> {
        self.onset.validate()?;
        self.gabor.validate()?;
        self.removal.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemovedSegment {
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    pub sample_rate: u32,
    pub original_duration_s: f64,
    pub output_duration_s: f64,
    pub onsets_found: usize,
    pub onsets_validated: usize,
    pub onset_times_s: Vec<f64>,
    pub validated_times_s: Vec<f64>,
    pub removed: Vec<RemovedSegment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

/// Sorted, disjoint sample ranges; ranges closer than `gap` are merged.
fn merge_intervals(mut spans: Vec<(usize, usize)>, gap: usize) -> Vec<(usize, usize)> {
    spans.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (a, b) in spans {
        match out.last_mut() {
            Some(last) if a <= last.1 + gap => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Cuts each `[a, b)` span and joins interior edges with an equal-power
/// crossfade of `crossfade` samples, taken from the start and end of the
/// removed span. Spans touching the file edges are dropped without a fade.
pub fn remove_spans(samples: &[f64], spans: &[(usize, usize)], crossfade: usize) -> Vec<f64> {
    let n = samples.len();
    let mut out = Vec::with_capacity(n);
    let mut cursor = 0;
    for &(a, b) in spans {
        let (a, b) = (a.min(n), b.min(n));
        out.extend_from_slice(&samples[cursor..a]);
        cursor = b;
        if a == 0 || b == n {
            continue;
        }
        let cf = crossfade.min(b - a);
        for i in 0..cf {
            let theta = std::f64::consts::FRAC_PI_2 * (i as f64 + 0.5) / cf as f64;
            out.push(samples[a + i] * theta.cos() + samples[b - cf + i] * theta.sin());
        }
    }
    out.extend_from_slice(&samples[cursor.min(n)..]);
    out
}

/// Validates `onsets` against the Gabor tracks and excises confirmed impulses.
pub fn validate_and_remove(
    background: &AudioBuffer,
    onsets: &OnsetList,
    cfg: &CurationConfig,
) -> Result<(AudioBuffer, CurationReport)> {
    cfg.validate()?;
    let rate = background.sample_rate() as f64;
    let mut report = CurationReport {
        sample_rate: background.sample_rate(),
        original_duration_s: background.duration_s(),
        output_duration_s: background.duration_s(),
        onsets_found: onsets.len(),
        onset_times_s: onsets.times.clone(),
        ..Default::default()
    };
    let interval_s = (cfg.removal.pre_ms + cfg.removal.post_ms) / 1000.0;
    if background.duration_s() < interval_s {
        report.rejected = Some(format!(
            "{:.3} s is shorter than the {interval_s:.3} s removal interval",
            background.duration_s()
        ));
        return Ok((background.clone(), report));
    }
    if onsets.is_empty() {
        return Ok((background.clone(), report));
    }

    let x16 = to_analysis_rate(background)?;
    let radius = cfg.gabor.validation_radius_ms / 1000.0;
    let half_window = cfg.gabor.analysis_window_s / 2.0;
    for &t in &onsets.times {
        let nearby = onsets.times.iter().filter(|&&o| (o - t).abs() <= half_window).count();
        if nearby > cfg.gabor.max_peaks_per_window {
            continue;
        }
        let scores = match multi_gabor_scores(&x16, t, &cfg.gabor) {
            Ok(s) => s,
            Err(Error::InvalidInput(msg)) => {
                report.rejected = Some(msg);
                return Ok((background.clone(), report));
            }
            Err(e) => return Err(e),
        };
        if scores.validated_peaks(&cfg.gabor).iter().any(|&p| (p - t).abs() <= radius) {
            report.validated_times_s.push(t);
        }
    }
    report.onsets_validated = report.validated_times_s.len();
    if report.validated_times_s.is_empty() {
        return Ok((background.clone(), report));
    }

    let n = background.len();
    let crossfade = (cfg.removal.crossfade_ms / 1000.0 * rate).round() as usize;
    let spans: Vec<(usize, usize)> = report
        .validated_times_s
        .iter()
        .map(|&t| {
            let a = ((t - cfg.removal.pre_ms / 1000.0) * rate).round().max(0.0) as usize;
            let b = (((t + cfg.removal.post_ms / 1000.0) * rate).round() as usize).min(n);
            (a.min(n), b)
        })
        .collect();
    let spans = merge_intervals(spans, crossfade);
    let cleaned = remove_spans(background.samples(), &spans, crossfade);
    report.removed = spans
        .iter()
        .map(|&(a, b)| RemovedSegment {
            start_s: a as f64 / rate,
            end_s: b as f64 / rate,
        })
        .collect();
    report.output_duration_s = cleaned.len() as f64 / rate;
    Ok((AudioBuffer::new(cleaned, background.sample_rate())?, report))
}

/// Onset detection followed by validation and removal.
pub fn curate_background(background: &AudioBuffer, cfg: &CurationConfig) -> Result<(AudioBuffer, CurationReport)> {
    let onsets = detect_onsets(background, &cfg.onset)?;
    validate_and_remove(background, &onsets, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merging() {
        assert_eq!(merge_intervals(vec![(50, 60), (0, 10), (8, 20)], 0), [(0, 20), (50, 60)]);
        assert_eq!(merge_intervals(vec![(0, 10), (14, 20)], 5), [(0, 20)]);
        assert_eq!(merge_intervals(vec![(0, 10), (16, 20)], 5), [(0, 10), (16, 20)]);
    }

    #[test]
    fn cut_lengths_are_exact() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let out = remove_spans(&x, &[(100, 300), (500, 600)], 20);
        assert_eq!(out.len(), 1000 - 200 - 100 + 2 * 20);
        assert_eq!(&out[..100], &x[..100]);
        assert_eq!(*out.last().unwrap(), 999.0);
        // Edge spans get no crossfade.
        let out = remove_spans(&x, &[(0, 100), (900, 1000)], 20);
        assert_eq!(out, x[100..900].to_vec());
    }

    #[test]
    fn crossfade_is_equal_power() {
        let ones = vec![1.0; 1000];
        let out = remove_spans(&ones, &[(200, 600)], 100);
        // cos + sin of uncorrelated unit signals keeps power; for identical
        // signals the sum peaks at sqrt(2) mid-fade.
        let mid = out[250];
        assert!((mid - 2f64.sqrt()).abs() < 0.02);
        let theta = |i: usize| std::f64::consts::FRAC_PI_2 * (i as f64 + 0.5) / 100.0;
        for i in 0..100 {
            let (c, s) = (theta(i).cos(), theta(i).sin());
            assert!((c * c + s * s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn no_onsets_means_untouched_output() {
        let x = AudioBuffer::new((0..44_100).map(|i| (i as f64 * 0.01).sin() * 0.1).collect(), 44_100).unwrap();
        let (out, report) = validate_and_remove(&x, &OnsetList::default(), &CurationConfig::default()).unwrap();
        assert_eq!(out, x);
        assert!(report.removed.is_empty());
    }

    #[test]
    fn short_files_are_rejected() {
        let x = AudioBuffer::zeros(4410, 44_100);
        let onsets = OnsetList {
            times: vec![0.05],
            strengths: vec![1.0],
        };
        let (_, report) = validate_and_remove(&x, &onsets, &CurationConfig::default()).unwrap();
        assert!(report.rejected.is_some());
    }

    #[test]
    fn dense_onsets_are_texture() {
        let rate = 44_100;
        let mut x = vec![0.0; 3 * rate];
        let times: Vec<f64> = (0..20).map(|k| 0.2 + 0.13 * k as f64).collect();
        for &t in &times {
            let i = (t * rate as f64) as usize;
            x[i] = 1.0;
            x[i + 1] = -0.8;
        }
        let x = AudioBuffer::new(x, rate as u32).unwrap();
        let onsets = OnsetList {
            strengths: vec![1.0; times.len()],
            times,
        };
        let (out, report) = validate_and_remove(&x, &onsets, &CurationConfig::default()).unwrap();
        assert!(report.validated_times_s.is_empty());
        assert_eq!(out, x);
    }
}
