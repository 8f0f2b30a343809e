use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::AudioBuffer;
use crate::util::percentile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImpulsivenessConfig {
    pub frame_ms: f64,
    /// Silence threshold as a fraction of the envelope percentile below.
    pub threshold_frac: f64,
    pub envelope_percentile: f64,
    /// Trimmed events shorter than this are accepted outright.
    pub max_short_s: f64,
    /// Boundary between the two silence-ratio requirements.
    pub long_s: f64,
    pub min_silence_ratio: f64,
    pub min_silence_ratio_long: f64,
}

impl Default for ImpulsivenessConfig {
    fn default() -> Self {
        Self {
            frame_ms: 10.0,
            threshold_frac: 0.05,
            envelope_percentile: 99.0,
            max_short_s: 0.5,
            long_s: 1.0,
            min_silence_ratio: 0.5,
            min_silence_ratio_long: 0.75,
        }
    }
}

impl ImpulsivenessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_ms > 0.0) || !(0.0..=100.0).contains(&self.envelope_percentile) {
            return Err(Error::invalid_config("frame_ms must be positive and the percentile in [0, 100]"));
        }
        if !(self.threshold_frac > 0.0 && self.threshold_frac < 1.0) {
            return Err(Error::invalid_config("threshold_frac must be in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    Silent,
    Sustained {
        duration_s: f64,
        silence_ratio: f64,
        required: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

/// Decides whether an isolated event is short or sparse enough to count as
/// impulsive.
pub fn impulsiveness_filter(event: &AudioBuffer, cfg: &ImpulsivenessConfig) -> Result<Verdict> {
    cfg.validate()?;
    let frame = ((cfg.frame_ms / 1000.0 * event.sample_rate() as f64).round() as usize).max(1);
    let env: Vec<f64> = event
        .samples()
        .chunks(frame)
        .map(|c| (c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64).sqrt())
        .collect();
    if env.iter().all(|&v| v == 0.0) {
        return Ok(Verdict::Reject(RejectReason::Silent));
    }
    let threshold = cfg.threshold_frac * percentile(&env, cfg.envelope_percentile);
    let active = |v: f64| v > threshold;
    let first = env.iter().position(|&v| active(v)).unwrap();
    let last = env.iter().rposition(|&v| active(v)).unwrap();
    let trimmed = &env[first..=last];
    let samples = ((last + 1) * frame).min(event.len()) - first * frame;
    let duration_s = samples as f64 / event.sample_rate() as f64;
    if duration_s < cfg.max_short_s {
        return Ok(Verdict::Accept);
    }
    let silence_ratio = trimmed.iter().filter(|&&v| !active(v)).count() as f64 / trimmed.len() as f64;
    let required = if duration_s < cfg.long_s {
        cfg.min_silence_ratio
    } else {
        cfg.min_silence_ratio_long
    };
    Ok(if silence_ratio >= required {
        Verdict::Accept
    } else {
        Verdict::Reject(RejectReason::Sustained {
            duration_s,
            silence_ratio,
            required,
        })
    })
}
