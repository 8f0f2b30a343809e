use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::onset::ANALYSIS_RATE;
use super::peaks::{find_peaks, PeakCriteria};
use crate::error::{Error, Result};
use crate::signal::analyze_frames;
use crate::signal::AudioBuffer;

/// Relative floor for per-bin medians, -60 dB.
const MEDIAN_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaborConfig {
    /// Window lengths in ms, ascending; the last one is the coarse reference.
    pub supports_ms: Vec<f64>,
    /// How many of the shortest supports are summed into the overall track.
    pub fine_count: usize,
    pub analysis_window_s: f64,
    pub peak_distance_ms: f64,
    pub peak_prominence_frac: f64,
    pub validation_radius_ms: f64,
    /// A peak must reach this multiple of `fine_count` times the coarse
    /// track's maximum.
    pub height_factor: f64,
    /// Windows with more qualifying peaks, or more detected onsets, than
    /// this are texture and validate nothing.
    pub max_peaks_per_window: usize,
}

impl Default for GaborConfig {
    fn default() -> Self {
        Self {
            supports_ms: vec![32.0, 64.0, 128.0, 512.0],
            fine_count: 3,
            analysis_window_s: 5.0,
            peak_distance_ms: 100.0,
            peak_prominence_frac: 0.3,
            validation_radius_ms: 200.0,
            height_factor: 1.2,
            max_peaks_per_window: 5,
        }
    }
}

impl GaborConfig {
    pub fn validate(&self) -> Result<()> {
        if self.supports_ms.len() < 2 || self.supports_ms.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid_config("need at least two positive Gabor supports"));
        }
        if self.supports_ms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid_config("Gabor supports must be strictly ascending"));
        }
        if self.max_peaks_per_window == 0 {
            return Err(Error::invalid_config("max_peaks_per_window must be positive"));
        }
        if self.fine_count == 0 || self.fine_count >= self.supports_ms.len() {
            return Err(Error::invalid_config("fine_count must leave the largest support as reference"));
        }
        for (name, v) in [
            ("analysis_window_s", self.analysis_window_s),
            ("peak_distance_ms", self.peak_distance_ms),
            ("validation_radius_ms", self.validation_radius_ms),
            ("height_factor", self.height_factor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid_config(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.peak_prominence_frac) {
            return Err(Error::invalid_config("peak_prominence_frac must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Whitened mean coefficient magnitude per frame for one window length.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborTrack {
    pub support_ms: f64,
    pub hop_s: f64,
    pub values: Vec<f64>,
}

impl GaborTrack {
    fn at(&self, t: f64) -> f64 {
        let pos = t / self.hop_s;
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().unwrap_or(&0.0);
        }
        let f = pos - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaborScores {
    /// Start of the analysed window in the file, seconds.
    pub start_s: f64,
    pub tracks: Vec<GaborTrack>,
    /// Sum of the fine tracks on the finest time grid.
    pub overall: Vec<f64>,
    pub grid_hop_s: f64,
    pub fine_count: usize,
}

impl GaborScores {
    pub fn coarse(&self) -> &GaborTrack {
        self.tracks.last().expect("at least two tracks")
    }

    pub fn time_of(&self, grid_index: usize) -> f64 {
        self.start_s + grid_index as f64 * self.grid_hop_s
    }

    /// Peaks of the overall track that stand out from the coarse track,
    /// returned as file times in seconds. Empty when the window holds more
    /// peaks than `max_peaks_per_window`.
    pub fn validated_peaks(&self, cfg: &GaborConfig) -> Vec<f64> {
        let max = self.overall.iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return Vec::new();
        }
        let criteria = PeakCriteria {
            height: Some(cfg.height_factor * self.fine_count as f64 * self.coarse().max()),
            distance: Some((cfg.peak_distance_ms / 1000.0 / self.grid_hop_s).round().max(1.0) as usize),
            prominence: Some(cfg.peak_prominence_frac * max),
        };
        let peaks = find_peaks(&self.overall, &criteria);
        if peaks.len() > cfg.max_peaks_per_window {
            return Vec::new();
        }
        peaks
            .into_iter()
            .map(|p| self.time_of(p.index))
            .collect()
    }
}

/// Per-frame mean over bins of magnitudes divided by each bin's median over
/// time, so stationary content reads about 1 whatever its spectral tilt.
/// Bins far below the strongest median are floored to keep numerical noise
/// from being amplified.
fn whitened_means(mags: &Array2<f64>) -> Vec<f64> {
    let medians: Vec<f64> = mags
        .columns()
        .into_iter()
        .map(|col| {
            let mut v = col.to_vec();
            let mid = v.len() / 2;
            *v.select_nth_unstable_by(mid, f64::total_cmp).1
        })
        .collect();
    let floor = MEDIAN_FLOOR * medians.iter().copied().fold(0.0, f64::max);
    if floor == 0.0 {
        return vec![0.0; mags.nrows()];
    }
    let inv: Vec<f64> = medians.iter().map(|&m| 1.0 / m.max(floor)).collect();
    let n_bins = inv.len() as f64;
    mags.rows()
        .into_iter()
        .map(|row| row.iter().zip(&inv).map(|(m, w)| m * w).sum::<f64>() / n_bins)
        .collect()
}

/// Frames reaching into the reflected padding take the value of the nearest
/// frame lying wholly inside the segment.
fn hold_edges(values: &mut [f64], n: usize, hop: usize, len: usize) {
    let half = n / 2;
    let first = half.div_ceil(hop);
    let last = (len - half) / hop;
    if first > last || last >= values.len() {
        return;
    }
    let (lo, hi) = (values[first], values[last]);
    values[..first].fill(lo);
    values[last + 1..].fill(hi);
}

/// Unit-energy Gaussian window spanning ±3σ.
fn gabor_window(n: usize) -> Vec<f64> {
    let sigma = n as f64 / 6.0;
    let mid = (n as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..n).map(|i| (-0.5 * ((i as f64 - mid) / sigma).powi(2)).exp()).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.into_iter().map(|v| v / norm).collect()
}

/// Gabor tracks for the analysis window around `center_s`, clipped to the
/// file. Input must be at 16 kHz.
pub fn multi_gabor_scores(audio16k: &AudioBuffer, center_s: f64, cfg: &GaborConfig) -> Result<GaborScores> {
    cfg.validate()?;
    if audio16k.sample_rate() != ANALYSIS_RATE {
        return Err(Error::invalid_input(format!(
            "Gabor analysis expects {ANALYSIS_RATE} Hz input, got {}",
            audio16k.sample_rate()
        )));
    }
    let rate = ANALYSIS_RATE as f64;
    let half = cfg.analysis_window_s / 2.0;
    let start = ((center_s - half).max(0.0) * rate).round() as usize;
    let end = (((center_s + half) * rate).round() as usize).min(audio16k.len());
    let largest = (cfg.supports_ms.last().unwrap() / 1000.0 * rate).round() as usize;
    if end <= start || end - start < largest {
        return Err(Error::invalid_input(format!(
            "analysis window of {} samples is shorter than the {largest}-sample support",
            end.saturating_sub(start)
        )));
    }
    let segment = &audio16k.samples()[start..end];
    let tracks: Vec<GaborTrack> = cfg
        .supports_ms
        .iter()
        .map(|&ms| {
            let n = ((ms / 1000.0 * rate).round() as usize).max(4);
            let hop = (n / 4).max(1);
            let frames = analyze_frames(segment, &gabor_window(n), hop, segment.len() / hop + 1, true);
            let mags = frames.mapv(|c| c.norm());
            let mut values = whitened_means(&mags);
            hold_edges(&mut values, n, hop, segment.len());
            GaborTrack {
                support_ms: ms,
                hop_s: hop as f64 / rate,
                values,
            }
        })
        .collect();
    let finest = &tracks[0];
    let overall = (0..finest.values.len())
        .map(|i| {
            let t = i as f64 * finest.hop_s;
            tracks[..cfg.fine_count].iter().map(|tr| tr.at(t)).sum()
        })
        .collect();
    Ok(GaborScores {
        start_s: start as f64 / rate,
        grid_hop_s: finest.hop_s,
        tracks,
        overall,
        fine_count: cfg.fine_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect()
    }

    fn buffer(x: Vec<f64>) -> AudioBuffer {
        AudioBuffer::new(x, ANALYSIS_RATE).unwrap()
    }

    #[test]
    fn window_has_unit_energy() {
        for n in [512, 1024, 8192] {
            let e: f64 = gabor_window(n).iter().map(|v| v * v).sum();
            assert!((e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn white_noise_is_flat() {
        let x = buffer(white(16_000 * 6, 1));
        let s = multi_gabor_scores(&x, 3.0, &GaborConfig::default()).unwrap();
        let mean = s.overall.iter().sum::<f64>() / s.overall.len() as f64;
        let var = s.overall.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s.overall.len() as f64;
        let cv = var.sqrt() / mean;
        assert!(cv < 0.5, "cv {cv:.3}");
        // Unit-energy windows read the same power at every scale.
        let coarse_mean = s.coarse().values.iter().sum::<f64>() / s.coarse().values.len() as f64;
        assert!((mean / (3.0 * coarse_mean) - 1.0).abs() < 0.1);
        assert!(s.validated_peaks(&GaborConfig::default()).is_empty());
    }

    #[test]
    fn click_peaks_at_centre() {
        let mut x = white(16_000 * 6, 2);
        x.iter_mut().for_each(|v| *v *= 0.1);
        for (i, v) in x[48_000..48_016].iter_mut().enumerate() {
            *v += if i % 2 == 0 { 0.8 } else { -0.8 };
        }
        let s = multi_gabor_scores(&buffer(x), 3.0, &GaborConfig::default()).unwrap();
        let (imax, _) = s
            .overall
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        assert!((s.time_of(imax) - 3.0).abs() <= 0.016, "{}", s.time_of(imax));
        let peaks = s.validated_peaks(&GaborConfig::default());
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0] - 3.0).abs() <= 0.016);
    }

    #[test]
    fn steady_tone_has_no_validated_peak() {
        let x: Vec<f64> = (0..16_000 * 6)
            .map(|i| 0.9 * (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16_000.0).sin())
            .collect();
        let s = multi_gabor_scores(&buffer(x), 3.0, &GaborConfig::default()).unwrap();
        for tr in &s.tracks {
            let min = tr.values.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min > 0.9 * tr.max(), "{} ms: {min} vs {}", tr.support_ms, tr.max());
        }
        assert!(s.validated_peaks(&GaborConfig::default()).is_empty());
    }

    #[test]
    fn short_window_is_rejected() {
        let x = buffer(white(4000, 3));
        assert!(matches!(
            multi_gabor_scores(&x, 0.1, &GaborConfig::default()),
            Err(Error::InvalidInput(_))
        ));
    }
}
