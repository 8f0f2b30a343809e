use ndarray::Array2;

use super::ComplexSpectrogram;
use crate::error::{Error, Result};

/// ERB-rate (in Cams) of a frequency in Hz.
pub fn erb_rate(hz: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * hz).log10()
}

pub fn erb_rate_to_hz(cams: f64) -> f64 {
    (10f64.powf(cams / 21.4) - 1.0) / 0.00437
}

/// Rectangular, non-overlapping bands that tile the one-sided spectrum.
///
/// Band `b` covers bins `edges[b]..edges[b + 1]`; the last band also owns
/// the Nyquist bin `edges[n_bands]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErbFilterbank {
    edges: Vec<usize>,
    sample_rate: u32,
    n_fft: usize,
}

pub fn make_erb_filterbank(sample_rate: u32, n_fft: usize, n_bands: usize) -> Result<ErbFilterbank> {
    if sample_rate == 0 || n_fft < 2 || n_fft % 2 != 0 {
        return Err(Error::invalid_config("sample rate must be positive and n_fft even"));
    }
    if n_bands < 2 {
        return Err(Error::invalid_config(format!("need at least 2 bands, got {n_bands}")));
    }
    let last = n_fft / 2;
    if n_bands > last {
        return Err(Error::invalid_config(format!(
            "{n_bands} bands do not fit in {} bins",
            last + 1
        )));
    }
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let top = erb_rate(sample_rate as f64 / 2.0);
    let mut edges: Vec<usize> = (0..=n_bands)
        .map(|b| {
            let hz = erb_rate_to_hz(top * b as f64 / n_bands as f64);
            ((hz / bin_hz).round() as usize).min(last)
        })
        .collect();
    edges[0] = 0;
    edges[n_bands] = last;
    // Collisions push the upper edge up; a final backward pass keeps the top
    // edges below Nyquist when the low end cascades.
    for b in 1..=n_bands {
        if edges[b] <= edges[b - 1] {
            edges[b] = edges[b - 1] + 1;
        }
    }
    edges[n_bands] = last;
    for b in (1..n_bands).rev() {
        if edges[b] >= edges[b + 1] {
            edges[b] = edges[b + 1] - 1;
        }
    }
    Ok(ErbFilterbank {
        edges,
        sample_rate,
        n_fft,
    })
}

impl ErbFilterbank {
    pub fn n_bands(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    /// Bin range of band `b` (inclusive of Nyquist for the last band).
    pub fn band_bins(&self, b: usize) -> std::ops::Range<usize> {
        let end = if b + 1 == self.n_bands() {
            self.n_bins()
        } else {
            self.edges[b + 1]
        };
        self.edges[b]..end
    }

    /// Band index owning every bin.
    pub fn bin_to_band(&self) -> Vec<usize> {
        let mut map = vec![0; self.n_bins()];
        for b in 0..self.n_bands() {
            for f in self.band_bins(b) {
                map[f] = b;
            }
        }
        map
    }

    fn check(&self, spec: &ComplexSpectrogram) -> Result<()> {
        if spec.config.n_fft != self.n_fft || spec.n_bins() != self.n_bins() {
            return Err(Error::invalid_input(format!(
                "spectrogram n_fft {} does not match filterbank n_fft {}",
                spec.config.n_fft, self.n_fft
            )));
        }
        Ok(())
    }
}

/// Frames × bands matrix of summed bin power.
pub fn erb_band_energies(spec: &ComplexSpectrogram, fb: &ErbFilterbank) -> Result<Array2<f64>> {
    fb.check(spec)?;
    let mut out = Array2::zeros((spec.n_frames(), fb.n_bands()));
    for (k, row) in spec.data.outer_iter().enumerate() {
        for b in 0..fb.n_bands() {
            out[[k, b]] = fb.band_bins(b).map(|f| row[f].norm_sqr()).sum();
        }
    }
    Ok(out)
}

/// Piecewise-constant expansion of band gains to every bin of the band.
pub fn expand_band_gains(gains: &Array2<f64>, fb: &ErbFilterbank) -> Result<Array2<f64>> {
    if gains.ncols() != fb.n_bands() {
        return Err(Error::invalid_input(format!(
            "gain matrix has {} bands, filterbank has {}",
            gains.ncols(),
            fb.n_bands()
        )));
    }
    if let Some(g) = gains.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(Error::invalid_input(format!("gain {g} outside [0, 1]")));
    }
    let map = fb.bin_to_band();
    let mut out = Array2::zeros((gains.nrows(), fb.n_bins()));
    for (k, mut row) in out.outer_iter_mut().enumerate() {
        for (f, v) in row.iter_mut().enumerate() {
            *v = gains[[k, map[f]]];
        }
    }
    Ok(out)
}
