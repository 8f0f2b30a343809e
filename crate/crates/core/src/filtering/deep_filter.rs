use ndarray::{Array2, Array3};
use num_complex::Complex64;

use super::{ErbGains, TwoStageParams};
use crate::error::{Error, Result};
use crate::signal::{expand_band_gains, ComplexSpectrogram, ErbFilterbank};

/// Complex FIR taps applied along time, one filter per low-band bin.
#[derive(Debug, Clone, PartialEq)]
pub enum DeepFilter {
    /// frames × taps × bins, a different filter for every frame.
    TimeVarying(Array3<Complex64>),
    /// taps × bins, shared by all frames.
    Static(Array2<Complex64>),
}

impl DeepFilter {
    pub fn n_taps(&self) -> usize {
        match self {
            DeepFilter::TimeVarying(c) => c.dim().1,
            DeepFilter::Static(c) => c.nrows(),
        }
    }

    pub fn n_bins(&self) -> usize {
        match self {
            DeepFilter::TimeVarying(c) => c.dim().2,
            DeepFilter::Static(c) => c.ncols(),
        }
    }

    /// Identity filter: unit tap at lag 0.
    pub fn identity(n_taps: usize, n_bins: usize) -> Self {
        let mut c = Array2::zeros((n_taps, n_bins));
        c.row_mut(0).fill(Complex64::new(1.0, 0.0));
        DeepFilter::Static(c)
    }

    #[inline]
    fn tap(&self, k: usize, m: usize, f: usize) -> Complex64 {
        match self {
            DeepFilter::TimeVarying(c) => c[[k, m, f]],
            DeepFilter::Static(c) => c[[m, f]],
        }
    }
}

/// One deep filter per source.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepFilterSet {
    pub impulsive: DeepFilter,
    pub stationary: DeepFilter,
}

/// Stage 1: multiply the mixture by each source's expanded band gains.
/// Returns `(impulsive, stationary)`.
pub fn apply_erb_gains(
    mix: &ComplexSpectrogram,
    gains: &ErbGains,
    fb: &ErbFilterbank,
) -> Result<(ComplexSpectrogram, ComplexSpectrogram)> {
    let expected = (mix.n_frames(), fb.n_bands());
    if gains.impulsive.dim() != expected {
        return Err(Error::invalid_input(format!(
            "gains have shape {:?}, expected {expected:?}",
            gains.impulsive.dim()
        )));
    }
    if mix.config.n_fft != fb.n_fft() {
        return Err(Error::invalid_input("filterbank and spectrogram disagree on n_fft"));
    }
    let imp = mix.apply_mask(&expand_band_gains(&gains.impulsive, fb)?)?;
    let stat = mix.apply_mask(&expand_band_gains(&gains.stationary, fb)?)?;
    Ok((imp, stat))
}

/// Stage 2: causal complex FIR along time on bins below `n_feat`:
///
/// `out(k, f) = Σ_{m=0..=M} C(k, m, f) · in(k − m, f)`, with frames before
/// the start treated as zero. Bins at or above `n_feat` pass unchanged.
pub fn apply_deep_filter(
    stage1: &ComplexSpectrogram,
    filter: &DeepFilter,
    params: &TwoStageParams,
) -> Result<ComplexSpectrogram> {
    params.validate(stage1.config.n_fft)?;
    if filter.n_taps() != params.n_taps() {
        return Err(Error::invalid_input(format!(
            "filter has {} taps, order {} needs {}",
            filter.n_taps(),
            params.filter_order,
            params.n_taps()
        )));
    }
    if filter.n_bins() != params.n_feat {
        return Err(Error::invalid_input(format!(
            "filter covers {} bins, expected {}",
            filter.n_bins(),
            params.n_feat
        )));
    }
    if let DeepFilter::TimeVarying(c) = filter {
        if c.dim().0 != stage1.n_frames() {
            return Err(Error::invalid_input(format!(
                "filter has {} frames, spectrogram has {}",
                c.dim().0,
                stage1.n_frames()
            )));
        }
    }
    let input = &stage1.data;
    let mut out = input.clone();
    let n_frames = stage1.n_frames();
    for k in 0..n_frames {
        let max_m = params.filter_order.min(k);
        for f in 0..params.n_feat {
            let mut acc = Complex64::default();
            for m in 0..=max_m {
                acc += filter.tap(k, m, f) * input[[k - m, f]];
            }
            out[[k, f]] = acc;
        }
    }
    Ok(stage1.with_data(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{make_erb_filterbank, stft, AudioBuffer, StftConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_spec(len: usize, seed: u64) -> ComplexSpectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        stft(&AudioBuffer::new(x, 44100).unwrap(), &StftConfig::default()).unwrap()
    }

    fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    /// Direct triple loop with explicit bounds checks.
    fn naive(input: &Array2<Complex64>, c: &Array3<Complex64>, n_feat: usize) -> Array2<Complex64> {
        let (frames, taps, _) = c.dim();
        let mut out = input.clone();
        for k in 0..frames {
            for f in 0..n_feat {
                let mut s = Complex64::default();
                for m in 0..taps {
                    if k >= m {
                        s += c[[k, m, f]] * input[[k - m, f]];
                    }
                }
                out[[k, f]] = s;
            }
        }
        out
    }

    #[test]
    fn erb_gain_cases() {
        let mix = noise_spec(20_000, 1);
        let fb = make_erb_filterbank(44100, 2048, 24).unwrap();
        let ones = Array2::from_elem((mix.n_frames(), 24), 1.0);
        let zeros = Array2::zeros((mix.n_frames(), 24));

        let (i, s) = apply_erb_gains(&mix, &ErbGains::new(ones.clone(), ones.clone()).unwrap(), &fb).unwrap();
        assert_eq!(i.data, mix.data);
        assert_eq!(s.data, mix.data);

        let (i, _) = apply_erb_gains(&mix, &ErbGains::new(zeros.clone(), ones.clone()).unwrap(), &fb).unwrap();
        assert!(i.data.iter().all(|c| c.norm() == 0.0));

        let mut hot = zeros.clone();
        hot.column_mut(5).fill(1.0);
        let (i, _) = apply_erb_gains(&mix, &ErbGains::new(hot, ones).unwrap(), &fb).unwrap();
        let band = fb.band_bins(5);
        for ((_, f), v) in i.data.indexed_iter() {
            if !band.contains(&f) {
                assert_eq!(v.norm(), 0.0);
            }
        }
        for k in 0..mix.n_frames() {
            for f in band.clone() {
                assert_eq!(i.data[[k, f]], mix.data[[k, f]]);
            }
        }

        let wrong = Array2::from_elem((3, 24), 1.0);
        assert!(apply_erb_gains(&mix, &ErbGains::new(wrong.clone(), wrong).unwrap(), &fb).is_err());
    }

    #[test]
    fn identity_filter_is_identity() {
        let spec = noise_spec(30_000, 2);
        let p = TwoStageParams::default();
        let out = apply_deep_filter(&spec, &DeepFilter::identity(p.n_taps(), p.n_feat), &p).unwrap();
        assert_eq!(out.data, spec.data);
    }

    #[test]
    fn one_frame_delay() {
        let spec = noise_spec(30_000, 3);
        let p = TwoStageParams::default();
        let mut c = Array2::zeros((p.n_taps(), p.n_feat));
        c.row_mut(1).fill(Complex64::new(1.0, 0.0));
        let out = apply_deep_filter(&spec, &DeepFilter::Static(c.clone()), &p).unwrap();
        let tv = Array3::from_shape_fn((spec.n_frames(), p.n_taps(), p.n_feat), |(_, m, f)| c[[m, f]]);
        assert_eq!(out.data, naive(&spec.data, &tv, p.n_feat));
        for f in 0..p.n_feat {
            assert_eq!(out.data[[0, f]], Complex64::default());
            for k in 1..spec.n_frames() {
                assert_eq!(out.data[[k, f]], spec.data[[k - 1, f]]);
            }
        }
        for f in p.n_feat..spec.n_bins() {
            assert_eq!(out.data.column(f), spec.data.column(f));
        }
    }

    #[test]
    fn random_time_varying_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = noise_spec(40_000, 4);
        let p = TwoStageParams::default();
        let c = Array3::from_shape_fn((spec.n_frames(), p.n_taps(), p.n_feat), |_| random_complex(&mut rng));
        let out = apply_deep_filter(&spec, &DeepFilter::TimeVarying(c.clone()), &p).unwrap();
        let want = naive(&spec.data, &c, p.n_feat);
        let scale = want.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in out.data.iter().zip(want.iter()) {
            assert!((a - b).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn tap_and_shape_mismatches() {
        let spec = noise_spec(10_000, 5);
        let p = TwoStageParams::default();
        let short = DeepFilter::identity(3, p.n_feat);
        assert!(matches!(apply_deep_filter(&spec, &short, &p), Err(Error::InvalidInput(_))));
        let narrow = DeepFilter::identity(p.n_taps(), 10);
        assert!(matches!(apply_deep_filter(&spec, &narrow, &p), Err(Error::InvalidInput(_))));
        let frames = DeepFilter::TimeVarying(Array3::zeros((2, p.n_taps(), p.n_feat)));
        assert!(matches!(apply_deep_filter(&spec, &frames, &p), Err(Error::InvalidInput(_))));
    }
}
