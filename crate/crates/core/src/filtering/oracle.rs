use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;

use super::TwoStageParams;
use crate::error::{Error, Result};
use crate::signal::{erb_band_energies, ComplexSpectrogram, ErbFilterbank};

/// Ridge as a fraction of each bin's input power.
pub const DEFAULT_RIDGE: f64 = 1e-8;

const ENERGY_FLOOR: f64 = 1e-12;

/// Band gains that map the mixture's band energy onto the source's:
/// `min(1, sqrt(E_source / max(E_mix, 1e-12)))`.
pub fn oracle_erb_gains(
    mix: &ComplexSpectrogram,
    source: &ComplexSpectrogram,
    fb: &ErbFilterbank,
) -> Result<Array2<f64>> {
    if !mix.same_shape(source) {
        return Err(Error::invalid_input("mixture and source spectrograms are not aligned"));
    }
    let e_mix = erb_band_energies(mix, fb)?;
    let e_src = erb_band_energies(source, fb)?;
    let mut g = e_src;
    g.zip_mut_with(&e_mix, |s, &m| *s = (*s / m.max(ENERGY_FLOOR)).sqrt().min(1.0));
    Ok(g)
}

/// Utterance-level least-squares deep filter for one source.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleFilterFit {
    /// taps × bins, shared by all frames.
    pub taps: Array2<Complex64>,
    /// Per bin `Σ_k |target − filtered|²`.
    pub residual: Vec<f64>,
    /// Per bin residual plus ridge penalty `λ‖c‖²`, the minimised quantity.
    pub objective: Vec<f64>,
}

/// Fits, for each bin `f < n_feat`, the taps minimising
/// `Σ_k |target(k,f) − Σ_m C(m,f)·stage1(k−m,f)|² + λ_f ‖C(·,f)‖²`
/// with `λ_f = ridge · Σ_k |stage1(k,f)|²`.
///
/// The normal equations use the exact (covariance-method) Hermitian Gram
/// matrix so planted filters are recovered exactly. Bins whose input is
/// identically zero get zero taps.
pub fn oracle_deep_filters(
    stage1: &ComplexSpectrogram,
    target: &ComplexSpectrogram,
    params: &TwoStageParams,
    ridge: f64,
) -> Result<OracleFilterFit> {
    params.validate(stage1.config.n_fft)?;
    if !stage1.same_shape(target) {
        return Err(Error::invalid_input("stage-1 and target spectrograms are not aligned"));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::invalid_input(format!("ridge must be finite and >= 0, got {ridge}")));
    }
    let n_taps = params.n_taps();
    let mut taps = Array2::zeros((n_taps, params.n_feat));
    let mut residual = Vec::with_capacity(params.n_feat);
    let mut objective = Vec::with_capacity(params.n_feat);
    for f in 0..params.n_feat {
        let s = stage1.data.column(f);
        let t = target.data.column(f);
        let power: f64 = s.iter().map(|c| c.norm_sqr()).sum();
        let (c, lambda) = if power == 0.0 {
            (vec![Complex64::default(); n_taps], 0.0)
        } else {
            let lambda = ridge * power;
            let (mut gram, rhs) = normal_equations(s, t, n_taps);
            for m in 0..n_taps {
                gram[m * n_taps + m] += lambda;
            }
            let c = cholesky_solve(&mut gram, &rhs, n_taps).ok_or(Error::SingularSystem { bin: f })?;
            (c, lambda)
        };
        let res = fir_residual(s, t, &c);
        let penalty: f64 = c.iter().map(|v| v.norm_sqr()).sum::<f64>() * lambda;
        for (m, v) in c.into_iter().enumerate() {
            taps[[m, f]] = v;
        }
        residual.push(res);
        objective.push(res + penalty);
    }
    Ok(OracleFilterFit {
        taps,
        residual,
        objective,
    })
}

/// Row-major Hermitian Gram matrix `G[m][n] = Σ_k conj(s[k−m]) s[k−n]` and
/// right-hand side `r[m] = Σ_k conj(s[k−m]) t[k]`, zero before the start.
fn normal_equations(
    s: ArrayView1<Complex64>,
    t: ArrayView1<Complex64>,
    n_taps: usize,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let k_len = s.len();
    let mut gram = vec![Complex64::default(); n_taps * n_taps];
    for m in 0..n_taps {
        for n in m..n_taps {
            let mut acc = Complex64::default();
            for k in n.max(m)..k_len {
                acc += s[k - m].conj() * s[k - n];
            }
            gram[m * n_taps + n] = acc;
            gram[n * n_taps + m] = acc.conj();
        }
    }
    let rhs = (0..n_taps)
        .map(|m| (m..k_len).map(|k| s[k - m].conj() * t[k]).sum())
        .collect();
    (gram, rhs)
}

/// In-place complex Cholesky `A = L Lᴴ` followed by two triangular solves.
/// Returns `None` when a pivot is not safely positive.
fn cholesky_solve(a: &mut [Complex64], b: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    let max_diag = (0..n).map(|i| a[i * n + i].re).fold(0.0, f64::max);
    if max_diag <= 0.0 {
        return None;
    }
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for p in 0..j {
            d -= a[j * n + p].norm_sqr();
        }
        if d <= max_diag * 1e-13 {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for p in 0..j {
                v -= a[i * n + p] * a[j * n + p].conj();
            }
            a[i * n + j] = v / d;
        }
    }
    // L y = b
    let mut y = b.to_vec();
    for i in 0..n {
        for p in 0..i {
            y[i] = y[i] - a[i * n + p] * y[p];
        }
        y[i] /= a[i * n + i].re;
    }
    // Lᴴ x = y
    for i in (0..n).rev() {
        for p in i + 1..n {
            y[i] = y[i] - a[p * n + i].conj() * y[p];
        }
        y[i] /= a[i * n + i].re;
    }
    Some(y)
}

fn fir_residual(s: ArrayView1<Complex64>, t: ArrayView1<Complex64>, c: &[Complex64]) -> f64 {
    (0..s.len())
        .map(|k| {
            let y: Complex64 = (0..c.len().min(k + 1)).map(|m| c[m] * s[k - m]).sum();
            (t[k] - y).norm_sqr()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtering::{apply_deep_filter, DeepFilter};
    use crate::signal::{istft, make_erb_filterbank, stft, AudioBuffer, StftConfig};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_spec(len: usize, seed: u64) -> ComplexSpectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        stft(&AudioBuffer::new(x, 44100).unwrap(), &StftConfig::default()).unwrap()
    }

    fn params(order: usize) -> TwoStageParams {
        TwoStageParams {
            filter_order: order,
            ..TwoStageParams::default()
        }
    }

    /// Dense LS on the stacked delay matrix via SVD, independent of the
    /// normal-equation route.
    fn dense_ls(s: &[Complex64], t: &[Complex64], n_taps: usize) -> Vec<Complex64> {
        let k = s.len();
        let a = DMatrix::from_fn(k, n_taps, |r, m| if r >= m { s[r - m] } else { Complex64::default() });
        let b = DVector::from_column_slice(t);
        let x = a.svd(true, true).solve(&b, 1e-14).unwrap();
        x.iter().copied().collect()
    }

    #[test]
    fn oracle_gain_cases() {
        let fb = make_erb_filterbank(44100, 2048, 24).unwrap();
        let mix = noise_spec(20_000, 1);
        let g = oracle_erb_gains(&mix, &mix, &fb).unwrap();
        assert!(g.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let g = oracle_erb_gains(&mix, &mix.zeros_like(), &fb).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn oracle_gains_on_disjoint_bands() {
        let fb = make_erb_filterbank(44100, 2048, 24).unwrap();
        let full = noise_spec(20_000, 2);
        let source_bands = [3usize, 7, 12, 20];
        let bands = fb.bin_to_band();
        let mut source = full.clone();
        for ((_, f), v) in source.data.indexed_iter_mut() {
            if !source_bands.contains(&bands[f]) {
                *v = Complex64::default();
            }
        }
        let g = oracle_erb_gains(&full, &source, &fb).unwrap();
        for k in 0..g.nrows() {
            for b in 0..24 {
                let want = if source_bands.contains(&b) { 1.0 } else { 0.0 };
                assert!((g[[k, b]] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_target_gives_identity_tap() {
        let s = noise_spec(30_000, 3);
        let p = params(8);
        let fit = oracle_deep_filters(&s, &s, &p, 0.0).unwrap();
        for f in 0..p.n_feat {
            assert!((fit.taps[[0, f]] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
            for m in 1..p.n_taps() {
                assert!(fit.taps[[m, f]].norm() < 1e-8);
            }
            let energy: f64 = s.data.column(f).iter().map(|c| c.norm_sqr()).sum();
            assert!(fit.residual[f] < 1e-10 * energy.max(1.0));
        }
    }

    #[test]
    fn one_frame_delay_matches_dense_ls() {
        let s = noise_spec(30_000, 4);
        let mut t = s.zeros_like();
        for k in 1..s.n_frames() {
            for f in 0..s.n_bins() {
                t.data[[k, f]] = s.data[[k - 1, f]];
            }
        }
        let p = params(2);
        let fit = oracle_deep_filters(&s, &t, &p, 0.0).unwrap();
        for f in [0usize, 10, 100, 255] {
            let sv: Vec<_> = s.data.column(f).to_vec();
            let tv: Vec<_> = t.data.column(f).to_vec();
            let dense = dense_ls(&sv, &tv, 3);
            for m in 0..3 {
                assert!((fit.taps[[m, f]] - dense[m]).norm() < 1e-8);
            }
            assert!((fit.taps[[1, f]] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn planted_filter_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = noise_spec(40_000, 5);
        let p = params(8);
        let planted = Array2::from_shape_fn((5, p.n_feat), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let mut padded = Array2::zeros((p.n_taps(), p.n_feat));
        padded.slice_mut(ndarray::s![..5, ..]).assign(&planted);
        let t = apply_deep_filter(&s, &DeepFilter::Static(padded.clone()), &p).unwrap();
        let fit = oracle_deep_filters(&s, &t, &p, DEFAULT_RIDGE).unwrap();
        for (a, b) in fit.taps.iter().zip(padded.iter()) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn residual_non_increasing_in_order() {
        let s = noise_spec(30_000, 6);
        let t = noise_spec(30_000, 7);
        let fits: Vec<_> = (0..6)
            .map(|m| oracle_deep_filters(&s, &t, &params(m), 0.0).unwrap())
            .collect();
        let ridged: Vec<_> = (0..6)
            .map(|m| oracle_deep_filters(&s, &t, &params(m), 1e-3).unwrap())
            .collect();
        for f in 0..256 {
            for m in 1..6 {
                assert!(fits[m].residual[f] <= fits[m - 1].residual[f] * (1.0 + 1e-9));
                assert!(ridged[m].objective[f] <= ridged[m - 1].objective[f] * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn silent_bins_and_singular_systems() {
        let s = noise_spec(8000, 8);
        let zero = s.zeros_like();
        let p = params(4);
        let fit = oracle_deep_filters(&zero, &s, &p, DEFAULT_RIDGE).unwrap();
        assert!(fit.taps.iter().all(|c| c.norm() == 0.0));

        // A single nonzero frame makes the unregularised Gram rank one.
        let mut spike = s.zeros_like();
        let last = spike.n_frames() - 1;
        spike.data[[last, 3]] = Complex64::new(1.0, 0.0);
        let err = oracle_deep_filters(&spike, &s, &p, 0.0).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { bin: 3 }));
        assert!(oracle_deep_filters(&spike, &s, &p, 1e-6).is_ok());
    }

    #[test]
    fn fitted_filter_round_trips_through_istft() {
        let s = noise_spec(20_000, 9);
        let p = params(3);
        let fit = oracle_deep_filters(&s, &s, &p, DEFAULT_RIDGE).unwrap();
        let out = apply_deep_filter(&s, &DeepFilter::Static(fit.taps), &p).unwrap();
        let a = istft(&out, 20_000).unwrap();
        let b = istft(&s, 20_000).unwrap();
        let err: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).powi(2)).sum();
        assert!(err / b.energy() < 1e-12);
    }
}
