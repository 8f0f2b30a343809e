use serde::{Deserialize, Serialize};

use super::daubechies::DB_LOWPASS;
use crate::error::{Error, Result};

/// Signal extension used by the analysis filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Half-sample symmetric extension; output is slightly redundant
    /// (`floor((n + F − 1) / 2)` coefficients per level).
    #[default]
    Symmetric,
    /// Circular extension; critically sampled and energy preserving.
    Periodization,
}

/// Orthonormal Daubechies analysis pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Daubechies {
    order: usize,
    dec_lo: Vec<f64>,
    dec_hi: Vec<f64>,
}

impl Daubechies {
    pub fn new(order: usize) -> Result<Self> {
        if !(1..=DB_LOWPASS.len()).contains(&order) {
            return Err(Error::invalid_config(format!(
                "Daubechies order must be in 1..={}, got {order}",
                DB_LOWPASS.len()
            )));
        }
        let rec_lo = DB_LOWPASS[order - 1];
        let dec_lo = rec_lo.iter().rev().copied().collect();
        let dec_hi = rec_lo
            .iter()
            .enumerate()
            .map(|(i, &v)| if i % 2 == 0 { -v } else { v })
            .collect();
        Ok(Self {
            order,
            dec_lo,
            dec_hi,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn filter_len(&self) -> usize {
        self.dec_lo.len()
    }

    pub fn dec_lo(&self) -> &[f64] {
        &self.dec_lo
    }

    pub fn dec_hi(&self) -> &[f64] {
        &self.dec_hi
    }

    /// Deepest decomposition whose input still spans the filter.
    pub fn max_level(&self, len: usize) -> usize {
        let f = self.filter_len();
        if len < f - 1 || f < 2 {
            return 0;
        }
        ((len as f64) / (f - 1) as f64).log2().floor().max(0.0) as usize
    }
}

/// Multi-level decomposition; `details[0]` is the finest scale.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    pub details: Vec<Vec<f64>>,
    pub approximation: Vec<f64>,
    /// Input length at each level (`input_lengths[0]` is the signal length).
    pub input_lengths: Vec<usize>,
    pub mode: BoundaryMode,
    pub order: usize,
}

impl WaveletDecomposition {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn coefficient_energy(&self) -> f64 {
        self.details
            .iter()
            .chain(std::iter::once(&self.approximation))
            .flat_map(|v| v.iter())
            .map(|c| c * c)
            .sum()
    }
}

fn symmetric_at(x: &[f64], i: isize) -> f64 {
    let n = x.len() as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return x[i as usize];
        }
    }
}

fn analyze_level(x: &[f64], w: &Daubechies, mode: BoundaryMode) -> (Vec<f64>, Vec<f64>) {
    let f = w.filter_len() as isize;
    match mode {
        BoundaryMode::Symmetric => {
            let out_len = (x.len() + w.filter_len() - 1) / 2;
            let mut lo = Vec::with_capacity(out_len);
            let mut hi = Vec::with_capacity(out_len);
            for o in 0..out_len as isize {
                let i = 2 * o + 1;
                let (mut a, mut d) = (0.0, 0.0);
                for j in 0..f {
                    let v = symmetric_at(x, i - j);
                    a += w.dec_lo[j as usize] * v;
                    d += w.dec_hi[j as usize] * v;
                }
                lo.push(a);
                hi.push(d);
            }
            (lo, hi)
        }
        BoundaryMode::Periodization => {
            let n = x.len() as isize;
            let out_len = x.len() / 2;
            let mut lo = Vec::with_capacity(out_len);
            let mut hi = Vec::with_capacity(out_len);
            for o in 0..out_len as isize {
                let i = 2 * o + 1;
                let (mut a, mut d) = (0.0, 0.0);
                for j in 0..f {
                    let v = x[(i - j).rem_euclid(n) as usize];
                    a += w.dec_lo[j as usize] * v;
                    d += w.dec_hi[j as usize] * v;
                }
                lo.push(a);
                hi.push(d);
            }
            (lo, hi)
        }
    }
}

/// Adjoint of `analyze_level`, which is its inverse for orthonormal filters.
fn synthesize_level(lo: &[f64], hi: &[f64], len: usize, w: &Daubechies, mode: BoundaryMode) -> Vec<f64> {
    let f = w.filter_len() as isize;
    match mode {
        BoundaryMode::Symmetric => (0..len as isize)
            .map(|n| {
                // o such that 0 <= 2o + 1 - n < f
                let o_min = (n - 1 + 1).div_euclid(2).max(0);
                let o_max = ((n + f - 2).div_euclid(2)).min(lo.len() as isize - 1);
                (o_min..=o_max)
                    .map(|o| {
                        let j = (2 * o + 1 - n) as usize;
                        w.dec_lo[j] * lo[o as usize] + w.dec_hi[j] * hi[o as usize]
                    })
                    .sum()
            })
            .collect(),
        BoundaryMode::Periodization => {
            let n = (2 * lo.len()) as isize;
            let mut x = vec![0.0; n as usize];
            for o in 0..lo.len() as isize {
                for j in 0..f {
                    let idx = (2 * o + 1 - j).rem_euclid(n) as usize;
                    x[idx] += w.dec_lo[j as usize] * lo[o as usize] + w.dec_hi[j as usize] * hi[o as usize];
                }
            }
            x.truncate(len);
            x
        }
    }
}

/// Dyadic decomposition to `levels` scales.
pub fn wavedec(signal: &[f64], order: usize, levels: usize, mode: BoundaryMode) -> Result<WaveletDecomposition> {
    let w = Daubechies::new(order)?;
    if levels == 0 {
        return Err(Error::invalid_config("at least one decomposition level is required"));
    }
    let max = w.max_level(signal.len());
    if levels > max {
        return Err(Error::invalid_config(format!(
            "{levels} levels of db{order} need a longer signal than {} samples (max {max})",
            signal.len()
        )));
    }
    let mut current = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut input_lengths = Vec::with_capacity(levels);
    for _ in 0..levels {
        input_lengths.push(current.len());
        if mode == BoundaryMode::Periodization && current.len() % 2 == 1 {
            current.push(*current.last().unwrap());
        }
        let (lo, hi) = analyze_level(&current, &w, mode);
        details.push(hi);
        current = lo;
    }
    Ok(WaveletDecomposition {
        details,
        approximation: current,
        input_lengths,
        mode,
        order,
    })
}

pub fn waverec(dec: &WaveletDecomposition) -> Result<Vec<f64>> {
    let w = Daubechies::new(dec.order)?;
    let mut current = dec.approximation.clone();
    for level in (0..dec.levels()).rev() {
        let hi = &dec.details[level];
        if hi.len() != current.len() {
            return Err(Error::invalid_input(format!(
                "level {level}: {} detail vs {} approximation coefficients",
                hi.len(),
                current.len()
            )));
        }
        current = synthesize_level(&current, hi, dec.input_lengths[level], &w, dec.mode);
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let e: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        (e / b.iter().map(|y| y * y).sum::<f64>()).sqrt()
    }

    #[test]
    fn filters_are_orthonormal() {
        for order in 1..=20 {
            let w = Daubechies::new(order).unwrap();
            let h = w.dec_lo();
            let g = w.dec_hi();
            let f = h.len();
            assert_eq!(f, 2 * order);
            for shift in 0..order {
                let hh: f64 = (0..f - 2 * shift).map(|i| h[i] * h[i + 2 * shift]).sum();
                let gg: f64 = (0..f - 2 * shift).map(|i| g[i] * g[i + 2 * shift]).sum();
                let want = if shift == 0 { 1.0 } else { 0.0 };
                assert!((hh - want).abs() < 1e-10, "db{order} shift {shift}");
                assert!((gg - want).abs() < 1e-10, "db{order} shift {shift}");
            }
            // Vanishing moments of the high-pass.
            for p in 0..order.min(4) {
                let moment: f64 = g.iter().enumerate().map(|(i, v)| v * (i as f64).powi(p as i32)).sum();
                assert!(moment.abs() < 1e-6 * (f as f64).powi(p as i32), "db{order} moment {p}");
            }
        }
    }

    #[test]
    fn matches_reference_single_level() {
        // Values computed with PyWavelets `dwt(x, 'db2', mode='symmetric')`.
        let x = [0.5, -1.0, 2.0, 0.25, 3.0, -0.75, 1.5, 0.0, -2.0, 1.0, 0.3];
        let dec = wavedec(&x, 2, 1, BoundaryMode::Symmetric).unwrap();
        let want_a = [
            0.17677669529663692,
            -0.17909949171932918,
            1.9445436482630059,
            1.1577173136932666,
            0.14674711108151417,
            -0.10098921890403445,
            0.8788066782092367,
        ];
        let want_d = [
            0.9185586535436918,
            1.7117309859558656,
            2.5569160839588005,
            1.034653788984441,
            -2.3501098044470403,
            0.1407411942384895,
            1.6963761128488941,
        ];
        for (a, b) in dec.approximation.iter().zip(want_a) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in dec.details[0].iter().zip(want_d) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_response_matches_convolve_and_decimate() {
        let order = 4;
        let w = Daubechies::new(order).unwrap();
        let n = 64;
        let mut x = vec![0.0; n];
        x[30] = 1.0;
        let dec = wavedec(&x, order, 2, BoundaryMode::Symmetric).unwrap();
        // Oracle: full convolution of the symmetric-extended signal, keep odd
        // indices (the analysis phase).
        let conv_decimate = |sig: &[f64], h: &[f64]| -> Vec<f64> {
            let f = h.len();
            let ext_len = sig.len() + 2 * (f - 1);
            let ext: Vec<f64> = (0..ext_len)
                .map(|i| symmetric_at(sig, i as isize - (f as isize - 1)))
                .collect();
            let full: Vec<f64> = (0..ext_len + f - 1)
                .map(|i| (0..f).filter(|&j| j <= i && i - j < ext_len).map(|j| h[j] * ext[i - j]).sum())
                .collect();
            // Index i in x coordinates is full[i + f - 1].
            let out_len = (sig.len() + f - 1) / 2;
            (0..out_len).map(|o| full[2 * o + 1 + f - 1]).collect()
        };
        let a1 = conv_decimate(&x, w.dec_lo());
        let d1 = conv_decimate(&x, w.dec_hi());
        let d2 = conv_decimate(&a1, w.dec_hi());
        for (a, b) in dec.details[0].iter().zip(&d1) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in dec.details[1].iter().zip(&d2) {
            assert!((a - b).abs() < 1e-14);
        }
        // Support of level-1 details: the impulse spreads over ceil(F/2)
        // coefficients around index 30/2.
        let support: Vec<usize> = dec.details[0]
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > 1e-15)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(support.len(), w.filter_len() / 2);
        assert_eq!(*support.first().unwrap(), 15);
    }

    #[test]
    fn periodized_transform_preserves_energy() {
        let x = noise(4096, 3);
        let dec = wavedec(&x, 13, 6, BoundaryMode::Periodization).unwrap();
        let e: f64 = x.iter().map(|v| v * v).sum();
        assert!((dec.coefficient_energy() - e).abs() / e < 1e-6);
        assert!(rel_err(&waverec(&dec).unwrap(), &x) < 1e-8);
    }

    #[test]
    fn too_deep_is_rejected() {
        assert!(matches!(
            wavedec(&noise(100, 1), 13, 4, BoundaryMode::Symmetric),
            Err(Error::InvalidConfig(_))
        ));
        assert!(Daubechies::new(0).is_err());
        assert!(Daubechies::new(21).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip(seed in 0u64..10_000, len in 64usize..3000, order in 1usize..=20, periodic in proptest::bool::ANY) {
            let x = noise(len, seed);
            let w = Daubechies::new(order).unwrap();
            let levels = w.max_level(len).clamp(1, 6);
            proptest::prop_assume!(w.max_level(len) >= 1);
            let mode = if periodic { BoundaryMode::Periodization } else { BoundaryMode::Symmetric };
            let dec = wavedec(&x, order, levels, mode).unwrap();
            proptest::prop_assert!(rel_err(&waverec(&dec).unwrap(), &x) < 1e-8);
        }
    }
}
