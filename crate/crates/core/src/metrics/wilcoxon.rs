use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Below this many non-zero differences the exact null distribution is used.
pub const EXACT_BELOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WilcoxonOptions {
    pub batch_size: usize,
    pub n_batches: usize,
    /// Test the per-sample differences of every used batch instead of the
    /// per-batch means.
    pub pooled: bool,
}

impl Default for WilcoxonOptions {
    fn default() -> Self {
        Self {
            batch_size: 50,
            n_batches: 100,
            pooled: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub raw_p: f64,
    pub corrected_p: f64,
    pub batch_size: usize,
    pub n_batches: usize,
    /// Differences left after dropping zeros.
    pub n_nonzero: usize,
    /// Sum of ranks of the positive differences `b - a`.
    pub w_plus: f64,
}

pub fn bonferroni(raw_p: f64, n_comparisons: usize) -> f64 {
    (raw_p * n_comparisons as f64).min(1.0)
}

/// Two-sided signed-rank test of `diffs` against zero; returns `(W+, p)`.
/// Zeros are dropped and tied magnitudes share their mid-rank.
pub fn signed_rank_test(diffs: &[f64]) -> (f64, f64) {
    let mut d: Vec<f64> = diffs.iter().copied().filter(|&x| x != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    d.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    // Ranks doubled so mid-ranks stay integral.
    let mut ranks2 = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[j + 1].abs() == d[i].abs() {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        for r in &mut ranks2[i..=j] {
            *r = (i + j + 2) as u64;
        }
        i = j + 1;
    }
    let w2: u64 = d.iter().zip(&ranks2).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let w_plus = w2 as f64 / 2.0;
    let p = if n < EXACT_BELOW {
        exact_p(&ranks2, w2)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        if var <= 0.0 {
            1.0
        } else {
            let z = (w_plus - mean) / var.sqrt();
            erfc(z.abs() / std::f64::consts::SQRT_2)
        }
    };
    (w_plus, p.clamp(f64::MIN_POSITIVE, 1.0))
}

/// Exact two-sided p over all sign assignments of the given doubled ranks.
fn exact_p(ranks2: &[u64], w2: u64) -> f64 {
    let total: u64 = ranks2.iter().sum();
    let mut counts = vec![0.0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all = 2f64.powi(ranks2.len() as i32);
    let w = w2 as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / all;
    let upper: f64 = counts[w..].iter().sum::<f64>() / all;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Paired comparison of per-scene scores over contiguous batches, with the
/// raw p multiplied by `n_comparisons`.
pub fn wilcoxon_bonferroni(
    scores_a: &[f64],
    scores_b: &[f64],
    opts: &WilcoxonOptions,
    n_comparisons: usize,
) -> Result<WilcoxonResult> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::invalid_input(format!(
            "paired score lists differ in length: {} vs {}",
            scores_a.len(),
            scores_b.len()
        )));
    }
    if scores_a.is_empty() || opts.batch_size == 0 || opts.n_batches == 0 || n_comparisons == 0 {
        return Err(Error::invalid_input(
            "wilcoxon needs scores, non-zero batch sizes and at least one comparison",
        ));
    }
    if scores_a.iter().chain(scores_b).any(|v| !v.is_finite()) {
        return Err(Error::invalid_input("scores must be finite"));
    }
    let len = scores_a.len();
    let (mut batch_size, mut n_batches) = (opts.batch_size, opts.n_batches);
    if len < batch_size * n_batches {
        batch_size = (len / n_batches).max(1);
        n_batches = n_batches.min(len);
        log::warn!(
            "{len} paired scores cannot fill {} batches of {}; using {n_batches} of {batch_size}",
            opts.n_batches,
            opts.batch_size
        );
    }
    let diffs: Vec<f64> = scores_a
        .iter()
        .zip(scores_b)
        .take(batch_size * n_batches)
        .map(|(a, b)| b - a)
        .collect();
    let tested: Vec<f64> = if opts.pooled {
        diffs
    } else {
        diffs
            .chunks(batch_size)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    };
    let (w_plus, raw_p) = signed_rank_test(&tested);
    Ok(WilcoxonResult {
        raw_p,
        corrected_p: bonferroni(raw_p, n_comparisons),
        batch_size,
        n_batches,
        n_nonzero: tested.iter().filter(|&&x| x != 0.0).count(),
        w_plus,
    })
}
