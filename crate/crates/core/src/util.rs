//! Numeric and file helpers with no better home.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn insert_sorted(sorted: &mut Vec<f64>, v: f64) {
    let pos = sorted.partition_point(|&x| x < v);
    sorted.insert(pos, v);
}

fn remove_sorted(sorted: &mut Vec<f64>, v: f64) {
    let pos = sorted.partition_point(|&x| x < v);
    debug_assert!(pos < sorted.len() && sorted[pos] == v);
    sorted.remove(pos);
}

/// Running median with an odd `window` over a half-sample symmetric
/// extension (`c b a | a b c`), O(n·window) worst case via a sorted buffer
/// (memmove-dominated, fast for the window sizes used here).
pub(crate) fn sliding_median(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let half = window / 2;
    let ext_at = |i: isize| -> f64 {
        let n = n as isize;
        let mut i = i;
        // Bounce until inside.
        loop {
            if i < 0 {
                i = -i - 1;
            } else if i >= n {
                i = 2 * n - i - 1;
            } else {
                return values[i as usize];
            }
        }
    };
    let mut sorted: Vec<f64> = (-(half as isize)..=half as isize).map(ext_at).collect();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(n);
    for i in 0..n as isize {
        out.push(median_of_sorted(&sorted));
        if i + 1 < n as isize {
            remove_sorted(&mut sorted, ext_at(i - half as isize));
            insert_sorted(&mut sorted, ext_at(i + 1 + half as isize));
        }
    }
    out
}

/// Linear-interpolated percentile, `q` in `[0, 100]`.
pub(crate) fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// SplitMix64 finaliser; derives independent stream seeds from `(seed, id)`.
pub(crate) fn mix_seed(seed: u64, id: u64) -> u64 {
    let mut z = seed ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn db_to_amp(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`,
/// creating parent directories as needed.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Nearest odd integer not below `min`.
pub(crate) fn odd_at_least(x: f64, min: usize) -> usize {
    let n = x.round().max(min as f64) as usize;
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(values: &[f64], window: usize) -> Vec<f64> {
        let n = values.len() as isize;
        let half = (window / 2) as isize;
        (0..n)
            .map(|i| {
                let mut w: Vec<f64> = (i - half..=i + half)
                    .map(|mut j| {
                        while j < 0 || j >= n {
                            j = if j < 0 { -j - 1 } else { 2 * n - j - 1 };
                        }
                        values[j as usize]
                    })
                    .collect();
                w.sort_by(f64::total_cmp);
                median_of_sorted(&w)
            })
            .collect()
    }

    proptest::proptest! {
        #[test]
        fn sliding_median_matches_naive(
            values in proptest::collection::vec(-10.0f64..10.0, 1..60),
            half in 0usize..8,
        ) {
            proptest::prop_assert_eq!(
                sliding_median(&values, 2 * half + 1),
                naive(&values, 2 * half + 1)
            );
        }
    }

    #[test]
    fn percentile_endpoints() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 100.0), 4.0);
        assert_eq!(percentile(&v, 50.0), 2.5);
    }

    #[test]
    fn seeds_differ_per_id() {
        assert_ne!(mix_seed(7, 0), mix_seed(7, 1));
        assert_eq!(mix_seed(7, 3), mix_seed(7, 3));
    }
}
