use std::ops::Range;

use crate::error::{Error, Result};

/// Reported instead of ±infinity when one side of the ratio vanishes.
pub const SI_SDR_CAP_DB: f64 = 100.0;

/// Padding added around each ground-truth impulse for the active-only score.
pub const ACTIVITY_PAD_S: f64 = 0.05;

/// Scale-invariant SDR in dB, clamped to `±SI_SDR_CAP_DB`.
pub fn si_sdr(est: &[f64], reference: &[f64]) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::invalid_input(format!(
            "estimate has {} samples, reference {}",
            est.len(),
            reference.len()
        )));
    }
    let ref_energy: f64 = reference.iter().map(|r| r * r).sum();
    if ref_energy == 0.0 {
        return Err(Error::UndefinedReference);
    }
    let alpha = est.iter().zip(reference).map(|(e, r)| e * r).sum::<f64>() / ref_energy;
    let (target, error) = est
        .iter()
        .zip(reference)
        .fold((0.0, 0.0), |(t, n), (&e, &r)| {
            let s = alpha * r;
            (t + s * s, n + (s - e) * (s - e))
        });
    Ok(ratio_db(target, error))
}

fn ratio_db(target: f64, error: f64) -> f64 {
    let bound = 10f64.powf(SI_SDR_CAP_DB / 10.0);
    if target == 0.0 {
        -SI_SDR_CAP_DB
    } else if error <= target / bound {
        SI_SDR_CAP_DB
    } else if target <= error / bound {
        -SI_SDR_CAP_DB
    } else {
        10.0 * (target / error).log10()
    }
}

/// SI-SDR over the samples covered by `activity` only.
pub fn si_sdr_active(est: &[f64], reference: &[f64], activity: &[Range<usize>]) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::invalid_input("estimate and reference lengths differ"));
    }
    if let Some(r) = activity.iter().find(|r| r.start > r.end || r.end > reference.len()) {
        return Err(Error::invalid_input(format!(
            "activity {r:?} outside signal of {} samples",
            reference.len()
        )));
    }
    let (e, r): (Vec<f64>, Vec<f64>) = activity
        .iter()
        .flat_map(|span| span.clone())
        .map(|i| (est[i], reference[i]))
        .unzip();
    if e.is_empty() {
        return Err(Error::UndefinedReference);
    }
    si_sdr(&e, &r)
}

/// Sample ranges of `(onset_s, end_s)` intervals padded by `pad_s` on both
/// sides, clipped to `len` and merged where they overlap.
pub fn activity_ranges(intervals: &[(f64, f64)], pad_s: f64, sample_rate: u32, len: usize) -> Vec<Range<usize>> {
    let rate = sample_rate as f64;
    let mut spans: Vec<Range<usize>> = intervals
        .iter()
        .map(|&(a, b)| {
            let start = ((a - pad_s) * rate).floor().max(0.0) as usize;
            let end = (((b + pad_s) * rate).ceil().max(0.0) as usize).min(len);
            start.min(end)..end
        })
        .filter(|r| !r.is_empty())
        .collect();
    spans.sort_by_key(|r| r.start);
    let mut merged: Vec<Range<usize>> = Vec::with_capacity(spans.len());
    for r in spans {
        match merged.last_mut() {
            Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
            _ => merged.push(r),
        }
    }
    merged
}
