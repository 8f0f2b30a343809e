use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Onset of one kept impulse, by index into the requested list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub index: usize,
    pub start: usize,
}

/// Places intervals of the given lengths inside `total` samples, pairwise
/// separated by at least `guard` samples, with a uniform draw over all such
/// layouts for a random order. The longest intervals are dropped until the
/// rest fit; if none fit, packing fails.
pub fn place_intervals(total: usize, lengths: &[usize], guard: usize, rng: &mut impl Rng) -> Result<Vec<Slot>> {
    if lengths.is_empty() {
        return Ok(Vec::new());
    }
    let mut keep: Vec<usize> = (0..lengths.len()).collect();
    // Stable sort so equal lengths drop the later request first.
    keep.sort_by_key(|&i| std::cmp::Reverse(lengths[i]));
    let need = |set: &[usize]| -> usize {
        set.iter().map(|&i| lengths[i]).sum::<usize>() + guard * set.len().saturating_sub(1)
    };
    let mut start = 0;
    while start < keep.len() && need(&keep[start..]) > total {
        start += 1;
    }
    let mut keep = keep.split_off(start);
    if keep.is_empty() {
        return Err(Error::Packing(format!(
            "no impulse of {:?} samples fits in {total} samples",
            lengths
        )));
    }
    if start > 0 {
        log::debug!("dropped {start} impulse(s) that did not fit");
    }
    keep.sort_unstable();
    let slack = total - need(&keep);
    keep.shuffle(rng);
    let mut offsets: Vec<usize> = (0..keep.len()).map(|_| rng.random_range(0..=slack)).collect();
    offsets.sort_unstable();
    let mut cursor = 0;
    let mut slots: Vec<Slot> = keep
        .iter()
        .zip(offsets)
        .map(|(&index, off)| {
            let slot = Slot {
                index,
                start: cursor + off,
            };
            cursor += lengths[index] + guard;
            slot
        })
        .collect();
    slots.sort_by_key(|s| s.start);
    Ok(slots)
}

/// Onsets in seconds for impulse durations in seconds; the returned list is
/// ordered by onset and may be shorter than `durations_s` when packing had to
/// drop impulses.
pub fn place_impulses(duration_s: f64, durations_s: &[f64], guard_s: f64, seed: u64) -> Result<Vec<(usize, f64)>> {
    const GRID: f64 = 1e6;
    let to_ticks = |s: f64| (s * GRID).round() as usize;
    let lengths: Vec<usize> = durations_s.iter().map(|&d| to_ticks(d)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(place_intervals(to_ticks(duration_s), &lengths, to_ticks(guard_s), &mut rng)?
        .into_iter()
        .map(|s| (s.index, s.start as f64 / GRID))
        .collect())
}
