/// A local maximum found by [`find_peaks`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub value: f64,
    pub prominence: f64,
}

/// Filters applied by [`find_peaks`], in the order height, distance,
/// prominence.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PeakCriteria {
    pub height: Option<f64>,
    /// Minimum index spacing; lower peaks within it of a higher one are dropped.
    pub distance: Option<usize>,
    pub prominence: Option<f64>,
}

/// Local maxima with flat tops reduced to their middle sample.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                out.push((i + ahead - 1) / 2);
                i = ahead;
            }
        }
        i += 1;
    }
    out
}

/// Height of a peak above the higher of the two minima reached before the
/// signal rises above it on either side.
pub fn prominence(x: &[f64], peak: usize) -> f64 {
    let v = x[peak];
    let mut left_min = v;
    for i in (0..peak).rev() {
        if x[i] > v {
            break;
        }
        left_min = left_min.min(x[i]);
    }
    let mut right_min = v;
    for &s in &x[peak + 1..] {
        if s > v {
            break;
        }
        right_min = right_min.min(s);
    }
    v - left_min.max(right_min)
}

/// Peak picking with the same semantics as `scipy.signal.find_peaks` for the
/// height, distance and prominence arguments.
pub fn find_peaks(x: &[f64], criteria: &PeakCriteria) -> Vec<Peak> {
    let mut peaks = local_maxima(x);
    if let Some(h) = criteria.height {
        peaks.retain(|&p| x[p] >= h);
    }
    if let Some(d) = criteria.distance.filter(|&d| d > 1) {
        let mut order: Vec<usize> = (0..peaks.len()).collect();
        // Highest first; ties keep the later peak first like a stable argsort
        // traversed backwards.
        order.sort_by(|&a, &b| x[peaks[a]].total_cmp(&x[peaks[b]]).then(a.cmp(&b)));
        let mut keep = vec![true; peaks.len()];
        for &i in order.iter().rev() {
            if !keep[i] {
                continue;
            }
            let p = peaks[i];
            let mut j = i;
            while j > 0 && p - peaks[j - 1] < d {
                j -= 1;
                keep[j] = false;
            }
            let mut j = i + 1;
            while j < peaks.len() && peaks[j] - p < d {
                keep[j] = false;
                j += 1;
            }
        }
        peaks = peaks.into_iter().zip(keep).filter(|&(_, k)| k).map(|(p, _)| p).collect();
    }
    let mut out: Vec<Peak> = peaks
        .into_iter()
        .map(|index| Peak {
            index,
            value: x[index],
            prominence: prominence(x, index),
        })
        .collect();
    if let Some(p) = criteria.prominence {
        out.retain(|pk| pk.prominence >= p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference indices from scipy.signal.find_peaks on the same vector.
    const X: [f64; 20] = [
        0.0, 2.0, 1.0, 3.0, 0.0, 1.0, 5.0, 1.0, 2.0, 2.0, 2.0, 1.0, 4.0, 0.5, 0.6, 0.4, 3.0, 3.5, 3.0, 0.0,
    ];

    fn indices(c: PeakCriteria) -> Vec<usize> {
        find_peaks(&X, &c).iter().map(|p| p.index).collect()
    }

    #[test]
    fn matches_reference() {
        assert_eq!(indices(PeakCriteria::default()), [1, 3, 6, 9, 12, 14, 17]);
        let prom: Vec<f64> = find_peaks(&X, &PeakCriteria::default()).iter().map(|p| p.prominence).collect();
        for (a, b) in prom.iter().zip([1.0, 3.0, 5.0, 1.0, 3.0, 0.1, 3.1]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(
            indices(PeakCriteria { height: Some(2.0), ..Default::default() }),
            [1, 3, 6, 9, 12, 17]
        );
        assert_eq!(
            indices(PeakCriteria { distance: Some(3), ..Default::default() }),
            [3, 6, 9, 12, 17]
        );
        assert_eq!(
            indices(PeakCriteria { prominence: Some(2.0), ..Default::default() }),
            [3, 6, 12, 17]
        );
        assert_eq!(
            indices(PeakCriteria {
                height: Some(1.5),
                distance: Some(4),
                prominence: Some(1.0)
            }),
            [1, 6, 12, 17]
        );
    }

    #[test]
    fn edges_and_flat_signals_have_no_peaks() {
        assert!(find_peaks(&[3.0, 2.0, 1.0], &PeakCriteria::default()).is_empty());
        assert!(find_peaks(&[1.0; 10], &PeakCriteria::default()).is_empty());
        assert!(find_peaks(&[], &PeakCriteria::default()).is_empty());
        assert!(find_peaks(&[0.0, 1.0, 1.0], &PeakCriteria::default()).is_empty());
    }

    proptest::proptest! {
        #[test]
        fn distance_is_respected(x in proptest::collection::vec(-10.0f64..10.0, 0..200), d in 1usize..20) {
            let peaks = find_peaks(&x, &PeakCriteria { distance: Some(d), ..Default::default() });
            for w in peaks.windows(2) {
                proptest::prop_assert!(w[1].index - w[0].index >= d);
            }
            for p in &peaks {
                proptest::prop_assert!(p.prominence >= 0.0);
            }
        }
    }
}
