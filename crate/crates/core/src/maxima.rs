//! Interior local maxima of a sampled series.

use serde::{Deserialize, Serialize};

use crate::model::SampledSeries;

/// A candidate peak: a local maximum of the smoothed series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMaximum {
    pub index: usize,
    pub time: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<bool>,
}

/// Indices of strict local maxima, in increasing order.
///
/// A run of equal values strictly above both neighbours counts once, at
/// the floor of its midpoint. The first and last sample never qualify, nor
/// does any index within `excluded_boundary` samples of either end.
pub fn local_maxima_indices(values: &[f64], excluded_boundary: usize) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    let margin = excluded_boundary.max(1);
    if 2 * margin >= n {
        return out;
    }
    let (lo, hi) = (margin, n - margin);
    let mut i = 1;
    while i < n - 1 {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                let m = (i + j) / 2;
                if m >= lo && m < hi {
                    out.push(m);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// All interior local maxima of `series` outside the excluded boundary zone.
pub fn find_local_maxima(series: &SampledSeries, excluded_boundary: usize) -> Vec<LocalMaximum> {
    let v = series.values();
    local_maxima_indices(v, excluded_boundary)
        .into_iter()
        .map(|index| LocalMaximum {
            index,
            time: series.time(index),
            height: v[index],
            p_value: None,
            rejected: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(v: &[f64]) -> SampledSeries {
        SampledSeries::new(v.to_vec(), 1.0, 0.0).unwrap()
    }

    #[test]
    fn simple_maxima() {
        let m = find_local_maxima(&series(&[0.0, 1.0, 0.0, 2.0, 0.0]), 0);
        assert_eq!(m.iter().map(|m| m.index).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(
            m.iter().map(|m| m.height).collect::<Vec<_>>(),
            vec![1.0, 2.0]
        );
    }

    #[test]
    fn endpoints_never_qualify() {
        assert!(find_local_maxima(&series(&[1.0, 0.0, 1.0]), 0).is_empty());
        assert!(find_local_maxima(&series(&[0.0, 1.0]), 0).is_empty());
    }

    #[test]
    fn plateau_uses_floor_midpoint() {
        let m = find_local_maxima(&series(&[0.0, 1.0, 1.0, 0.0]), 0);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].index, 1);
        let m = find_local_maxima(&series(&[0.0, 1.0, 1.0, 1.0, 0.0]), 0);
        assert_eq!(m[0].index, 2);
        // shoulder, not a maximum
        assert!(find_local_maxima(&series(&[0.0, 1.0, 1.0, 2.0]), 0).is_empty());
        // plateau running into the end
        assert!(find_local_maxima(&series(&[0.0, 1.0, 1.0]), 0).is_empty());
    }

    #[test]
    fn boundary_zone_is_excluded() {
        let v = [0.0, 2.0, 0.0, 1.0, 0.0, 3.0, 0.0];
        assert_eq!(local_maxima_indices(&v, 0), vec![1, 3, 5]);
        assert_eq!(local_maxima_indices(&v, 2), vec![3]);
        assert!(local_maxima_indices(&v, 4).is_empty());
    }

    #[test]
    fn time_follows_grid() {
        let s = SampledSeries::new(vec![0.0, 0.0, 1.0, 0.0], 0.5, 10.0).unwrap();
        let m = find_local_maxima(&s, 0);
        assert_eq!(m[0].time, 11.0);
    }

    proptest! {
        #[test]
        fn maxima_alternate_with_minima(v in prop::collection::vec(-100i32..100, 3..60)) {
            let v: Vec<f64> = v.into_iter().map(f64::from).collect();
            let idx = local_maxima_indices(&v, 0);
            for w in idx.windows(2) {
                let lowest = v[w[0]..=w[1]].iter().cloned().fold(f64::INFINITY, f64::min);
                prop_assert!(lowest < v[w[0]] && lowest < v[w[1]]);
            }
            for &i in &idx {
                prop_assert!(i > 0 && i < v.len() - 1);
            }
        }

        #[test]
        fn invariant_under_constant_shift(v in prop::collection::vec(-1000i32..1000, 3..60), c in -50i32..50) {
            let a: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
            let b: Vec<f64> = v.iter().map(|&x| f64::from(x + c)).collect();
            prop_assert_eq!(local_maxima_indices(&a, 0), local_maxima_indices(&b, 0));
        }
    }
}
