//! Exhaustive threshold search over projected node samples.

/// Gini impurity of a class-count vector holding `n` samples.
#[inline]
pub fn gini(counts: &[usize], n: usize) -> f64 {
    let nf = n as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / nf;
            p * p
        })
        .sum::<f64>()
}

/// Size-weighted Gini impurity of a two-way partition. Both sides must be
/// non-empty.
#[inline]
pub fn weighted_gini(left: &[usize], right: &[usize]) -> f64 {
    let nl: usize = left.iter().sum();
    let nr: usize = right.iter().sum();
    let n = (nl + nr) as f64;
    (nl as f64 / n) * gini(left, nl) + (nr as f64 / n) * gini(right, nr)
}

/// Threshold halfway between two consecutive distinct sorted values. Always
/// satisfies `lo <= t < hi`, so `value <= t` separates the two.
#[inline]
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) * 0.5;
    if t < hi {
        t
    } else {
        lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub component: usize,
    pub threshold: f64,
    pub gini: f64,
}

/// Finds the `(component, threshold)` with the lowest weighted Gini over
/// every midpoint of consecutive distinct projected values.
///
/// `projected[c][i]` is sample `i` on component `c`; samples go left when
/// `value <= threshold`. Ties keep the lower component, then the lower
/// threshold. Returns `None` when every component is constant.
pub fn best_split(
    projected: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
) -> Option<SplitChoice> {
    let n = labels.len();
    let mut total = vec![0usize; n_classes];
    for &l in labels {
        total[l] += 1;
    }

    let mut best: Option<SplitChoice> = None;
    let mut order: Vec<usize> = (0..n).collect();
    let mut left = vec![0usize; n_classes];
    let mut right = vec![0usize; n_classes];
    for (component, values) in projected.iter().enumerate() {
        debug_assert_eq!(values.len(), n);
        order.iter_mut().enumerate().for_each(|(i, o)| *o = i);
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

        left.iter_mut().for_each(|c| *c = 0);
        right.copy_from_slice(&total);
        for w in 0..n.saturating_sub(1) {
            let l = labels[order[w]];
            left[l] += 1;
            right[l] -= 1;
            let (lo, hi) = (values[order[w]], values[order[w + 1]]);
            if lo == hi {
                continue;
            }
            let g = weighted_gini(&left, &right);
            if best.is_none_or(|b| g < b.gini) {
                best = Some(SplitChoice {
                    component,
                    threshold: midpoint(lo, hi),
                    gini: g,
                });
            }
        }
    }
    best
}
