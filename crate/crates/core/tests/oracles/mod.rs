//! Reference computations for the integration and acceptance tests. None
//! of these call into the code paths they check; they only read the core's
//! plain data types.
#![allow(dead_code)]

use ccf_core::linalg::Matrix;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Pearson correlation, straight from the definition.
pub fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

fn projected_2d(x: &Matrix, theta: f64) -> Vec<f64> {
    let (c, s) = (theta.cos(), theta.sin());
    (0..x.rows())
        .map(|i| x.get(i, 0) * c + x.get(i, 1) * s)
        .collect()
}

/// Maximizes `|corr(x·u(θ), y)|` over unit directions of a 2-column `x`:
/// a uniform grid over `[0, π)` followed by golden-section refinement
/// around the best cell. Returns `(ρ, θ)`.
pub fn grid_max_corr_2d(x: &Matrix, y: &[f64], grid: usize) -> (f64, f64) {
    assert_eq!(x.cols(), 2);
    let score = |theta: f64| corr(&projected_2d(x, theta), y).abs();
    let step = std::f64::consts::PI / grid as f64;
    let (mut best_t, mut best_v) = (0.0, f64::MIN);
    for i in 0..grid {
        let t = i as f64 * step;
        let v = score(t);
        if v > best_v {
            best_v = v;
            best_t = t;
        }
    }
    let (mut lo, mut hi) = (best_t - step, best_t + step);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if score(a) < score(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let t = 0.5 * (lo + hi);
    (score(t).max(best_v), t)
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    0.5 * (lo + hi)
}

/// Leading canonical correlation of two 2-column blocks by direct search
/// over both unit directions: a `grid × grid` scan of `(θ, φ)` followed by
/// alternating golden-section refinement of each angle.
pub fn grid_max_corr_2x2(x: &Matrix, y: &Matrix, grid: usize) -> f64 {
    assert_eq!((x.cols(), y.cols()), (2, 2));
    let xs: Vec<Vec<f64>> = (0..grid)
        .map(|i| projected_2d(x, i as f64 * std::f64::consts::PI / grid as f64))
        .collect();
    let ys: Vec<Vec<f64>> = (0..grid)
        .map(|i| projected_2d(y, i as f64 * std::f64::consts::PI / grid as f64))
        .collect();
    let (mut bi, mut bj, mut bv) = (0, 0, f64::MIN);
    for (i, xp) in xs.iter().enumerate() {
        for (j, yp) in ys.iter().enumerate() {
            let v = corr(xp, yp).abs();
            if v > bv {
                (bi, bj, bv) = (i, j, v);
            }
        }
    }
    let step = std::f64::consts::PI / grid as f64;
    let (mut theta, mut phi) = (bi as f64 * step, bj as f64 * step);
    let score = |t: f64, p: f64| corr(&projected_2d(x, t), &projected_2d(y, p)).abs();
    for _ in 0..12 {
        theta = golden_max(|t| score(t, phi), theta - step, theta + step);
        phi = golden_max(|p| score(theta, p), phi - step, phi + step);
    }
    score(theta, phi).max(bv)
}

fn covariance_blocks(x: &Matrix, y: &Matrix) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = x.rows();
    let center = |m: &Matrix| {
        let mut d = DMatrix::zeros(n, m.cols());
        for c in 0..m.cols() {
            let mean = (0..n).map(|r| m.get(r, c)).sum::<f64>() / n as f64;
            for r in 0..n {
                d[(r, c)] = m.get(r, c) - mean;
            }
        }
        d
    };
    let (xc, yc) = (center(x), center(y));
    let s = 1.0 / (n as f64 - 1.0);
    (
        xc.transpose() * &xc * s,
        yc.transpose() * &yc * s,
        xc.transpose() * &yc * s,
    )
}

/// Leading canonical correlation between `x` and one response column, as
/// the square root of the regression R²: `ρ² = cᵀ Cxx⁻¹ c / var(y)`.
pub fn regression_rho(x: &Matrix, y: &[f64]) -> f64 {
    let ym = Matrix::new(y.len(), 1, y.to_vec()).unwrap();
    let (cxx, cyy, cxy) = covariance_blocks(x, &ym);
    let chol = cxx.cholesky().expect("full-rank x");
    let c = DVector::from_column_slice(cxy.column(0).as_slice());
    let sol = chol.solve(&c);
    (c.dot(&sol) / cyy[(0, 0)]).sqrt()
}

/// All canonical correlations from the generalized eigenproblem
/// `Cxy Cyy⁻¹ Cyx a = ρ² Cxx a`, reduced to a symmetric problem with the
/// Cholesky factor of `Cxx`. Sorted descending, `min(d, k)` values.
pub fn generalized_eig_rhos(x: &Matrix, y: &Matrix) -> Vec<f64> {
    let (cxx, cyy, cxy) = covariance_blocks(x, y);
    let lx = cxx.cholesky().expect("full-rank x").l();
    let cyy_inv = cyy.try_inverse().expect("full-rank y");
    let lx_inv = lx.try_inverse().unwrap();
    let m = &lx_inv * &cxy * cyy_inv * cxy.transpose() * lx_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let mut vals: Vec<f64> = SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals.truncate(x.cols().min(y.cols()));
    vals
}

fn gini_of(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let mut s = 0.0;
    for &c in counts {
        let p = c as f64 / n as f64;
        s += p * p;
    }
    1.0 - s
}

/// Weighted Gini of the partition `value <= t`, counted from scratch.
pub fn partition_gini(values: &[f64], labels: &[usize], k: usize, t: f64) -> Option<f64> {
    let mut left = vec![0usize; k];
    let mut right = vec![0usize; k];
    for (&v, &l) in values.iter().zip(labels) {
        if v <= t {
            left[l] += 1;
        } else {
            right[l] += 1;
        }
    }
    let nl: usize = left.iter().sum();
    let nr: usize = right.iter().sum();
    if nl == 0 || nr == 0 {
        return None;
    }
    let n = (nl + nr) as f64;
    Some((nl as f64 / n) * gini_of(&left) + (nr as f64 / n) * gini_of(&right))
}

/// Every candidate split (midpoints of consecutive distinct values on each
/// component) and its Gini, in (component, ascending threshold) order.
pub fn enumerate_splits(
    projected: &[Vec<f64>],
    labels: &[usize],
    k: usize,
) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for (c, values) in projected.iter().enumerate() {
        let mut distinct = values.clone();
        distinct.sort_by(|a, b| a.total_cmp(b));
        distinct.dedup();
        for w in distinct.windows(2) {
            let mut t = w[0] + (w[1] - w[0]) * 0.5;
            if t >= w[1] {
                t = w[0];
            }
            if let Some(g) = partition_gini(values, labels, k, t) {
                out.push((c, t, g));
            }
        }
    }
    out
}

/// Per-pixel tally of `(truth, pred)` with an abstain column for
/// unlabeled predictions; unlabeled truth is skipped.
pub struct BruteMetrics {
    pub counts: Vec<Vec<u64>>,
    pub skipped: u64,
    pub accuracy: f64,
    pub iou: Vec<Option<f64>>,
    pub mean_iou: f64,
}

pub fn brute_force_metrics(pred: &[u8], truth: &[u8], k: usize) -> BruteMetrics {
    let mut counts = vec![vec![0u64; k + 1]; k];
    let mut skipped = 0;
    for (&p, &t) in pred.iter().zip(truth) {
        if t == 255 {
            skipped += 1;
            continue;
        }
        let col = if p == 255 { k } else { p as usize };
        counts[t as usize][col] += 1;
    }
    let (mut correct, mut total) = (0u64, 0u64);
    for (t, row) in counts.iter().enumerate() {
        total += row.iter().sum::<u64>();
        correct += row[t];
    }
    let mut iou = Vec::new();
    for c in 0..k {
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_ = 0;
        for (&p, &t) in pred.iter().zip(truth) {
            if t == 255 {
                continue;
            }
            let (t, p) = (t as usize, if p == 255 { usize::MAX } else { p as usize });
            match (t == c, p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        let union = tp + fp + fn_;
        iou.push((union > 0).then(|| tp as f64 / union as f64));
    }
    let defined: Vec<f64> = iou.iter().flatten().copied().collect();
    BruteMetrics {
        counts,
        skipped,
        accuracy: correct as f64 / total as f64,
        mean_iou: defined.iter().sum::<f64>() / defined.len() as f64,
        iou,
    }
}

/// Best single-feature threshold classifier ("stump") fitted on
/// `(x_train, y_train)` by exhaustive search over features, thresholds and
/// polarity; returns its accuracy on the test rows.
pub fn stump_test_accuracy(
    x_train: &Matrix,
    y_train: &[usize],
    x_test: &Matrix,
    y_test: &[usize],
) -> f64 {
    let n = y_train.len();
    let total_pos = y_train.iter().filter(|&&l| l == 1).count();
    let mut best = (0usize, f64::NEG_INFINITY, false, 0usize);
    for f in 0..x_train.cols() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| x_train.get(a, f).total_cmp(&x_train.get(b, f)));
        // predict 1 above threshold (polarity false) or below (true)
        let mut pos_below = 0usize;
        for w in 0..=n {
            let t = if w == 0 {
                f64::NEG_INFINITY
            } else {
                x_train.get(order[w - 1], f)
            };
            if w > 0 {
                pos_below += usize::from(y_train[order[w - 1]] == 1);
            }
            if w < n && w > 0 && x_train.get(order[w], f) == t {
                continue;
            }
            let below = w;
            let above_pos = total_pos - pos_below;
            let correct_up = (below - pos_below) + above_pos;
            let correct_down = pos_below + (n - below - above_pos);
            for (pol, c) in [(false, correct_up), (true, correct_down)] {
                if c > best.3 {
                    best = (f, t, pol, c);
                }
            }
        }
    }
    let (f, t, pol, _) = best;
    let correct = (0..y_test.len())
        .filter(|&i| {
            let above = x_test.get(i, f) > t;
            let pred = usize::from(above != pol);
            pred == y_test[i]
        })
        .count();
    correct as f64 / y_test.len() as f64
}

/// Perceptron run to convergence; `true` proves linear separability.
pub fn perceptron_separates(x: &Matrix, labels: &[usize], max_epochs: usize) -> bool {
    let d = x.cols();
    let mut w = vec![0.0; d + 1];
    for _ in 0..max_epochs {
        let mut mistakes = 0;
        for (i, &l) in labels.iter().enumerate() {
            let y = if l == 1 { 1.0 } else { -1.0 };
            let row = x.row(i);
            let s: f64 = w[d] + row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            if y * s <= 0.0 {
                mistakes += 1;
                for j in 0..d {
                    w[j] += y * row[j];
                }
                w[d] += y;
            }
        }
        if mistakes == 0 {
            return true;
        }
    }
    false
}
