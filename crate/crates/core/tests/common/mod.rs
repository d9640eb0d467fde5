//! Shared helpers for the verification suites: log-log regression, quantiles
//! and a derivative-free grid refiner used as the independent optimum oracle
//! on tiny instances.

#![allow(dead_code)]

use ardca_core::trace::TraceRecord;

/// Least-squares line through `(x, y)` pairs; returns `(slope, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points to fit");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, r2)
}

/// Slope of `log10(value)` against `log10(pass)` over trace points whose
/// value lies in `[lo, hi]`. Falls back to all points with `pass >= 1` when
/// fewer than three land in the window (a solver that never entered the
/// window cannot have decayed through it).
pub fn windowed_loglog_slope(
    records: &[TraceRecord],
    value: impl Fn(&TraceRecord) -> f64,
    lo: f64,
    hi: f64,
) -> (f64, f64, usize) {
    let in_window: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.pass >= 1.0 && r.status == "ok")
        .map(|r| (r.pass, value(r)))
        .filter(|(_, v)| v.is_finite() && *v >= lo && *v <= hi)
        .collect();
    let pts = if in_window.len() >= 3 {
        in_window
    } else {
        records
            .iter()
            .filter(|r| r.pass >= 1.0 && r.status == "ok")
            .map(|r| (r.pass, value(r)))
            .filter(|(_, v)| v.is_finite() && *v > 0.0)
            .collect()
    };
    let xs: Vec<f64> = pts.iter().map(|(p, _)| p.log10()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.log10()).collect();
    let (slope, r2) = linear_fit(&xs, &ys);
    (slope, r2, pts.len())
}

/// First pass at which `value` drops to `threshold` or below; `None` when the
/// trace never reaches it.
pub fn first_pass_reaching(
    records: &[TraceRecord],
    value: impl Fn(&TraceRecord) -> f64,
    threshold: f64,
) -> Option<f64> {
    records
        .iter()
        .filter(|r| r.status == "ok")
        .find(|r| value(r) <= threshold)
        .map(|r| r.pass)
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[(values.len() - 1) / 2]
}

/// Coordinate-box minimizer by iterated grid refinement: evaluate a uniform
/// grid, shrink the box around the argmin, repeat. Infinite objective values
/// mark infeasible points. Independent of every solver code path.
pub fn grid_minimize(
    f: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    points_per_dim: usize,
    rounds: usize,
) -> (Vec<f64>, f64) {
    assert_eq!(lo.len(), hi.len());
    let dim = lo.len();
    assert!((1..=3).contains(&dim), "grid oracle covers 1-3 dimensions");
    let orig_lo = lo.to_vec();
    let orig_hi = hi.to_vec();
    let mut lo = lo.to_vec();
    let mut hi = hi.to_vec();
    let mut best_x = vec![0.0; dim];
    let mut best_v = f64::INFINITY;
    for _ in 0..rounds {
        let steps: Vec<f64> = (0..dim)
            .map(|d| (hi[d] - lo[d]) / (points_per_dim - 1) as f64)
            .collect();
        let total = points_per_dim.pow(dim as u32);
        let mut x = vec![0.0; dim];
        for flat in 0..total {
            let mut rem = flat;
            for d in 0..dim {
                let idx = rem % points_per_dim;
                rem /= points_per_dim;
                x[d] = lo[d] + steps[d] * idx as f64;
            }
            let v = f(&x);
            if v < best_v {
                best_v = v;
                best_x.copy_from_slice(&x);
            }
        }
        // shrink around the incumbent, a couple of cells on each side,
        // clamped to the original box
        for d in 0..dim {
            let r = 2.5 * steps[d].max(1e-300);
            lo[d] = (best_x[d] - r).max(orig_lo[d]);
            hi[d] = (best_x[d] + r).min(orig_hi[d]);
        }
    }
    (best_x, best_v)
}
