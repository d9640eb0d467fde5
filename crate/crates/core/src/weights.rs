//! Coordinate smoothness weights and the induced norm pair
//! `|x|_L = sqrt(sum L_i x_i^2)` and `|x|_L^* = sqrt(sum x_i^2 / L_i)`.

use crate::error::{Result, SolverError};

/// Non-negative per-coordinate weights (the coordinate Lipschitz constants).
/// Zero entries are legal but flagged; the dual norm is undefined along them.
#[derive(Debug, Clone)]
pub struct WeightVector {
    w: Vec<f64>,
    zero_count: usize,
}

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(SolverError::InvalidArgument(format!(
                "weights must be finite and non-negative, got {bad}"
            )));
        }
        let zero_count = w.iter().filter(|v| **v == 0.0).count();
        Ok(WeightVector { w, zero_count })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.w[i]
    }

    pub fn has_zero_weight(&self) -> bool {
        self.zero_count > 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn max(&self) -> f64 {
        self.w.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.w.iter().sum()
    }
}

/// `sqrt(sum_i L_i x_i^2)`.
pub fn weighted_norm(x: &[f64], l: &WeightVector) -> f64 {
    assert_eq!(x.len(), l.len(), "weighted_norm: length mismatch");
    x.iter()
        .zip(l.as_slice())
        .map(|(xi, li)| li * xi * xi)
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

/// `sqrt(sum_i x_i^2 / L_i)`; errors when some `x_i != 0` sits on a zero weight.
pub fn weighted_dual_norm(x: &[f64], l: &WeightVector) -> Result<f64> {
    assert_eq!(x.len(), l.len(), "weighted_dual_norm: length mismatch");
    let mut acc = 0.0;
    for (i, (xi, li)) in x.iter().zip(l.as_slice()).enumerate() {
        if *li == 0.0 {
            if *xi != 0.0 {
                return Err(SolverError::InvalidArgument(format!(
                    "dual norm undefined: x[{i}] = {xi} with zero weight"
                )));
            }
        } else {
            acc += xi * xi / li;
        }
    }
    Ok(acc.sqrt())
}
