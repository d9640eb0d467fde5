//! The momentum sequence shared by the accelerated solvers.
//!
//! The accelerated schedule starts at `theta_0 = 1/n_hat` and follows the
//! recurrence `(1 - theta_{k+1}) / theta_{k+1}^2 = 1 / theta_k^2`; the fixed
//! schedule keeps `theta_k = 1/n_hat` throughout.

use crate::error::{Result, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    Accelerated,
    Fixed,
}

/// One accelerated update: the positive root of
/// `(1 - t) / t^2 = 1 / theta^2`, i.e. `(sqrt(theta^4 + 4 theta^2) - theta^2) / 2`,
/// evaluated in the rationalized form `2 theta / (theta + sqrt(theta^2 + 4))`
/// which avoids cancellation for small theta.
pub fn theta_next(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(SolverError::InvalidArgument(format!(
            "theta must lie in (0, 1], got {theta}"
        )));
    }
    Ok(2.0 * theta / (theta + (theta * theta + 4.0).sqrt()))
}

/// `theta_{-1} = 1 / sqrt(n_hat^2 - n_hat)`, the formal predecessor of
/// `theta_0`; it satisfies the recurrence at k = 0 and closes the telescoping
/// identity. Defined for `n_hat >= 2`.
pub fn theta_minus_one(n_hat: usize) -> Result<f64> {
    if n_hat < 2 {
        return Err(SolverError::InvalidArgument(format!(
            "theta_minus_one requires n_hat >= 2, got {n_hat}"
        )));
    }
    let n = n_hat as f64;
    Ok(1.0 / (n * n - n).sqrt())
}

#[derive(Debug, Clone)]
pub struct ThetaSchedule {
    theta: f64,
    k: u64,
    n_hat: usize,
    mode: ScheduleMode,
}

impl ThetaSchedule {
    pub fn new(n_hat: usize, mode: ScheduleMode) -> Result<Self> {
        if n_hat == 0 {
            return Err(SolverError::InvalidArgument(
                "schedule dimension must be positive".into(),
            ));
        }
        Ok(ThetaSchedule {
            theta: 1.0 / n_hat as f64,
            k: 0,
            n_hat,
            mode,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n_hat(&self) -> usize {
        self.n_hat
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    /// Advance to iteration k+1. In fixed mode theta is left unchanged.
    pub fn advance(&mut self) -> Result<()> {
        if self.mode == ScheduleMode::Accelerated {
            self.theta = theta_next(self.theta)?;
        }
        self.k += 1;
        Ok(())
    }
}
