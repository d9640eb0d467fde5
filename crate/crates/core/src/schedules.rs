//! Outer-loop orchestration: restarting the accelerated schedule from the
//! incumbent dual point, and the warm-start schedule for unconstrained
//! empirical-risk problems.

use crate::dual::DualModel;
use crate::engine::{EngineState, K0Policy, SolveReport, StepVariant};
use crate::error::{Result, SolverError};
use crate::rng::RngStream;
use crate::theta::ScheduleMode;
use crate::trace::Tracer;
use ndarray::{Array1, ArrayView1};

/// Restart schedule: `n_outer` sequential accelerated runs, each of
/// `inner_k + 1` iterations, warm-started from the previous dual output.
/// Linear convergence needs no knowledge of the growth constant; any
/// `inner_k >= n_hat` contracts, and sweeping `inner_k` over a few multiples
/// of `n_hat` (2, 10, 40, 80) covers the practical range.
#[derive(Debug, Clone)]
pub struct RestartPlan {
    pub n_outer: usize,
    pub inner_k: u64,
    pub k0: K0Policy,
    pub variant: StepVariant,
}

impl RestartPlan {
    pub fn new(n_outer: usize, inner_k: u64) -> Self {
        RestartPlan {
            n_outer,
            inner_k,
            k0: K0Policy::checkpoint_default(),
            variant: StepVariant::Paper,
        }
    }
}

/// Run the restart schedule. Each inner run owns its own averaging window;
/// the returned report is the final run's, carrying the concatenated trace.
pub fn restart_run(
    model: &DualModel,
    u0: ArrayView1<f64>,
    plan: &RestartPlan,
    mut rng: RngStream,
    tracer: &mut Tracer,
) -> Result<SolveReport> {
    if plan.n_outer < 1 || plan.inner_k < 1 {
        return Err(SolverError::InvalidArgument(
            "restart plan needs n_outer >= 1 and inner_k >= 1".into(),
        ));
    }
    let mut warm = u0.to_owned();
    let mut report = None;
    for _ in 0..plan.n_outer {
        let state = EngineState::init(
            model,
            warm.view(),
            ScheduleMode::Accelerated,
            plan.variant,
            rng.clone(),
        )?;
        // hand the stream forward so outer iterations draw disjoint sequences
        rng = RngStream::new(rng.next_u64(), rng.next_u64());
        let r = state.run(model, plan.inner_k, plan.k0, tracer)?;
        warm = r.u_final.clone();
        report = Some(r);
    }
    Ok(report.expect("n_outer >= 1"))
}

/// How the warm-start length is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KPrimeChoice {
    /// Computed from the dimension, strong convexity, loss Lipschitz constant
    /// and target accuracy. Squared losses have no Lipschitz constant; they
    /// require `m_override`.
    Auto { eps: f64, m_override: Option<f64> },
    Explicit(u64),
}

/// Warm start plus accelerated phase for unconstrained problems.
#[derive(Debug, Clone)]
pub struct ErmPlan {
    pub k_prime: KPrimeChoice,
    pub k: u64,
    pub k0: K0Policy,
    pub variant: StepVariant,
}

#[derive(Debug, Clone)]
pub struct KPrimeResult {
    pub k_prime: u64,
    /// Set when the log argument was non-positive and the result clamped to 0.
    pub warned_nonpositive_log: bool,
}

/// `K' = ceil( n log( min(1/eps, n mu / M^2) * (D(u0) + F(x*(u0))) ) - 1 )`,
/// clamped to be non-negative.
pub fn kprime_formula(
    n: usize,
    mu: f64,
    m_lip: f64,
    eps: f64,
    d0_plus_f0: f64,
) -> Result<KPrimeResult> {
    if n == 0 || !(mu > 0.0) || !(m_lip > 0.0) || !(eps > 0.0) {
        return Err(SolverError::InvalidArgument(
            "kprime_formula needs positive n, mu, M and eps".into(),
        ));
    }
    let scale = (1.0 / eps).min(n as f64 * mu / (m_lip * m_lip));
    let arg = scale * d0_plus_f0;
    if arg <= 0.0 {
        return Ok(KPrimeResult { k_prime: 0, warned_nonpositive_log: true });
    }
    let raw = (n as f64 * arg.ln() - 1.0).ceil();
    Ok(KPrimeResult {
        k_prime: if raw > 0.0 { raw as u64 } else { 0 },
        warned_nonpositive_log: false,
    })
}

/// Report of an ERM run: the final accelerated-phase report plus the
/// warm-start output the second phase started from.
#[derive(Debug, Clone)]
pub struct ErmReport {
    pub solve: SolveReport,
    /// `u^{K'+1}`, the dual point after the fixed-theta phase (`u0` itself
    /// when `K' = 0`).
    pub u_warm: Array1<f64>,
    /// `x*(v^{K'})` from the fixed-theta phase, when it ran.
    pub x_warm: Option<Array1<f64>>,
    pub k_prime_used: u64,
    pub k_prime_warning: bool,
}

/// Fixed-theta warm start of `K' + 1` iterations followed by an accelerated
/// run of `K + 1` iterations. Restricted to unconstrained specs, where the
/// fixed schedule's `1/n_hat` equals the `1/n` the warm-start length is
/// calibrated for.
pub fn erm_run(
    model: &DualModel,
    u0: ArrayView1<f64>,
    plan: &ErmPlan,
    rng: RngStream,
    tracer: &mut Tracer,
) -> Result<ErmReport> {
    if !model.spec().is_erm() {
        return Err(SolverError::InvalidArgument(
            "the warm-start schedule applies to unconstrained problems only".into(),
        ));
    }
    let (k_prime, warning) = match plan.k_prime {
        KPrimeChoice::Explicit(k) => (k, false),
        KPrimeChoice::Auto { eps, m_override } => {
            let m_lip = match m_override {
                Some(m) => m,
                None => model.spec().max_loss_lipschitz().ok_or_else(|| {
                    SolverError::InvalidArgument(
                        "losses have no uniform Lipschitz constant; supply an explicit M".into(),
                    )
                })?,
            };
            let su = model.s_times(u0);
            let x0 = model.primal_from_dual(su.view());
            let d0_plus_f0 =
                model.dual_value_from_su(su.view(), u0) + model.spec().primal_value(x0.view());
            let r = kprime_formula(model.n(), model.mu(), m_lip, eps, d0_plus_f0)?;
            (r.k_prime, r.warned_nonpositive_log)
        }
    };

    let mut rng = rng;
    let (warm, x_warm) = if k_prime >= 1 {
        let state = EngineState::init(model, u0, ScheduleMode::Fixed, plan.variant, rng.clone())?;
        rng = RngStream::new(rng.next_u64(), rng.next_u64());
        let phase1 = state.run(model, k_prime, K0Policy::Explicit(0), tracer)?;
        (phase1.u_final, Some(phase1.x_last))
    } else {
        (u0.to_owned(), None)
    };

    let state = EngineState::init(
        model,
        warm.view(),
        ScheduleMode::Accelerated,
        plan.variant,
        rng,
    )?;
    let solve = state.run(model, plan.k, plan.k0, tracer)?;
    Ok(ErmReport {
        solve,
        u_warm: warm,
        x_warm,
        k_prime_used: k_prime,
        k_prime_warning: warning,
    })
}

/// Predicted per-restart contraction factor
/// `(1 + (1 - theta_0) kappa) / (1 + kappa/2 (K/(2 n_hat) + 1)^2)` with
/// `theta_0 = 1/n_hat`. The growth constant `kappa` is never an algorithm
/// input; this is a reference quantity for validation.
pub fn restart_contraction_factor(n_hat: usize, kappa: f64, k: u64) -> f64 {
    let theta0 = 1.0 / n_hat as f64;
    let half = k as f64 / (2.0 * n_hat as f64) + 1.0;
    (1.0 + (1.0 - theta0) * kappa) / (1.0 + 0.5 * kappa * half * half)
}
