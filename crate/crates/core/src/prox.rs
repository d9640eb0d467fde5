//! Closed-form conjugates and proximal maps for the supported regularizers
//! and losses. Everything here is a pure function of an immutable descriptor;
//! no iterative inner solver is used.

use crate::error::{Result, SolverError};
use ndarray::{Array1, ArrayView1};

/// Strongly convex regularizer `f`. `L2` is `(mu/2)|x|^2`; `L1PlusL2` is
/// `(mu/2)|x|^2 + sigma |x|_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    L2 { mu: f64 },
    L1PlusL2 { mu: f64, sigma: f64 },
}

impl Regularizer {
    pub fn mu(&self) -> f64 {
        match *self {
            Regularizer::L2 { mu } => mu,
            Regularizer::L1PlusL2 { mu, .. } => mu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mu = self.mu();
        if !(mu.is_finite() && mu > 0.0) {
            return Err(SolverError::InvalidProblem(format!(
                "strong-convexity modulus must be positive, got {mu}"
            )));
        }
        if let Regularizer::L1PlusL2 { sigma, .. } = *self {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(SolverError::InvalidProblem(format!(
                    "l1 weight must be non-negative, got {sigma}"
                )));
            }
        }
        Ok(())
    }

    /// `f(x)`.
    pub fn value(&self, x: ArrayView1<f64>) -> f64 {
        match *self {
            Regularizer::L2 { mu } => 0.5 * mu * x.iter().map(|v| v * v).sum::<f64>(),
            Regularizer::L1PlusL2 { mu, sigma } => {
                let sq: f64 = x.iter().map(|v| v * v).sum();
                let l1: f64 = x.iter().map(|v| v.abs()).sum();
                0.5 * mu * sq + sigma * l1
            }
        }
    }

    /// `grad f*(w)`: `w/mu` for L2, the soft threshold `S(w, sigma)/mu`
    /// componentwise for L1PlusL2.
    pub fn conj_grad(&self, w: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(w.len());
        self.conj_grad_into(w, &mut out);
        out
    }

    /// Allocation-free form of [`Regularizer::conj_grad`] for the hot loop.
    pub fn conj_grad_into(&self, w: ArrayView1<f64>, out: &mut Array1<f64>) {
        debug_assert_eq!(w.len(), out.len());
        match *self {
            Regularizer::L2 { mu } => {
                for (o, wi) in out.iter_mut().zip(w.iter()) {
                    *o = wi / mu;
                }
            }
            Regularizer::L1PlusL2 { mu, sigma } => {
                for (o, wi) in out.iter_mut().zip(w.iter()) {
                    *o = soft_threshold(*wi, sigma) / mu;
                }
            }
        }
    }

    /// `f*(w)`: `|w|^2 / (2 mu)` for L2, `sum max(|w_j| - sigma, 0)^2 / (2 mu)`
    /// for L1PlusL2.
    pub fn conj_value(&self, w: ArrayView1<f64>) -> f64 {
        match *self {
            Regularizer::L2 { mu } => w.iter().map(|v| v * v).sum::<f64>() / (2.0 * mu),
            Regularizer::L1PlusL2 { mu, sigma } => {
                w.iter()
                    .map(|v| {
                        let s = (v.abs() - sigma).max(0.0);
                        s * s
                    })
                    .sum::<f64>()
                    / (2.0 * mu)
            }
        }
    }
}

fn soft_threshold(v: f64, sigma: f64) -> f64 {
    v.signum() * (v.abs() - sigma).max(0.0)
}

/// Scalar loss `phi_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    /// `(y - offset)^2 / 2`. Not Lipschitz; excluded from M-dependent schedules.
    Squared { offset: f64 },
    /// `|y - offset|`, Lipschitz with M = 1.
    Absolute { offset: f64 },
    /// `max(0, 1 - label * y)` with `label` in {-1, +1}, Lipschitz with M = 1.
    Hinge { label: i8 },
}

impl Loss {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Loss::Squared { offset } | Loss::Absolute { offset } => {
                if !offset.is_finite() {
                    return Err(SolverError::InvalidProblem(format!(
                        "loss offset must be finite, got {offset}"
                    )));
                }
            }
            Loss::Hinge { label } => {
                if label != 1 && label != -1 {
                    return Err(SolverError::InvalidProblem(format!(
                        "hinge label must be +1 or -1, got {label}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `phi(y)`.
    pub fn value(&self, y: f64) -> f64 {
        match *self {
            Loss::Squared { offset } => {
                let d = y - offset;
                0.5 * d * d
            }
            Loss::Absolute { offset } => (y - offset).abs(),
            Loss::Hinge { label } => (1.0 - f64::from(label) * y).max(0.0),
        }
    }

    /// `phi*(u)`; `f64::INFINITY` outside the conjugate domain.
    pub fn conj_value(&self, u: f64) -> f64 {
        match *self {
            Loss::Squared { offset } => 0.5 * u * u + offset * u,
            Loss::Absolute { offset } => {
                if u.abs() <= 1.0 {
                    offset * u
                } else {
                    f64::INFINITY
                }
            }
            Loss::Hinge { label } => {
                let l = f64::from(label);
                let lu = l * u;
                if (-1.0..=0.0).contains(&lu) {
                    lu
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Lipschitz constant M of `phi`, when finite.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Loss::Squared { .. } => None,
            Loss::Absolute { .. } | Loss::Hinge { .. } => Some(1.0),
        }
    }

    /// Domain of `phi*` as a closed interval (infinite ends for squared).
    pub fn conj_domain(&self) -> (f64, f64) {
        match *self {
            Loss::Squared { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Loss::Absolute { .. } => (-1.0, 1.0),
            Loss::Hinge { label } => {
                if label == 1 {
                    (-1.0, 0.0)
                } else {
                    (0.0, 1.0)
                }
            }
        }
    }

    /// `Prox_{tau phi}(v)`, the primal proximal map. Used by the verification
    /// suites together with the conjugate prox through the Moreau identity.
    pub fn prox(&self, v: f64, tau: f64) -> f64 {
        assert!(tau > 0.0);
        match *self {
            Loss::Squared { offset } => (v + tau * offset) / (1.0 + tau),
            Loss::Absolute { offset } => offset + soft_threshold(v - offset, tau),
            Loss::Hinge { label } => {
                let l = f64::from(label);
                // argmin (u - v)^2 / (2 tau) + max(0, 1 - l u)
                let w = l * v; // reduce to label +1
                let p = if w >= 1.0 {
                    w
                } else if w <= 1.0 - tau {
                    w + tau
                } else {
                    1.0
                };
                l * p
            }
        }
    }
}

/// One separable dual term `h_i`: the scaled loss conjugate for sample
/// coordinates, zero for equality multipliers, the nonnegativity indicator
/// for inequality multipliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeparableTerm {
    /// `(1/n) phi_i*`; the `1/n` factor lives here, callers pass unscaled steps.
    LossConjugate { loss: Loss, n: usize },
    Zero,
    NonnegIndicator,
}

impl SeparableTerm {
    /// `h_i(u)`; `f64::INFINITY` outside the domain.
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            SeparableTerm::LossConjugate { loss, n } => loss.conj_value(u) / n as f64,
            SeparableTerm::Zero => 0.0,
            SeparableTerm::NonnegIndicator => {
                if u >= 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Domain of `h_i` as a closed interval.
    pub fn domain(&self) -> (f64, f64) {
        match *self {
            SeparableTerm::LossConjugate { loss, .. } => loss.conj_domain(),
            SeparableTerm::Zero => (f64::NEG_INFINITY, f64::INFINITY),
            SeparableTerm::NonnegIndicator => (0.0, f64::INFINITY),
        }
    }

    pub fn has_bounded_domain(&self) -> bool {
        let (lo, hi) = self.domain();
        lo.is_finite() && hi.is_finite()
    }

    pub fn clamp_into_domain(&self, u: f64) -> f64 {
        let (lo, hi) = self.domain();
        u.clamp(lo, hi)
    }

    /// `argmin_u (u - v)^2 / (2 tau) + h_i(u)`.
    pub fn prox(&self, v: f64, tau: f64) -> Result<f64> {
        if !(tau > 0.0) {
            return Err(SolverError::InvalidArgument(format!(
                "prox step must be positive, got {tau}"
            )));
        }
        Ok(match *self {
            SeparableTerm::Zero => v,
            SeparableTerm::NonnegIndicator => v.max(0.0),
            SeparableTerm::LossConjugate { loss, n } => {
                let n = n as f64;
                match loss {
                    Loss::Squared { offset } => (v - tau * offset / n) / (1.0 + tau / n),
                    Loss::Absolute { offset } => (v - tau * offset / n).clamp(-1.0, 1.0),
                    Loss::Hinge { label } => {
                        let (lo, hi) = loss.conj_domain();
                        (v - tau * f64::from(label) / n).clamp(lo, hi)
                    }
                }
            }
        })
    }

    /// Degenerate coordinate step for a zero smoothness weight: minimize
    /// `slope * u + h_i(u)` exactly. `current` breaks ties when the objective
    /// is flat. Errors when the minimum is unbounded (the dual diverges).
    pub fn exact_min(&self, slope: f64, current: f64) -> Result<f64> {
        let linear = match *self {
            SeparableTerm::LossConjugate { loss, n } => match loss {
                // slope*u + (u^2/2 + b u)/n has an interior minimizer
                Loss::Squared { offset } => {
                    return Ok(-(slope * n as f64 + offset));
                }
                Loss::Absolute { offset } => slope + offset / n as f64,
                Loss::Hinge { label } => slope + f64::from(label) / n as f64,
            },
            SeparableTerm::Zero => slope,
            SeparableTerm::NonnegIndicator => slope,
        };
        let (lo, hi) = self.domain();
        if linear > 0.0 {
            if lo.is_finite() {
                Ok(lo)
            } else {
                Err(SolverError::InvalidArgument(
                    "linear subproblem unbounded below".into(),
                ))
            }
        } else if linear < 0.0 {
            if hi.is_finite() {
                Ok(hi)
            } else {
                Err(SolverError::InvalidArgument(
                    "linear subproblem unbounded below".into(),
                ))
            }
        } else {
            Ok(current)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn l2_conjugate_gradient_is_linear() {
        let reg = Regularizer::L2 { mu: 0.5 };
        let g = reg.conj_grad(array![1.0, -2.0].view());
        assert_eq!(g, array![2.0, -4.0]);
    }

    #[test]
    fn l1_l2_conjugate_gradient_soft_thresholds() {
        let reg = Regularizer::L1PlusL2 { mu: 0.5, sigma: 1.0 };
        let g = reg.conj_grad(array![2.0, -0.5, 0.0].view());
        assert_eq!(g, array![2.0, 0.0, 0.0]);
    }

    #[test]
    fn conjugate_values() {
        let l2 = Regularizer::L2 { mu: 1.0 };
        assert_relative_eq!(l2.conj_value(array![2.0, 0.0].view()), 2.0);
        let en = Regularizer::L1PlusL2 { mu: 1.0, sigma: 1.0 };
        assert_eq!(en.conj_value(array![0.5].view()), 0.0);
        assert_eq!(en.conj_value(array![0.0, 0.0].view()), 0.0);
        assert_eq!(l2.conj_value(array![0.0].view()), 0.0);
    }

    #[test]
    fn term_prox_examples() {
        let zero = SeparableTerm::Zero;
        assert_eq!(zero.prox(3.7, 0.9).unwrap(), 3.7);

        let nn = SeparableTerm::NonnegIndicator;
        assert_eq!(nn.prox(-0.4, 1.0).unwrap(), 0.0);
        assert_eq!(nn.prox(0.1, 1.0).unwrap(), 0.1);

        let abs = SeparableTerm::LossConjugate {
            loss: Loss::Absolute { offset: 0.0 },
            n: 1,
        };
        assert_eq!(abs.prox(1.7, 1.0).unwrap(), 1.0);

        let hinge = SeparableTerm::LossConjugate {
            loss: Loss::Hinge { label: 1 },
            n: 1,
        };
        // shift by tau*l/n = 0.2 then clamp onto [-1, 0]
        assert_eq!(hinge.prox(0.5, 0.2).unwrap(), 0.0);

        assert!(abs.prox(0.0, 0.0).is_err());
        assert!(abs.prox(0.0, -1.0).is_err());
    }

    #[test]
    fn squared_term_prox_matches_formula() {
        let term = SeparableTerm::LossConjugate {
            loss: Loss::Squared { offset: 2.0 },
            n: 4,
        };
        let (v, tau) = (1.3, 0.7);
        let expected = (v - tau * 2.0 / 4.0) / (1.0 + tau / 4.0);
        assert_relative_eq!(term.prox(v, tau).unwrap(), expected, max_relative = 1e-15);
    }

    #[test]
    fn loss_values_and_conjugates() {
        let hinge = Loss::Hinge { label: 1 };
        assert_eq!(hinge.value(0.0), 1.0);
        assert_eq!(hinge.value(2.0), 0.0);
        let abs = Loss::Absolute { offset: 1.0 };
        assert_eq!(abs.value(3.0), 2.0);
        let sq = Loss::Squared { offset: 0.0 };
        assert_relative_eq!(sq.conj_value(2.0), 2.0);
        assert_eq!(abs.conj_value(1.5), f64::INFINITY);
        assert_eq!(hinge.conj_value(0.5), f64::INFINITY);
        assert_relative_eq!(hinge.conj_value(-0.5), -0.5);
    }

    fn all_losses() -> Vec<Loss> {
        vec![
            Loss::Squared { offset: 0.7 },
            Loss::Squared { offset: -1.2 },
            Loss::Absolute { offset: 0.0 },
            Loss::Absolute { offset: 2.5 },
            Loss::Hinge { label: 1 },
            Loss::Hinge { label: -1 },
        ]
    }

    #[test]
    fn moreau_identity_at_unit_step() {
        // Prox_phi(v) + Prox_{phi*}(v) = v for tau = 1 (unscaled conjugate,
        // i.e. the n = 1 term).
        let mut rng = RngStream::new(3, 1);
        for loss in all_losses() {
            let term = SeparableTerm::LossConjugate { loss, n: 1 };
            for _ in 0..1000 {
                let v = rng.uniform(-5.0, 5.0);
                let sum = loss.prox(v, 1.0) + term.prox(v, 1.0).unwrap();
                assert!(
                    (sum - v).abs() <= 1e-10,
                    "Moreau violated for {loss:?} at v={v}: {sum}"
                );
            }
        }
    }

    #[test]
    fn prox_optimality_via_subgradient_inequality() {
        // g = (v - p)/tau must satisfy h(w) >= h(p) + g (w - p) for all w.
        let mut rng = RngStream::new(4, 2);
        let terms: Vec<SeparableTerm> = all_losses()
            .into_iter()
            .map(|loss| SeparableTerm::LossConjugate { loss, n: 3 })
            .chain([SeparableTerm::Zero, SeparableTerm::NonnegIndicator])
            .collect();
        for term in terms {
            for _ in 0..200 {
                let v = rng.uniform(-4.0, 4.0);
                let tau = rng.uniform(0.05, 3.0);
                let p = term.prox(v, tau).unwrap();
                let g = (v - p) / tau;
                let hp = term.value(p);
                assert!(hp.is_finite(), "prox point must be in the domain");
                for step in -20..=20 {
                    let w = p + step as f64 * 0.25;
                    let hw = term.value(w);
                    if hw.is_finite() {
                        assert!(
                            hw + 1e-10 >= hp + g * (w - p),
                            "subgradient inequality violated for {term:?}: v={v} tau={tau} w={w}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn prox_is_nonexpansive() {
        let mut rng = RngStream::new(5, 3);
        let terms: Vec<SeparableTerm> = all_losses()
            .into_iter()
            .map(|loss| SeparableTerm::LossConjugate { loss, n: 2 })
            .chain([SeparableTerm::Zero, SeparableTerm::NonnegIndicator])
            .collect();
        for term in terms {
            for _ in 0..500 {
                let v1 = rng.uniform(-5.0, 5.0);
                let v2 = rng.uniform(-5.0, 5.0);
                let tau = rng.uniform(0.05, 4.0);
                let p1 = term.prox(v1, tau).unwrap();
                let p2 = term.prox(v2, tau).unwrap();
                assert!((p1 - p2).abs() <= (v1 - v2).abs() + 1e-14);
            }
        }
    }

    #[test]
    fn fenchel_young_inequality_and_kinks() {
        let mut rng = RngStream::new(6, 4);
        for loss in all_losses() {
            for _ in 0..1000 {
                let y = rng.uniform(-4.0, 4.0);
                let (lo, hi) = loss.conj_domain();
                let u = rng.uniform(lo.max(-4.0), hi.min(4.0));
                let lhs = loss.value(y) + loss.conj_value(u);
                assert!(lhs + 1e-12 >= u * y, "Fenchel-Young violated for {loss:?}");
            }
        }
        // equality at subgradients of the kinks
        let abs = Loss::Absolute { offset: 2.0 };
        // at y = offset, any u in [-1, 1] is a subgradient
        for u in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            let y = 2.0;
            assert_relative_eq!(abs.value(y) + abs.conj_value(u), u * y, epsilon = 1e-12);
        }
        let hinge = Loss::Hinge { label: 1 };
        // at y = 1 (the kink), any u in [-1, 0] attains equality
        for u in [-1.0, -0.5, 0.0] {
            let y = 1.0;
            assert_relative_eq!(hinge.value(y) + hinge.conj_value(u), u * y, epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_min_on_bounded_domains() {
        let abs = SeparableTerm::LossConjugate {
            loss: Loss::Absolute { offset: 0.5 },
            n: 1,
        };
        // slope + b = 1.5 > 0 -> left end
        assert_eq!(abs.exact_min(1.0, 0.2).unwrap(), -1.0);
        // slope + b = -0.5 < 0 -> right end
        assert_eq!(abs.exact_min(-1.0, 0.2).unwrap(), 1.0);
        // flat -> stay
        assert_eq!(abs.exact_min(-0.5, 0.2).unwrap(), 0.2);

        let nn = SeparableTerm::NonnegIndicator;
        assert_eq!(nn.exact_min(2.0, 1.0).unwrap(), 0.0);
        assert!(nn.exact_min(-2.0, 1.0).is_err());

        let zero = SeparableTerm::Zero;
        assert!(zero.exact_min(1.0, 0.0).is_err());
        assert_eq!(zero.exact_min(0.0, 3.0).unwrap(), 3.0);
    }
}
