//! Dual-problem assembly and evaluation.
//!
//! A primal description (regularizer, per-sample losses, equality and
//! inequality blocks) is compiled into the column map `S = [A/n, B^T, J^T]`,
//! the offset `p = [0; b; q]`, one separable term per dual coordinate and the
//! coordinate smoothness weights `L_j = |S_j|^2 / mu`. All evaluation
//! operations are pure; a built model is immutable and can be shared across
//! concurrent solves.

use crate::error::{Result, SolverError};
use crate::prox::{Loss, Regularizer, SeparableTerm};
use crate::weights::WeightVector;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ShapeBuilder};

/// Primal problem: minimize `f(x) + (1/n) sum phi_i(A_i^T x)` subject to
/// `B x + b = 0` and `J x + q <= 0`. Any of the three blocks may be empty.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    /// t x n; columns are data points.
    pub a: Array2<f64>,
    /// p x t equality block.
    pub b_mat: Array2<f64>,
    /// m x t inequality block.
    pub j_mat: Array2<f64>,
    /// length-p equality offset.
    pub b_vec: Array1<f64>,
    /// length-m inequality offset.
    pub q_vec: Array1<f64>,
    pub reg: Regularizer,
    pub losses: Vec<Loss>,
}

impl ProblemSpec {
    /// Unconstrained empirical-risk problem (p = m = 0).
    pub fn erm(a: Array2<f64>, reg: Regularizer, losses: Vec<Loss>) -> Self {
        let t = a.nrows();
        ProblemSpec {
            a,
            b_mat: Array2::zeros((0, t)),
            j_mat: Array2::zeros((0, t)),
            b_vec: Array1::zeros(0),
            q_vec: Array1::zeros(0),
            reg,
            losses,
        }
    }

    pub fn t(&self) -> usize {
        self.a.nrows().max(self.b_mat.ncols()).max(self.j_mat.ncols())
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn p(&self) -> usize {
        self.b_mat.nrows()
    }

    pub fn m(&self) -> usize {
        self.j_mat.nrows()
    }

    pub fn n_hat(&self) -> usize {
        self.n() + self.p() + self.m()
    }

    pub fn is_erm(&self) -> bool {
        self.p() == 0 && self.m() == 0
    }

    pub fn validate(&self) -> Result<()> {
        self.reg.validate()?;
        let t = self.t();
        if t == 0 {
            return Err(SolverError::InvalidProblem("primal dimension is zero".into()));
        }
        if self.n() > 0 && self.a.nrows() != t {
            return Err(SolverError::InvalidProblem(format!(
                "A has {} rows, expected {t}",
                self.a.nrows()
            )));
        }
        if self.p() > 0 && self.b_mat.ncols() != t {
            return Err(SolverError::InvalidProblem(format!(
                "B has {} columns, expected {t}",
                self.b_mat.ncols()
            )));
        }
        if self.m() > 0 && self.j_mat.ncols() != t {
            return Err(SolverError::InvalidProblem(format!(
                "J has {} columns, expected {t}",
                self.j_mat.ncols()
            )));
        }
        if self.losses.len() != self.n() {
            return Err(SolverError::InvalidProblem(format!(
                "{} losses for {} data columns",
                self.losses.len(),
                self.n()
            )));
        }
        if self.b_vec.len() != self.p() {
            return Err(SolverError::InvalidProblem(format!(
                "b has length {}, expected {}",
                self.b_vec.len(),
                self.p()
            )));
        }
        if self.q_vec.len() != self.m() {
            return Err(SolverError::InvalidProblem(format!(
                "q has length {}, expected {}",
                self.q_vec.len(),
                self.m()
            )));
        }
        if self.n_hat() == 0 {
            return Err(SolverError::InvalidProblem("dual dimension is zero".into()));
        }
        for loss in &self.losses {
            loss.validate()?;
        }
        Ok(())
    }

    /// `F(x) = f(x) + (1/n) sum phi_i(A_i^T x)`.
    pub fn primal_value(&self, x: ArrayView1<f64>) -> f64 {
        let mut val = self.reg.value(x);
        let n = self.n();
        if n > 0 {
            let mut loss_sum = 0.0;
            for (i, loss) in self.losses.iter().enumerate() {
                loss_sum += loss.value(self.a.column(i).dot(&x));
            }
            val += loss_sum / n as f64;
        }
        val
    }

    /// Equality residual `B x + b` and one-sided inequality residual
    /// `max(0, J x + q)`.
    pub fn residuals(&self, x: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
        let eq = if self.p() > 0 {
            self.b_mat.dot(&x) + &self.b_vec
        } else {
            Array1::zeros(0)
        };
        let ineq = if self.m() > 0 {
            let mut r = self.j_mat.dot(&x) + &self.q_vec;
            r.mapv_inplace(|v| v.max(0.0));
            r
        } else {
            Array1::zeros(0)
        };
        (eq, ineq)
    }

    /// Objective plus both constraint residual vectors in one pass.
    pub fn primal_value_and_residuals(
        &self,
        x: ArrayView1<f64>,
    ) -> (f64, Array1<f64>, Array1<f64>) {
        let (eq, ineq) = self.residuals(x);
        (self.primal_value(x), eq, ineq)
    }

    /// Largest Lipschitz constant among the losses, when all are Lipschitz.
    pub fn max_loss_lipschitz(&self) -> Option<f64> {
        let mut m = 0.0f64;
        for loss in &self.losses {
            m = m.max(loss.lipschitz()?);
        }
        Some(m)
    }
}

/// The assembled dual problem `min D(u) = f*(-S u) - <p, u> + sum h_i(u_i)`.
#[derive(Debug, Clone)]
pub struct DualModel {
    spec: ProblemSpec,
    /// t x n_hat column map, column-major so each coordinate step touches one
    /// contiguous column.
    s: Array2<f64>,
    p_vec: Array1<f64>,
    terms: Vec<SeparableTerm>,
    weights: WeightVector,
    mu: f64,
}

impl DualModel {
    /// Assemble `S`, `p`, the term table and the coordinate weights.
    pub fn build(spec: ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let (t, n, p, m) = (spec.t(), spec.n(), spec.p(), spec.m());
        let n_hat = spec.n_hat();
        let mu = spec.reg.mu();

        let mut s = Array2::zeros((t, n_hat).f());
        let mut p_vec = Array1::zeros(n_hat);
        let mut terms = Vec::with_capacity(n_hat);
        let mut weights = Vec::with_capacity(n_hat);

        let nf = n as f64;
        for j in 0..n {
            let col = spec.a.column(j);
            let mut norm_sq = 0.0;
            for (dst, src) in s.column_mut(j).iter_mut().zip(col.iter()) {
                *dst = src / nf;
                norm_sq += src * src;
            }
            terms.push(SeparableTerm::LossConjugate {
                loss: spec.losses[j],
                n,
            });
            weights.push(norm_sq / (nf * nf * mu));
        }
        for r in 0..p {
            let row = spec.b_mat.row(r);
            let mut norm_sq = 0.0;
            for (dst, src) in s.column_mut(n + r).iter_mut().zip(row.iter()) {
                *dst = *src;
                norm_sq += src * src;
            }
            p_vec[n + r] = spec.b_vec[r];
            terms.push(SeparableTerm::Zero);
            weights.push(norm_sq / mu);
        }
        for r in 0..m {
            let row = spec.j_mat.row(r);
            let mut norm_sq = 0.0;
            for (dst, src) in s.column_mut(n + p + r).iter_mut().zip(row.iter()) {
                *dst = *src;
                norm_sq += src * src;
            }
            p_vec[n + p + r] = spec.q_vec[r];
            terms.push(SeparableTerm::NonnegIndicator);
            weights.push(norm_sq / mu);
        }

        // A zero column makes the coordinate step degenerate; that is solvable
        // only when the term's domain keeps the linear subproblem bounded.
        for (j, (w, term)) in weights.iter().zip(&terms).enumerate() {
            if *w == 0.0 && !term.has_bounded_domain() {
                let which = if *term == SeparableTerm::NonnegIndicator {
                    "inequality row"
                } else if matches!(term, SeparableTerm::Zero) {
                    "equality row"
                } else {
                    "data column"
                };
                return Err(SolverError::InvalidProblem(format!(
                    "coordinate {j}: zero-norm {which} with an unbounded conjugate domain; \
                     the coordinate step is undefined"
                )));
            }
        }

        Ok(DualModel {
            spec,
            s,
            p_vec,
            terms,
            weights: WeightVector::new(weights)?,
            mu,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn t(&self) -> usize {
        self.s.nrows()
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn p(&self) -> usize {
        self.spec.p()
    }

    pub fn m(&self) -> usize {
        self.spec.m()
    }

    pub fn n_hat(&self) -> usize {
        self.s.ncols()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn s(&self) -> ArrayView2<'_, f64> {
        self.s.view()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.s.column(j)
    }

    pub fn p_vec(&self) -> ArrayView1<'_, f64> {
        self.p_vec.view()
    }

    pub fn term(&self, j: usize) -> &SeparableTerm {
        &self.terms[j]
    }

    pub fn terms(&self) -> &[SeparableTerm] {
        &self.terms
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// `S u`.
    pub fn s_times(&self, u: ArrayView1<f64>) -> Array1<f64> {
        self.s.dot(&u)
    }

    /// `x*(v) = grad f*(-s_v)` for a caller-maintained `s_v = S v`.
    pub fn primal_from_dual(&self, s_v: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(s_v.len());
        self.primal_from_dual_into(s_v, &mut out);
        out
    }

    /// Allocation-free form of [`DualModel::primal_from_dual`].
    pub fn primal_from_dual_into(&self, s_v: ArrayView1<f64>, out: &mut Array1<f64>) {
        // grad f* of the negated argument, fused to avoid a temporary
        match self.spec.reg {
            Regularizer::L2 { mu } => {
                for (o, s) in out.iter_mut().zip(s_v.iter()) {
                    *o = -s / mu;
                }
            }
            Regularizer::L1PlusL2 { mu, sigma } => {
                for (o, s) in out.iter_mut().zip(s_v.iter()) {
                    let w = -s;
                    *o = w.signum() * (w.abs() - sigma).max(0.0) / mu;
                }
            }
        }
    }

    /// `grad_i d(v) = -S_i^T x*(v) - p_i`; touches only column i.
    pub fn coord_grad(&self, i: usize, x_star: ArrayView1<f64>) -> f64 {
        -self.s.column(i).dot(&x_star) - self.p_vec[i]
    }

    /// `grad d(u) = -S^T x*(u) - p`.
    pub fn full_grad(&self, u: ArrayView1<f64>) -> Array1<f64> {
        let su = self.s_times(u);
        let x_star = self.primal_from_dual(su.view());
        self.full_grad_at(x_star.view())
    }

    /// `grad d` given the recovered primal point.
    pub fn full_grad_at(&self, x_star: ArrayView1<f64>) -> Array1<f64> {
        let mut g = self.s.t().dot(&x_star);
        g.zip_mut_with(&self.p_vec, |gi, pi| *gi = -*gi - pi);
        g
    }

    /// Smooth part `d(u) = f*(-S u) - <p, u>`.
    pub fn smooth_value(&self, u: ArrayView1<f64>) -> f64 {
        let su = self.s_times(u);
        self.smooth_value_from_su(su.view(), u)
    }

    /// `d(u)` when `S u` is already available (O(t + n_hat)).
    pub fn smooth_value_from_su(&self, su: ArrayView1<f64>, u: ArrayView1<f64>) -> f64 {
        let mut neg = su.to_owned();
        neg.mapv_inplace(|v| -v);
        self.spec.reg.conj_value(neg.view()) - self.p_vec.dot(&u)
    }

    /// Separable part `h(u) = sum h_i(u_i)`; infinite outside the domain.
    pub fn separable_value(&self, u: ArrayView1<f64>) -> f64 {
        let mut acc = 0.0;
        for (term, ui) in self.terms.iter().zip(u.iter()) {
            let v = term.value(*ui);
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            acc += v;
        }
        acc
    }

    /// `D(u) = d(u) + h(u)`.
    pub fn dual_value(&self, u: ArrayView1<f64>) -> f64 {
        let h = self.separable_value(u);
        if h == f64::INFINITY {
            return f64::INFINITY;
        }
        self.smooth_value(u) + h
    }

    /// `D(u)` when `S u` is already available.
    pub fn dual_value_from_su(&self, su: ArrayView1<f64>, u: ArrayView1<f64>) -> f64 {
        let h = self.separable_value(u);
        if h == f64::INFINITY {
            return f64::INFINITY;
        }
        self.smooth_value_from_su(su, u) + h
    }

    /// Whether `u` lies in the dual feasible set (non-negative inequality
    /// multipliers) and in every term's conjugate domain.
    pub fn in_domain(&self, u: ArrayView1<f64>) -> bool {
        self.separable_value(u).is_finite()
    }

    /// Global smoothness constant `|S|_2^2 / mu` of `d`, via power iteration
    /// on `S^T S` (cap 1000, relative tolerance 1e-10, all-ones start).
    pub fn global_l(&self) -> Result<f64> {
        Ok(spectral_norm_sq(self.s.view())? / self.mu)
    }

    /// The looser stacked-operator smoothness bound
    /// `sqrt(m+1) max(|[A^T/n; B]|_2, max_i |J_i|) / mu *
    ///  sqrt(|[A^T/n; B]|_2^2 + sum_i |J_i|^2)`.
    /// Documented alternative to [`DualModel::global_l`]; not used by the
    /// solvers.
    pub fn stacked_smoothness_bound(&self) -> Result<f64> {
        let np = self.n() + self.p();
        let head = self.s.slice(ndarray::s![.., ..np]);
        let head_sq = if np > 0 { spectral_norm_sq(head)? } else { 0.0 };
        let mut row_sq_sum = 0.0;
        let mut row_sq_max = 0.0f64;
        for j in np..self.n_hat() {
            let sq = self.s.column(j).iter().map(|v| v * v).sum::<f64>();
            row_sq_sum += sq;
            row_sq_max = row_sq_max.max(sq);
        }
        let m = self.m() as f64;
        Ok((m + 1.0).sqrt() * head_sq.max(row_sq_max).sqrt() / self.mu
            * (head_sq + row_sq_sum).sqrt())
    }
}

const POWER_ITER_CAP: usize = 1000;
const POWER_ITER_TOL: f64 = 1e-10;

/// Largest eigenvalue of `S^T S` (i.e. `|S|_2^2`) by power iteration from the
/// all-ones vector. Falls back to a basis vector if the iterate lands exactly
/// in the null space.
pub fn spectral_norm_sq(s: ArrayView2<f64>) -> Result<f64> {
    let n = s.ncols();
    if n == 0 || s.nrows() == 0 {
        return Ok(0.0);
    }
    let mut w = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut lambda_prev = f64::INFINITY;
    let mut restarts = 0usize;
    for _ in 0..POWER_ITER_CAP {
        let sw = s.dot(&w);
        let lambda = sw.iter().map(|v| v * v).sum::<f64>();
        let mut next = s.t().dot(&sw);
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            if s.iter().all(|v| *v == 0.0) {
                return Ok(0.0);
            }
            if restarts < n {
                next = Array1::zeros(n);
                next[restarts] = 1.0;
                restarts += 1;
                w = next;
                lambda_prev = f64::INFINITY;
                continue;
            }
            return Err(SolverError::PowerIteration(POWER_ITER_CAP));
        }
        next.mapv_inplace(|v| v / norm);
        w = next;
        if (lambda - lambda_prev).abs() <= POWER_ITER_TOL * lambda.max(f64::MIN_POSITIVE) {
            return Ok(lambda);
        }
        lambda_prev = lambda;
    }
    Err(SolverError::PowerIteration(POWER_ITER_CAP))
}
