//! Reference solvers the coordinate method races against: fixed-theta RDCA
//! (the engine in fixed mode), plain projected dual gradient, and accelerated
//! dual full gradient ascent with weighted primal averaging.

use crate::dual::DualModel;
use crate::engine::{
    checkpoint_base, checkpoint_k0, EngineState, K0Policy, SolveReport, StepVariant, DEFAULT_NU,
};
use crate::error::{Result, SolverError};
use crate::rng::RngStream;
use crate::theta::{ScheduleMode, ThetaSchedule};
use crate::trace::{PrimalChoice, Tracer};
use ndarray::{Array1, ArrayView1};

/// Iterate bundle of the full-gradient baselines. `z` and `theta` are only
/// used by the accelerated variant.
#[derive(Debug, Clone)]
pub struct FullGradState {
    pub u: Array1<f64>,
    pub z: Option<Array1<f64>>,
    pub theta: f64,
    pub l_glob: f64,
    sum_x: Array1<f64>,
    sum_weight: f64,
}

/// Non-accelerated randomized dual coordinate ascent: the engine with
/// `theta_k = 1/n_hat` throughout. The primal of record is the last iterate
/// `x*(v^K)`; the report's `x_avg` carries the uniform average of all
/// recovered iterates as a diagnostic.
pub fn rdca_run(
    model: &DualModel,
    u0: ArrayView1<f64>,
    k_last: u64,
    rng: RngStream,
    tracer: &mut Tracer,
) -> Result<SolveReport> {
    let state = EngineState::init(model, u0, ScheduleMode::Fixed, StepVariant::Paper, rng)?;
    // fixed theta makes the 1/theta weights constant, so the windowed average
    // from k = 0 is exactly the uniform mean
    state.run(model, k_last, K0Policy::Explicit(0), tracer)
}

fn validate_u0(model: &DualModel, u0: ArrayView1<f64>) -> Result<Array1<f64>> {
    if u0.len() != model.n_hat() {
        return Err(SolverError::InvalidArgument(format!(
            "u0 has length {}, expected {}",
            u0.len(),
            model.n_hat()
        )));
    }
    let mut u = Array1::zeros(model.n_hat());
    for (i, (ui, u0i)) in u.iter_mut().zip(u0.iter()).enumerate() {
        if *model.term(i) == crate::prox::SeparableTerm::NonnegIndicator && *u0i < 0.0 {
            return Err(SolverError::InvalidArgument(format!(
                "u0[{i}] = {u0i} is outside the dual feasible set"
            )));
        }
        *ui = model.term(i).clamp_into_domain(*u0i);
    }
    Ok(u)
}

fn positive_l_glob(model: &DualModel) -> Result<f64> {
    let l = model.global_l()?;
    if l <= 0.0 {
        return Err(SolverError::InvalidProblem(
            "global smoothness constant is zero; full-gradient steps are undefined".into(),
        ));
    }
    Ok(l)
}

/// Plain dual gradient with the separable prox: `u <- prox_{h/L}(u - grad d(u)/L)`,
/// step `1/L` with `L = |S|_2^2 / mu`. Runs `k_last` steps; the primal of
/// record is the uniform average of `x*(u^k)` over `k = 0..k_last`.
pub fn dga_run(
    model: &DualModel,
    u0: ArrayView1<f64>,
    k_last: u64,
    tracer: &mut Tracer,
) -> Result<SolveReport> {
    let l_glob = positive_l_glob(model)?;
    let tau = 1.0 / l_glob;
    let mut state = FullGradState {
        u: validate_u0(model, u0)?,
        z: None,
        theta: 1.0,
        l_glob,
        sum_x: Array1::zeros(model.t()),
        sum_weight: 0.0,
    };

    let mut su = model.s_times(state.u.view());
    let mut x = model.primal_from_dual(su.view());
    state.sum_x += &x;
    state.sum_weight += 1.0;
    let mut d_prev = model.dual_value_from_su(su.view(), state.u.view());
    if tracer.needs_initial_record() {
        tracer.push(model, x.view(), state.u.view(), Some(&su), "ok");
    }

    for k in 0..k_last {
        let g = model.full_grad_at(x.view());
        for (i, (ui, gi)) in state.u.iter_mut().zip(g.iter()).enumerate() {
            *ui = model.term(i).prox(*ui - tau * gi, tau)?;
        }
        su = model.s_times(state.u.view());
        x = model.primal_from_dual(su.view());
        state.sum_x += &x;
        state.sum_weight += 1.0;

        let d = model.dual_value_from_su(su.view(), state.u.view());
        if !d.is_finite() {
            let e = SolverError::Numeric { iter: k, msg: "non-finite dual value".into() };
            tracer.push_abort(&e.to_string());
            return Err(e);
        }
        // descent property of the prox-gradient step at tau = 1/L
        debug_assert!(
            d <= d_prev + 1e-9 * (1.0 + d_prev.abs()),
            "dual objective increased: {d_prev} -> {d}"
        );
        d_prev = d;

        if tracer.tick() {
            let x_report = match tracer.primal_choice() {
                PrimalChoice::Averaged => state.sum_x.mapv(|v| v / state.sum_weight),
                PrimalChoice::LastIterate => x.clone(),
            };
            tracer.push(model, x_report.view(), state.u.view(), Some(&su), "ok");
        }
    }

    Ok(SolveReport {
        u_final: state.u,
        x_avg: state.sum_x.mapv(|v| v / state.sum_weight),
        x_last: x,
        k0_used: 0,
        trace: tracer.snapshot(),
    })
}

/// Accelerated proximal gradient on the dual with the same theta recurrence
/// started at `theta_0 = 1` and `1/theta_k`-weighted primal averaging over
/// the checkpoint window. Runs `k_last` steps.
pub fn adfga_run(
    model: &DualModel,
    u0: ArrayView1<f64>,
    k_last: u64,
    k0_policy: K0Policy,
    tracer: &mut Tracer,
) -> Result<SolveReport> {
    if k_last < 1 {
        return Err(SolverError::InvalidArgument(
            "iteration budget must be at least 1".into(),
        ));
    }
    let l_glob = positive_l_glob(model)?;
    let u_init = validate_u0(model, u0)?;
    let mut state = FullGradState {
        z: Some(u_init.clone()),
        u: u_init,
        theta: 1.0,
        l_glob,
        sum_x: Array1::zeros(model.t()),
        sum_weight: 0.0,
    };
    // theta_0 = 1 is the single-coordinate instance of the schedule
    let mut schedule = ThetaSchedule::new(1, ScheduleMode::Accelerated)?;
    let nu = match k0_policy {
        K0Policy::Checkpoint { nu } => {
            if !(nu > 1.0) {
                return Err(SolverError::InvalidArgument(format!(
                    "checkpoint parameter nu must exceed 1, got {nu}"
                )));
            }
            nu
        }
        K0Policy::Explicit(_) => DEFAULT_NU,
    };
    let c = checkpoint_base(nu, 1);
    let mut snapshots: Vec<(i64, Array1<f64>, f64)> =
        vec![(-1, Array1::zeros(model.t()), 0.0)];
    let mut next_scheduled = 0u64;
    let extra = match k0_policy {
        K0Policy::Explicit(k0) => Some(k0 as i64 - 1),
        K0Policy::Checkpoint { .. } => None,
    };

    if tracer.needs_initial_record() {
        let su = model.s_times(state.u.view());
        let x0 = model.primal_from_dual(su.view());
        tracer.push(model, x0.view(), state.u.view(), Some(&su), "ok");
    }

    let mut x_last = Array1::zeros(model.t());
    for k in 0..k_last {
        let theta = schedule.theta();
        state.theta = theta;
        let z = state.z.as_mut().expect("accelerated state carries z");
        // v^k = (1 - theta) u^k + theta z^k
        let mut v = state.u.mapv(|ui| (1.0 - theta) * ui);
        v.zip_mut_with(z, |vi, zi| *vi += theta * zi);
        let sv = model.s_times(v.view());
        let x = model.primal_from_dual(sv.view());
        x_last = x.clone();

        // weighted averaging with geometric snapshots, mirroring the engine
        let inv = 1.0 / theta;
        state.sum_x.zip_mut_with(&x, |s, xi| *s += xi * inv);
        state.sum_weight += inv;
        let mut take = false;
        if k == next_scheduled {
            take = true;
            next_scheduled = match next_scheduled {
                0 => 1,
                e => e.saturating_mul(c),
            };
        }
        if extra == Some(k as i64) {
            take = true;
        }
        if take {
            snapshots.push((k as i64, state.sum_x.clone(), state.sum_weight));
        }

        let g = model.full_grad_at(x.view());
        let tau_z = 1.0 / (theta * l_glob);
        let z_old = z.clone();
        for (i, (zi, gi)) in z.iter_mut().zip(g.iter()).enumerate() {
            *zi = model.term(i).prox(*zi - tau_z * gi, tau_z)?;
        }
        // u^{k+1} = v^k + theta (z^{k+1} - z^k)
        state.u.assign(&v);
        for ((ui, zn), zo) in state.u.iter_mut().zip(z.iter()).zip(z_old.iter()) {
            *ui += theta * (zn - zo);
        }

        if !state.u.iter().all(|ui| ui.is_finite()) {
            let e = SolverError::Numeric { iter: k, msg: "non-finite iterate".into() };
            tracer.push_abort(&e.to_string());
            return Err(e);
        }

        schedule.advance()?;
        if tracer.tick() {
            let su = model.s_times(state.u.view());
            let x_report = match tracer.primal_choice() {
                PrimalChoice::Averaged => window_avg(&snapshots, &state, &k0_policy, c, k)
                    .unwrap_or_else(|| x.clone()),
                PrimalChoice::LastIterate => x.clone(),
            };
            tracer.push(model, x_report.view(), state.u.view(), Some(&su), "ok");
        }
    }

    let k_end = k_last - 1;
    let k0_used = match k0_policy {
        K0Policy::Checkpoint { .. } => checkpoint_k0(c, k_end),
        K0Policy::Explicit(k0) => k0,
    };
    let x_avg =
        window_avg(&snapshots, &state, &k0_policy, c, k_end).unwrap_or_else(|| x_last.clone());
    Ok(SolveReport {
        u_final: state.u,
        x_avg,
        x_last,
        k0_used,
        trace: tracer.snapshot(),
    })
}

fn window_avg(
    snapshots: &[(i64, Array1<f64>, f64)],
    state: &FullGradState,
    policy: &K0Policy,
    c: u64,
    k_end: u64,
) -> Option<Array1<f64>> {
    let key = match policy {
        K0Policy::Checkpoint { .. } => {
            let k0 = checkpoint_k0(c, k_end);
            if k_end <= k0 {
                return None;
            }
            k0 as i64
        }
        K0Policy::Explicit(k0) => {
            if k_end < *k0 {
                return None;
            }
            *k0 as i64 - 1
        }
    };
    let (_, snap_x, snap_w) = snapshots.iter().find(|(k, _, _)| *k == key)?;
    let denom = state.sum_weight - snap_w;
    if denom <= 0.0 {
        return None;
    }
    let mut avg = &state.sum_x - snap_x;
    avg.mapv_inplace(|v| v / denom);
    Some(avg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::ProblemSpec;
    use crate::prox::{Loss, Regularizer};
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};

    fn lad_model(n: usize, t: usize, mu: f64, seed: u64) -> DualModel {
        let mut rng = RngStream::new(seed, 77);
        let mut a = Array2::zeros((t, n));
        for mut col in a.columns_mut() {
            let mut norm_sq = 0.0;
            for v in col.iter_mut() {
                *v = rng.uniform(0.0, 1.0);
                norm_sq += *v * *v;
            }
            let norm = norm_sq.sqrt();
            col.mapv_inplace(|v| v / norm);
        }
        let losses = (0..n)
            .map(|_| Loss::Absolute { offset: rng.uniform(-1.0, 1.0) })
            .collect();
        DualModel::build(ProblemSpec::erm(a, Regularizer::L2 { mu }, losses)).unwrap()
    }

    #[test]
    fn rdca_is_engine_fixed_mode_bit_for_bit() {
        let model = lad_model(5, 4, 0.4, 50);
        let u0 = Array1::zeros(5);
        let rng = RngStream::new(7, 7);
        let mut t1 = Tracer::disabled();
        let r1 = rdca_run(&model, u0.view(), 100, rng.clone(), &mut t1).unwrap();
        let state =
            EngineState::init(&model, u0.view(), ScheduleMode::Fixed, StepVariant::Paper, rng)
                .unwrap();
        let mut t2 = Tracer::disabled();
        let r2 = state.clone().run(&model, 100, K0Policy::Explicit(0), &mut t2).unwrap();
        assert_eq!(r1.u_final, r2.u_final);
        assert_eq!(r1.x_last, r2.x_last);
        let _ = state;
    }

    #[test]
    fn dga_stationary_at_zero_gradient() {
        // equality row with zero offset: grad d(0) = 0
        let spec = ProblemSpec {
            a: Array2::zeros((2, 0)),
            b_mat: array![[1.0, 2.0]],
            j_mat: Array2::zeros((0, 2)),
            b_vec: array![0.0],
            q_vec: Array1::zeros(0),
            reg: Regularizer::L2 { mu: 1.0 },
            losses: vec![],
        };
        let model = DualModel::build(spec).unwrap();
        let mut tracer = Tracer::disabled();
        let report = dga_run(&model, array![0.0].view(), 50, &mut tracer).unwrap();
        assert_eq!(report.u_final, array![0.0]);
    }

    #[test]
    fn dga_single_step_matches_closed_form_on_quadratic_dual() {
        // one equality row: d(u) = |B^T u|^2/(2 mu) - b u, grad = B B^T u / mu - b,
        // L = |B|^2 / mu; one step from u = 0 gives u1 = b / L.
        let spec = ProblemSpec {
            a: Array2::zeros((2, 0)),
            b_mat: array![[3.0, 4.0]],
            j_mat: Array2::zeros((0, 2)),
            b_vec: array![2.0],
            q_vec: Array1::zeros(0),
            reg: Regularizer::L2 { mu: 0.5 },
            losses: vec![],
        };
        let model = DualModel::build(spec).unwrap();
        let l = model.global_l().unwrap();
        assert_relative_eq!(l, 50.0, max_relative = 1e-9); // 25 / 0.5
        let mut tracer = Tracer::disabled();
        let report = dga_run(&model, array![0.0].view(), 1, &mut tracer).unwrap();
        // grad d(0) = -p = -b ... = -2; u1 = 0 - (1/L)(-2) = 2/L
        assert_relative_eq!(report.u_final[0], 2.0 / l, max_relative = 1e-12);
    }

    #[test]
    fn dga_dual_objective_monotone() {
        let model = lad_model(6, 4, 0.3, 51);
        let mut tracer = Tracer::disabled();
        let u0 = Array1::zeros(6);
        let mut prev = model.dual_value(u0.view());
        let report = dga_run(&model, u0.view(), 1, &mut tracer).unwrap();
        let mut u = report.u_final;
        for _ in 0..100 {
            let d = model.dual_value(u.view());
            assert!(d <= prev + 1e-10 * (1.0 + prev.abs()));
            prev = d;
            let mut tr = Tracer::disabled();
            u = dga_run(&model, u.view(), 1, &mut tr).unwrap().u_final;
        }
    }

    #[test]
    fn adfga_first_step_is_prox_gradient() {
        let model = lad_model(4, 3, 0.6, 52);
        let u0 = Array1::from_shape_fn(4, |i| 0.1 * i as f64 - 0.2);
        let mut t1 = Tracer::disabled();
        let acc = adfga_run(&model, u0.view(), 1, K0Policy::checkpoint_default(), &mut t1).unwrap();
        let mut t2 = Tracer::disabled();
        let plain = dga_run(&model, u0.view(), 1, &mut t2).unwrap();
        for (a, b) in acc.u_final.iter().zip(plain.u_final.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn baselines_preserve_feasibility() {
        // inequality-constrained instance
        let spec = ProblemSpec {
            a: Array2::zeros((2, 0)),
            b_mat: Array2::zeros((0, 2)),
            j_mat: array![[1.0, 0.0], [-0.5, 1.0]],
            b_vec: Array1::zeros(0),
            q_vec: array![-0.3, 0.2],
            reg: Regularizer::L2 { mu: 1.0 },
            losses: vec![],
        };
        let model = DualModel::build(spec).unwrap();
        let u0 = array![0.5, 0.1];
        let mut t1 = Tracer::disabled();
        let r1 = dga_run(&model, u0.view(), 200, &mut t1).unwrap();
        assert!(r1.u_final.iter().all(|v| *v >= 0.0));
        let mut t2 = Tracer::disabled();
        let r2 = adfga_run(&model, u0.view(), 200, K0Policy::checkpoint_default(), &mut t2).unwrap();
        assert!(r2.u_final.iter().all(|v| *v >= 0.0));
    }
}
