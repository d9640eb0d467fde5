//! Experiment harness: synthetic sparse-recovery instances, reference-optimum
//! estimation, solver races over seeds and nearest-rank summaries.

use crate::baselines::{adfga_run, dga_run, rdca_run};
use crate::dual::{DualModel, ProblemSpec};
use crate::engine::{EngineState, K0Policy, StepVariant};
use crate::error::{Result, SolverError};
use crate::io::InstanceBundle;
use crate::prox::{Loss, Regularizer};
use crate::rng::{fnv1a64, RngStream};
use crate::schedules::{erm_run, restart_run, ErmPlan, KPrimeChoice, RestartPlan};
use crate::theta::ScheduleMode;
use crate::trace::{GapReference, PrimalChoice, TraceConfig, TraceRecord, Tracer};
use ndarray::{Array1, Array2, ShapeBuilder};
use std::collections::VecDeque;
use std::sync::Mutex;

/// Which synthetic family to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    /// Elastic-net regularized least squares: `lambda f(x) + |A^T x - b|^2 / (2n)`.
    L2Loss,
    /// Elastic-net regularized absolute deviation: `lambda f(x) + |A^T x - b|_1 / n`.
    L1Loss,
    /// `min f(x)` subject to `-tau <= A^T x - b <= tau`, as 2n one-sided rows.
    LinfConstrained,
    /// Hinge losses on sign-labeled data with the l2 regularizer; the label is
    /// folded into the column so a single hinge form serves both signs.
    Svm,
    /// Absolute losses with the smooth l2 regularizer.
    Lad,
}

impl InstanceKind {
    pub fn name(&self) -> &'static str {
        match self {
            InstanceKind::L2Loss => "l2_loss",
            InstanceKind::L1Loss => "l1_loss",
            InstanceKind::LinfConstrained => "linf_constrained",
            InstanceKind::Svm => "svm",
            InstanceKind::Lad => "lad",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "l2_loss" => InstanceKind::L2Loss,
            "l1_loss" => InstanceKind::L1Loss,
            "linf_constrained" => InstanceKind::LinfConstrained,
            "svm" => InstanceKind::Svm,
            "lad" => InstanceKind::Lad,
            other => {
                return Err(SolverError::InvalidArgument(format!(
                    "unknown instance kind {other:?}"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Every entry N(0, std^2); `std` is a standard deviation.
    Gaussian { std: f64 },
    /// A `fraction` of entries N(0, std^2), the rest zero.
    SparseGaussian { std: f64, fraction: f64 },
    /// Every entry uniform in [-half_width, half_width].
    Uniform { half_width: f64 },
    None,
}

#[derive(Debug, Clone)]
pub struct InstanceConfig {
    pub kind: InstanceKind,
    /// Primal dimension.
    pub t: usize,
    /// Number of data columns.
    pub n: usize,
    pub mu: f64,
    /// Regularizer scale for the penalized families; 1 leaves `mu` untouched.
    pub lambda: f64,
    /// Constraint half-width for the box-constrained family.
    pub tau: f64,
    /// Fraction of nonzeros in the ground-truth x (1 = dense).
    pub sparsity: f64,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl InstanceConfig {
    /// The experiment-scale defaults: t = 1000, n = 200, mu = 0.1, a tenth of
    /// the coordinates active, noise matched to the family.
    pub fn paper_default(kind: InstanceKind, lambda_or_tau: f64, seed: u64) -> Self {
        let noise = match kind {
            InstanceKind::L2Loss => NoiseModel::Gaussian { std: 1e-3 },
            InstanceKind::L1Loss | InstanceKind::Lad => {
                NoiseModel::SparseGaussian { std: 1e-3, fraction: 0.1 }
            }
            InstanceKind::LinfConstrained => NoiseModel::Uniform { half_width: lambda_or_tau },
            InstanceKind::Svm => NoiseModel::Gaussian { std: 1e-2 },
        };
        InstanceConfig {
            kind,
            t: 1000,
            n: 200,
            mu: 0.1,
            lambda: if kind == InstanceKind::LinfConstrained { 1.0 } else { lambda_or_tau },
            tau: if kind == InstanceKind::LinfConstrained { lambda_or_tau } else { 0.0 },
            sparsity: 0.1,
            noise,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.n == 0 {
            return Err(SolverError::InvalidArgument("dimensions must be positive".into()));
        }
        if !(self.mu > 0.0) || !(self.lambda > 0.0) {
            return Err(SolverError::InvalidArgument("mu and lambda must be positive".into()));
        }
        if self.kind == InstanceKind::LinfConstrained && !(self.tau > 0.0) {
            return Err(SolverError::InvalidArgument(
                "the box-constrained family needs tau > 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.sparsity) || self.sparsity == 0.0 {
            return Err(SolverError::InvalidArgument(
                "sparsity must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Draw the data matrix, ground truth and observation, then assemble the
/// family-specific problem. Columns of A are uniform [0, 1] entries normalized
/// to unit norm; the ground truth has `floor(t * sparsity)` standard-normal
/// nonzeros at uniform positions; `b = A^T x + w`.
pub fn gen_instance(cfg: &InstanceConfig) -> Result<InstanceBundle> {
    cfg.validate()?;
    let mut rng = RngStream::new(cfg.seed, fnv1a64(b"instance-gen"));
    let (t, n) = (cfg.t, cfg.n);

    let mut a = Array2::zeros((t, n).f());
    for mut col in a.columns_mut() {
        let mut norm_sq = 0.0;
        for v in col.iter_mut() {
            *v = rng.next_f64();
            norm_sq += *v * *v;
        }
        let norm = norm_sq.sqrt();
        col.mapv_inplace(|v| v / norm);
    }

    let nnz = ((t as f64 * cfg.sparsity).floor() as usize).max(1);
    let mut x_true = Array1::zeros(t);
    for idx in rng.sample_indices(t, nnz) {
        x_true[idx] = rng.next_gaussian();
    }

    let mut w = Array1::zeros(n);
    match cfg.noise {
        NoiseModel::Gaussian { std } => {
            for v in w.iter_mut() {
                *v = std * rng.next_gaussian();
            }
        }
        NoiseModel::SparseGaussian { std, fraction } => {
            let k = ((n as f64 * fraction).round() as usize).min(n);
            for idx in rng.sample_indices(n, k) {
                w[idx] = std * rng.next_gaussian();
            }
        }
        NoiseModel::Uniform { half_width } => {
            for v in w.iter_mut() {
                *v = rng.uniform(-half_width, half_width);
            }
        }
        NoiseModel::None => {}
    }
    let b = a.t().dot(&x_true) + &w;

    let spec = match cfg.kind {
        InstanceKind::L2Loss => ProblemSpec::erm(
            a,
            Regularizer::L1PlusL2 { mu: cfg.lambda * cfg.mu, sigma: cfg.lambda },
            b.iter().map(|bi| Loss::Squared { offset: *bi }).collect(),
        ),
        InstanceKind::L1Loss => ProblemSpec::erm(
            a,
            Regularizer::L1PlusL2 { mu: cfg.lambda * cfg.mu, sigma: cfg.lambda },
            b.iter().map(|bi| Loss::Absolute { offset: *bi }).collect(),
        ),
        InstanceKind::Lad => ProblemSpec::erm(
            a,
            Regularizer::L2 { mu: cfg.lambda * cfg.mu },
            b.iter().map(|bi| Loss::Absolute { offset: *bi }).collect(),
        ),
        InstanceKind::Svm => {
            // fold the sign labels into the columns; every loss is then the
            // label-(+1) hinge
            let mut scaled = a;
            for (mut col, bi) in scaled.columns_mut().into_iter().zip(b.iter()) {
                if *bi < 0.0 {
                    col.mapv_inplace(|v| -v);
                }
            }
            ProblemSpec::erm(
                scaled,
                Regularizer::L2 { mu: cfg.mu },
                (0..n).map(|_| Loss::Hinge { label: 1 }).collect(),
            )
        }
        InstanceKind::LinfConstrained => {
            // two one-sided rows per data point: A^T x - b <= tau, b - A^T x <= tau
            let mut j = Array2::zeros((2 * n, t));
            for (r, col) in a.columns().into_iter().enumerate() {
                for (c, v) in col.iter().enumerate() {
                    j[(r, c)] = *v;
                    j[(n + r, c)] = -*v;
                }
            }
            let mut q = Array1::zeros(2 * n);
            for i in 0..n {
                q[i] = -b[i] - cfg.tau;
                q[n + i] = b[i] - cfg.tau;
            }
            ProblemSpec {
                a: Array2::zeros((t, 0)),
                b_mat: Array2::zeros((0, t)),
                j_mat: j,
                b_vec: Array1::zeros(0),
                q_vec: q,
                reg: Regularizer::L1PlusL2 { mu: cfg.mu, sigma: 1.0 },
                losses: vec![],
            }
        }
    };
    spec.validate()?;
    Ok(InstanceBundle {
        spec,
        kind: Some(cfg.kind.name().to_string()),
        seed: Some(cfg.seed),
        x_true: Some(x_true),
        noise: Some(w),
    })
}

/// A solver entry in a race.
#[derive(Debug, Clone, PartialEq)]
pub enum Solver {
    /// Single accelerated run, averaged primal.
    Ardca,
    /// Same run, last-iterate primal (the non-averaged diagnostic).
    ArdcaNa,
    /// Restarted accelerated runs with inner budget `inner_k` iterations.
    ArdcaRestart { inner_k: u64 },
    /// Warm start then accelerated phase (unconstrained problems only).
    ArdcaErm { k_prime: KPrimeChoice },
    /// Fixed-theta coordinate ascent, last-iterate primal.
    Rdca,
    /// Plain projected dual gradient, uniform-average primal.
    Dga,
    /// Accelerated dual full gradient, weighted-average primal.
    Adfga,
}

impl Solver {
    pub fn name(&self) -> String {
        match self {
            Solver::Ardca => "ardca".into(),
            Solver::ArdcaNa => "ardca-na".into(),
            Solver::ArdcaRestart { inner_k } => format!("ardca-restart-k{inner_k}"),
            Solver::ArdcaErm { .. } => "ardca-erm".into(),
            Solver::Rdca => "rdca".into(),
            Solver::Dga => "dga".into(),
            Solver::Adfga => "adfga".into(),
        }
    }

    /// Parse a CLI name; `n_hat` resolves the restart default inner budget.
    pub fn parse(s: &str, n_hat: usize, inner_k: Option<u64>) -> Result<Self> {
        Ok(match s {
            "ardca" => Solver::Ardca,
            "ardca-na" => Solver::ArdcaNa,
            "ardca-restart" => Solver::ArdcaRestart {
                inner_k: inner_k.unwrap_or(10 * n_hat as u64),
            },
            "ardca-erm" => Solver::ArdcaErm {
                k_prime: KPrimeChoice::Auto { eps: 1e-3, m_override: None },
            },
            "rdca" => Solver::Rdca,
            "dga" => Solver::Dga,
            "adfga" => Solver::Adfga,
            other => {
                return Err(SolverError::InvalidArgument(format!(
                    "unknown solver {other:?}"
                )))
            }
        })
    }

    fn primal_choice(&self) -> PrimalChoice {
        match self {
            Solver::ArdcaNa | Solver::Rdca => PrimalChoice::LastIterate,
            _ => PrimalChoice::Averaged,
        }
    }

    fn iters_per_pass(&self, n_hat: usize) -> u64 {
        match self {
            Solver::Dga | Solver::Adfga => 1,
            _ => n_hat as u64,
        }
    }
}

/// Options shared by every run in a race.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub nu: f64,
    pub k0_override: Option<u64>,
    pub variant: StepVariant,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            nu: crate::engine::DEFAULT_NU,
            k0_override: None,
            variant: StepVariant::Paper,
        }
    }
}

impl RunOptions {
    fn k0_policy(&self) -> K0Policy {
        match self.k0_override {
            Some(k0) => K0Policy::Explicit(k0),
            None => K0Policy::Checkpoint { nu: self.nu },
        }
    }
}

/// Run one (solver, seed) pair for `passes` passes from `u0 = 0`, recording a
/// trace row per pass. The stream id is the FNV-1a hash of the solver name
/// xor the seed. Aborts are recorded as a truncated trace with a terminal
/// status row.
pub fn run_solver(
    model: &DualModel,
    solver: &Solver,
    passes: u64,
    seed: u64,
    reference: Option<GapReference>,
    opts: &RunOptions,
) -> Vec<TraceRecord> {
    let n_hat = model.n_hat();
    let mut tracer = Tracer::new(
        TraceConfig {
            solver: solver.name(),
            seed,
            reference,
            primal: solver.primal_choice(),
        },
        solver.iters_per_pass(n_hat),
    );
    let rng = RngStream::new(seed, fnv1a64(solver.name().as_bytes()) ^ seed);
    let u0 = Array1::zeros(n_hat);
    let coord_budget = (passes * n_hat as u64).max(2) - 1; // K: runs K+1 iterations
    let result: Result<()> = (|| {
        match solver {
            Solver::Ardca | Solver::ArdcaNa => {
                let state = EngineState::init(
                    model,
                    u0.view(),
                    ScheduleMode::Accelerated,
                    opts.variant,
                    rng,
                )?;
                state.run(model, coord_budget, opts.k0_policy(), &mut tracer)?;
            }
            Solver::ArdcaRestart { inner_k } => {
                let total = passes * n_hat as u64;
                let n_outer = (total / (inner_k + 1)).max(1) as usize;
                let plan = RestartPlan {
                    n_outer,
                    inner_k: *inner_k,
                    k0: opts.k0_policy(),
                    variant: opts.variant,
                };
                restart_run(model, u0.view(), &plan, rng, &mut tracer)?;
            }
            Solver::ArdcaErm { k_prime } => {
                let plan = ErmPlan {
                    k_prime: *k_prime,
                    k: coord_budget,
                    k0: opts.k0_policy(),
                    variant: opts.variant,
                };
                erm_run(model, u0.view(), &plan, rng, &mut tracer)?;
            }
            Solver::Rdca => {
                rdca_run(model, u0.view(), coord_budget, rng, &mut tracer)?;
            }
            Solver::Dga => {
                dga_run(model, u0.view(), passes.max(1), &mut tracer)?;
            }
            Solver::Adfga => {
                adfga_run(model, u0.view(), passes.max(1), opts.k0_policy(), &mut tracer)?;
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        // the abort row may already be present when the engine pushed it
        let has_abort = tracer.records().last().map(|r| r.status.starts_with("abort")) == Some(true);
        if !has_abort {
            tracer.push_abort(&e.to_string());
        }
    }
    tracer.into_records()
}

/// Estimated optimum of an instance: restarted coordinate ascent plus the
/// accelerated full-gradient method at an extended budget; the best observed
/// dual value certifies `F_star = -D_star` through strong duality.
#[derive(Debug, Clone)]
pub struct ReferenceOptimum {
    pub f_star: f64,
    pub d_star: f64,
    /// The dual point whose value is closest to `d_star`.
    pub u_star: Array1<f64>,
    /// `|F(x_hat_best) - F_star|`, the primal cross-check.
    pub crosscheck_gap: f64,
    /// Set when the cross-check misses `1e-4 (1 + |F_star|)`; advisory.
    pub flagged: bool,
}

pub fn reference_optimum(model: &DualModel, budget_passes: u64, seed: u64) -> Result<ReferenceOptimum> {
    let n_hat = model.n_hat();
    let u0 = Array1::zeros(n_hat);
    let budget = budget_passes.max(1);
    let coord_k = (budget * n_hat as u64).max(2) - 1;
    let mut d_star = f64::INFINITY;
    let mut u_star = Array1::zeros(n_hat);
    let mut x_best: Option<Array1<f64>> = None;

    // the best dual value produced by the compared strategies certifies the
    // optimum; which strategy wins depends on the conditioning, and the
    // larger standard step is usually ahead of the analyzed one here
    for variant in [StepVariant::Standard, StepVariant::Paper] {
        let rng = RngStream::new(seed, fnv1a64(b"reference-ardca"));
        let state = EngineState::init(model, u0.view(), ScheduleMode::Accelerated, variant, rng)?;
        let mut tr = Tracer::disabled();
        let r = state.run(model, coord_k, K0Policy::checkpoint_default(), &mut tr)?;
        let d = model.dual_value(r.u_final.view());
        if d < d_star {
            d_star = d;
            u_star = r.u_final;
            x_best = Some(r.x_avg);
        }
    }
    {
        // restart chain, tracking the best dual value at every outer boundary
        let inner_k = 10 * n_hat as u64;
        let n_outer = (budget * n_hat as u64 / (inner_k + 1)).max(1);
        let mut rng = RngStream::new(seed, fnv1a64(b"reference-restart"));
        let mut warm = u0.clone();
        for _ in 0..n_outer {
            let state = EngineState::init(
                model,
                warm.view(),
                ScheduleMode::Accelerated,
                StepVariant::Standard,
                rng.clone(),
            )?;
            rng = RngStream::new(rng.next_u64(), rng.next_u64());
            let mut tr = Tracer::disabled();
            let r = state.run(model, inner_k, K0Policy::checkpoint_default(), &mut tr)?;
            warm = r.u_final;
            let d = model.dual_value(warm.view());
            if d < d_star {
                d_star = d;
                u_star = warm.clone();
                x_best = Some(r.x_avg);
            }
        }
    }
    {
        let mut fg_tracer = Tracer::disabled();
        if let Ok(fg) = adfga_run(
            model,
            u0.view(),
            (budget / 10).max(10),
            K0Policy::checkpoint_default(),
            &mut fg_tracer,
        ) {
            let d = model.dual_value(fg.u_final.view());
            if d < d_star {
                d_star = d;
                u_star = fg.u_final;
            }
        }
    }

    let f_star = -d_star;
    let f_hat = match &x_best {
        Some(x) => model.spec().primal_value(x.view()),
        None => f64::INFINITY,
    };
    let crosscheck_gap = (f_hat - f_star).abs();
    Ok(ReferenceOptimum {
        f_star,
        d_star,
        u_star,
        crosscheck_gap,
        flagged: crosscheck_gap > 1e-4 * (1.0 + f_star.abs()),
    })
}

/// Race a solver list over a seed list; one derived stream per (solver, seed)
/// pair, results canonically sorted by (solver, seed, pass). `jobs` bounds the
/// worker threads; output is identical for any job count except `wall_ms`.
pub fn run_race(
    model: &DualModel,
    solvers: &[Solver],
    passes: u64,
    seeds: &[u64],
    reference: GapReference,
    opts: &RunOptions,
    jobs: usize,
) -> Result<Vec<TraceRecord>> {
    if solvers.is_empty() || seeds.is_empty() {
        return Err(SolverError::InvalidArgument("empty solver or seed list".into()));
    }
    let mut pairs: VecDeque<(usize, Solver, u64)> = VecDeque::new();
    let mut idx = 0;
    for solver in solvers {
        for seed in seeds {
            pairs.push_back((idx, solver.clone(), *seed));
            idx += 1;
        }
    }
    let queue = Mutex::new(pairs);
    let results: Mutex<Vec<(usize, Vec<TraceRecord>)>> = Mutex::new(Vec::new());
    let workers = jobs.max(1).min(idx);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = queue.lock().expect("queue lock").pop_front();
                let Some((i, solver, seed)) = job else { break };
                let records = run_solver(model, &solver, passes, seed, Some(reference), opts);
                results.lock().expect("results lock").push((i, records));
            });
        }
    });
    let mut collected = results.into_inner().expect("results lock");
    collected.sort_by_key(|(i, _)| *i);
    let mut all: Vec<TraceRecord> = collected.into_iter().flat_map(|(_, r)| r).collect();
    all.sort_by(|a, b| {
        (&a.solver, a.seed)
            .cmp(&(&b.solver, b.seed))
            .then(a.pass.partial_cmp(&b.pass).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(all)
}

/// Nearest-rank quantile of an unsorted sample.
pub fn nearest_rank_quantile(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    assert!((0.0..=1.0).contains(&q));
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    if q == 0.0 {
        return values[0];
    }
    let rank = (q * values.len() as f64).ceil() as usize;
    values[rank.clamp(1, values.len()) - 1]
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub solver: String,
    pub pass: f64,
    pub count: usize,
    pub primal_gap_median: f64,
    pub primal_gap_q25: f64,
    pub primal_gap_q75: f64,
    pub dual_gap_median: f64,
    pub eq_violation_median: f64,
    pub ineq_violation_median: f64,
}

/// Median and quartiles per (solver, pass) across seeds, nearest-rank method.
pub fn summarize(records: &[TraceRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(SolverError::InvalidArgument("empty trace table".into()));
    }
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(String, u64), Vec<&TraceRecord>> = BTreeMap::new();
    for r in records {
        if r.status.starts_with("abort") {
            continue;
        }
        groups.entry((r.solver.clone(), r.pass.to_bits())).or_default().push(r);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for ((solver, pass_bits), group) in groups {
        let collect = |f: fn(&TraceRecord) -> f64| -> Vec<f64> { group.iter().map(|r| f(r)).collect() };
        let mut pg = collect(|r| r.primal_gap);
        let mut dg = collect(|r| r.dual_gap);
        let mut ev = collect(|r| r.eq_violation);
        let mut iv = collect(|r| r.ineq_violation);
        rows.push(SummaryRow {
            solver,
            pass: f64::from_bits(pass_bits),
            count: group.len(),
            primal_gap_median: nearest_rank_quantile(&mut pg, 0.5),
            primal_gap_q25: nearest_rank_quantile(&mut pg, 0.25),
            primal_gap_q75: nearest_rank_quantile(&mut pg, 0.75),
            dual_gap_median: nearest_rank_quantile(&mut dg, 0.5),
            eq_violation_median: nearest_rank_quantile(&mut ev, 0.5),
            ineq_violation_median: nearest_rank_quantile(&mut iv, 0.5),
        });
    }
    rows.sort_by(|a, b| {
        a.solver
            .cmp(&b.solver)
            .then(a.pass.partial_cmp(&b.pass).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(rows)
}
