use anyhow::{bail, Context, Result};
use ardca_core::bench::{
    gen_instance, reference_optimum, run_race, run_solver, summarize, InstanceConfig,
    InstanceKind, NoiseModel, RunOptions, Solver,
};
use ardca_core::dual::DualModel;
use ardca_core::engine::StepVariant;
use ardca_core::io::{read_instance, read_reference, write_instance, write_reference, ReferenceValues};
use ardca_core::schedules::KPrimeChoice;
use ardca_core::trace::{format_g17, write_csv, GapReference, TraceRecord};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "ardca",
    version,
    about = "Dual coordinate ascent solver benchmark",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance bundle.
    Gen(GenArgs),
    /// Estimate and persist the reference optimum of an instance.
    Reference(ReferenceArgs),
    /// Run one solver on an instance and write its trace.
    Solve(SolveArgs),
    /// Race several solvers across seeds and write the combined trace.
    Race(RaceArgs),
    /// Reproduce one of the standard experiment sweeps (1-4).
    ReproFig(ReproArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    #[value(alias = "l2_loss")]
    L2Loss,
    #[value(alias = "l1_loss")]
    L1Loss,
    #[value(alias = "linf_constrained")]
    LinfConstrained,
    Svm,
    Lad,
}

impl From<KindArg> for InstanceKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::L2Loss => InstanceKind::L2Loss,
            KindArg::L1Loss => InstanceKind::L1Loss,
            KindArg::LinfConstrained => InstanceKind::LinfConstrained,
            KindArg::Svm => InstanceKind::Svm,
            KindArg::Lad => InstanceKind::Lad,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Paper,
    Standard,
}

impl From<VariantArg> for StepVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Paper => StepVariant::Paper,
            VariantArg::Standard => StepVariant::Standard,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Problem family.
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Primal dimension.
    #[arg(long, default_value_t = 1000)]
    t: usize,
    /// Number of data columns.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Strong-convexity parameter of the regularizer.
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    /// Regularizer scale for the penalized families.
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    /// Constraint half-width for the box-constrained family.
    #[arg(long, default_value_t = 1e-3)]
    tau: f64,
    /// Fraction of nonzeros in the ground truth (1 = dense).
    #[arg(long, default_value_t = 0.1)]
    sparsity: f64,
    /// Noise model: default | none | gaussian:STD | sparse-gaussian:STD:FRAC | uniform:HW.
    #[arg(long, default_value = "default")]
    noise: String,
    /// Master seed for the generator.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory for the bundle.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReferenceArgs {
    /// Instance bundle directory.
    #[arg(long)]
    instance: PathBuf,
    /// Race budget the reference multiplier applies to, in passes.
    #[arg(long, default_value_t = 200)]
    passes: u64,
    /// Reference budget as a multiple of the race budget (at least 10).
    #[arg(long, default_value_t = 10)]
    budget_mult: u64,
    /// Seed of the reference run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance bundle directory.
    #[arg(long)]
    instance: PathBuf,
    /// Solver: ardca | ardca-na | ardca-restart | ardca-erm | rdca | dga | adfga.
    #[arg(long)]
    solver: String,
    /// Inner iteration budget for ardca-restart (default 10 n_hat).
    #[arg(long)]
    inner_k: Option<u64>,
    /// Budget in passes over the data.
    #[arg(long, default_value_t = 200)]
    passes: u64,
    /// Run seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Trace CSV output path.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Coordinate step variant.
    #[arg(long, value_enum, default_value_t = VariantArg::Paper)]
    step_variant: VariantArg,
    /// Averaging-window parameter of the checkpoint rule.
    #[arg(long, default_value_t = 1.1)]
    nu: f64,
    /// Explicit averaging-window start, overriding the checkpoint rule.
    #[arg(long)]
    k0: Option<u64>,
    /// Warm-start length for ardca-erm: auto or an iteration count.
    #[arg(long, default_value = "auto")]
    kprime: String,
    /// Target accuracy for the automatic warm-start length.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Loss Lipschitz constant override for the warm-start length.
    #[arg(long)]
    m_lip: Option<f64>,
}

#[derive(Args)]
struct RaceArgs {
    /// Instance bundle directory (must carry a persisted reference).
    #[arg(long)]
    instance: PathBuf,
    /// Comma-separated solver list.
    #[arg(long)]
    solvers: String,
    /// Budget in passes over the data.
    #[arg(long, default_value_t = 200)]
    passes: u64,
    /// Seeds: a..b (inclusive) or a comma-separated list.
    #[arg(long, default_value = "1..5")]
    seeds: String,
    /// Combined trace CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Inner iteration budget for ardca-restart (default 10 n_hat).
    #[arg(long)]
    inner_k: Option<u64>,
    /// Worker threads; 1 keeps wall_ms comparable across rows.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Coordinate step variant.
    #[arg(long, value_enum, default_value_t = VariantArg::Paper)]
    step_variant: VariantArg,
    /// Averaging-window parameter of the checkpoint rule.
    #[arg(long, default_value_t = 1.1)]
    nu: f64,
    /// Explicit averaging-window start, overriding the checkpoint rule.
    #[arg(long)]
    k0: Option<u64>,
}

#[derive(Args)]
struct ReproArgs {
    /// Which sweep to reproduce (1, 2, 3 or 4).
    figure: u8,
    /// Output directory for traces and summaries.
    #[arg(long)]
    out: PathBuf,
    /// full = t 1000 / n 200 (the experiment scale); desk = t 200 / n 100.
    #[arg(long, default_value = "full")]
    scale: String,
    /// Seeds raced per configuration.
    #[arg(long, default_value = "1..5")]
    seeds: String,
    /// Budget in passes over the data.
    #[arg(long, default_value_t = 200)]
    passes: u64,
    /// Worker threads for the races.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn parse_noise(s: &str, kind: InstanceKind, tau: f64) -> Result<NoiseModel> {
    let parts: Vec<&str> = s.split(':').collect();
    Ok(match parts.as_slice() {
        ["default"] => InstanceConfig::paper_default(kind, tau.max(1e-3), 0).noise,
        ["none"] => NoiseModel::None,
        ["gaussian", std] => NoiseModel::Gaussian { std: std.parse()? },
        ["sparse-gaussian", std, frac] => NoiseModel::SparseGaussian {
            std: std.parse()?,
            fraction: frac.parse()?,
        },
        ["uniform", hw] => NoiseModel::Uniform { half_width: hw.parse()? },
        _ => bail!("unrecognized noise spec {s:?}"),
    })
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().context("seed range start")?;
        let b: u64 = b.trim().parse().context("seed range end")?;
        if b < a {
            bail!("empty seed range {s:?}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse::<u64>().map_err(|e| anyhow::anyhow!("seed {x:?}: {e}")))
        .collect()
}

fn load_model(dir: &Path) -> Result<DualModel> {
    let bundle = read_instance(dir).with_context(|| format!("reading instance {}", dir.display()))?;
    Ok(DualModel::build(bundle.spec)?)
}

fn write_summary_csv(path: &Path, records: &[TraceRecord]) -> Result<()> {
    let rows = summarize(records)?;
    let mut out = String::from(
        "solver,pass,count,primal_gap_med,primal_gap_q25,primal_gap_q75,dual_gap_med,eq_violation_med,ineq_violation_med\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.solver,
            format_g17(r.pass),
            r.count,
            format_g17(r.primal_gap_median),
            format_g17(r.primal_gap_q25),
            format_g17(r.primal_gap_q75),
            format_g17(r.dual_gap_median),
            format_g17(r.eq_violation_median),
            format_g17(r.ineq_violation_median),
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen_cmd(a),
        Command::Reference(a) => reference_cmd(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Race(a) => race_cmd(a),
        Command::ReproFig(a) => repro_cmd(a),
    }
}

fn gen_cmd(a: GenArgs) -> Result<()> {
    let kind: InstanceKind = a.kind.into();
    let cfg = InstanceConfig {
        kind,
        t: a.t,
        n: a.n,
        mu: a.mu,
        lambda: a.lambda,
        tau: a.tau,
        sparsity: a.sparsity,
        noise: parse_noise(&a.noise, kind, a.tau)?,
        seed: a.seed,
    };
    let bundle = gen_instance(&cfg)?;
    write_instance(&a.out, &bundle)?;
    println!(
        "wrote {} instance to {} (t={}, n_hat={})",
        kind.name(),
        a.out.display(),
        bundle.spec.t(),
        bundle.spec.n_hat()
    );
    Ok(())
}

fn reference_cmd(a: ReferenceArgs) -> Result<()> {
    if a.budget_mult < 10 {
        bail!("--budget-mult must be at least 10 (got {})", a.budget_mult);
    }
    let model = load_model(&a.instance)?;
    let budget = a.passes.saturating_mul(a.budget_mult);
    let r = reference_optimum(&model, budget, a.seed)?;
    write_reference(
        &a.instance,
        &ReferenceValues {
            f_star: r.f_star,
            d_star: r.d_star,
            budget_passes: budget,
            crosscheck_gap: r.crosscheck_gap,
            flagged: r.flagged,
        },
    )?;
    println!(
        "reference: F_star = {}, D_star = {}, crosscheck gap = {:.3e}{}",
        format_g17(r.f_star),
        format_g17(r.d_star),
        r.crosscheck_gap,
        if r.flagged { " (FLAGGED)" } else { "" }
    );
    Ok(())
}

fn load_reference(dir: &Path) -> Result<Option<GapReference>> {
    Ok(read_reference(dir)?.map(|r| GapReference { f_star: r.f_star, d_star: r.d_star }))
}

fn solve_cmd(a: SolveArgs) -> Result<()> {
    let model = load_model(&a.instance)?;
    let mut solver = Solver::parse(&a.solver, model.n_hat(), a.inner_k)?;
    if let Solver::ArdcaErm { k_prime } = &mut solver {
        *k_prime = match a.kprime.as_str() {
            "auto" => KPrimeChoice::Auto { eps: a.eps, m_override: a.m_lip },
            n => KPrimeChoice::Explicit(n.parse().context("--kprime expects auto or a count")?),
        };
    }
    let reference = load_reference(&a.instance)?;
    let opts = RunOptions {
        nu: a.nu,
        k0_override: a.k0,
        variant: a.step_variant.into(),
    };
    let records = run_solver(&model, &solver, a.passes, a.seed, reference, &opts);
    let last = records
        .iter()
        .rev()
        .find(|r| r.status == "ok")
        .context("the run produced no successful measurement")?;
    println!(
        "{} pass {:.1}: primal {} dual {} gap {:.3e}",
        solver.name(),
        last.pass,
        format_g17(last.primal_obj),
        format_g17(last.dual_obj),
        last.primal_gap
    );
    if let Some(r) = records.last() {
        if r.status.starts_with("abort") {
            if let Some(path) = &a.trace {
                write_csv(path, &records)?;
            }
            bail!(ardca_core::SolverError::Numeric {
                iter: 0,
                msg: r.status.clone()
            });
        }
    }
    if let Some(path) = &a.trace {
        write_csv(path, &records)?;
        println!("trace written to {}", path.display());
    }
    Ok(())
}

fn race_cmd(a: RaceArgs) -> Result<()> {
    let model = load_model(&a.instance)?;
    let reference = load_reference(&a.instance)?
        .context("no persisted reference; run `ardca reference` first")?;
    let solvers: Vec<Solver> = a
        .solvers
        .split(',')
        .map(|s| Solver::parse(s.trim(), model.n_hat(), a.inner_k))
        .collect::<ardca_core::Result<_>>()?;
    let seeds = parse_seeds(&a.seeds)?;
    let opts = RunOptions {
        nu: a.nu,
        k0_override: a.k0,
        variant: a.step_variant.into(),
    };
    let records = run_race(&model, &solvers, a.passes, &seeds, reference, &opts, a.jobs)?;
    write_csv(&a.out, &records)?;
    println!(
        "race complete: {} rows ({} solvers x {} seeds) -> {}",
        records.len(),
        solvers.len(),
        seeds.len(),
        a.out.display()
    );
    Ok(())
}

fn repro_cmd(a: ReproArgs) -> Result<()> {
    let (t, n) = match a.scale.as_str() {
        "full" => (1000usize, 200usize),
        "desk" => (200, 100),
        other => bail!("unknown scale {other:?} (expected full or desk)"),
    };
    let seeds = parse_seeds(&a.seeds)?;
    std::fs::create_dir_all(&a.out)?;
    let sweep: Vec<f64> = vec![1e-3, 1e-4, 1e-5];

    for (i, param) in sweep.iter().enumerate() {
        let (kind, label) = match a.figure {
            1 => (InstanceKind::L2Loss, "lambda"),
            2 => (InstanceKind::L1Loss, "lambda"),
            3 => (InstanceKind::LinfConstrained, "tau"),
            4 => (InstanceKind::Lad, "lambda"),
            other => bail!("unknown figure {other} (expected 1-4)"),
        };
        let mut cfg = InstanceConfig::paper_default(kind, *param, 1000 + i as u64);
        cfg.t = t;
        cfg.n = n;
        if a.figure == 4 {
            // the smooth-regularizer setting uses a dense ground truth
            cfg.sparsity = 1.0;
        }
        let bundle = gen_instance(&cfg)?;
        let dir = a.out.join(format!("fig{}-{}{}", a.figure, label, param));
        write_instance(&dir, &bundle)?;
        let model = DualModel::build(bundle.spec)?;
        let n_hat = model.n_hat();

        eprintln!("fig{} {label}={param}: reference...", a.figure);
        let r = reference_optimum(&model, a.passes * 10, 0)?;
        write_reference(
            &dir,
            &ReferenceValues {
                f_star: r.f_star,
                d_star: r.d_star,
                budget_passes: a.passes * 10,
                crosscheck_gap: r.crosscheck_gap,
                flagged: r.flagged,
            },
        )?;
        let reference = GapReference { f_star: r.f_star, d_star: r.d_star };

        let solvers: Vec<Solver> = match a.figure {
            1 => vec![
                Solver::ArdcaRestart { inner_k: 10 * n_hat as u64 },
                Solver::Rdca,
                Solver::Adfga,
            ],
            2 => vec![
                Solver::Ardca,
                Solver::ArdcaNa,
                Solver::ArdcaErm {
                    k_prime: KPrimeChoice::Auto { eps: 1e-3, m_override: None },
                },
                Solver::Rdca,
                Solver::Adfga,
            ],
            3 => vec![Solver::Ardca, Solver::ArdcaNa, Solver::Rdca, Solver::Adfga],
            _ => {
                let mut v: Vec<Solver> = [2u64, 10, 40, 80]
                    .iter()
                    .map(|m| Solver::ArdcaRestart { inner_k: m * n_hat as u64 })
                    .collect();
                v.push(Solver::Rdca);
                v.push(Solver::Adfga);
                v
            }
        };
        eprintln!("fig{} {label}={param}: racing {} solvers...", a.figure, solvers.len());
        let records = run_race(
            &model,
            &solvers,
            a.passes,
            &seeds,
            reference,
            &RunOptions::default(),
            a.jobs,
        )?;
        let trace_path = a.out.join(format!("fig{}-{}{}.csv", a.figure, label, param));
        write_csv(&trace_path, &records)?;
        write_summary_csv(
            &a.out.join(format!("fig{}-{}{}-summary.csv", a.figure, label, param)),
            &records,
        )?;
        println!("fig{} {label}={param}: {}", a.figure, trace_path.display());
    }
    Ok(())
}
