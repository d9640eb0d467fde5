// criterion 7 probe: instance-seed scan for two-sided slope margins
use ardca_core::bench::*;
use ardca_core::dual::DualModel;
use ardca_core::trace::{GapReference, TraceRecord};

fn slope(recs: &[TraceRecord], lo: f64, hi: f64) -> f64 {
    let pts: Vec<(f64, f64)> = recs.iter()
        .filter(|r| r.pass >= 1.0 && r.primal_gap >= lo && r.primal_gap <= hi)
        .map(|r| (r.pass.log10(), r.primal_gap.log10())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn main() {
    let passes: u64 = std::env::args().nth(1).unwrap().parse().unwrap();
    for inst_seed in [3u64, 42, 101, 707, 1707] {
        let mut cfg = InstanceConfig::paper_default(InstanceKind::L1Loss, 1e-3, inst_seed);
        cfg.t = 200; cfg.n = 100;
        let model = DualModel::build(gen_instance(&cfg).unwrap().spec).unwrap();
        let r = reference_optimum(&model, passes * 10, 1).unwrap();
        let gap_ref = GapReference { f_star: r.f_star, d_star: r.d_star };
        let opts = RunOptions::default();
        let mut sa = Vec::new();
        let mut sr = Vec::new();
        for seed in 1..=5u64 {
            sa.push(slope(&run_solver(&model, &Solver::Ardca, passes, seed, Some(gap_ref), &opts), 1e-7, 1e-2));
            sr.push(slope(&run_solver(&model, &Solver::Rdca, passes, seed, Some(gap_ref), &opts), 1e-7, 1e-2));
        }
        let med = |v: &mut Vec<f64>| { v.sort_by(|a,b| a.partial_cmp(b).unwrap()); v[2] };
        println!("inst {inst_seed:5} passes {passes}: ardca med {:.3} (need <=-1.5), rdca med {:.3} (need >=-1.2), flagged={}",
                 med(&mut sa), med(&mut sr), r.flagged);
    }
}
