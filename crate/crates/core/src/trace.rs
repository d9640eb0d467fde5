//! Per-pass measurement records and their CSV form.
//!
//! One record is taken every `iterations_per_pass` solver iterations (one
//! pass over the data for coordinate methods, one iteration for full-gradient
//! methods). The CSV schema is fixed:
//! `solver,seed,pass,primal_obj,dual_obj,primal_gap,dual_gap,eq_violation,ineq_violation,wall_ms,status`
//! with values printed to 17 significant digits so that every f64
//! round-trips exactly. The violation columns carry plain 2-norms; the
//! in-memory record additionally keeps the weighted dual norms used by the
//! constraint-decay checks.

use crate::dual::DualModel;
use crate::error::{Result, SolverError};
use crate::weights::weighted_dual_norm;
use ndarray::{Array1, ArrayView1};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

pub const TRACE_HEADER: &str =
    "solver,seed,pass,primal_obj,dual_obj,primal_gap,dual_gap,eq_violation,ineq_violation,wall_ms,status";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub solver: String,
    pub seed: u64,
    /// Iterations divided by the pass length; fractional values are legal.
    pub pass: f64,
    pub primal_obj: f64,
    pub dual_obj: f64,
    /// `F(x) - F_star`; NaN when no reference is attached.
    pub primal_gap: f64,
    /// `D(u) - D_star`; NaN when no reference is attached.
    pub dual_gap: f64,
    /// `|B x + b|_2`.
    pub eq_violation: f64,
    /// `|max(0, J x + q)|_2`.
    pub ineq_violation: f64,
    /// Same residuals in the weighted dual norm (not part of the CSV schema).
    pub eq_violation_wdual: f64,
    pub ineq_violation_wdual: f64,
    pub wall_ms: f64,
    /// "ok", or a short abort reason for truncated traces.
    pub status: String,
}

/// 17-significant-digit decimal form; round-trips any finite f64.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

fn parse_f64(field: &str) -> std::result::Result<f64, String> {
    match field {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        other => other.parse::<f64>().map_err(|e| format!("bad float {other:?}: {e}")),
    }
}

pub fn write_csv(path: &Path, records: &[TraceRecord]) -> Result<()> {
    let mut out = String::new();
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.solver,
            r.seed,
            format_g17(r.pass),
            format_g17(r.primal_obj),
            format_g17(r.dual_obj),
            format_g17(r.primal_gap),
            format_g17(r.dual_gap),
            format_g17(r.eq_violation),
            format_g17(r.ineq_violation),
            format_g17(r.wall_ms),
            r.status,
        );
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<TraceRecord>> {
    let text = std::fs::read_to_string(path)?;
    let err = |msg: String| SolverError::Parse { path: path.display().to_string(), msg };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRACE_HEADER => {}
        other => return Err(err(format!("unexpected header {other:?}"))),
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(err(format!("line {}: expected 11 fields, got {}", lineno + 2, fields.len())));
        }
        let fv = |i: usize| parse_f64(fields[i]).map_err(|m| err(format!("line {}: {m}", lineno + 2)));
        records.push(TraceRecord {
            solver: fields[0].to_string(),
            seed: fields[1]
                .parse()
                .map_err(|e| err(format!("line {}: bad seed: {e}", lineno + 2)))?,
            pass: fv(2)?,
            primal_obj: fv(3)?,
            dual_obj: fv(4)?,
            primal_gap: fv(5)?,
            dual_gap: fv(6)?,
            eq_violation: fv(7)?,
            ineq_violation: fv(8)?,
            eq_violation_wdual: f64::NAN,
            ineq_violation_wdual: f64::NAN,
            wall_ms: fv(9)?,
            status: fields[10].to_string(),
        });
    }
    Ok(records)
}

/// Reference objective values a trace is measured against.
#[derive(Debug, Clone, Copy)]
pub struct GapReference {
    pub f_star: f64,
    pub d_star: f64,
}

/// Which primal point a solver reports in its trace rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimalChoice {
    /// The running weighted average (checkpoint rule applied at the current
    /// iteration).
    Averaged,
    /// The most recent `x*(v^k)`.
    LastIterate,
}

/// Collects one record per pass for a (solver, seed) run. A tracer may be
/// threaded through several chained solver runs (restart outer iterations,
/// warm-start phases); the pass counter is cumulative.
#[derive(Debug)]
pub struct Tracer {
    config: Option<TraceConfig>,
    records: Vec<TraceRecord>,
    cum_iters: u64,
    iters_per_pass: u64,
    start: Instant,
}

#[derive(Debug, Clone)]
pub struct TraceConfig {
    pub solver: String,
    pub seed: u64,
    pub reference: Option<GapReference>,
    pub primal: PrimalChoice,
}

impl Tracer {
    pub fn disabled() -> Self {
        Tracer {
            config: None,
            records: Vec::new(),
            cum_iters: 0,
            iters_per_pass: 1,
            start: Instant::now(),
        }
    }

    pub fn new(config: TraceConfig, iters_per_pass: u64) -> Self {
        assert!(iters_per_pass >= 1);
        Tracer {
            config: Some(config),
            records: Vec::new(),
            cum_iters: 0,
            iters_per_pass,
            start: Instant::now(),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.config.is_some()
    }

    pub fn primal_choice(&self) -> PrimalChoice {
        self.config.as_ref().map(|c| c.primal).unwrap_or(PrimalChoice::Averaged)
    }

    pub fn pass(&self) -> f64 {
        self.cum_iters as f64 / self.iters_per_pass as f64
    }

    pub fn needs_initial_record(&self) -> bool {
        self.is_enabled() && self.cum_iters == 0 && self.records.is_empty()
    }

    /// Count one iteration; true when a record is due.
    pub fn tick(&mut self) -> bool {
        self.cum_iters += 1;
        self.is_enabled() && self.cum_iters % self.iters_per_pass == 0
    }

    /// Append a measurement of the pair `(x, u)`; `su = S u` may be supplied
    /// to avoid the matrix-vector product.
    pub fn push(
        &mut self,
        model: &DualModel,
        x: ArrayView1<f64>,
        u: ArrayView1<f64>,
        su: Option<&Array1<f64>>,
        status: &str,
    ) {
        let Some(cfg) = self.config.as_ref() else { return };
        let (f, eq, ineq) = model.spec().primal_value_and_residuals(x);
        let d = match su {
            Some(su) => model.dual_value_from_su(su.view(), u),
            None => model.dual_value(u),
        };
        let (primal_gap, dual_gap) = match cfg.reference {
            Some(r) => (f - r.f_star, d - r.d_star),
            None => (f64::NAN, f64::NAN),
        };
        // weighted dual norms over the constraint blocks of L
        let n = model.n();
        let p = model.p();
        let weights = model.weights();
        let eq_w = {
            let sub = crate::weights::WeightVector::new(
                weights.as_slice()[n..n + p].to_vec(),
            )
            .expect("weights validated at build");
            weighted_dual_norm(eq.as_slice().unwrap(), &sub)
                .unwrap_or(f64::INFINITY)
        };
        let ineq_w = {
            let sub = crate::weights::WeightVector::new(
                weights.as_slice()[n + p..].to_vec(),
            )
            .expect("weights validated at build");
            weighted_dual_norm(ineq.as_slice().unwrap(), &sub)
                .unwrap_or(f64::INFINITY)
        };
        let norm2 = |v: &Array1<f64>| v.iter().map(|x| x * x).sum::<f64>().max(0.0).sqrt();
        self.records.push(TraceRecord {
            solver: cfg.solver.clone(),
            seed: cfg.seed,
            pass: self.pass(),
            primal_obj: f,
            dual_obj: d,
            primal_gap,
            dual_gap,
            eq_violation: norm2(&eq),
            ineq_violation: norm2(&ineq),
            eq_violation_wdual: eq_w,
            ineq_violation_wdual: ineq_w,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
            status: status.to_string(),
        });
    }

    /// Terminal marker for an aborted run; metrics are NaN.
    pub fn push_abort(&mut self, reason: &str) {
        let Some(cfg) = self.config.as_ref() else { return };
        // commas would break the fixed CSV schema
        let clean: String = reason
            .chars()
            .map(|c| if c == ',' || c == '\n' { ';' } else { c })
            .collect();
        self.records.push(TraceRecord {
            solver: cfg.solver.clone(),
            seed: cfg.seed,
            pass: self.pass(),
            primal_obj: f64::NAN,
            dual_obj: f64::NAN,
            primal_gap: f64::NAN,
            dual_gap: f64::NAN,
            eq_violation: f64::NAN,
            ineq_violation: f64::NAN,
            eq_violation_wdual: f64::NAN,
            ineq_violation_wdual: f64::NAN,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
            status: format!("abort:{clean}"),
        });
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn snapshot(&self) -> Vec<TraceRecord> {
        self.records.clone()
    }

    pub fn into_records(self) -> Vec<TraceRecord> {
        self.records
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_round_trips() {
        let values = [
            0.0,
            -1.5,
            std::f64::consts::PI,
            1.0 / 3.0,
            f64::MIN_POSITIVE,
            1.234_567_890_123_456_7e300,
            -9.87e-250,
        ];
        for v in values {
            let parsed: f64 = format_g17(v).parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits(), "{v} did not round-trip");
        }
        assert!(parse_f64(&format_g17(f64::NAN)).unwrap().is_nan());
    }

    #[test]
    fn csv_round_trip() {
        let rec = TraceRecord {
            solver: "ardca".into(),
            seed: 5,
            pass: 2.0,
            primal_obj: 1.0 / 3.0,
            dual_obj: -0.25,
            primal_gap: f64::NAN,
            dual_gap: 1e-9,
            eq_violation: 0.0,
            ineq_violation: 3.5e-4,
            eq_violation_wdual: f64::NAN,
            ineq_violation_wdual: f64::NAN,
            wall_ms: 12.5,
            status: "ok".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_csv(&path, std::slice::from_ref(&rec)).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back.len(), 1);
        let b = &back[0];
        assert_eq!(b.solver, rec.solver);
        assert_eq!(b.seed, rec.seed);
        assert_eq!(b.pass.to_bits(), rec.pass.to_bits());
        assert_eq!(b.primal_obj.to_bits(), rec.primal_obj.to_bits());
        assert!(b.primal_gap.is_nan());
        assert_eq!(b.ineq_violation.to_bits(), rec.ineq_violation.to_bits());
        assert_eq!(b.status, "ok");
    }

    #[test]
    fn bad_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "solver,seed\n").unwrap();
        assert!(read_csv(&path).is_err());
    }
}
