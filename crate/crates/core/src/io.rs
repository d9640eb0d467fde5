//! Instance bundles on disk: a `manifest.txt` of `key = value` lines naming
//! dimensions, regularizer and losses, plus CSV files for the matrices and
//! vectors (one row per matrix row, 17-significant-digit decimals) and an
//! optional ground-truth sidecar and persisted reference optimum.

use crate::dual::ProblemSpec;
use crate::error::{Result, SolverError};
use crate::prox::{Loss, Regularizer};
use crate::trace::format_g17;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ShapeBuilder};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub const MANIFEST_FORMAT: &str = "ardca-instance-v1";

#[derive(Debug, Clone)]
pub struct InstanceBundle {
    pub spec: ProblemSpec,
    /// Generator label ("lad", "svm", ...) when the instance is synthetic.
    pub kind: Option<String>,
    pub seed: Option<u64>,
    pub x_true: Option<Array1<f64>>,
    pub noise: Option<Array1<f64>>,
}

/// Reference optimum persisted beside an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceValues {
    pub f_star: f64,
    pub d_star: f64,
    pub budget_passes: u64,
    pub crosscheck_gap: f64,
    pub flagged: bool,
}

pub fn write_matrix(path: &Path, m: ArrayView2<f64>) -> Result<()> {
    let mut out = String::new();
    for row in m.rows() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push(',');
            }
            out.push_str(&format_g17(*v));
            first = false;
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let err = |msg: String| SolverError::Parse { path: path.display().to_string(), msg };
    let text = std::fs::read_to_string(path)?;
    // column-major storage so dual columns are contiguous after assembly
    let mut m = Array2::zeros((rows, cols).f());
    let mut r = 0usize;
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        if r >= rows {
            return Err(err(format!("more than {rows} rows")));
        }
        let mut c = 0usize;
        for field in line.split(',') {
            if c >= cols {
                return Err(err(format!("row {r}: more than {cols} columns")));
            }
            m[(r, c)] = field
                .trim()
                .parse::<f64>()
                .map_err(|e| err(format!("row {r} col {c}: {e}")))?;
            c += 1;
        }
        if c != cols {
            return Err(err(format!("row {r}: {c} columns, expected {cols}")));
        }
        r += 1;
    }
    if r != rows {
        return Err(err(format!("{r} rows, expected {rows}")));
    }
    Ok(m)
}

pub fn write_vector(path: &Path, v: ArrayView1<f64>) -> Result<()> {
    let mut out = String::new();
    for x in v.iter() {
        let _ = writeln!(out, "{}", format_g17(*x));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_vector(path: &Path, len: usize) -> Result<Array1<f64>> {
    let err = |msg: String| SolverError::Parse { path: path.display().to_string(), msg };
    let text = std::fs::read_to_string(path)?;
    let mut v = Vec::with_capacity(len);
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        v.push(
            line.trim()
                .parse::<f64>()
                .map_err(|e| err(format!("line {}: {e}", i + 1)))?,
        );
    }
    if v.len() != len {
        return Err(err(format!("{} entries, expected {len}", v.len())));
    }
    Ok(Array1::from_vec(v))
}

fn loss_kind_name(losses: &[Loss]) -> Result<&'static str> {
    if losses.is_empty() {
        return Ok("none");
    }
    let kind = match losses[0] {
        Loss::Squared { .. } => "squared",
        Loss::Absolute { .. } => "absolute",
        Loss::Hinge { .. } => "hinge",
    };
    let homogeneous = losses.iter().all(|l| {
        matches!(
            (l, kind),
            (Loss::Squared { .. }, "squared")
                | (Loss::Absolute { .. }, "absolute")
                | (Loss::Hinge { .. }, "hinge")
        )
    });
    if !homogeneous {
        return Err(SolverError::InvalidArgument(
            "instance files require a homogeneous loss kind".into(),
        ));
    }
    Ok(kind)
}

fn loss_params(losses: &[Loss]) -> Array1<f64> {
    Array1::from_iter(losses.iter().map(|l| match *l {
        Loss::Squared { offset } | Loss::Absolute { offset } => offset,
        Loss::Hinge { label } => f64::from(label),
    }))
}

pub fn write_instance(dir: &Path, bundle: &InstanceBundle) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let spec = &bundle.spec;
    spec.validate()?;
    let mut manifest = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(manifest, "{k} = {v}");
    };
    kv("format", MANIFEST_FORMAT.into());
    if let Some(kind) = &bundle.kind {
        kv("kind", kind.clone());
    }
    if let Some(seed) = bundle.seed {
        kv("seed", seed.to_string());
    }
    kv("t", spec.t().to_string());
    kv("n", spec.n().to_string());
    kv("p", spec.p().to_string());
    kv("m", spec.m().to_string());
    match spec.reg {
        Regularizer::L2 { mu } => {
            kv("reg", "l2".into());
            kv("mu", format_g17(mu));
        }
        Regularizer::L1PlusL2 { mu, sigma } => {
            kv("reg", "l1_plus_l2".into());
            kv("mu", format_g17(mu));
            kv("sigma", format_g17(sigma));
        }
    }
    kv("losses", loss_kind_name(&spec.losses)?.into());

    if spec.n() > 0 {
        kv("A", "A.csv".into());
        write_matrix(&dir.join("A.csv"), spec.a.view())?;
        kv("loss_param", "loss_param.csv".into());
        write_vector(&dir.join("loss_param.csv"), loss_params(&spec.losses).view())?;
    }
    if spec.p() > 0 {
        kv("B", "B.csv".into());
        kv("b", "b_vec.csv".into());
        write_matrix(&dir.join("B.csv"), spec.b_mat.view())?;
        write_vector(&dir.join("b_vec.csv"), spec.b_vec.view())?;
    }
    if spec.m() > 0 {
        kv("J", "J.csv".into());
        kv("q", "q_vec.csv".into());
        write_matrix(&dir.join("J.csv"), spec.j_mat.view())?;
        write_vector(&dir.join("q_vec.csv"), spec.q_vec.view())?;
    }
    if let Some(x) = &bundle.x_true {
        kv("x_true", "x_true.csv".into());
        write_vector(&dir.join("x_true.csv"), x.view())?;
    }
    if let Some(w) = &bundle.noise {
        kv("noise", "noise.csv".into());
        write_vector(&dir.join("noise.csv"), w.view())?;
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

fn parse_manifest(path: &Path) -> Result<BTreeMap<String, String>> {
    let err = |msg: String| SolverError::Parse { path: path.display().to_string(), msg };
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(err(format!("line {}: expected `key = value`", i + 1)));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

const KNOWN_KEYS: &[&str] = &[
    "format", "kind", "seed", "t", "n", "p", "m", "reg", "mu", "sigma", "losses", "A",
    "loss_param", "B", "b", "J", "q", "x_true", "noise",
];

pub fn read_instance(dir: &Path) -> Result<InstanceBundle> {
    let manifest_path = dir.join("manifest.txt");
    let map = parse_manifest(&manifest_path)?;
    let err = |msg: String| SolverError::Parse {
        path: manifest_path.display().to_string(),
        msg,
    };
    for key in map.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(err(format!("unknown manifest key {key:?}")));
        }
    }
    match map.get("format").map(String::as_str) {
        Some(MANIFEST_FORMAT) => {}
        other => return Err(err(format!("unsupported format {other:?}"))),
    }
    let get = |k: &str| map.get(k).ok_or_else(|| err(format!("missing key {k:?}")));
    let get_usize = |k: &str| -> Result<usize> {
        get(k)?.parse().map_err(|e| err(format!("key {k:?}: {e}")))
    };
    let get_f64 = |k: &str| -> Result<f64> {
        get(k)?.parse().map_err(|e| err(format!("key {k:?}: {e}")))
    };
    let (t, n, p, m) = (get_usize("t")?, get_usize("n")?, get_usize("p")?, get_usize("m")?);
    let reg = match get("reg")?.as_str() {
        "l2" => Regularizer::L2 { mu: get_f64("mu")? },
        "l1_plus_l2" => Regularizer::L1PlusL2 { mu: get_f64("mu")?, sigma: get_f64("sigma")? },
        other => return Err(err(format!("unknown regularizer {other:?}"))),
    };

    let a = if n > 0 {
        read_matrix(&dir.join(get("A")?), t, n)?
    } else {
        Array2::zeros((t, 0))
    };
    let losses = if n > 0 {
        let params = read_vector(&dir.join(get("loss_param")?), n)?;
        match get("losses")?.as_str() {
            "squared" => params.iter().map(|b| Loss::Squared { offset: *b }).collect(),
            "absolute" => params.iter().map(|b| Loss::Absolute { offset: *b }).collect(),
            "hinge" => params
                .iter()
                .map(|l| Loss::Hinge { label: if *l >= 0.0 { 1 } else { -1 } })
                .collect(),
            other => return Err(err(format!("unknown loss kind {other:?}"))),
        }
    } else {
        Vec::new()
    };
    let (b_mat, b_vec) = if p > 0 {
        (
            read_matrix(&dir.join(get("B")?), p, t)?,
            read_vector(&dir.join(get("b")?), p)?,
        )
    } else {
        (Array2::zeros((0, t)), Array1::zeros(0))
    };
    let (j_mat, q_vec) = if m > 0 {
        (
            read_matrix(&dir.join(get("J")?), m, t)?,
            read_vector(&dir.join(get("q")?), m)?,
        )
    } else {
        (Array2::zeros((0, t)), Array1::zeros(0))
    };

    let x_true = match map.get("x_true") {
        Some(f) => Some(read_vector(&dir.join(f), t)?),
        None => None,
    };
    let noise = match map.get("noise") {
        Some(f) => {
            // length depends on the generator; accept any
            let text = std::fs::read_to_string(dir.join(f))?;
            let vals: std::result::Result<Vec<f64>, _> =
                text.lines().filter(|l| !l.is_empty()).map(|l| l.trim().parse()).collect();
            Some(Array1::from_vec(vals.map_err(|e| err(format!("noise file: {e}")))?))
        }
        None => None,
    };

    let spec = ProblemSpec { a, b_mat, j_mat, b_vec, q_vec, reg, losses };
    spec.validate()?;
    Ok(InstanceBundle {
        spec,
        kind: map.get("kind").cloned(),
        seed: match map.get("seed") {
            Some(s) => Some(s.parse().map_err(|e| err(format!("seed: {e}")))?),
            None => None,
        },
        x_true,
        noise,
    })
}

const REFERENCE_FILE: &str = "reference.txt";

pub fn write_reference(dir: &Path, r: &ReferenceValues) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "f_star = {}", format_g17(r.f_star));
    let _ = writeln!(out, "d_star = {}", format_g17(r.d_star));
    let _ = writeln!(out, "budget_passes = {}", r.budget_passes);
    let _ = writeln!(out, "crosscheck_gap = {}", format_g17(r.crosscheck_gap));
    let _ = writeln!(out, "flagged = {}", r.flagged);
    std::fs::write(dir.join(REFERENCE_FILE), out)?;
    Ok(())
}

pub fn read_reference(dir: &Path) -> Result<Option<ReferenceValues>> {
    let path = dir.join(REFERENCE_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let map = parse_manifest(&path)?;
    let err = |msg: String| SolverError::Parse { path: path.display().to_string(), msg };
    let get_f64 = |k: &str| -> Result<f64> {
        map.get(k)
            .ok_or_else(|| err(format!("missing key {k:?}")))?
            .parse()
            .map_err(|e| err(format!("key {k:?}: {e}")))
    };
    Ok(Some(ReferenceValues {
        f_star: get_f64("f_star")?,
        d_star: get_f64("d_star")?,
        budget_passes: map
            .get("budget_passes")
            .ok_or_else(|| err("missing key \"budget_passes\"".into()))?
            .parse()
            .map_err(|e| err(format!("budget_passes: {e}")))?,
        crosscheck_gap: get_f64("crosscheck_gap")?,
        flagged: map.get("flagged").map(|s| s == "true").unwrap_or(false),
    }))
}
