//! Schema and invariant checks for every artifact the crate writes.
//!
//! The file kind is chosen from the extension and, for CSV and JSON, from
//! the header or the `kind` field.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::bounds::{BoundReport, CeilingFit};
use crate::kernel::SweepReport;
use crate::pipeline::{sha256_file, RunManifest};
use crate::projection::{self, DIM};
use crate::trajectory::Trajectory;
use crate::transport::{PlanFile, W1Report};
use crate::SCHEMA_VERSION;

/// Slack on recomputed sums and marginals.
const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub path: PathBuf,
    /// Line, row or field the violation refers to.
    pub location: Option<String>,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.location {
            Some(loc) => write!(f, "{}: {loc}: {}", self.path.display(), self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

struct Sink<'a> {
    path: &'a Path,
    out: Vec<Diagnostic>,
}

impl Sink<'_> {
    fn push(&mut self, location: Option<String>, message: impl Into<String>) {
        self.out.push(Diagnostic {
            path: self.path.to_path_buf(),
            location,
            message: message.into(),
        });
    }

    fn at(&mut self, location: String, message: impl Into<String>) {
        self.push(Some(location), message);
    }
}

/// All violations found in `path`; empty means the file is valid.
pub fn validate_file(path: &Path) -> Vec<Diagnostic> {
    let mut sink = Sink { path, out: Vec::new() };
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            sink.push(None, format!("cannot read file: {e}"));
            return sink.out;
        }
    };
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => check_corpus(&text, &mut sink),
        Some("csv") => check_csv(&text, &mut sink),
        Some("json") => check_json(&text, &mut sink),
        _ => sink.push(None, "unrecognized extension (expected .jsonl, .csv or .json)"),
    }
    sink.out
}

pub fn validate_files<P: AsRef<Path>>(paths: &[P]) -> Vec<Diagnostic> {
    paths.iter().flat_map(|p| validate_file(p.as_ref())).collect()
}

fn check_corpus(text: &str, sink: &mut Sink) {
    let mut any = false;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        any = true;
        if let Err(e) = Trajectory::from_json_line(line) {
            sink.at(format!("line {}", i + 1), e.to_string());
        }
    }
    if !any {
        sink.push(None, "corpus has no trajectories");
    }
}

fn check_csv(text: &str, sink: &mut Sink) {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = match reader.headers() {
        Ok(h) => h.iter().map(str::to_string).collect(),
        Err(e) => return sink.push(None, format!("bad CSV header: {e}")),
    };
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        match rec {
            Ok(r) => rows.push(r.iter().map(str::to_string).collect::<Vec<_>>()),
            Err(e) => sink.at(format!("row {}", i + 1), e.to_string()),
        }
    }
    if header == projection::header() {
        check_features(&rows, sink);
    } else if header == ["index", "chi1", "nesting_depth", "valid"] {
        check_depths(&rows, sink);
    } else if header == ["L", "accuracy"] {
        check_points(&rows, sink);
    } else {
        sink.push(None, format!("unrecognized CSV header {header:?}"));
    }
}

fn parse_row(row: &[String], n: usize, sink: &mut Sink, loc: &str) -> Option<Vec<f64>> {
    if row.len() != n {
        sink.at(loc.to_string(), format!("expected {n} fields, found {}", row.len()));
        return None;
    }
    let mut out = Vec::with_capacity(n);
    for (j, f) in row.iter().enumerate() {
        match f.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => out.push(x),
            _ => {
                sink.at(loc.to_string(), format!("column {}: not a finite number: {f:?}", j + 1));
                return None;
            }
        }
    }
    Some(out)
}

fn is_count(x: f64) -> bool {
    x >= 0.0 && x.fract() == 0.0
}

fn check_features(rows: &[Vec<String>], sink: &mut Sink) {
    for (i, row) in rows.iter().enumerate() {
        let loc = format!("row {}", i + 1);
        let Some(c) = parse_row(row, DIM, sink, &loc) else { continue };
        let chi = |k: usize| c[k - 1];
        let mut bad = |msg: String| sink.at(loc.clone(), msg);
        if !(is_count(chi(1)) && chi(1) >= 1.0) {
            bad(format!("χ1 = {} is not a depth ≥ 1", chi(1)));
        }
        if !(is_count(chi(4)) && chi(4) >= 1.0) {
            bad(format!("χ4 = {} is not a node count ≥ 1", chi(4)));
        }
        for k in [8, 11, 12] {
            if !is_count(chi(k)) {
                bad(format!("χ{k} = {} is not a count", chi(k)));
            }
        }
        if chi(10) != 0.0 && chi(10) != 1.0 {
            bad(format!("χ10 = {} is not 0 or 1", chi(10)));
        }
        if chi(2) > chi(1) + SUM_TOL || chi(2) < 1.0 - SUM_TOL {
            bad(format!("χ2 = {} outside [1, χ1]", chi(2)));
        }
        if chi(3) < 0.0 {
            bad(format!("χ3 = {} is negative", chi(3)));
        }
        let partition = chi(5) + chi(6) + chi(7);
        let expected = if chi(4) >= 2.0 { 1.0 } else { 0.0 };
        if (partition - expected).abs() > SUM_TOL {
            bad(format!("χ5+χ6+χ7 = {partition}, expected {expected}"));
        }
        if chi(4) >= 1.0 && (chi(9) - chi(8) / chi(4)).abs() > SUM_TOL {
            bad(format!("χ9 = {} differs from χ8/χ4 = {}", chi(9), chi(8) / chi(4)));
        }
    }
}

fn check_depths(rows: &[Vec<String>], sink: &mut Sink) {
    for (i, row) in rows.iter().enumerate() {
        let loc = format!("row {}", i + 1);
        if row.len() != 4 {
            sink.at(loc, format!("expected 4 fields, found {}", row.len()));
            continue;
        }
        let chi1: Option<f64> = row[1].trim().parse().ok();
        let depth: Option<f64> = row[2].trim().parse().ok();
        match (chi1, depth, row[3].trim()) {
            (Some(c), Some(d), "true") if d + crate::dyck::ROOT_OFFSET as f64 == c => {}
            (_, _, "true") => sink.at(loc, "marked valid but nesting depth + 1 ≠ χ1"),
            _ => sink.at(loc, "trajectory does not map to a balanced prefix with matching depth"),
        }
    }
}

fn check_points(rows: &[Vec<String>], sink: &mut Sink) {
    for (i, row) in rows.iter().enumerate() {
        let loc = format!("row {}", i + 1);
        if let Some(v) = parse_row(row, 2, sink, &loc) {
            if !(0.0..=1.0).contains(&v[1]) {
                sink.at(loc, format!("accuracy {} outside [0, 1]", v[1]));
            }
        }
    }
}

fn check_json(text: &str, sink: &mut Sink) {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return sink.push(None, format!("invalid JSON: {e}")),
    };
    match value.get("schema_version").and_then(Value::as_u64) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => sink.at("schema_version".into(), format!("unsupported version {v}")),
        None => return sink.at("schema_version".into(), "missing"),
    }
    match value.get("kind").and_then(Value::as_str).unwrap_or_default() {
        "w1-report" => typed(value, sink, check_w1),
        "transport-plan" => typed(value, sink, check_plan),
        "kernel-sweep" => typed(value, sink, check_sweep),
        "bound-report" => typed(value, sink, check_bounds),
        "ceiling-fit" => typed(value, sink, check_fit),
        "run-manifest" => typed(value, sink, check_manifest),
        other => sink.at("kind".into(), format!("unknown report kind {other:?}")),
    }
}

fn typed<T: DeserializeOwned>(value: Value, sink: &mut Sink, check: fn(T, &mut Sink)) {
    match serde_json::from_value(value) {
        Ok(t) => check(t, sink),
        Err(e) => sink.push(None, format!("schema mismatch: {e}")),
    }
}

fn check_w1(r: W1Report, sink: &mut Sink) {
    if r.values.len() != r.repeats || r.regularized_values.len() != r.repeats {
        sink.at("values".into(), format!("{} values for {} repeats", r.values.len(), r.repeats));
    }
    if let Some(v) = r.values.iter().find(|v| !(-SUM_TOL..=1.0 + SUM_TOL).contains(*v)) {
        sink.at("values".into(), format!("normalized value {v} outside [0, 1]"));
    }
    if !r.values.is_empty() {
        let mean = r.values.iter().sum::<f64>() / r.values.len() as f64;
        if (mean - r.mean).abs() > SUM_TOL {
            sink.at("mean".into(), format!("mean {} differs from the values' mean {mean}", r.mean));
        }
    }
    if r.n_sample > r.pool {
        sink.at("n_sample".into(), "n_sample exceeds pool");
    }
}

fn check_plan(p: PlanFile, sink: &mut Sink) {
    if p.coupling.len() != p.p.len() || p.coupling.iter().any(|r| r.len() != p.q.len()) {
        return sink.at("coupling".into(), "shape does not match the marginals");
    }
    if p.coupling.iter().flatten().any(|&x| x.is_nan() || x < 0.0) {
        sink.at("coupling".into(), "negative or non-finite entry");
    }
    let err = p.recomputed_marginal_error();
    if err > p.tol + 1e-12 {
        sink.at("coupling".into(), format!("marginal error {err:e} exceeds tol {:e}", p.tol));
    }
}

fn check_sweep(r: SweepReport, sink: &mut Sink) {
    for (i, row) in r.rows.iter().enumerate() {
        let loc = format!("rows[{i}]");
        if !(0.0..=1.0).contains(&row.frac_positive) {
            sink.at(loc.clone(), "frac_positive outside [0, 1]");
        }
        if row.mean_da < 0.0 || row.max_da + SUM_TOL < row.mean_da {
            sink.at(loc.clone(), "mean_dA must lie in [0, max_dA]");
        }
        if row.evaluated + row.skipped != r.n_probes {
            sink.at(loc, "evaluated + skipped ≠ n_probes");
        }
    }
}

fn check_bounds(r: BoundReport, sink: &mut Sink) {
    let max = r.lb_width.max(r.lb_depth).max(r.lb_transport);
    if r.lower_bound != max {
        sink.at("lower_bound".into(), format!("{} is not the max of the three terms ({max})", r.lower_bound));
    }
    if !(0.0..=1.0).contains(&r.p_deep) {
        sink.at("p_deep".into(), "outside [0, 1]");
    }
    if !(0.0 < r.c_depth && r.c_depth < 1.0) {
        sink.at("C_depth".into(), "outside (0, 1)");
    }
    if r.consistent != (r.upper_bound >= r.lower_bound) {
        sink.at("consistent".into(), "flag disagrees with the bounds");
    }
}

fn check_fit(f: CeilingFit, sink: &mut Sink) {
    if f.violations != 0 {
        sink.at("violations".into(), format!("{} points above the ceiling", f.violations));
    }
    if !(f.beta > 0.0 && f.alpha > 0.0) {
        sink.at("beta".into(), "β and α must be positive");
    }
}

fn check_manifest(m: RunManifest, sink: &mut Sink) {
    let dir = sink.path.parent().unwrap_or(Path::new(".")).to_path_buf();
    for rec in &m.stages {
        for d in rec.outputs.iter().chain(&rec.inputs) {
            match sha256_file(&dir.join(&d.path)) {
                Ok(h) if h == d.sha256 => {}
                Ok(_) => sink.at(format!("{} stage", rec.stage), format!("{} changed since the run", d.path)),
                Err(e) => sink.at(format!("{} stage", rec.stage), format!("{}: {e}", d.path)),
            }
        }
    }
}
