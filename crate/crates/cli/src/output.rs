//! Atomic file output, report documents and configuration literals.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};
use symapprox::harness::{SweepResult, VerificationReport};
use symapprox::hexfloat::format_hexf64;
use symapprox::{Configuration, Error, Point, Result};

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
/// Parent directories are created as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Configuration(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::Configuration(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let mut file = std::fs::File::create(&tmp).map_err(io)?;
    file.write_all(bytes).map_err(io)?;
    file.sync_all().map_err(io)?;
    drop(file);
    std::fs::rename(&tmp, path).map_err(io)
}

/// A float as both a decimal number and an exact hexadecimal literal.
pub fn float(x: f64) -> Value {
    let decimal = if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    };
    json!({ "decimal": decimal, "hex": format_hexf64(x) })
}

fn opt_float(x: Option<f64>) -> Value {
    x.map_or(Value::Null, float)
}

fn configuration(x: &Configuration) -> Value {
    Value::Array(
        x.points
            .iter()
            .map(|p| Value::Array(p.coords.iter().map(|&c| float(c)).collect()))
            .collect(),
    )
}

/// Settings echoed into every report.
pub struct RunInfo<'a> {
    pub kind: &'a str,
    pub target: &'a str,
    pub d: usize,
    pub n: usize,
    pub delta: f64,
    pub seed: u64,
    pub wedge_count: u64,
    pub m: u64,
}

pub fn report_json(info: &RunInfo, report: &VerificationReport) -> String {
    let checks: Vec<Value> = report
        .checks
        .iter()
        .map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail }))
        .collect();
    let doc = json!({
        "kind": info.kind,
        "target": info.target,
        "d": info.d,
        "n": info.n,
        "delta": float(info.delta),
        "seed": info.seed,
        "samples": report.sample_count,
        "wedge_count": info.wedge_count,
        "M": info.m,
        "sup_error": float(report.sup_error),
        "argmax_configuration": configuration(&report.argmax_configuration),
        "bound": float(report.bound),
        "bound_satisfied": report.bound_satisfied,
        "gradient_bound": float(report.gradient_bound),
        "invariance_max_residual": float(report.invariance_max_residual),
        "cauchy_residual": opt_float(report.cauchy_residual),
        "slope": opt_float(report.slope),
        "wall_time": float(report.wall_time),
        "checks": checks,
        "passed": report.passed(),
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("JSON values serialise");
    s.push('\n');
    s
}

pub fn report_csv(report: &VerificationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Configuration(format!("csv: {e}"));
    w.write_record(["metric", "value", "hex"])
        .map_err(csv_err)?;
    let mut row = |name: &str, v: f64| w.write_record([name, &v.to_string(), &format_hexf64(v)]);
    row("sup_error", report.sup_error).map_err(csv_err)?;
    row("bound", report.bound).map_err(csv_err)?;
    row("gradient_bound", report.gradient_bound).map_err(csv_err)?;
    row("invariance_max_residual", report.invariance_max_residual).map_err(csv_err)?;
    if let Some(c) = report.cauchy_residual {
        row("cauchy_residual", c).map_err(csv_err)?;
    }
    row("wall_time_s", report.wall_time).map_err(csv_err)?;
    for c in &report.checks {
        let status = if c.passed { "pass" } else { "fail" };
        w.write_record([format!("check_{}", c.name).as_str(), status, ""])
            .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Configuration(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub const SWEEP_HEADER: [&str; 6] = [
    "delta",
    "sup_error",
    "bound",
    "wedge_count",
    "M",
    "wall_time_s",
];

pub fn sweep_csv(result: &SweepResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Configuration(format!("csv: {e}"));
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for r in &result.rows {
        w.write_record([
            r.delta.to_string(),
            r.sup_error.to_string(),
            r.bound.to_string(),
            r.wedge_count.to_string(),
            r.m.to_string(),
            r.wall_time_s.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Configuration(e.to_string()))?;
    let mut s = String::from_utf8(bytes).expect("csv output is UTF-8");
    match result.slope {
        Some(v) => s.push_str(&format!("# slope={v}\n")),
        None => s.push_str("# slope=NA\n"),
    }
    Ok(s)
}

/// Parses `x11,x12;x21,x22;...`: points separated by `;`, coordinates by `,`.
pub fn parse_configuration(text: &str) -> Result<Configuration> {
    let points = text
        .trim()
        .split(';')
        .map(|p| {
            p.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Argument(format!("invalid coordinate {c:?}")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Point::new)
        })
        .collect::<Result<Vec<_>>>()?;
    Configuration::new(points)
}
