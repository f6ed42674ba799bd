//! CSV dataset format: header `y,cens,c1,c2,x1..x{p-1},r1..r{q-1}` with
//! `-inf`/`inf` literals for unbounded censoring intervals and implicit
//! intercepts.

use crate::error::{Error, Result};
use crate::model::CensoredObservation;
use std::fmt::Write as _;
use std::path::Path;

fn parse_extended(field: &str) -> Option<f64> {
    match field.trim() {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        other => other.parse().ok(),
    }
}

fn fmt_extended(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        // Shortest round-trip representation keeps write -> read bit-exact.
        format!("{v}")
    }
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::Dataset { line, message: message.into() }
}

/// Counts of x and r covariate columns (excluding intercepts) implied by a
/// header.
fn parse_header(header: &csv::StringRecord) -> Result<(usize, usize)> {
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    if fields.len() < 4 || fields[..4] != ["y", "cens", "c1", "c2"] {
        return Err(bad(1, "header must start with y,cens,c1,c2"));
    }
    let mut nx = 0;
    let mut i = 4;
    while i < fields.len() && fields[i] == format!("x{}", nx + 1) {
        nx += 1;
        i += 1;
    }
    let mut nr = 0;
    while i < fields.len() && fields[i] == format!("r{}", nr + 1) {
        nr += 1;
        i += 1;
    }
    if i != fields.len() {
        return Err(bad(1, format!("unexpected header column `{}`", fields[i])));
    }
    Ok((nx, nr))
}

/// Read a dataset file. Row numbering in diagnostics is 1-based and counts
/// the header.
pub fn read_dataset(path: &Path) -> Result<Vec<CensoredObservation>> {
    // Open through std first so a missing file surfaces as an I/O error
    // rather than a parse error.
    let file = std::fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file);
    let (nx, nr) = parse_header(reader.headers()?)?;
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| bad(line, e.to_string()))?;
        let field = |k: usize| record.get(k).unwrap_or("").trim();
        let cens = match field(1) {
            "0" => false,
            "1" => true,
            other => return Err(bad(line, format!("cens must be 0 or 1, got `{other}`"))),
        };
        let mut x = Vec::with_capacity(nx + 1);
        x.push(1.0);
        for k in 0..nx {
            let raw = field(4 + k);
            let v = parse_extended(raw)
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(line, format!("bad x{} value `{raw}`", k + 1)))?;
            x.push(v);
        }
        let mut r = Vec::with_capacity(nr + 1);
        r.push(1.0);
        for k in 0..nr {
            let raw = field(4 + nx + k);
            let v = parse_extended(raw)
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(line, format!("bad r{} value `{raw}`", k + 1)))?;
            r.push(v);
        }
        let obs = if cens {
            let c1 = parse_extended(field(2))
                .ok_or_else(|| bad(line, format!("bad c1 value `{}`", field(2))))?;
            let c2 = parse_extended(field(3))
                .ok_or_else(|| bad(line, format!("bad c2 value `{}`", field(3))))?;
            CensoredObservation::censored(c1, c2, x, r)
                .map_err(|e| bad(line, e.to_string()))?
        } else {
            let raw = field(0);
            let y = parse_extended(raw)
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(line, format!("bad y value `{raw}`")))?;
            CensoredObservation::uncensored(y, x, r).map_err(|e| bad(line, e.to_string()))?
        };
        out.push(obs);
    }
    if out.is_empty() {
        return Err(bad(2, "dataset has no rows"));
    }
    Ok(out)
}

/// Serialize a dataset in the same layout `read_dataset` accepts; the
/// round trip is bit-exact.
pub fn render_dataset(data: &[CensoredObservation]) -> Result<String> {
    let first = data
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty dataset".into()))?;
    let (p, q) = (first.x.len(), first.r.len());
    let mut out = String::new();
    out.push_str("y,cens,c1,c2");
    for k in 1..p {
        let _ = write!(out, ",x{k}");
    }
    for k in 1..q {
        let _ = write!(out, ",r{k}");
    }
    out.push('\n');
    for (i, obs) in data.iter().enumerate() {
        if obs.x.len() != p || obs.r.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has inconsistent covariate lengths"
            )));
        }
        if obs.rho {
            let _ = write!(out, ",1,{},{}", fmt_extended(obs.c1), fmt_extended(obs.c2));
        } else {
            let _ = write!(out, "{},0,,", fmt_extended(obs.w));
        }
        for v in obs.x.iter().skip(1) {
            let _ = write!(out, ",{}", fmt_extended(*v));
        }
        for v in obs.r.iter().skip(1) {
            let _ = write!(out, ",{}", fmt_extended(*v));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, data: &[CensoredObservation]) -> Result<()> {
    std::fs::write(path, render_dataset(data)?)?;
    Ok(())
}
