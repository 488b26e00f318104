//! Versioned JSON records and plot-ready CSV tables.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::fit::SieveFit;
use crate::stability::StabilityTestResult;

pub const SCHEMA: &str = "locstat/1";

/// Wraps a serializable record as `{"schema": "locstat/1", "kind": kind, ...fields}`.
///
/// Keys are emitted in sorted order, so equal records give equal bytes.
pub fn record<T: Serialize>(kind: &str, value: &T) -> Result<Value> {
    let mut v = serde_json::to_value(value)
        .map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?;
    let map = match &mut v {
        Value::Object(m) => m,
        _ => return Err(Error::invalid("records must serialize to JSON objects")),
    };
    map.insert("schema".into(), json!(SCHEMA));
    map.insert("kind".into(), json!(kind));
    Ok(v)
}

/// Pretty JSON text with a trailing newline.
pub fn to_json_string(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// Stability-test record with fields
/// `statistic, p_value, alpha, reject, b, c, m, basis, B, seed` (plus variant and critical value).
pub fn stability_record(result: &StabilityTestResult, include_replicates: bool) -> Value {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("kind".into(), json!("stability_test"));
    m.insert("statistic".into(), json!(result.statistic));
    m.insert("p_value".into(), json!(result.p_value));
    m.insert("alpha".into(), json!(result.alpha));
    m.insert("reject".into(), json!(result.reject));
    m.insert("critical_value".into(), json!(result.critical_value));
    m.insert("variant".into(), json!(result.variant));
    m.insert("b".into(), json!(result.b));
    m.insert("c".into(), json!(result.c));
    m.insert("m".into(), json!(result.m));
    m.insert("basis".into(), json!(result.basis));
    m.insert("B".into(), json!(result.replicates.len()));
    m.insert("seed".into(), json!(result.seed));
    if include_replicates {
        m.insert("replicates".into(), json!(result.replicates));
    }
    Value::Object(m)
}

/// Summary of a fit: sizes, coefficients and conditioning.
pub fn fit_record(fit: &SieveFit) -> Value {
    let r = fit.residuals();
    let residual_variance = r.iter().map(|e| e * e).sum::<f64>() / r.len() as f64;
    json!({
        "schema": SCHEMA,
        "kind": "fit",
        "b": fit.lags(),
        "c": fit.basis_size(),
        "h": fit.horizon(),
        "n": fit.sample_len(),
        "basis": fit.basis().label(),
        "beta": fit.beta().as_slice(),
        "residual_variance": residual_variance,
        "cond_estimate": fit.cond_estimate(),
    })
}

/// Coefficient-function table with columns `t, phi_0, ..., phi_b` on a uniform grid.
pub fn coefficient_table_csv(fit: &SieveFit, grid: usize) -> String {
    let mut out = String::from("t");
    for j in 0..=fit.lags() {
        let _ = write!(out, ",phi_{j}");
    }
    out.push('\n');
    let g = grid.max(2);
    for k in 0..g {
        let t = k as f64 / (g - 1) as f64;
        let _ = write!(out, "{t}");
        for v in fit.coeffs_at(t) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Single-column series CSV with header `x`.
pub fn series_csv(values: &[f64]) -> String {
    let mut out = String::from("x\n");
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}
