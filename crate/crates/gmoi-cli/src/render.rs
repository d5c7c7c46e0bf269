//! Plain-text rendering of JSON reports.

use std::fmt::Write;

use serde_json::Value;

/// Six significant decimals in the usual range, scientific notation outside it.
fn real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if (1e-4..1e6).contains(&x.abs()) {
        let s = format!("{x:.6}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        return s.to_string();
    }
    format!("{x:.4e}")
}

fn component(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => real(x),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn is_zero(v: &Value) -> bool {
    match v {
        Value::String(s) => s == "0",
        Value::Number(n) => n.as_f64() == Some(0.0),
        _ => false,
    }
}

/// `[re, im]` pairs as `re`, `re+imi` or `re-imi`.
fn scalar(v: &Value) -> Option<String> {
    let pair = v.as_array()?;
    if pair.len() != 2 || pair.iter().any(|c| !(c.is_number() || c.is_string())) {
        return None;
    }
    let re = component(&pair[0]);
    if is_zero(&pair[1]) {
        return Some(re);
    }
    let im = component(&pair[1]);
    if is_zero(&pair[0]) {
        return Some(format!("{im}i"));
    }
    Some(match im.strip_prefix('-') {
        Some(abs) => format!("{re}-{abs}i"),
        None => format!("{re}+{im}i"),
    })
}

fn matrix(v: &Value, indent: usize, out: &mut String) -> bool {
    let (Some(n), Some(entries)) = (v.get("dim").and_then(Value::as_u64), v.get("entries").and_then(Value::as_array)) else {
        return false;
    };
    let n = n as usize;
    if entries.len() != n * n {
        return false;
    }
    let cells: Vec<String> = entries.iter().map(|e| scalar(e).unwrap_or_else(|| e.to_string())).collect();
    let width = cells.iter().map(|c| c.chars().count()).max().unwrap_or(0);
    for row in cells.chunks(n.max(1)) {
        let line: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        let _ = writeln!(out, "{:indent$}[ {} ]", "", line.join("  "));
    }
    true
}

fn value(key: &str, v: &Value, indent: usize, out: &mut String) {
    let pad = indent;
    if let Some(s) = scalar(v) {
        let _ = writeln!(out, "{:pad$}{key}: {s}", "");
        return;
    }
    match v {
        Value::Object(map) => {
            let _ = writeln!(out, "{:pad$}{key}:", "");
            let mut inner = String::new();
            if matrix(v, indent + 2, &mut inner) {
                out.push_str(&inner);
            } else {
                for (k, x) in map {
                    value(k, x, indent + 2, out);
                }
            }
        }
        Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array() || scalar(x).is_some()) => {
            let parts: Vec<String> = items.iter().map(|x| scalar(x).unwrap_or_else(|| component(x))).collect();
            let _ = writeln!(out, "{:pad$}{key}: [{}]", "", parts.join(", "));
        }
        Value::Array(items) => {
            let _ = writeln!(out, "{:pad$}{key}:", "");
            for (i, x) in items.iter().enumerate() {
                value(&format!("[{i}]"), x, indent + 2, out);
            }
        }
        other => {
            let _ = writeln!(out, "{:pad$}{key}: {}", "", component(other));
        }
    }
}

/// Indented key/value rendering; matrices are printed as aligned rows.
pub fn text(report: &Value) -> String {
    let mut out = String::new();
    match report {
        Value::Object(map) => {
            for (k, v) in map {
                value(k, v, 0, &mut out);
            }
        }
        other => value("result", other, 0, &mut out),
    }
    out
}
