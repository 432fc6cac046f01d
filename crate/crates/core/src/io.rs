//! Deterministic serialization.
//!
//! JSON keys come out sorted and every float is printed with 17 significant
//! digits, so identical inputs give byte-identical documents. Non-finite floats
//! have no JSON form and are written as `null`.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bumps::{Grid, SampledFunction};
use crate::error::{invalid, Result};

pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_f64(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // flat numeric arrays stay on one line
            if items.iter().all(|x| x.is_number() || x.is_null()) {
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                pad(out, indent + 2);
                write_value(out, x, indent + 2);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            let n = map.len();
            for (i, (k, x)) in map.iter().enumerate() {
                pad(out, indent + 2);
                let _ = write!(out, "{}: ", Value::String(k.clone()));
                write_value(out, x, indent + 2);
                out.push_str(if i + 1 < n { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Serialize with sorted keys and 17-significant-digit floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(value_to_string(&serde_json::to_value(value)?))
}

pub fn value_to_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

pub fn from_json_str<T: DeserializeOwned>(s: &str) -> Result<T> {
    Ok(serde_json::from_str(s)?)
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json_str(&std::fs::read_to_string(path)?)
}

/// Write through a sibling temporary file and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| invalid(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// CSV rows `x,value` (or `x1,…,xd,value`), one per grid point.
pub fn write_csv(f: &SampledFunction, w: &mut impl Write) -> Result<()> {
    let header: Vec<String> = if f.dim == 1 { vec!["x".into()] } else { (1..=f.dim).map(|i| format!("x{i}")).collect() };
    writeln!(w, "{},value", header.join(","))?;
    for k in 0..f.len() {
        let mut line = String::new();
        for x in f.point(k) {
            line.push_str(&format_f64(x));
            line.push(',');
        }
        let v = f.values[k] + f.values_lo.as_ref().map_or(0.0, |lo| lo[k]);
        line.push_str(&format_f64(v));
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn csv_string(f: &SampledFunction) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(f, &mut buf)?;
    String::from_utf8(buf).map_err(|e| invalid(e.to_string()))
}

/// Read a 1-d `x,value` CSV on a uniform grid.
pub fn read_csv_1d(text: &str) -> Result<SampledFunction> {
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with('x')) {
            continue;
        }
        let mut it = line.split(',');
        let (Some(x), Some(v), None) = (it.next(), it.next(), it.next()) else {
            return Err(invalid(format!("line {}: expected `x,value`", n + 1)));
        };
        let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| invalid(format!("line {}: bad number `{t}`", n + 1)));
        xs.push(parse(x)?);
        vs.push(parse(v)?);
    }
    if xs.len() < 2 {
        return Err(invalid("a sample needs at least two rows"));
    }
    let step = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    if !(step > 0.0) || xs.iter().enumerate().any(|(i, x)| (x - (xs[0] + i as f64 * step)).abs() > 1e-9 * step.max(x.abs())) {
        return Err(invalid("CSV abscissae are not a uniform increasing grid"));
    }
    Ok(SampledFunction {
        dim: 1,
        grid: Grid { origin: vec![xs[0]], step, extents: vec![vs.len()] },
        values: vs,
        values_lo: None,
        support_box: vec![(xs[0], xs[xs.len() - 1])],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryHeader {
    pub format: String,
    pub dim: usize,
    pub grid: Grid,
    pub support_box: Vec<(f64, f64)>,
    pub count: usize,
    /// Whether a second block of low parts follows the values.
    pub has_lo: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<Value>,
}

const BINARY_FORMAT: &str = "f64le";

/// One JSON header line, then `count` little-endian `f64` values
/// (and `count` low parts when present).
pub fn write_binary(f: &SampledFunction, spec: Option<Value>, w: &mut impl Write) -> Result<()> {
    let header = BinaryHeader {
        format: BINARY_FORMAT.into(),
        dim: f.dim,
        grid: f.grid.clone(),
        support_box: f.support_box.clone(),
        count: f.len(),
        has_lo: f.values_lo.is_some(),
        spec,
    };
    // single-line header: compact, keys sorted
    w.write_all(serde_json::to_string(&serde_json::to_value(&header)?)?.as_bytes())?;
    w.write_all(b"\n")?;
    for v in &f.values {
        w.write_all(&v.to_le_bytes())?;
    }
    if let Some(lo) = &f.values_lo {
        for v in lo {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary(r: &mut impl Read) -> Result<(BinaryHeader, SampledFunction)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let nl = bytes.iter().position(|b| *b == b'\n').ok_or_else(|| invalid("binary sample lacks a header line"))?;
    let header: BinaryHeader = serde_json::from_slice(&bytes[..nl])?;
    if header.format != BINARY_FORMAT {
        return Err(invalid(format!("unknown binary format {}", header.format)));
    }
    let body = &bytes[nl + 1..];
    let blocks = if header.has_lo { 2 } else { 1 };
    if body.len() != 8 * header.count * blocks {
        return Err(invalid(format!("binary body has {} bytes, expected {}", body.len(), 8 * header.count * blocks)));
    }
    let read = |block: usize| -> Vec<f64> {
        body[8 * header.count * block..8 * header.count * (block + 1)]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect()
    };
    let f = SampledFunction {
        dim: header.dim,
        grid: header.grid.clone(),
        values: read(0),
        values_lo: header.has_lo.then(|| read(1)),
        support_box: header.support_box.clone(),
    };
    Ok((header, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn json_is_sorted_and_fixed_precision() {
        let v = json!({"b": 0.1, "a": [1, 2.5], "c": {"z": null, "y": "s"}});
        let s = value_to_string(&v);
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("[1, 2.5000000000000000e0]"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64().unwrap(), 0.1);
    }

    #[test]
    fn binary_round_trip() {
        let mut f = SampledFunction::from_fn_1d(-1.0, 0.5, 5, |x| x * x);
        f.values_lo = Some(vec![1e-20; 5]);
        let mut buf = Vec::new();
        write_binary(&f, Some(json!({"r": 1})), &mut buf).unwrap();
        let (h, g) = read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(g, f);
        assert_eq!(h.count, 5);
        let csv = csv_string(&f).unwrap();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("x,value\n"));
        let back = read_csv_1d(&csv).unwrap();
        for (a, b) in back.values.iter().zip(&f.values) {
            assert_eq!(*a, b + 1e-20);
        }
    }
}
