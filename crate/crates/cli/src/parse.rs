//! String forms accepted on the command line.

use std::path::Path;
use std::sync::Arc;

use kmoment::bumps::NormKind;
use kmoment::criteria::SpaceSpec;
use kmoment::error::{Error, Result};
use kmoment::growth::{GrowthDoc, GrowthSpec, PolySpec, Polynomial};
use kmoment::weights::{Condition, RelationMode, WeightSequence, WeightSpec};
use serde::de::DeserializeOwned;

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

/// Inline JSON, or the path of a JSON file.
pub fn json_arg<T: DeserializeOwned>(s: &str) -> Result<T> {
    let t = s.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        return kmoment::io::from_json_str(s);
    }
    kmoment::io::read_json_file(Path::new(s))
}

fn with_horizon(spec: WeightSpec, horizon: Option<usize>) -> WeightSpec {
    let Some(h) = horizon else { return spec };
    match spec {
        WeightSpec::Gevrey { sigma, horizon: None } => WeightSpec::Gevrey { sigma, horizon: Some(h) },
        WeightSpec::Expression { formula, horizon: None } => WeightSpec::Expression { formula, horizon: Some(h) },
        WeightSpec::Table { values, extension, horizon: None } => WeightSpec::Table { values, extension, horizon: Some(h) },
        other => other,
    }
}

/// `gevrey:<σ>`, `expr:<formula>`, inline JSON or a JSON file.
pub fn weight_spec(s: &str, horizon: Option<usize>) -> Result<WeightSpec> {
    let spec = if let Some(rest) = s.strip_prefix("gevrey:") {
        let sigma = rest.trim().parse().map_err(|_| bad(format!("bad sigma in `{s}`")))?;
        WeightSpec::Gevrey { sigma, horizon: None }
    } else if let Some(rest) = s.strip_prefix("expr:") {
        WeightSpec::Expression { formula: rest.to_string(), horizon: None }
    } else {
        json_arg(s)?
    };
    Ok(with_horizon(spec, horizon))
}

pub fn weight(s: &str, horizon: Option<usize>) -> Result<WeightSequence> {
    WeightSequence::from_spec(&weight_spec(s, horizon)?)
}

/// `schwartz`, `gevrey:<σ>`, `general:<weight>`.
pub fn space(s: &str, horizon: Option<usize>) -> Result<SpaceSpec> {
    if let Some(rest) = s.strip_prefix("general:") {
        return Ok(SpaceSpec::general(weight(rest, horizon)?));
    }
    s.parse()
}

pub fn conditions(s: &str) -> Result<Vec<Condition>> {
    let all = [Condition::LogConvex, Condition::NonQuasianalytic, Condition::M2, Condition::M3];
    s.split(',')
        .map(|c| match c.trim().to_ascii_lowercase().as_str() {
            "log-convex" | "logconvex" | "lc" => Ok(vec![Condition::LogConvex]),
            "nqa" | "non-quasianalytic" => Ok(vec![Condition::NonQuasianalytic]),
            "m2" => Ok(vec![Condition::M2]),
            "m3" => Ok(vec![Condition::M3]),
            "all" => Ok(all.to_vec()),
            other => Err(bad(format!("unknown condition `{other}`"))),
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.concat())
}

pub fn relation_mode(s: &str) -> Result<RelationMode> {
    match s.to_ascii_lowercase().as_str() {
        "subset" => Ok(RelationMode::Subset),
        "strictly-smaller" | "strict" => Ok(RelationMode::StrictlySmaller),
        "equivalent" | "equiv" => Ok(RelationMode::Equivalent),
        _ => Err(bad(format!("unknown relation mode `{s}`"))),
    }
}

/// `k=v`.
pub fn param(s: &str) -> Result<(String, f64)> {
    let (k, v) = s.split_once('=').ok_or_else(|| bad(format!("parameter `{s}` is not `name=value`")))?;
    let v: f64 = v.trim().parse().map_err(|_| bad(format!("parameter `{s}` has a non-numeric value")))?;
    Ok((k.trim().to_string(), v))
}

/// `a:b`.
pub fn interval(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(':').ok_or_else(|| bad(format!("interval `{s}` is not `a:b`")))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(format!("bad interval bound `{t}`")));
    Ok((p(a)?, p(b)?))
}

/// `schwartz:k,n`, `gevrey:σ,ε,n`, or a JSON growth document.
pub fn growth(s: &str, horizon: Option<usize>) -> Result<GrowthSpec> {
    let nums = |rest: &str, n: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = rest.split(',').map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad(format!("bad numbers in `{s}`")))?;
        if v.len() != n {
            return Err(bad(format!("`{s}` needs {n} comma-separated numbers")));
        }
        Ok(v)
    };
    let doc = if let Some(rest) = s.strip_prefix("schwartz:") {
        let v = nums(rest, 2)?;
        GrowthDoc::Schwartz { k: v[0] as u32, n: v[1] as u32 }
    } else if let Some(rest) = s.strip_prefix("gevrey:") {
        let v = nums(rest, 3)?;
        GrowthDoc::GevreyGs { sigma: v[0], eps: v[1], n: v[2] as u32 }
    } else {
        let mut d: GrowthDoc = json_arg(s)?;
        if let GrowthDoc::GeneralGs { weight, .. } = &mut d {
            *weight = with_horizon(weight.clone(), horizon);
        }
        d
    };
    GrowthSpec::from_doc(&doc)
}

/// A monomial exponent list `3` or `2,1`, or a polynomial JSON document.
pub fn polynomial(s: &str) -> Result<Polynomial> {
    let t = s.trim();
    if t.starts_with('{') || Path::new(t).is_file() {
        let spec: PolySpec = json_arg(t)?;
        return Polynomial::from_spec(&spec);
    }
    let alpha: Vec<u32> = t.split(',').map(|v| v.trim().parse::<u32>()).collect::<std::result::Result<_, _>>().map_err(|_| bad(format!("bad monomial `{s}`")))?;
    Ok(Polynomial::monomial(alpha))
}

/// `schwartz:k,n` or `gs:h,n` (GS uses the given weight).
pub fn norm(s: &str, m: &Arc<WeightSequence>) -> Result<NormKind> {
    let two = |rest: &str| -> Result<(f64, f64)> {
        let (a, b) = rest.split_once(',').ok_or_else(|| bad(format!("`{s}` needs two comma-separated numbers")))?;
        let p = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(format!("bad number `{t}`")));
        Ok((p(a)?, p(b)?))
    };
    if let Some(rest) = s.strip_prefix("schwartz:") {
        let (k, n) = two(rest)?;
        Ok(NormKind::Schwartz { k: k as usize, n: n as u32 })
    } else if let Some(rest) = s.strip_prefix("gs:") {
        let (h, n) = two(rest)?;
        Ok(NormKind::Gs { m: m.clone(), h, n: n as u32 })
    } else {
        Err(bad(format!("unknown norm `{s}` (expected `schwartz:k,n` or `gs:h,n`)")))
    }
}
