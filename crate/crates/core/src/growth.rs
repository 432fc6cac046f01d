//! Polynomials and growth-space membership.
//!
//! The growth functionals are
//!
//! * Schwartz: `|P(x)| d_K(x)^k / (1+|x|)^n`,
//! * Gevrey:   `|P(x)| exp(-ε (1/d_K(x))^{1/(σ-1)}) / (1+|x|)^n`,
//! * general:  `|P(x)| ν_M(h d_K(x)) / (1+|x|)^n`,
//!
//! and membership asks whether the supremum over `K` is finite. The sup is
//! estimated along declared sampling tracks (rays, interval offsets) and
//! classified with [`crate::trend`].

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sets::{Shape, StructuredSet};
use crate::trend::{classify, TrendClass, TrendConfig, TrendReport};
use crate::weights::{nu_eval, WeightSequence, WeightSpec};

/// Sparse real polynomial in `dim` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub alpha: Vec<u32>,
    pub c: f64,
}

/// `{"dim":1,"terms":[{"alpha":[3],"c":1.0}]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolySpec {
    pub dim: usize,
    pub terms: Vec<Term>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("polynomial dimension must be at least 1"));
        }
        let mut map = BTreeMap::new();
        for (alpha, c) in terms {
            if alpha.len() != dim {
                return Err(invalid(format!("multi-index {alpha:?} does not have length {dim}")));
            }
            if !c.is_finite() {
                return Err(invalid("coefficients must be finite"));
            }
            *map.entry(alpha).or_insert(0.0) += c;
        }
        map.retain(|_, c| *c != 0.0);
        Ok(Polynomial { dim, terms: map })
    }

    pub fn monomial(alpha: Vec<u32>) -> Self {
        let dim = alpha.len();
        Polynomial { dim, terms: BTreeMap::from([(alpha, 1.0)]) }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Polynomial::new(dim, [(vec![0; dim], c)]).expect("valid constant")
    }

    pub fn from_spec(spec: &PolySpec) -> Result<Self> {
        Self::new(spec.dim, spec.terms.iter().map(|t| (t.alpha.clone(), t.c)))
    }

    pub fn to_spec(&self) -> PolySpec {
        PolySpec { dim: self.dim, terms: self.terms.iter().map(|(a, c)| Term { alpha: a.clone(), c: *c }).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|a| a.iter().sum()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Multiply by the monomial `x^beta`.
    pub fn shift(&self, beta: &[u32]) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(a, c)| (a.iter().zip(beta).map(|(x, y)| x + y).collect(), *c))
            .collect();
        Polynomial { dim: self.dim, terms }
    }

    /// Nested Horner evaluation, one variable at a time.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(invalid(format!("point has dimension {}, polynomial has {}", x.len(), self.dim)));
        }
        let terms: Vec<(&[u32], f64)> = self.terms.iter().map(|(a, c)| (a.as_slice(), *c)).collect();
        Ok(horner(&terms, 0, x))
    }

    /// `ln |P(x)|`, robust to overflow of the direct evaluation.
    pub fn log_abs(&self, x: &[f64]) -> Result<f64> {
        let v = self.eval(x)?;
        if v.is_finite() && v != 0.0 {
            return Ok(v.abs().ln());
        }
        if v == 0.0 && x.iter().all(|t| t.is_finite()) && self.terms.len() <= 1 {
            return Ok(f64::NEG_INFINITY);
        }
        // signed log-sum-exp over terms
        let logs: Vec<(f64, f64)> = self
            .terms
            .iter()
            .map(|(a, c)| {
                let mut sign = c.signum();
                let mut l = c.abs().ln();
                for (e, xi) in a.iter().zip(x) {
                    if *e > 0 {
                        if *xi == 0.0 {
                            return (0.0, f64::NEG_INFINITY);
                        }
                        if *xi < 0.0 && e % 2 == 1 {
                            sign = -sign;
                        }
                        l += *e as f64 * xi.abs().ln();
                    }
                }
                (sign, l)
            })
            .collect();
        let top = logs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Ok(top);
        }
        let s: f64 = logs.iter().map(|(sg, l)| sg * (l - top).exp()).sum();
        Ok(top + s.abs().ln())
    }
}

// Terms sorted lexicographically by multi-index; group on coordinate k.
fn horner(terms: &[(&[u32], f64)], k: usize, x: &[f64]) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    if k == x.len() {
        return terms.iter().map(|t| t.1).sum();
    }
    // collect coefficient polynomials per exponent of x_k
    let mut groups: BTreeMap<u32, Vec<(&[u32], f64)>> = BTreeMap::new();
    for t in terms {
        groups.entry(t.0[k]).or_default().push(*t);
    }
    let top = *groups.keys().next_back().expect("nonempty");
    let mut acc = 0.0;
    for e in (0..=top).rev() {
        acc *= x[k];
        if let Some(g) = groups.get(&e) {
            acc += horner(g, k + 1, x);
        }
    }
    acc
}

/// Which growth functional.
#[derive(Clone, Debug)]
pub enum GrowthSpec {
    Schwartz { k: u32, n: u32 },
    GevreyGs { sigma: f64, eps: f64, n: u32 },
    GeneralGs { m: Arc<WeightSequence>, h: f64, n: u32 },
}

/// JSON form of [`GrowthSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthDoc {
    Schwartz { k: u32, n: u32 },
    GevreyGs { sigma: f64, eps: f64, n: u32 },
    GeneralGs { weight: WeightSpec, h: f64, n: u32 },
}

impl GrowthSpec {
    pub fn from_doc(doc: &GrowthDoc) -> Result<Self> {
        let s = match doc {
            GrowthDoc::Schwartz { k, n } => GrowthSpec::Schwartz { k: *k, n: *n },
            GrowthDoc::GevreyGs { sigma, eps, n } => GrowthSpec::GevreyGs { sigma: *sigma, eps: *eps, n: *n },
            GrowthDoc::GeneralGs { weight, h, n } => {
                GrowthSpec::GeneralGs { m: Arc::new(WeightSequence::from_spec(weight)?), h: *h, n: *n }
            }
        };
        s.validate()?;
        Ok(s)
    }

    pub fn to_doc(&self) -> GrowthDoc {
        match self {
            GrowthSpec::Schwartz { k, n } => GrowthDoc::Schwartz { k: *k, n: *n },
            GrowthSpec::GevreyGs { sigma, eps, n } => GrowthDoc::GevreyGs { sigma: *sigma, eps: *eps, n: *n },
            GrowthSpec::GeneralGs { m, h, n } => GrowthDoc::GeneralGs { weight: m.spec().clone(), h: *h, n: *n },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GrowthSpec::Schwartz { .. } => Ok(()),
            GrowthSpec::GevreyGs { sigma, eps, .. } => {
                if !(*sigma > 1.0) || !(*eps > 0.0) {
                    return Err(invalid("Gevrey growth needs sigma > 1 and eps > 0"));
                }
                Ok(())
            }
            GrowthSpec::GeneralGs { h, .. } => {
                if !(*h > 0.0) {
                    return Err(invalid("general growth needs h > 0"));
                }
                Ok(())
            }
        }
    }

    pub fn n(&self) -> u32 {
        match self {
            GrowthSpec::Schwartz { n, .. } | GrowthSpec::GevreyGs { n, .. } | GrowthSpec::GeneralGs { n, .. } => *n,
        }
    }

    /// `ln w(d)` for the boundary weight at capped distance `d`.
    pub fn log_weight(&self, d: f64) -> Result<f64> {
        Ok(match self {
            GrowthSpec::Schwartz { k, .. } => {
                if *k == 0 {
                    0.0
                } else {
                    *k as f64 * d.ln()
                }
            }
            GrowthSpec::GevreyGs { sigma, eps, .. } => {
                if d == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -eps * (1.0 / d).powf(1.0 / (sigma - 1.0))
                }
            }
            GrowthSpec::GeneralGs { m, h, .. } => nu_eval(m, h * d)?.log_value,
        })
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `ln` of the growth functional at `x` with a known capped distance `d`.
pub fn log_functional_at(p: &Polynomial, spec: &GrowthSpec, x: &[f64], d: f64) -> Result<f64> {
    let lp = p.log_abs(x)?;
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    Ok(lp + spec.log_weight(d)? - spec.n() as f64 * (1.0 + norm(x)).ln())
}

/// The pointwise growth functional at `x ∈ K`.
pub fn growth_functional(p: &Polynomial, k: &StructuredSet, spec: &GrowthSpec, x: &[f64]) -> Result<f64> {
    if p.dim() != k.dim {
        return Err(invalid("polynomial and set dimensions differ"));
    }
    if !k.contains(x)? {
        return Err(Error::OutsideSet(x.to_vec()));
    }
    let d = k.d_cap(x)?;
    Ok(log_functional_at(p, spec, x, d)?.exp())
}

/// Declared sampling schedule for suprema over unbounded sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Points per ray; ray parameters are `t = 2^{i/2}`.
    pub ray_points: usize,
    /// Number of (geometrically spaced) interval indices.
    pub interval_count: usize,
    /// Deepest interval index; `None` uses the family horizon.
    pub j_max: Option<u64>,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan { ray_points: 64, interval_count: 64, j_max: None }
    }
}

pub const MIN_SAMPLES: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    /// `d_K(x)`, computed from the structure rather than by subtraction.
    pub d: f64,
}

/// A sampling track: points ordered along one unbounded direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub label: String,
    pub points: Vec<SamplePoint>,
}

/// `count` distinct integers spaced geometrically in `[1, j_max]`.
pub fn geometric_indices(j_max: u64, count: usize) -> Vec<u64> {
    let mut out: Vec<u64> = (0..count)
        .map(|i| {
            let f = if count > 1 { i as f64 / (count - 1) as f64 } else { 1.0 };
            ((j_max as f64).powf(f).round() as u64).clamp(1, j_max)
        })
        .collect();
    out.dedup();
    out
}

fn ray_params(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(|i| 2f64.powf(i as f64 / 2.0))
}

/// Sampling tracks for an unbounded set. Bounded sets yield `None`.
pub fn sample_tracks(k: &StructuredSet, plan: &SamplingPlan) -> Result<Option<Vec<Track>>> {
    if k.is_bounded() {
        return Ok(None);
    }
    let d = k.dim;
    let tracks = match &k.shape {
        Shape::HalfLine { c } => vec![Track {
            label: "ray +x".into(),
            points: ray_params(plan.ray_points).map(|t| SamplePoint { x: vec![c + t], d: t.min(1.0) }).collect(),
        }],
        Shape::Orthant => orthant_tracks(d, plan),
        Shape::Box { lo, hi } => {
            let base: Vec<f64> = lo
                .iter()
                .zip(hi)
                .map(|(l, h)| match (l.is_finite(), h.is_finite()) {
                    (true, true) => 0.5 * (l + h),
                    (true, false) => l + 1.0,
                    (false, true) => h - 1.0,
                    (false, false) => 0.0,
                })
                .collect();
            let mut tracks = Vec::new();
            for i in 0..d {
                for (dir, open) in [(1.0, !hi[i].is_finite()), (-1.0, !lo[i].is_finite())] {
                    if !open {
                        continue;
                    }
                    let mut points = Vec::new();
                    for t in ray_params(plan.ray_points) {
                        let mut x = base.clone();
                        x[i] += dir * t;
                        points.push(SamplePoint { d: k.d_cap(&x)?, x });
                    }
                    let sign = if dir > 0.0 { '+' } else { '-' };
                    tracks.push(Track { label: format!("ray {sign}e{}", i + 1), points });
                }
            }
            tracks
        }
        Shape::IntervalUnionCrossSpace { family } => {
            let j_max = plan.j_max.unwrap_or(family.horizon()).min(family.max_index());
            let mut points = Vec::new();
            for j in geometric_indices(j_max, plan.interval_count) {
                let (a, g) = family.pair(j)?;
                for frac in [0.5, 0.25, 0.125] {
                    let delta = g * frac;
                    let mut x = vec![0.0; d];
                    x[0] = a + delta;
                    points.push(SamplePoint { x, d: delta.min(1.0) });
                }
            }
            let mut tracks = vec![Track { label: "intervals x1".into(), points }];
            let (a1, g1) = family.pair(1)?;
            for i in 1..d {
                for dir in [1.0, -1.0] {
                    let points = ray_params(plan.ray_points)
                        .map(|t| {
                            let mut x = vec![0.0; d];
                            x[0] = a1 + 0.5 * g1;
                            x[i] = dir * t;
                            SamplePoint { x, d: (0.5 * g1).min(1.0) }
                        })
                        .collect();
                    let sign = if dir > 0.0 { '+' } else { '-' };
                    tracks.push(Track { label: format!("slice x1 = c_1, ray {sign}e{}", i + 1), points });
                }
            }
            tracks
        }
        Shape::FiniteIntervalUnion { .. } => return Ok(None),
        Shape::LinearImage { base, a, .. } => {
            let Some(base_tracks) = sample_tracks(base, plan)? else {
                return Ok(None);
            };
            let mut out = Vec::new();
            for tr in base_tracks {
                let mut points = Vec::new();
                for p in tr.points {
                    let y: Vec<f64> = (0..d).map(|i| (0..d).map(|j| a[(i, j)] * p.x[j]).sum()).collect();
                    points.push(SamplePoint { d: k.d_cap(&y)?, x: y });
                }
                out.push(Track { label: format!("A({})", tr.label), points });
            }
            out
        }
    };
    Ok(Some(tracks))
}

fn orthant_tracks(d: usize, plan: &SamplingPlan) -> Vec<Track> {
    let mut tracks = vec![Track {
        label: "diagonal".into(),
        points: ray_params(plan.ray_points).map(|t| SamplePoint { x: vec![t; d], d: t.min(1.0) }).collect(),
    }];
    if d > 1 {
        for i in 0..d {
            let points = ray_params(plan.ray_points)
                .map(|t| {
                    let mut x = vec![1.0; d];
                    x[i] += t;
                    SamplePoint { x, d: 1.0 }
                })
                .collect();
            tracks.push(Track { label: format!("1 + t e{}", i + 1), points });
        }
    }
    tracks
}

/// Representative points of a bounded set (for sup estimates only).
pub fn bounded_samples(k: &StructuredSet) -> Result<Vec<SamplePoint>> {
    let mut out = Vec::new();
    let grid = |lo: f64, hi: f64| (0..=32).map(move |i| lo + (hi - lo) * i as f64 / 32.0);
    match &k.shape {
        Shape::FiniteIntervalUnion { intervals } => {
            for (a, b) in intervals {
                for x in grid(*a, *b) {
                    out.push(SamplePoint { d: k.d_cap(&[x])?, x: vec![x] });
                }
            }
        }
        Shape::Box { lo, hi } => {
            for s in 0..=32 {
                let x: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| l + (h - l) * s as f64 / 32.0).collect();
                out.push(SamplePoint { d: k.d_cap(&x)?, x });
            }
        }
        Shape::LinearImage { base, a, .. } => {
            let d = k.dim;
            for p in bounded_samples(base)? {
                let y: Vec<f64> = (0..d).map(|i| (0..d).map(|j| a[(i, j)] * p.x[j]).sum()).collect();
                out.push(SamplePoint { d: k.d_cap(&y)?, x: y });
            }
        }
        _ => return Err(Error::Invariant("bounded_samples on an unbounded set".into())),
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthVerdict {
    Bounded,
    Unbounded,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub value: f64,
    pub log_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub verdict: GrowthVerdict,
    pub sup_estimate: f64,
    pub sup_is_infinite: bool,
    pub log_sup: f64,
    /// Largest final-quartile slope over all tracks.
    pub trend_slope: f64,
    pub slope_threshold: f64,
    pub tracks: Vec<(String, TrendReport)>,
    pub witness_points: Vec<Witness>,
    pub bounded_set: bool,
}

/// Classify a family of tracks: any Unbounded track wins, all Bounded gives
/// Bounded, otherwise Inconclusive.
pub fn combine(classes: impl IntoIterator<Item = TrendClass>) -> TrendClass {
    let mut all_bounded = true;
    for c in classes {
        match c {
            TrendClass::Unbounded => return TrendClass::Unbounded,
            TrendClass::Inconclusive => all_bounded = false,
            TrendClass::Bounded => {}
        }
    }
    if all_bounded {
        TrendClass::Bounded
    } else {
        TrendClass::Inconclusive
    }
}

/// Evaluate a log-statistic along tracks and classify it.
pub fn classify_tracks(
    tracks: &[Track],
    stat: impl Fn(&SamplePoint) -> Result<f64>,
    cfg: &TrendConfig,
) -> Result<(TrendClass, Vec<(String, TrendReport)>, Vec<Witness>)> {
    let mut reports = Vec::new();
    let mut witnesses = Vec::new();
    let mut total = 0;
    for tr in tracks {
        let mut xs = Vec::with_capacity(tr.points.len());
        let mut ys = Vec::with_capacity(tr.points.len());
        for p in &tr.points {
            let y = stat(p)?;
            if y.is_nan() {
                return Err(Error::Numerical(format!("statistic is NaN at {:?}", p.x)));
            }
            xs.push((1.0 + norm(&p.x)).ln());
            ys.push(y);
            witnesses.push(Witness { x: p.x.clone(), value: y.exp(), log_value: y });
        }
        total += xs.len();
        reports.push((tr.label.clone(), classify(&xs, &ys, cfg)));
    }
    if total < MIN_SAMPLES {
        return Err(Error::InsufficientEvidence(format!("{total} samples, need {MIN_SAMPLES}")));
    }
    let class = combine(reports.iter().map(|r| r.1.class));
    Ok((class, reports, witnesses))
}

pub fn membership(p: &Polynomial, k: &StructuredSet, spec: &GrowthSpec, plan: &SamplingPlan) -> Result<GrowthReport> {
    if p.dim() != k.dim {
        return Err(invalid("polynomial and set dimensions differ"));
    }
    spec.validate()?;
    let cfg = TrendConfig::default();
    let Some(tracks) = sample_tracks(k, plan)? else {
        // continuous function on a compact set: bounded outright
        let mut witnesses = Vec::new();
        for s in bounded_samples(k)? {
            let y = log_functional_at(p, spec, &s.x, s.d)?;
            witnesses.push(Witness { x: s.x, value: y.exp(), log_value: y });
        }
        let log_sup = witnesses.iter().map(|w| w.log_value).fold(f64::NEG_INFINITY, f64::max);
        return Ok(GrowthReport {
            verdict: GrowthVerdict::Bounded,
            sup_estimate: log_sup.exp(),
            sup_is_infinite: false,
            log_sup,
            trend_slope: f64::NAN,
            slope_threshold: cfg.slope_threshold,
            tracks: Vec::new(),
            witness_points: witnesses,
            bounded_set: true,
        });
    };
    let (class, reports, witnesses) = classify_tracks(&tracks, |s| log_functional_at(p, spec, &s.x, s.d), &cfg)?;
    let log_sup = witnesses.iter().map(|w| w.log_value).fold(f64::NEG_INFINITY, f64::max);
    let verdict = match class {
        TrendClass::Bounded => GrowthVerdict::Bounded,
        TrendClass::Unbounded => GrowthVerdict::Unbounded,
        TrendClass::Inconclusive => GrowthVerdict::Inconclusive,
    };
    Ok(GrowthReport {
        verdict,
        sup_estimate: if verdict == GrowthVerdict::Unbounded { f64::INFINITY } else { log_sup.exp() },
        sup_is_infinite: verdict == GrowthVerdict::Unbounded,
        log_sup,
        trend_slope: reports.iter().map(|r| r.1.slope).fold(f64::NEG_INFINITY, f64::max),
        slope_threshold: cfg.slope_threshold,
        tracks: reports,
        witness_points: witnesses,
        bounded_set: false,
    })
}

/// Degree cap `⌊l + n⌋` for members of the growth space, given a witness `l`.
pub fn degree_bound(l_witness: f64, n: u32) -> u64 {
    (l_witness + n as f64).floor().max(0.0) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::SequenceFamily;

    #[test]
    fn eval_examples() {
        let p = Polynomial::new(1, [(vec![2], 1.0), (vec![0], 1.0)]).unwrap();
        assert_eq!(p.eval(&[3.0]).unwrap(), 10.0);
        let p = Polynomial::monomial(vec![1, 1]);
        assert_eq!(p.eval(&[2.0, 5.0]).unwrap(), 10.0);
        // (x1 + x2)^3 expanded
        let cube = Polynomial::new(2, [(vec![3, 0], 1.0), (vec![2, 1], 3.0), (vec![1, 2], 3.0), (vec![0, 3], 1.0)]).unwrap();
        assert_eq!(cube.eval(&[1.0, 1.0]).unwrap(), 8.0);
        assert_eq!(cube.degree(), 3);
    }

    #[test]
    fn log_abs_survives_overflow() {
        let p = Polynomial::monomial(vec![400]);
        let l = p.log_abs(&[10.0]).unwrap();
        assert!((l - 400.0 * 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn functional_examples() {
        let h = StructuredSet::half_line(0.0);
        let x = Polynomial::monomial(vec![1]);
        let v = growth_functional(&x, &h, &GrowthSpec::Schwartz { k: 0, n: 1 }, &[10.0]).unwrap();
        assert!((v - 10.0 / 11.0).abs() < 1e-15);
        let x2 = Polynomial::monomial(vec![2]);
        let v = growth_functional(&x2, &h, &GrowthSpec::Schwartz { k: 3, n: 0 }, &[0.5]).unwrap();
        assert!((v - 0.03125).abs() < 1e-15);
        let one = Polynomial::constant(1, 1.0);
        assert_eq!(growth_functional(&one, &h, &GrowthSpec::Schwartz { k: 2, n: 0 }, &[5.0]).unwrap(), 1.0);
        let g = GrowthSpec::GevreyGs { sigma: 2.0, eps: 1.0, n: 0 };
        assert!((growth_functional(&one, &h, &g, &[5.0]).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(growth_functional(&one, &h, &g, &[-1.0]).is_err());
    }

    #[test]
    fn membership_examples() {
        let h = StructuredSet::half_line(0.0);
        let plan = SamplingPlan::default();
        for n in 0..4u32 {
            let spec = GrowthSpec::Schwartz { k: 1, n };
            let up = membership(&Polynomial::monomial(vec![n + 1]), &h, &spec, &plan).unwrap();
            assert_eq!(up.verdict, GrowthVerdict::Unbounded);
            let flat = membership(&Polynomial::monomial(vec![n]), &h, &spec, &plan).unwrap();
            assert_eq!(flat.verdict, GrowthVerdict::Bounded);
        }
        let k = StructuredSet::interval_union(SequenceFamily::log_power(1.0).unwrap(), 1).unwrap();
        let r = membership(&Polynomial::monomial(vec![3]), &k, &GrowthSpec::Schwartz { k: 1, n: 0 }, &plan).unwrap();
        assert_eq!(r.verdict, GrowthVerdict::Bounded);
    }

    #[test]
    fn degree_bound_examples() {
        assert_eq!(degree_bound(2.5, 1), 3);
        assert_eq!(degree_bound(1.0, 0), 1);
        assert_eq!(degree_bound(0.2, 4), 4);
    }
}
