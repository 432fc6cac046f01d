//! Structured regular closed sets and boundary distance.
//!
//! Sets are parametric: half-lines, orthants, boxes, finite interval unions,
//! the sequence-defined unions `K_{a,b} = ∪_j [a_j, b_j]` (optionally crossed
//! with `R^{d-1}`), and invertible linear images of any of these.

use std::collections::BTreeMap;
use std::sync::RwLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expr::{Env, Expr};

pub const DEFAULT_FAMILY_HORIZON: u64 = 1_000_000;

/// Closed-form asymptotics of a built-in family:
/// `a_j = c j^s log(e+j)^u`,
/// `gap_j = c_gap j^{-q} log(e+j)^{-v} exp(-gamma log(e+j)^w)`.
///
/// Families whose expressions only agree with this up to a bounded factor
/// (for instance `log(e+j^s)` against `s log(e+j)`) may carry it too; only
/// the exponents enter the exact verdicts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Asymptotic {
    pub c: f64,
    pub s: f64,
    pub u: f64,
    pub c_gap: f64,
    pub q: f64,
    pub v: f64,
    pub gamma: f64,
    pub w: f64,
}

impl Asymptotic {
    pub fn a_formula(&self) -> String {
        format!("{:?}*j^{:?}*log(e+j)^{:?}", self.c, self.s, self.u)
    }

    pub fn gap_formula(&self) -> String {
        format!(
            "{:?}*j^(-{:?})*log(e+j)^(-{:?})*exp(-{:?}*log(e+j)^{:?})",
            self.c_gap, self.q, self.v, self.gamma, self.w
        )
    }
}

/// JSON description of a sequence family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub a: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<String>,
    /// Tabulated gaps for `j = 1, 2, ...` (used instead of `gap`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_table: Option<Vec<f64>>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotic: Option<Asymptotic>,
}

#[derive(Debug)]
enum GapRule {
    Expr(Expr),
    Table(Vec<f64>),
}

/// Pair of closed-form sequences `(a_j, gap_j)`, `b_j = a_j + gap_j`, `j >= 1`.
#[derive(Debug)]
pub struct SequenceFamily {
    spec: FamilySpec,
    a: Expr,
    gap: GapRule,
    horizon: u64,
    prefix: RwLock<Vec<(f64, f64)>>,
}

impl Clone for SequenceFamily {
    fn clone(&self) -> Self {
        let prefix = self.prefix.read().map(|p| p.clone()).unwrap_or_default();
        SequenceFamily {
            spec: self.spec.clone(),
            a: self.a.clone(),
            gap: match &self.gap {
                GapRule::Expr(e) => GapRule::Expr(e.clone()),
                GapRule::Table(t) => GapRule::Table(t.clone()),
            },
            horizon: self.horizon,
            prefix: RwLock::new(prefix),
        }
    }
}

impl SequenceFamily {
    pub fn from_spec(spec: &FamilySpec) -> Result<Self> {
        let a = Expr::parse(&spec.a)?;
        let gap = match (&spec.gap, &spec.gap_table) {
            (Some(g), None) => GapRule::Expr(Expr::parse(g)?),
            (None, Some(t)) => {
                if t.is_empty() || t.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
                    return Err(invalid("gap table entries must be positive"));
                }
                GapRule::Table(t.clone())
            }
            _ => return Err(invalid("a family needs exactly one of `gap` or `gap_table`")),
        };
        let mut horizon = spec.horizon.unwrap_or(DEFAULT_FAMILY_HORIZON);
        if let GapRule::Table(t) = &gap {
            horizon = horizon.min(t.len() as u64);
        }
        if horizon < 1 {
            return Err(invalid("family horizon must be at least 1"));
        }
        let fam = SequenceFamily { spec: spec.clone(), a, gap, horizon, prefix: RwLock::new(Vec::new()) };
        fam.raw(1)?;
        Ok(fam)
    }

    pub fn new(a: &str, gap: &str, params: &[(&str, f64)]) -> Result<Self> {
        Self::from_spec(&FamilySpec {
            a: a.into(),
            gap: Some(gap.into()),
            gap_table: None,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            horizon: None,
            asymptotic: None,
        })
    }

    /// Expressions generated from closed-form asymptotics; exact mode applies.
    pub fn from_asymptotic(asym: Asymptotic) -> Result<Self> {
        Self::from_spec(&FamilySpec {
            a: asym.a_formula(),
            gap: Some(asym.gap_formula()),
            gap_table: None,
            params: BTreeMap::new(),
            horizon: None,
            asymptotic: Some(asym),
        })
    }

    /// `a_j = j^s`, `gap_j = j^{-q}/2`.
    pub fn power(s: f64, q: f64) -> Result<Self> {
        let fam = Self::new("j^s", "0.5*j^(-q)", &[("s", s), ("q", q)])?;
        Ok(fam.with_asymptotic(Asymptotic { c: 1.0, s, u: 0.0, c_gap: 0.5, q, v: 0.0, gamma: 0.0, w: 0.0 }))
    }

    /// `a_j = log(1+j)^s`, `gap_j = 1/(2(j+2))`, which keeps `b_j < a_{j+1}`
    /// for `s >= 1`.
    pub fn log_power(s: f64) -> Result<Self> {
        let fam = Self::new("log(1+j)^s", "1/(2*(j+2))", &[("s", s)])?;
        Ok(fam.with_asymptotic(Asymptotic { c: 1.0, s: 0.0, u: s, c_gap: 0.5, q: 1.0, v: 0.0, gamma: 0.0, w: 0.0 }))
    }

    /// `a_j = j^s`, `gap_j = (1/log(e+j^s))^{r-1}`.
    pub fn gevrey_gap(s: f64, r: f64) -> Result<Self> {
        let fam = Self::new("j^s", "(1/log(e+j^s))^(r-1)", &[("s", s), ("r", r)])?;
        Ok(fam.with_asymptotic(Asymptotic {
            c: 1.0,
            s,
            u: 0.0,
            c_gap: s.powf(1.0 - r),
            q: 0.0,
            v: r - 1.0,
            gamma: 0.0,
            w: 0.0,
        }))
    }

    pub fn with_asymptotic(mut self, asym: Asymptotic) -> Self {
        self.spec.asymptotic = Some(asym);
        self
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = match &self.gap {
            GapRule::Table(t) => horizon.min(t.len() as u64),
            _ => horizon,
        };
        self.spec.horizon = Some(horizon);
        self
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn asymptotic(&self) -> Option<Asymptotic> {
        self.spec.asymptotic
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Largest `j` the gap rule is defined for.
    pub fn max_index(&self) -> u64 {
        match &self.gap {
            GapRule::Table(t) => t.len() as u64,
            GapRule::Expr(_) => u64::MAX,
        }
    }

    fn raw(&self, j: u64) -> Result<(f64, f64)> {
        let env = Env::new("j", j as f64).with_params(&self.spec.params);
        let a = self.a.eval(&env)?;
        let g = match &self.gap {
            GapRule::Expr(e) => e.eval(&env)?,
            GapRule::Table(t) => match t.get((j - 1) as usize) {
                Some(g) => *g,
                None => return Err(Error::Horizon { index: j, horizon: t.len() as u64 }),
            },
        };
        if !a.is_finite() || !g.is_finite() {
            return Err(Error::Ordering { j, detail: format!("non-finite a_j = {a} or gap_j = {g}") });
        }
        if j == 1 && a < 0.0 {
            return Err(Error::Ordering { j, detail: format!("a_1 = {a} < 0") });
        }
        if !(g > 0.0) {
            return Err(Error::Ordering { j, detail: format!("empty interval: a_j = {a}, gap_j = {g}") });
        }
        Ok((a, g))
    }

    /// `(a_j, gap_j)` checked only against the neighbours `j-1` and `j+1`.
    ///
    /// This works at depths far past the materialization horizon.
    pub fn pair(&self, j: u64) -> Result<(f64, f64)> {
        if j == 0 {
            return Err(invalid("family index starts at 1"));
        }
        let (a, g) = self.raw(j)?;
        if j > 1 {
            let (pa, pg) = self.raw(j - 1)?;
            if !(pa + pg < a) {
                return Err(Error::Ordering { j, detail: format!("b_{} = {} >= a_j = {a}", j - 1, pa + pg) });
            }
        }
        if j < self.max_index() {
            let (na, _) = self.raw(j + 1)?;
            if !(a + g < na) {
                return Err(Error::Ordering { j: j + 1, detail: format!("b_{j} = {} >= a_{} = {na}", a + g, j + 1) });
            }
        }
        Ok((a, g))
    }

    /// `(a_j, b_j)`, validating the whole prefix `1..=j`.
    pub fn seq_eval(&self, j: u64) -> Result<(f64, f64)> {
        let (a, g) = self.prefix_pair(j)?;
        Ok((a, a + g))
    }

    /// `(a_j, gap_j)` with prefix validation.
    pub fn prefix_pair(&self, j: u64) -> Result<(f64, f64)> {
        if j == 0 {
            return Err(invalid("family index starts at 1"));
        }
        if j > self.horizon {
            return Err(Error::Horizon { index: j, horizon: self.horizon });
        }
        {
            let p = self.prefix.read().map_err(|_| Error::Invariant("poisoned family cache".into()))?;
            if let Some(v) = p.get((j - 1) as usize) {
                return Ok(*v);
            }
        }
        let mut p = self.prefix.write().map_err(|_| Error::Invariant("poisoned family cache".into()))?;
        while (p.len() as u64) < j {
            let k = p.len() as u64 + 1;
            let (a, g) = self.raw(k)?;
            if let Some(&(pa, pg)) = p.last() {
                if !(pa + pg < a) {
                    return Err(Error::Ordering { j: k, detail: format!("b_{} = {} >= a_{k} = {a}", k - 1, pa + pg) });
                }
            }
            p.push((a, g));
        }
        Ok(p[(j - 1) as usize])
    }

    /// Validate the prefix up to `j` and return the pairs.
    pub fn materialize(&self, j: u64) -> Result<Vec<(f64, f64)>> {
        self.prefix_pair(j)?;
        let p = self.prefix.read().map_err(|_| Error::Invariant("poisoned family cache".into()))?;
        Ok(p[..j as usize].to_vec())
    }

    /// Index `j` with `a_j <= x <= b_j`, or `None` when `x` falls in a hole.
    pub fn locate(&self, x: f64) -> Result<Option<u64>> {
        let (a1, _) = self.raw(1)?;
        if x < a1 {
            return Ok(None);
        }
        // gallop then bisect on a_j <= x
        let mut lo = 1u64;
        let mut hi = 2u64;
        loop {
            if hi > self.max_index() {
                hi = self.max_index();
                break;
            }
            let (a, _) = self.raw(hi)?;
            if a > x {
                break;
            }
            lo = hi;
            if hi > (1u64 << 60) {
                return Err(Error::Horizon { index: hi, horizon: 1 << 60 });
            }
            hi *= 2;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.raw(mid)?.0 <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let j = if self.raw(hi)?.0 <= x { hi } else { lo };
        let (a, g) = self.pair(j)?;
        Ok(if x <= a + g { Some(j) } else { None })
    }
}

/// Parametric shapes.
#[derive(Clone, Debug)]
pub enum Shape {
    HalfLine { c: f64 },
    Orthant,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    IntervalUnionCrossSpace { family: SequenceFamily },
    FiniteIntervalUnion { intervals: Vec<(f64, f64)> },
    LinearImage { base: Box<StructuredSet>, a: DMatrix<f64>, a_inv: DMatrix<f64> },
}

#[derive(Clone, Debug)]
pub struct StructuredSet {
    pub dim: usize,
    pub shape: Shape,
}

/// JSON description of a set. Infinite box bounds are written as `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSpec {
    HalfLine {
        #[serde(default)]
        c: f64,
    },
    Orthant {
        dim: usize,
    },
    Box {
        lo: Vec<Option<f64>>,
        hi: Vec<Option<f64>>,
    },
    FiniteUnion {
        intervals: Vec<[f64; 2]>,
    },
    IntervalUnion {
        #[serde(flatten)]
        family: FamilySpec,
        /// Ambient dimension `d`; the union is crossed with `R^{d-1}`.
        #[serde(default = "one")]
        cross_dim: usize,
    },
    LinearImage {
        base: Box<SetSpec>,
        /// Row-major `d x d` matrix.
        matrix: Vec<f64>,
    },
}

fn one() -> usize {
    1
}

/// Tolerance used when pulling points back through a linear map.
const PULLBACK_TOL: f64 = 1e-12;

impl StructuredSet {
    pub fn half_line(c: f64) -> Self {
        StructuredSet { dim: 1, shape: Shape::HalfLine { c } }
    }

    pub fn orthant(dim: usize) -> Self {
        StructuredSet { dim, shape: Shape::Orthant }
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid("box bounds must have equal nonzero length"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || l.is_nan() || h.is_nan()) {
            return Err(invalid("box needs lo < hi in every coordinate"));
        }
        Ok(StructuredSet { dim: lo.len(), shape: Shape::Box { lo, hi } })
    }

    pub fn finite_union(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(invalid("finite union needs at least one interval"));
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, (a, b)) in intervals.iter().enumerate() {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(invalid(format!("interval [{a}, {b}] has empty interior")));
            }
            if i > 0 && !(intervals[i - 1].1 < *a) {
                return Err(invalid("intervals must be disjoint"));
            }
        }
        Ok(StructuredSet { dim: 1, shape: Shape::FiniteIntervalUnion { intervals } })
    }

    pub fn interval_union(family: SequenceFamily, dim: usize) -> Result<Self> {
        if dim < 1 {
            return Err(invalid("dimension must be at least 1"));
        }
        Ok(StructuredSet { dim, shape: Shape::IntervalUnionCrossSpace { family } })
    }

    /// `A(K)`. Nested images are composed into one matrix.
    pub fn linear_image(base: StructuredSet, a: DMatrix<f64>) -> Result<Self> {
        let d = base.dim;
        if a.nrows() != d || a.ncols() != d {
            return Err(invalid(format!("matrix must be {d}x{d}")));
        }
        let a_inv = a.clone().try_inverse().ok_or_else(|| invalid("matrix is singular"))?;
        if a.determinant().abs() < 1e-14 * a.norm().powi(d as i32).max(f64::MIN_POSITIVE) {
            return Err(invalid("matrix is numerically singular"));
        }
        match base.shape {
            Shape::LinearImage { base: inner, a: b, .. } => Self::linear_image(*inner, a * b),
            _ => Ok(StructuredSet { dim: d, shape: Shape::LinearImage { base: Box::new(base), a, a_inv } }),
        }
    }

    pub fn from_spec(spec: &SetSpec) -> Result<Self> {
        match spec {
            SetSpec::HalfLine { c } => Ok(Self::half_line(*c)),
            SetSpec::Orthant { dim } => {
                if *dim < 1 {
                    return Err(invalid("dimension must be at least 1"));
                }
                Ok(Self::orthant(*dim))
            }
            SetSpec::Box { lo, hi } => Self::boxed(
                lo.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect(),
                hi.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
            ),
            SetSpec::FiniteUnion { intervals } => Self::finite_union(intervals.iter().map(|i| (i[0], i[1])).collect()),
            SetSpec::IntervalUnion { family, cross_dim } => {
                Self::interval_union(SequenceFamily::from_spec(family)?, *cross_dim)
            }
            SetSpec::LinearImage { base, matrix } => {
                let base = Self::from_spec(base)?;
                let d = base.dim;
                if matrix.len() != d * d {
                    return Err(invalid(format!("matrix needs {} entries, got {}", d * d, matrix.len())));
                }
                Self::linear_image(base, DMatrix::from_row_slice(d, d, matrix))
            }
        }
    }

    pub fn to_spec(&self) -> SetSpec {
        match &self.shape {
            Shape::HalfLine { c } => SetSpec::HalfLine { c: *c },
            Shape::Orthant => SetSpec::Orthant { dim: self.dim },
            Shape::Box { lo, hi } => SetSpec::Box {
                lo: lo.iter().map(|v| v.is_finite().then_some(*v)).collect(),
                hi: hi.iter().map(|v| v.is_finite().then_some(*v)).collect(),
            },
            Shape::FiniteIntervalUnion { intervals } => {
                SetSpec::FiniteUnion { intervals: intervals.iter().map(|(a, b)| [*a, *b]).collect() }
            }
            Shape::IntervalUnionCrossSpace { family } => {
                SetSpec::IntervalUnion { family: family.spec().clone(), cross_dim: self.dim }
            }
            Shape::LinearImage { base, a, .. } => SetSpec::LinearImage {
                base: Box::new(base.to_spec()),
                matrix: (0..self.dim).flat_map(|i| (0..self.dim).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]).collect(),
            },
        }
    }

    pub fn is_bounded(&self) -> bool {
        match &self.shape {
            Shape::FiniteIntervalUnion { .. } => true,
            Shape::Box { lo, hi } => lo.iter().chain(hi).all(|v| v.is_finite()),
            Shape::LinearImage { base, .. } => base.is_bounded(),
            _ => false,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(invalid(format!("point has dimension {}, set has {}", x.len(), self.dim)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("point coordinates must be finite"));
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok(match &self.shape {
            Shape::HalfLine { c } => x[0] >= *c,
            Shape::Orthant => x.iter().all(|v| *v >= 0.0),
            Shape::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l <= v && v <= h),
            Shape::FiniteIntervalUnion { intervals } => intervals.iter().any(|(a, b)| *a <= x[0] && x[0] <= *b),
            Shape::IntervalUnionCrossSpace { family } => family.locate(x[0])?.is_some(),
            Shape::LinearImage { .. } => self.signed_margin(x)? >= 0.0,
        })
    }

    /// Euclidean distance from `x ∈ K` to `∂K`.
    pub fn dist_boundary(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let outside = || Error::OutsideSet(x.to_vec());
        match &self.shape {
            Shape::LinearImage { .. } => {
                let m = self.signed_margin(x)?;
                if m < 0.0 {
                    return Err(outside());
                }
                Ok(m.max(0.0))
            }
            Shape::HalfLine { c } => {
                if x[0] < *c {
                    return Err(outside());
                }
                Ok(x[0] - c)
            }
            Shape::Orthant => {
                let m = x.iter().cloned().fold(f64::INFINITY, f64::min);
                if m < 0.0 {
                    return Err(outside());
                }
                Ok(m)
            }
            Shape::Box { lo, hi } => {
                let mut m = f64::INFINITY;
                for (v, (l, h)) in x.iter().zip(lo.iter().zip(hi)) {
                    if v < l || v > h {
                        return Err(outside());
                    }
                    m = m.min(v - l).min(h - v);
                }
                Ok(m)
            }
            Shape::FiniteIntervalUnion { intervals } => intervals
                .iter()
                .find(|(a, b)| *a <= x[0] && x[0] <= *b)
                .map(|(a, b)| (x[0] - a).min(b - x[0]))
                .ok_or_else(outside),
            Shape::IntervalUnionCrossSpace { family } => match family.locate(x[0])? {
                Some(j) => {
                    let (a, g) = family.pair(j)?;
                    Ok((x[0] - a).min(a + g - x[0]))
                }
                None => Err(outside()),
            },
        }
    }

    /// `d_K(x) = min(1, dist(x, ∂K))`.
    pub fn d_cap(&self, x: &[f64]) -> Result<f64> {
        Ok(self.dist_boundary(x)?.min(1.0))
    }

    // Signed distance-like margin for linear images: >= 0 inside.
    fn signed_margin(&self, y: &[f64]) -> Result<f64> {
        let Shape::LinearImage { base, a_inv, .. } = &self.shape else {
            return Err(Error::Invariant("signed_margin on a non-image".into()));
        };
        let d = self.dim;
        let scale = 1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let tol = PULLBACK_TOL * scale;
        let x: Vec<f64> = (0..d).map(|i| (0..d).map(|k| a_inv[(i, k)] * y[k]).sum()).collect();
        let row_norm = |i: usize| (0..d).map(|k| a_inv[(i, k)].powi(2)).sum::<f64>().sqrt();
        match &base.shape {
            Shape::Orthant | Shape::Box { .. } => {
                let (lo, hi) = match &base.shape {
                    Shape::Box { lo, hi } => (lo.clone(), hi.clone()),
                    _ => (vec![0.0; d], vec![f64::INFINITY; d]),
                };
                let mut m = f64::INFINITY;
                for i in 0..d {
                    let g = row_norm(i);
                    if lo[i].is_finite() {
                        m = m.min((x[i] - lo[i]) / g);
                    }
                    if hi[i].is_finite() {
                        m = m.min((hi[i] - x[i]) / g);
                    }
                }
                if m < 0.0 && m >= -tol {
                    m = 0.0;
                }
                Ok(m)
            }
            Shape::HalfLine { .. } | Shape::FiniteIntervalUnion { .. } | Shape::IntervalUnionCrossSpace { .. } => {
                // Needs the first row of A^{-1} to be g e_1.
                let g = a_inv[(0, 0)];
                if (1..d).any(|k| a_inv[(0, k)] != 0.0) {
                    return Err(Error::Unsupported(
                        "linear images of interval sets need A^{-1} to preserve coordinate 1".into(),
                    ));
                }
                let xb = x.clone();
                if !base.contains(&xb)? {
                    return Ok(-1.0);
                }
                Ok(base.dist_boundary(&xb)? / g.abs())
            }
            Shape::LinearImage { .. } => Err(Error::Invariant("nested linear image".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contains_examples() {
        assert!(StructuredSet::orthant(2).contains(&[1.0, 0.0]).unwrap());
        let u = StructuredSet::finite_union(vec![(1.0, 2.0), (3.0, 5.0)]).unwrap();
        assert!(!u.contains(&[2.5]).unwrap());
        let fam = SequenceFamily::new("j", "1/2", &[]).unwrap();
        let k = StructuredSet::interval_union(fam, 2).unwrap();
        assert!(k.contains(&[3.25, 7.0]).unwrap());
        assert!(!k.contains(&[3.75, 7.0]).unwrap());
        assert!(!k.contains(&[0.5, 0.0]).unwrap());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(StructuredSet::half_line(0.0).dist_boundary(&[0.5]).unwrap(), 0.5);
        assert_eq!(StructuredSet::orthant(2).dist_boundary(&[3.0, 0.2]).unwrap(), 0.2);
        let u = StructuredSet::finite_union(vec![(1.0, 2.0), (3.0, 5.0)]).unwrap();
        assert_eq!(u.dist_boundary(&[3.25]).unwrap(), 0.25);
        assert!(matches!(u.dist_boundary(&[2.5]), Err(Error::OutsideSet(_))));
        let h = StructuredSet::half_line(0.0);
        assert_eq!(h.d_cap(&[10.0]).unwrap(), 1.0);
        assert_eq!(h.d_cap(&[0.5]).unwrap(), 0.5);
        let fam = SequenceFamily::new("j", "1/j", &[]).unwrap();
        let k = StructuredSet::interval_union(fam, 1).unwrap();
        assert_eq!(k.d_cap(&[4.125]).unwrap(), 0.125);
    }

    #[test]
    fn seq_eval_examples() {
        let f = SequenceFamily::new("j", "1", &[]).unwrap();
        assert!(matches!(f.seq_eval(3), Err(Error::Ordering { j: 2, .. })));
        let f = SequenceFamily::new("j", "1/2", &[]).unwrap();
        assert_eq!(f.seq_eval(3).unwrap(), (3.0, 3.5));
        let f = SequenceFamily::new("log(1+j)^2", "0.1", &[]).unwrap();
        let (a, b) = f.seq_eval(1).unwrap();
        assert!((a - 2f64.ln().powi(2)).abs() < 1e-15 && (b - a - 0.1).abs() < 1e-15);
        assert!(f.seq_eval(2).unwrap().0 > b);
        let f = SequenceFamily::new("j", "(1/log(e+j))^(r-1)", &[("r", 2.0)]).unwrap();
        let (a, b) = f.seq_eval(10).unwrap();
        assert_eq!(a, 10.0);
        assert!((b - 10.0 - 1.0 / (std::f64::consts::E + 10.0).ln()).abs() < 1e-14);
        // the quoted 10.3930... is a rounding of 10.39323
        assert!((b - 10.393230076693422).abs() < 1e-12);
    }

    #[test]
    fn builtin_families_are_ordered() {
        for fam in [
            SequenceFamily::power(1.0, 1.0).unwrap(),
            SequenceFamily::power(2.0, 3.0).unwrap(),
            SequenceFamily::log_power(1.0).unwrap(),
            SequenceFamily::log_power(2.0).unwrap(),
            SequenceFamily::gevrey_gap(1.0, 1.2).unwrap(),
            SequenceFamily::gevrey_gap(2.0, 4.0).unwrap(),
        ] {
            fam.materialize(20_000).unwrap();
            fam.pair(1_000_000_000).unwrap();
        }
    }

    #[test]
    fn linear_image_examples() {
        let id = StructuredSet::linear_image(StructuredSet::orthant(2), DMatrix::identity(2, 2)).unwrap();
        for p in [[1.0, 2.0], [0.0, 3.0], [-1.0, 1.0]] {
            assert_eq!(id.contains(&p).unwrap(), StructuredSet::orthant(2).contains(&p).unwrap());
        }
        let th = 30f64.to_radians();
        let rot = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let cone = StructuredSet::linear_image(StructuredSet::orthant(2), rot).unwrap();
        assert!(cone.contains(&[th.cos(), th.sin()]).unwrap());
        let refl = StructuredSet::linear_image(StructuredSet::half_line(0.0), DMatrix::from_element(1, 1, -1.0)).unwrap();
        assert!(refl.contains(&[-3.0]).unwrap());
        assert_eq!(refl.dist_boundary(&[-3.0]).unwrap(), 3.0);
        assert!(StructuredSet::linear_image(StructuredSet::orthant(2), DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let json = r#"{"kind":"interval_union","a":"j^s","gap":"(1/log(e+j^s))^(r-1)","params":{"s":1,"r":2},"cross_dim":3}"#;
        let spec: SetSpec = serde_json::from_str(json).unwrap();
        let k = StructuredSet::from_spec(&spec).unwrap();
        assert_eq!(k.dim, 3);
        assert_eq!(k.to_spec(), spec);
    }
}
