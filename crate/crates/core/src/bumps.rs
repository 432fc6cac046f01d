//! Ultradifferentiable cutoffs, partitions of unity and weighted norms.
//!
//! The cutoff is an indicator convolved with a chain of normalized box kernels
//! whose widths follow `ℓ_p = M_{p-1}/M_p`. Every box stage is a discrete
//! sliding average of `2k_p + 1` grid values, so the plateau, support and range
//! claims hold exactly on the grid rather than up to rounding.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::par::{map_range, Execution};
use crate::quad::Profile;
use crate::sets::StructuredSet;
use crate::weights::{check_condition, nu_eval, Condition, WeightSequence, WeightSpec};

/// Tensor products are refused beyond this many grid points.
pub const POINT_BUDGET: usize = 1 << 24;
/// Step-halving tolerance for finite-difference derivatives.
pub const FD_AGREEMENT: f64 = 0.01;
pub const MAX_FD_ORDER: usize = 8;

/// Uniform grid: axis `a` has points `origin[a] + i*step`, `i < extents[a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Vec<f64>,
    pub step: f64,
    pub extents: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub dim: usize,
    pub grid: Grid,
    /// Row-major, last axis fastest.
    pub values: Vec<f64>,
    /// Double-double low parts, when the samples carry extra precision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values_lo: Option<Vec<f64>>,
    pub support_box: Vec<(f64, f64)>,
}

impl SampledFunction {
    /// Sample `f` on `origin + i*step`, `i < n`.
    pub fn from_fn_1d(origin: f64, step: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..n).map(|i| f(origin + i as f64 * step)).collect();
        SampledFunction {
            dim: 1,
            grid: Grid { origin: vec![origin], step, extents: vec![n] },
            values,
            values_lo: None,
            support_box: vec![(origin, origin + n.saturating_sub(1) as f64 * step)],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinate of index `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.grid.origin[axis] + i as f64 * self.grid.step
    }

    /// Grid point of flat index `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim];
        let mut rest = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rest % self.grid.extents[a];
            rest /= self.grid.extents[a];
        }
        idx.iter().enumerate().map(|(a, &i)| self.coord(a, i)).collect()
    }

    pub fn profile(&self) -> Result<Profile<'_>> {
        if self.dim != 1 {
            return Err(Error::Unsupported("1-d profile of a multi-dimensional sample".into()));
        }
        Ok(Profile { origin: self.grid.origin[0], step: self.grid.step, hi: &self.values, lo: self.values_lo.as_deref() })
    }

    /// Piecewise-linear interpolant (1-d); zero outside the grid.
    pub fn eval_linear(&self, x: f64) -> f64 {
        let (o, h, n) = (self.grid.origin[0], self.grid.step, self.values.len());
        let t = (x - o) / h;
        if t < 0.0 || t > (n - 1) as f64 {
            return 0.0;
        }
        let i = (t.floor() as usize).min(n - 2);
        let s = t - i as f64;
        self.values[i] * (1.0 - s) + self.values[i + 1] * s
    }

    /// Values are finite and vanish outside the declared support box.
    pub fn check_support(&self) -> Result<()> {
        for (k, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Invariant(format!("non-finite sample at flat index {k}")));
            }
            if *v != 0.0 {
                let x = self.point(k);
                let tol = 1e-12 * (1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max));
                if x.iter().zip(&self.support_box).any(|(xi, (lo, hi))| *xi < lo - tol || *xi > hi + tol) {
                    return Err(Error::Invariant(format!("nonzero sample {v} at {x:?} outside the support box")));
                }
            }
        }
        Ok(())
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug)]
pub struct BumpSpec {
    pub m: Arc<WeightSequence>,
    pub r: f64,
    pub center: f64,
    /// `None` picks the deepest stage still resolved by the grid.
    pub depth: Option<usize>,
    pub grid_step: f64,
}

/// JSON form of [`BumpSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpDoc {
    pub weight: WeightSpec,
    pub r: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default)]
    pub depth: Option<usize>,
    pub grid_step: f64,
}

impl BumpSpec {
    pub fn new(m: WeightSequence, r: f64, grid_step: f64) -> Self {
        BumpSpec { m: Arc::new(m), r, center: 0.0, depth: None, grid_step }
    }

    pub fn from_doc(doc: &BumpDoc) -> Result<Self> {
        Ok(BumpSpec {
            m: Arc::new(WeightSequence::from_spec(&doc.weight)?),
            r: doc.r,
            center: doc.center,
            depth: doc.depth,
            grid_step: doc.grid_step,
        })
    }

    pub fn to_doc(&self) -> BumpDoc {
        BumpDoc { weight: self.m.spec().clone(), r: self.r, center: self.center, depth: self.depth, grid_step: self.grid_step }
    }

    /// `r / (4 h)`, which must be an integer.
    fn quarter_index(&self) -> Result<usize> {
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(invalid(format!("r must lie in (0, 1], got {}", self.r)));
        }
        if !(self.grid_step > 0.0) {
            return Err(invalid("grid_step must be positive"));
        }
        let q = self.r / (4.0 * self.grid_step);
        let n = q.round();
        if n < 1.0 || (q - n).abs() > 1e-9 * n {
            return Err(invalid(format!("grid_step must divide r/4 (r/(4h) = {q})")));
        }
        Ok(n as usize)
    }
}

fn ell(m: &WeightSequence, p: usize) -> Result<f64> {
    Ok((m.log_value(p as u64 - 1)? - m.log_value(p as u64)?).exp())
}

/// `w_p = (r/4) ℓ_p / L`, `L = ∑_{p ≤ depth} ℓ_p`.
pub fn mollifier_widths(m: &WeightSequence, r: f64, depth: usize) -> Result<Vec<f64>> {
    if depth == 0 {
        return Err(invalid("depth must be at least 1"));
    }
    let nqa = check_condition(m, Condition::NonQuasianalytic, m.horizon().min(256).max(depth))?;
    if !nqa.holds {
        return Err(invalid("weight sequence is not non-quasianalytic"));
    }
    let ells: Vec<f64> = (1..=depth).map(|p| ell(m, p)).collect::<Result<_>>()?;
    let l: f64 = ells.iter().sum();
    Ok(ells.iter().map(|e| 0.25 * r * e / l).collect())
}

/// Deepest stage count whose smallest width still spans eight grid steps.
pub fn auto_depth(m: &WeightSequence, r: f64, grid_step: f64) -> Result<usize> {
    let mut best = 0;
    let mut l = 0.0;
    for p in 1..=m.horizon().min(4096) {
        let e = ell(m, p)?;
        l += e;
        if 0.25 * r * e / l >= 8.0 * grid_step {
            best = p;
        } else {
            break;
        }
    }
    if best == 0 {
        return Err(invalid(format!("grid_step {grid_step} too coarse for r = {r}")));
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffChecks {
    pub support: bool,
    pub plateau: bool,
    pub range: bool,
    pub integral: f64,
    pub integral_in_range: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub theta: SampledFunction,
    pub r: f64,
    pub depth: usize,
    pub widths: Vec<f64>,
    /// Per stage, the box kernel averages `2k + 1` samples.
    pub half_widths: Vec<usize>,
    /// The indicator covers `|i| ≤ indicator_half` grid steps about the center.
    pub indicator_half: usize,
    pub checks: CutoffChecks,
}

impl Cutoff {
    /// `2^{p-1} ∏_{q ≤ p} 1/((2k_q + 1) h)`.
    ///
    /// The first differentiated stage acts on an indicator and costs `1/w`;
    /// each later one acts on a signed function and costs the kernel
    /// derivative's mass `2/w`. The bare product without `2^{p-1}` is
    /// exceeded from `p = 5` on.
    pub fn analytic_bound(&self, p: usize) -> f64 {
        let h = self.theta.grid.step;
        let prod: f64 = self.half_widths.iter().take(p).map(|k| 1.0 / ((2 * k + 1) as f64 * h)).product();
        prod * 2f64.powi(p.saturating_sub(1) as i32)
    }
}

impl Cutoff {
    /// `sup |Δ_s^p θ| / s^p` with `s = m h`, evaluated by moving the differences
    /// into the convolution chain: `Δ_s` applied after a box stage equals
    /// a difference of two box-edge sums, so no high-order cancellation occurs.
    fn chain_difference_sup(&self, exec: Execution, p: usize, m: usize, n: u32) -> f64 {
        let h = self.theta.grid.step;
        let center = self.theta.coord(0, (self.theta.len() - 1) / 2);
        let pad = p * m + 1;
        let half = (self.theta.len() - 1) / 2 + pad;
        let len = 2 * half + 1;
        let mut v: Vec<f64> =
            (0..len).map(|i| if i.abs_diff(half) <= self.indicator_half { 1.0 } else { 0.0 }).collect();
        for (q, &k) in self.half_widths.iter().enumerate() {
            if q < p {
                let div = (2 * k + 1) as f64 * m as f64 * h;
                let src = v;
                let at = |j: i64| if j < 0 || j >= len as i64 { 0.0 } else { src[j as usize] };
                v = map_range(exec, len, |i| {
                    let i = i as i64;
                    let (k, m) = (k as i64, m as i64);
                    let mut acc = 0.0;
                    for t in 1..=m {
                        acc += at(i + k + t) - at(i - k + t - 1);
                    }
                    acc / div
                });
            } else {
                v = box_stage(exec, &v, k);
            }
        }
        // each forward difference sits half a step to the right
        let shift = 0.5 * (p * m) as f64;
        v.iter().enumerate().fold(0.0, |a, (i, x)| {
            let xi = center + (i as f64 - half as f64 + shift) * h;
            a.max(x.abs() * (1.0 + xi.abs()).powi(n as i32))
        })
    }

    /// Derivative sup of order `p ≤ depth`, with the same step-halving
    /// acceptance as [`derivative_sup`]. Returns `(sup, step)`.
    pub fn derivative_sup(&self, p: usize, n: u32) -> Result<(f64, f64)> {
        self.derivative_sup_with(Execution::default(), p, n)
    }

    pub fn derivative_sup_with(&self, exec: Execution, p: usize, n: u32) -> Result<(f64, f64)> {
        if p == 0 {
            return derivative_sup(&self.theta, 0, n);
        }
        if p > self.depth {
            return Err(invalid(format!("derivative order {p} above cutoff depth {}", self.depth)));
        }
        let h = self.theta.grid.step;
        let wmin = self.widths.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut m = 1;
        let mut a = self.chain_difference_sup(exec, p, m, n);
        while (2 * m) as f64 * h <= 0.5 * wmin {
            let b = self.chain_difference_sup(exec, p, 2 * m, n);
            if (a - b).abs() <= FD_AGREEMENT * a.max(b) {
                return Ok((a, m as f64 * h));
            }
            m *= 2;
            a = b;
        }
        Err(Error::Numerical(format!("step-halving disagreement above 1% for cutoff derivative order {p}")))
    }
}

/// One sliding-average stage, summed directly so runs of equal values stay exact.
fn box_stage(exec: Execution, v: &[f64], k: usize) -> Vec<f64> {
    let n = v.len();
    let div = (2 * k + 1) as f64;
    map_range(exec, n, |i| {
        let lo = i.saturating_sub(k);
        let hi = (i + k).min(n - 1);
        let mut s = 0.0;
        for x in &v[lo..=hi] {
            s += *x;
        }
        s / div
    })
}

pub fn build_cutoff(spec: &BumpSpec) -> Result<Cutoff> {
    build_cutoff_with(spec, Execution::default())
}

pub fn build_cutoff_with(spec: &BumpSpec, exec: Execution) -> Result<Cutoff> {
    let nq = spec.quarter_index()?;
    let h = spec.grid_step;
    let depth = match spec.depth {
        Some(d) => d,
        None => auto_depth(&spec.m, spec.r, h)?,
    };
    let widths = mollifier_widths(&spec.m, spec.r, depth)?;
    let wmin = widths.iter().cloned().fold(f64::INFINITY, f64::min);
    if h > wmin / 8.0 {
        return Err(invalid(format!("grid_step {h} exceeds smallest width / 8 = {}", wmin / 8.0)));
    }
    let total: f64 = widths.iter().sum();
    let half_widths: Vec<usize> = widths.iter().map(|w| (w / (2.0 * h)).floor() as usize).collect();
    let ns = 2 * nq;
    // indicator of [-(r/4 + W/2), r/4 + W/2] on the grid
    let n_ind = nq + ((0.5 * total / h) * (1.0 + 1e-12)).floor() as usize;
    let n_ind = n_ind.min(ns);
    let half = ns + 1;
    let len = 2 * half + 1;
    let mut v: Vec<f64> = (0..len).map(|i| if i.abs_diff(half) <= n_ind { 1.0 } else { 0.0 }).collect();
    for &k in &half_widths {
        v = box_stage(exec, &v, k);
    }
    let origin = spec.center - half as f64 * h;
    let theta = SampledFunction {
        dim: 1,
        grid: Grid { origin: vec![origin], step: h, extents: vec![len] },
        values: v,
        values_lo: None,
        support_box: vec![(spec.center - 0.5 * spec.r, spec.center + 0.5 * spec.r)],
    };
    let support = theta.values[0] == 0.0
        && theta.values[len - 1] == 0.0
        && theta.values.iter().enumerate().all(|(i, x)| i.abs_diff(half) <= ns || *x == 0.0);
    let plateau = theta.values.iter().enumerate().all(|(i, x)| i.abs_diff(half) > nq || *x == 1.0);
    let range = theta.values.iter().all(|x| (0.0..=1.0).contains(x));
    let integral = h * theta.values.iter().sum::<f64>();
    let checks = CutoffChecks {
        support,
        plateau,
        range,
        integral,
        integral_in_range: integral >= 0.5 * spec.r && integral <= spec.r,
    };
    if !(support && plateau && range) {
        return Err(Error::Invariant(format!("cutoff invariants failed: {checks:?}")));
    }
    theta.check_support()?;
    Ok(Cutoff { theta, r: spec.r, depth, widths, half_widths, indicator_half: n_ind, checks })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub rho: SampledFunction,
    pub c0: f64,
    /// `max |∑_λ ρ(x − rλ) − 1|` over one period of grid points.
    pub max_shift_sum_error: f64,
    pub integral: f64,
    pub support_ok: bool,
}

pub const PARTITION_TOL: f64 = 1e-8;

/// `ρ(x) = (1/C_0) ∫_{[-r/2, r/2]} θ(x + y) dy`, `C_0 = ∫ θ`, by the trapezoid rule.
pub fn build_partition(spec: &BumpSpec) -> Result<Partition> {
    build_partition_with(spec, Execution::default())
}

pub fn build_partition_with(spec: &BumpSpec, exec: Execution) -> Result<Partition> {
    let cut = build_cutoff_with(spec, exec)?;
    let th = &cut.theta.values;
    let h = spec.grid_step;
    let ns = 4 * spec.quarter_index()? / 2;
    let half_t = (th.len() - 1) / 2;
    let c0 = h * th.iter().sum::<f64>();
    let half = half_t + ns;
    let len = 2 * half + 1;
    let theta_at = |j: i64| -> f64 {
        let idx = j + half_t as i64;
        if idx < 0 || idx >= th.len() as i64 {
            0.0
        } else {
            th[idx as usize]
        }
    };
    let ns_i = ns as i64;
    let rho: Vec<f64> = map_range(exec, len, |i| {
        let x = i as i64 - half as i64;
        let mut s = 0.5 * (theta_at(x - ns_i) + theta_at(x + ns_i));
        for t in -ns_i + 1..ns_i {
            s += theta_at(x + t);
        }
        h * s / c0
    });
    let period = 2 * ns;
    let mut max_err = 0.0f64;
    for i0 in 0..period {
        let mut s = 0.0;
        let mut i = i0 as i64;
        while i < len as i64 {
            s += rho[i as usize];
            i += period as i64;
        }
        max_err = max_err.max((s - 1.0).abs());
    }
    let support_ok = rho.iter().enumerate().all(|(i, v)| i.abs_diff(half) <= 2 * ns || *v == 0.0);
    let integral = h * rho.iter().sum::<f64>();
    let origin = spec.center - half as f64 * h;
    let rho = SampledFunction {
        dim: 1,
        grid: Grid { origin: vec![origin], step: h, extents: vec![len] },
        values: rho,
        values_lo: None,
        support_box: vec![(spec.center - spec.r, spec.center + spec.r)],
    };
    if max_err > PARTITION_TOL {
        return Err(Error::Invariant(format!("partition sum deviates by {max_err:e}")));
    }
    rho.check_support()?;
    Ok(Partition { rho, c0, max_shift_sum_error: max_err, integral, support_ok })
}

/// `θ(x_1, …, x_d) = θ(x_1) ⋯ θ(x_d)`.
pub fn tensorize(theta: &SampledFunction, d: usize) -> Result<SampledFunction> {
    if theta.dim != 1 {
        return Err(invalid("tensorize expects a 1-d sample"));
    }
    if d == 0 || d > 3 {
        return Err(invalid(format!("tensorize supports d in 1..=3, got {d}")));
    }
    let n = theta.len();
    let total = n.checked_pow(d as u32).filter(|t| *t <= POINT_BUDGET).ok_or_else(|| {
        Error::InvalidInput(format!("{n}^{d} grid points exceed the budget of {POINT_BUDGET}"))
    })?;
    let values = (0..total)
        .map(|mut k| {
            let mut p = 1.0;
            for _ in 0..d {
                p *= theta.values[k % n];
                k /= n;
            }
            p
        })
        .collect();
    Ok(SampledFunction {
        dim: d,
        grid: Grid { origin: vec![theta.grid.origin[0]; d], step: theta.grid.step, extents: vec![n; d] },
        values,
        values_lo: None,
        support_box: vec![theta.support_box[0]; d],
    })
}

#[derive(Clone, Debug)]
pub enum NormKind {
    Schwartz { k: usize, n: u32 },
    Gs { m: Arc<WeightSequence>, h: f64, n: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormDoc {
    Schwartz { k: usize, n: u32 },
    Gs { weight: WeightSpec, h: f64, n: u32 },
}

impl NormKind {
    pub fn from_doc(doc: &NormDoc) -> Result<Self> {
        Ok(match doc {
            NormDoc::Schwartz { k, n } => NormKind::Schwartz { k: *k, n: *n },
            NormDoc::Gs { weight, h, n } => NormKind::Gs { m: Arc::new(WeightSequence::from_spec(weight)?), h: *h, n: *n },
        })
    }

    pub fn to_doc(&self) -> NormDoc {
        match self {
            NormKind::Schwartz { k, n } => NormDoc::Schwartz { k: *k, n: *n },
            NormKind::Gs { m, h, n } => NormDoc::Gs { weight: m.spec().clone(), h: *h, n: *n },
        }
    }

    fn n(&self) -> u32 {
        match self {
            NormKind::Schwartz { n, .. } | NormKind::Gs { n, .. } => *n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub norm_kind: NormDoc,
    pub value: f64,
    pub p_max_used: usize,
    /// Per order: the weighted sup entering the norm.
    pub per_p_values: Vec<f64>,
    /// Per order: `sup |f^{(p)}| (1+|x|)^n` before the `h^p M_p` division.
    pub per_p_sup: Vec<f64>,
    /// Finite-difference step accepted for each order.
    pub per_p_step: Vec<f64>,
}

fn binomial(p: usize, i: usize) -> f64 {
    (0..i).fold(1.0, |acc, j| acc * (p - j) as f64 / (j + 1) as f64)
}

/// `max_x |Δ_s^p f(x)| (1+|x|)^n / s^p` for the central stencil with `s = 2 m h`.
fn fd_sup(f: &SampledFunction, p: usize, m: usize, n: u32) -> Option<f64> {
    let v = &f.values;
    let len = v.len();
    let reach = p * m;
    if 2 * reach >= len {
        return None;
    }
    let coeff: Vec<f64> = (0..=p).map(|i| if i % 2 == 0 { binomial(p, i) } else { -binomial(p, i) }).collect();
    let s = 2.0 * m as f64 * f.grid.step;
    let sp = s.powi(p as i32);
    let mut best = 0.0f64;
    for c in reach..len - reach {
        let mut acc = 0.0;
        for (i, co) in coeff.iter().enumerate() {
            // offset (p/2 - i) s = (p - 2i) m grid steps
            let off = (p as i64 - 2 * i as i64) * m as i64;
            acc += co * v[(c as i64 + off) as usize];
        }
        let x = f.coord(0, c);
        best = best.max(acc.abs() * (1.0 + x.abs()).powi(n as i32) / sp);
    }
    Some(best)
}

/// Derivative sup of order `p` with step-halving acceptance. Returns `(sup, step)`.
pub fn derivative_sup(f: &SampledFunction, p: usize, n: u32) -> Result<(f64, f64)> {
    if f.dim != 1 {
        return Err(Error::Unsupported("derivatives of multi-dimensional samples".into()));
    }
    if p == 0 {
        let mut best = 0.0f64;
        for (i, v) in f.values.iter().enumerate() {
            let x = f.coord(0, i);
            best = best.max(v.abs() * (1.0 + x.abs()).powi(n as i32));
        }
        return Ok((best, 0.0));
    }
    if p > MAX_FD_ORDER {
        return Err(invalid(format!("derivative order {p} above {MAX_FD_ORDER}")));
    }
    let mut m = 1;
    let mut prev = fd_sup(f, p, m, n);
    while let Some(a) = prev {
        let Some(b) = fd_sup(f, p, 2 * m, n) else { break };
        if a == 0.0 && b == 0.0 {
            return Ok((0.0, 2.0 * m as f64 * f.grid.step));
        }
        if (a - b).abs() <= FD_AGREEMENT * a.max(b) {
            return Ok((a, 2.0 * m as f64 * f.grid.step));
        }
        m *= 2;
        prev = Some(b);
    }
    Err(Error::Numerical(format!("step-halving disagreement above 1% for derivative order {p}: grid too coarse")))
}

pub fn norm_eval(f: &SampledFunction, kind: &NormKind, p_max: usize) -> Result<NormReport> {
    let top = norm_top(kind, p_max);
    if f.dim != 1 && top > 0 {
        return Err(Error::Unsupported("derivative norms of multi-dimensional samples".into()));
    }
    assemble_norm(kind, top, |p, n| {
        if f.dim == 1 {
            derivative_sup(f, p, n)
        } else {
            let mut best = 0.0f64;
            for (k, v) in f.values.iter().enumerate() {
                let r: f64 = f.point(k).iter().map(|x| x * x).sum::<f64>().sqrt();
                best = best.max(v.abs() * (1.0 + r).powi(n as i32));
            }
            Ok((best, 0.0))
        }
    })
}

/// [`norm_eval`] for a constructed cutoff, with derivatives taken through the
/// convolution chain. Orders above the cutoff depth are refused.
pub fn norm_eval_cutoff(c: &Cutoff, kind: &NormKind, p_max: usize) -> Result<NormReport> {
    assemble_norm(kind, norm_top(kind, p_max), |p, n| c.derivative_sup(p, n))
}

fn norm_top(kind: &NormKind, p_max: usize) -> usize {
    match kind {
        NormKind::Schwartz { k, .. } => *k,
        NormKind::Gs { .. } => p_max,
    }
}

fn assemble_norm(kind: &NormKind, top: usize, deriv: impl Fn(usize, u32) -> Result<(f64, f64)>) -> Result<NormReport> {
    let n = kind.n();
    let mut per_p_values = Vec::new();
    let mut per_p_sup = Vec::new();
    let mut per_p_step = Vec::new();
    for p in 0..=top {
        let (sup, step) = deriv(p, n)?;
        let weighted = match kind {
            NormKind::Schwartz { .. } => sup,
            NormKind::Gs { m, h, .. } => sup / (h.powi(p as i32) * m.value(p as u64)?),
        };
        per_p_sup.push(sup);
        per_p_values.push(weighted);
        per_p_step.push(step);
    }
    let value = per_p_values.iter().cloned().fold(0.0, f64::max);
    Ok(NormReport { norm_kind: kind.to_doc(), value, p_max_used: top, per_p_values, per_p_sup, per_p_step })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub r: f64,
    pub p: usize,
    pub measured: f64,
    pub bound: f64,
    /// `bound / measured`; at least 1 for every feasible row.
    pub slack: f64,
    pub analytic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundFit {
    pub c: f64,
    pub h: f64,
    pub k: f64,
    pub p_max: usize,
    pub rows: Vec<BoundRow>,
    /// `(r, C_r)`: the smallest constant that serves radius `r` alone at the fitted `(h, k)`.
    pub per_radius_c: Vec<(f64, f64)>,
}

pub fn default_h_grid() -> Vec<f64> {
    (-2..=8).map(|e| 2f64.powi(e)).collect()
}

pub fn default_k_grid() -> Vec<f64> {
    (-4..=2).map(|e| 2f64.powi(e)).collect()
}

/// The radii used for the fit.
pub const FIT_RADII: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

/// Minimize `C` over the `(h, k)` grid subject to
/// `max |θ^{(p)}| ≤ C h^p M_p / ν_M(k r)` for every `p ≤ p_max` and every cutoff.
pub fn derivative_bound_fit(cutoffs: &[Cutoff], m: &WeightSequence, p_max: usize) -> Result<BoundFit> {
    derivative_bound_fit_on(cutoffs, m, p_max, &default_h_grid(), &default_k_grid())
}

pub fn derivative_bound_fit_on(
    cutoffs: &[Cutoff],
    m: &WeightSequence,
    p_max: usize,
    h_grid: &[f64],
    k_grid: &[f64],
) -> Result<BoundFit> {
    if p_max > MAX_FD_ORDER {
        return Err(invalid(format!("p_max must be at most {MAX_FD_ORDER}")));
    }
    if cutoffs.is_empty() {
        return Err(invalid("no cutoffs to fit"));
    }
    let mut measured = Vec::new();
    for c in cutoffs {
        if c.depth < p_max {
            return Err(invalid(format!("cutoff depth {} below p_max {p_max}", c.depth)));
        }
        for p in 0..=p_max {
            let (d, _) = c.derivative_sup(p, 0)?;
            let analytic = c.analytic_bound(p);
            if d > analytic * (1.0 + FD_AGREEMENT) {
                return Err(Error::Invariant(format!(
                    "measured |θ^({p})| = {d:e} exceeds the box-chain bound {analytic:e} at r = {}",
                    c.r
                )));
            }
            measured.push((c.r, p, d, analytic));
        }
    }
    // Minimizing C alone is degenerate: C scales like ν_M(k r_max), so it always
    // runs to the smallest k. The fit instead minimizes the worst slack, the
    // ratio of the largest to the smallest `D ν_M(k r) / (h^p M_p)`, and C is the
    // largest of those.
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for &h in h_grid {
        for &k in k_grid {
            let mut hi = f64::NEG_INFINITY;
            let mut lo = f64::INFINITY;
            for &(r, p, d, _) in &measured {
                let q = d.ln() + nu_eval(m, k * r)?.log_value - p as f64 * h.ln() - m.log_value(p as u64)?;
                hi = hi.max(q);
                lo = lo.min(q);
            }
            let spread = hi - lo;
            if spread.is_finite() && best.is_none_or(|b| spread < b.0 || (spread == b.0 && hi < b.1)) {
                best = Some((spread, hi, h, k));
            }
        }
    }
    let best = best.map(|(_, hi, h, k)| (hi.exp(), h, k));
    let (c, h, k) = best.ok_or_else(|| Error::Invariant("no feasible (C, h, k) in the search box".into()))?;
    let mut rows = Vec::new();
    for &(r, p, d, analytic) in &measured {
        let log_bound = c.ln() + p as f64 * h.ln() + m.log_value(p as u64)? - nu_eval(m, k * r)?.log_value;
        let bound = log_bound.exp();
        rows.push(BoundRow { r, p, measured: d, bound, slack: if d > 0.0 { bound / d } else { f64::INFINITY }, analytic });
    }
    let mut per_radius_c: Vec<(f64, f64)> = Vec::new();
    for row in &rows {
        let need = c / row.slack;
        match per_radius_c.iter_mut().find(|(r, _)| *r == row.r) {
            Some(e) => e.1 = e.1.max(need),
            None => per_radius_c.push((row.r, need)),
        }
    }
    Ok(BoundFit { c, h, k, p_max, rows, per_radius_c })
}

/// One cutoff per radius with grid step `rel_step * r`.
pub fn cutoffs_for_radii(m: &WeightSequence, radii: &[f64], rel_step: f64) -> Result<Vec<Cutoff>> {
    radii.iter().map(|&r| build_cutoff(&BumpSpec::new(m.clone(), r, rel_step * r))).collect()
}

#[derive(Clone, Debug)]
pub enum TaylorNorm {
    /// `|f(x)| ≤ 2^m C_3 ‖f‖_{k,m} d^k / (1+|x|)^m`, `C_3 = 1/k!`.
    Schwartz { k: usize, m: u32 },
    /// `|f(x)| ≤ 2^m ‖f‖^{M,h}_m ν_M(h d) / (1+|x|)^m`.
    Gs { weight: Arc<WeightSequence>, h: f64, m: u32, p_max: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorViolation {
    pub x: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    pub points_checked: usize,
    pub norm: NormReport,
    /// Largest `|f(x)| / rhs` over checked points with `f(x) ≠ 0`.
    pub max_ratio: f64,
    pub violations: Vec<TaylorViolation>,
    /// For the GS form: the infimum in `ν_M` is taken over `p ≤ p_max`, the
    /// same orders the norm is truncated at.
    pub nu_truncated_at: Option<usize>,
    /// Violations when `ν_M` is instead the full infimum over all orders.
    pub full_nu_violations: usize,
}

/// Verify the near-boundary Taylor bound at every grid point of `f` in
/// `{x ∈ int K : d(x, ∂K) ≤ 1}`.
pub fn taylor_bound_check(f: &SampledFunction, k: &StructuredSet, norm: &TaylorNorm) -> Result<TaylorReport> {
    let rep = match norm {
        TaylorNorm::Schwartz { k, m } => norm_eval(f, &NormKind::Schwartz { k: *k, n: *m }, *k)?,
        TaylorNorm::Gs { weight, h, m, p_max } => norm_eval(f, &NormKind::Gs { m: weight.clone(), h: *h, n: *m }, *p_max)?,
    };
    taylor_with_norm(f, k, norm, rep)
}

/// [`taylor_bound_check`] for a constructed cutoff; the norm comes from [`norm_eval_cutoff`].
pub fn taylor_bound_check_cutoff(c: &Cutoff, k: &StructuredSet, norm: &TaylorNorm) -> Result<TaylorReport> {
    let rep = match norm {
        TaylorNorm::Schwartz { k, m } => norm_eval_cutoff(c, &NormKind::Schwartz { k: *k, n: *m }, *k)?,
        TaylorNorm::Gs { weight, h, m, p_max } => {
            norm_eval_cutoff(c, &NormKind::Gs { m: weight.clone(), h: *h, n: *m }, *p_max)?
        }
    };
    taylor_with_norm(&c.theta, k, norm, rep)
}

fn taylor_with_norm(f: &SampledFunction, k: &StructuredSet, norm: &TaylorNorm, rep: NormReport) -> Result<TaylorReport> {
    if f.dim != 1 || k.dim != 1 {
        return Err(Error::Unsupported("taylor_bound_check is 1-d".into()));
    }
    for (i, v) in f.values.iter().enumerate() {
        if *v != 0.0 && !k.contains(&[f.coord(0, i)])? {
            return Err(invalid(format!("f is nonzero at {} outside K", f.coord(0, i))));
        }
    }
    let m = match norm {
        TaylorNorm::Schwartz { m, .. } | TaylorNorm::Gs { m, .. } => *m,
    };
    let two_m = 2f64.powi(m as i32);
    let mut checked = 0;
    let mut max_ratio = 0.0f64;
    let mut violations = Vec::new();
    let mut full_nu_violations = 0;
    for (i, v) in f.values.iter().enumerate() {
        let x = f.coord(0, i);
        if !k.contains(&[x])? {
            continue;
        }
        let d = k.dist_boundary(&[x])?;
        if !(d > 0.0 && d <= 1.0) {
            continue;
        }
        checked += 1;
        let decay = (1.0 + x.abs()).powi(m as i32);
        let rhs = match norm {
            TaylorNorm::Schwartz { k, .. } => {
                let c3 = 1.0 / (1..=*k).map(|j| j as f64).product::<f64>();
                two_m * c3 * rep.value * d.powi(*k as i32) / decay
            }
            TaylorNorm::Gs { weight, h, p_max, .. } => {
                let t = h * d;
                let mut nu = f64::INFINITY;
                for p in 0..=*p_max {
                    let lp = p as f64 * t.ln() + weight.log_value(p as u64)? - crate::weights::ln_factorial(p as u64);
                    nu = nu.min(lp.exp());
                }
                let full = two_m * rep.value * nu_eval(weight, t)?.value / decay;
                if v.abs() > full {
                    full_nu_violations += 1;
                }
                two_m * rep.value * nu / decay
            }
        };
        let lhs = v.abs();
        if lhs > 0.0 {
            max_ratio = max_ratio.max(lhs / rhs);
        }
        if lhs > rhs {
            violations.push(TaylorViolation { x, lhs, rhs });
        }
    }
    let nu_truncated_at = match norm {
        TaylorNorm::Gs { p_max, .. } => Some(*p_max),
        _ => None,
    };
    Ok(TaylorReport { points_checked: checked, norm: rep, max_ratio, violations, nu_truncated_at, full_nu_violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn g2() -> WeightSequence {
        WeightSequence::gevrey(2.0).unwrap()
    }

    #[test]
    fn widths_example() {
        let w = mollifier_widths(&g2(), 1.0, 3).unwrap();
        // ℓ = (1, 1/4, 1/9), L = 49/36
        let l = 1.0 + 0.25 + 1.0 / 9.0;
        for (got, e) in w.iter().zip([1.0, 0.25, 1.0 / 9.0]) {
            assert_relative_eq!(*got, 0.25 * e / l, max_relative = 1e-12);
        }
        assert!((w[0] - 0.18367).abs() < 5e-6 && (w[1] - 0.04592).abs() < 5e-6 && (w[2] - 0.02041).abs() < 5e-6);
        let half = mollifier_widths(&g2(), 0.5, 3).unwrap();
        for (a, b) in w.iter().zip(&half) {
            assert_relative_eq!(*a, 2.0 * b, max_relative = 1e-14);
        }
    }

    #[test]
    fn cutoff_invariants() {
        let spec = BumpSpec::new(g2(), 1.0, 1.0 / 1024.0);
        let c = build_cutoff(&spec).unwrap();
        let th = &c.theta;
        let mid = (th.len() - 1) / 2;
        assert_eq!(th.values[mid], 1.0);
        assert_eq!(th.eval_linear(0.5 + spec.grid_step), 0.0);
        assert_eq!(th.eval_linear(-0.5 - spec.grid_step), 0.0);
        assert!(c.checks.integral_in_range);
        let seq = build_cutoff_with(&spec, Execution::Sequential).unwrap();
        assert_eq!(seq.theta.values, c.theta.values);
        assert!(build_cutoff(&BumpSpec::new(g2(), 1.0, 0.3)).is_err());
    }

    #[test]
    fn partition_identity() {
        let p = build_partition(&BumpSpec::new(g2(), 0.5, 1.0 / 2048.0)).unwrap();
        assert!(p.max_shift_sum_error <= PARTITION_TOL);
        assert!(p.support_ok);
        assert_relative_eq!(p.integral, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn tensor_product() {
        let c = build_cutoff(&BumpSpec { depth: Some(2), ..BumpSpec::new(g2(), 1.0, 1.0 / 256.0) }).unwrap();
        let t = tensorize(&c.theta, 2).unwrap();
        let n = c.theta.len();
        let mid = (n - 1) / 2;
        assert_eq!(t.values[mid * n + mid], 1.0);
        for i in (0..n).step_by(7) {
            for j in (0..n).step_by(5) {
                assert_eq!(t.values[i * n + j], c.theta.values[i] * c.theta.values[j]);
            }
        }
        assert_eq!(t.sup_abs(), 1.0);
        t.check_support().unwrap();
        assert!(tensorize(&c.theta, 4).is_err());
    }

    #[test]
    fn norm_examples() {
        let c = build_cutoff(&BumpSpec::new(g2(), 1.0, 1.0 / 1024.0)).unwrap();
        assert_eq!(norm_eval(&c.theta, &NormKind::Schwartz { k: 0, n: 0 }, 0).unwrap().value, 1.0);
        let z = SampledFunction::from_fn_1d(-1.0, 0.01, 201, |_| 0.0);
        let g = NormKind::Gs { m: Arc::new(g2()), h: 1.0, n: 2 };
        assert_eq!(norm_eval(&z, &g, 4).unwrap().value, 0.0);
        let gauss = SampledFunction::from_fn_1d(-8.0, 1e-3, 16001, |x| (-x * x).exp());
        let r = norm_eval(&gauss, &NormKind::Schwartz { k: 1, n: 0 }, 1).unwrap();
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-12);
        assert_relative_eq!(r.per_p_sup[1], (2.0 / std::f64::consts::E).sqrt(), max_relative = 1e-4);
    }
}
