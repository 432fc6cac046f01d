//! Finite truncations of the moment problem, solved constructively.
//!
//! Basis elements are normalized cutoffs (optionally times `x^k`) sampled on one
//! shared dyadic lattice, so every element, and any linear combination of them,
//! lives on the same grid. Moments are those of the piecewise-linear interpolant
//! of the samples, computed in double-double. That makes the re-quadrature of a
//! synthesized function an exact check of the linear algebra.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::bumps::{build_cutoff, BumpSpec, Grid, SampledFunction};
use crate::criteria::SpaceSpec;
use crate::error::{invalid, Error, Result};
use crate::linalg::{Mat, MinNormSolver};
use crate::par::{map_range, map_slice, Execution};
use crate::quad::{abs_moments, gl_moments, simpson_moment, GaussLegendre, Profile};
use crate::sets::{SequenceFamily, Shape, StructuredSet};
use crate::weights::{WeightSequence, WeightSpec};

/// Gauss–Legendre vs adaptive Simpson, relative to `∫ |x|^α |φ|`.
pub const QUAD_AGREEMENT: f64 = 1e-10;
pub const FIDELITY_REL: f64 = 1e-8;
pub const FIDELITY_ABS: f64 = 1e-10;
pub const LINEARITY_TOL: f64 = 1e-12;
/// Quarter-plateau grid points of the narrowest bump when the lattice is automatic.
pub const MIN_QUARTER_POINTS: f64 = 1024.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTargets {
    pub dim: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Keyed by the decimal multi-index; in one dimension just `"α"`.
    pub values: BTreeMap<String, f64>,
}

impl MomentTargets {
    pub fn from_vec(values: &[f64]) -> Self {
        MomentTargets {
            dim: 1,
            n: values.len().saturating_sub(1),
            values: values.iter().enumerate().map(|(i, v)| (i.to_string(), *v)).collect(),
        }
    }

    /// `c_α = δ_{α,0}`.
    pub fn delta(n: usize) -> Self {
        let mut v = vec![0.0; n + 1];
        v[0] = 1.0;
        Self::from_vec(&v)
    }

    pub fn to_vec(&self) -> Result<Vec<f64>> {
        if self.dim != 1 {
            return Err(Error::Unsupported(format!("moment targets in dimension {}", self.dim)));
        }
        let mut out = vec![0.0; self.n + 1];
        for (a, slot) in out.iter_mut().enumerate() {
            *slot = *self
                .values
                .get(&a.to_string())
                .ok_or_else(|| invalid(format!("missing target for α = {a}")))?;
        }
        if let Some(k) = self.values.keys().find(|k| k.parse::<usize>().map_or(true, |a| a > self.n)) {
            return Err(invalid(format!("target key {k:?} is not an index in 0..={}", self.n)));
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(invalid("targets must be finite"));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    Windows,
    ModulatedSingleWindow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementOptions {
    pub strategy: Strategy,
    /// Window for the modulated strategy; defaults per set shape.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    /// Shared lattice step, a power of two; automatic when absent.
    #[serde(default)]
    pub lattice_step: Option<f64>,
    pub weight: WeightSpec,
}

impl PlacementOptions {
    pub fn new(strategy: Strategy) -> Self {
        PlacementOptions { strategy, window: None, lattice_step: None, weight: WeightSpec::Gevrey { sigma: 2.0, horizon: None } }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementSummary {
    pub window: (f64, f64),
    pub support: (f64, f64),
    pub center: f64,
    pub r: f64,
    pub depth: usize,
    pub modulation: u32,
}

#[derive(Clone, Debug)]
pub struct BasisElement {
    pub summary: ElementSummary,
    /// `x^k φ(x)` sampled on the shared lattice.
    pub sample: SampledFunction,
}

#[derive(Clone, Debug)]
pub struct BumpBasis {
    pub n: usize,
    pub strategy: Strategy,
    pub lattice_step: f64,
    pub weight: Arc<WeightSequence>,
    pub elements: Vec<BasisElement>,
}

impl BumpBasis {
    pub fn summary(&self) -> Vec<ElementSummary> {
        self.elements.iter().map(|e| e.summary.clone()).collect()
    }
}

fn windows_for(k: &StructuredSet, n: usize, strategy: Strategy, window: Option<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
    if k.dim != 1 {
        return Err(Error::Unsupported("basis placement is 1-d".into()));
    }
    if let Some(w) = window {
        if strategy != Strategy::ModulatedSingleWindow {
            return Err(invalid("an explicit window applies only to ModulatedSingleWindow"));
        }
        return Ok(vec![w]);
    }
    let count = match strategy {
        Strategy::Windows => n + 1,
        Strategy::ModulatedSingleWindow => 1,
    };
    match &k.shape {
        Shape::HalfLine { c } => Ok((0..count).map(|i| (c + 1.0 + i as f64, c + 2.0 + i as f64)).collect()),
        Shape::FiniteIntervalUnion { intervals } => {
            if intervals.len() < count {
                return Err(invalid(format!("{count} windows needed but K has {} intervals", intervals.len())));
            }
            Ok(intervals[..count].to_vec())
        }
        Shape::IntervalUnionCrossSpace { family } => {
            if (family.max_index() as usize) < count {
                return Err(invalid(format!("{count} windows needed but the family stops at {}", family.max_index())));
            }
            (1..=count as u64).map(|j| family.seq_eval(j)).collect()
        }
        _ => Err(Error::Unsupported("placement needs a half-line, finite union or K_{a,b}".into())),
    }
}

/// Largest `r ≤ 1` whose support `[c - r/2, c + r/2]` keeps the margin
/// `(b - a)/8` at both window ends.
fn radius_for(w: (f64, f64)) -> f64 {
    (0.75 * (w.1 - w.0)).min(1.0)
}

fn auto_lattice(windows: &[(f64, f64)]) -> f64 {
    let r_min = windows.iter().map(|w| radius_for(*w)).fold(f64::INFINITY, f64::min);
    2f64.powi(-(4.0 * MIN_QUARTER_POINTS / r_min).log2().ceil() as i32)
}

pub fn place_basis(k: &StructuredSet, n: usize, opts: &PlacementOptions) -> Result<BumpBasis> {
    place_basis_with(k, n, opts, Execution::default())
}

pub fn place_basis_with(k: &StructuredSet, n: usize, opts: &PlacementOptions, exec: Execution) -> Result<BumpBasis> {
    let windows = windows_for(k, n, opts.strategy, opts.window)?;
    for w in &windows {
        if !(w.0 < w.1) {
            return Err(invalid(format!("window [{}, {}] is empty", w.0, w.1)));
        }
        let probe = [w.0, 0.5 * (w.0 + w.1), w.1];
        for x in probe {
            if !k.contains(&[x])? {
                return Err(invalid(format!("window [{}, {}] is not contained in K", w.0, w.1)));
            }
        }
    }
    let h = opts.lattice_step.unwrap_or_else(|| auto_lattice(&windows));
    if !(h > 0.0) || h.log2().fract() != 0.0 {
        return Err(invalid(format!("lattice step {h} must be a power of two")));
    }
    let weight = Arc::new(WeightSequence::from_spec(&opts.weight)?);
    let bumps = map_slice(exec, &windows, |w| bump_for_window(&weight, *w, h));
    let mut elements = Vec::new();
    for b in bumps {
        let (phi, summary) = b?;
        match opts.strategy {
            Strategy::Windows => elements.push(BasisElement { summary, sample: phi }),
            Strategy::ModulatedSingleWindow => {
                for deg in 0..=n as u32 {
                    let mut s = phi.clone();
                    for (i, v) in s.values.iter_mut().enumerate() {
                        *v *= phi.coord(0, i).powi(deg as i32);
                    }
                    elements.push(BasisElement { summary: ElementSummary { modulation: deg, ..summary.clone() }, sample: s });
                }
            }
        }
    }
    for e in &elements {
        let (lo, hi) = e.summary.support;
        if lo < e.summary.window.0 || hi > e.summary.window.1 {
            return Err(Error::Invariant(format!("bump support [{lo}, {hi}] leaves its window")));
        }
        e.sample.check_support()?;
    }
    Ok(BumpBasis { n, strategy: opts.strategy, lattice_step: h, weight, elements })
}

/// Normalized bump `θ / ∫θ` centered on the lattice inside `w`.
fn bump_for_window(m: &Arc<WeightSequence>, w: (f64, f64), h: f64) -> Result<(SampledFunction, ElementSummary)> {
    let r_max = radius_for(w);
    let quarters = (r_max / (4.0 * h)).floor();
    if quarters < 1.0 {
        return Err(invalid(format!("lattice step {h} too coarse for window [{}, {}]", w.0, w.1)));
    }
    let r = 4.0 * h * quarters;
    let c = h * (0.5 * (w.0 + w.1) / h).round();
    let cut = build_cutoff(&BumpSpec { m: m.clone(), r, center: c, depth: None, grid_step: h })?;
    let mut theta = cut.theta;
    let c0 = h * theta.values.iter().sum::<f64>();
    for v in theta.values.iter_mut() {
        *v /= c0;
    }
    let support = (c - 0.5 * r, c + 0.5 * r);
    let margin = (w.1 - w.0) / 8.0;
    if support.0 < w.0 + margin - h || support.1 > w.1 - margin + h {
        return Err(Error::Invariant(format!("bump [{}, {}] violates the window margin", support.0, support.1)));
    }
    theta.support_box = vec![support];
    Ok((theta, ElementSummary { window: w, support, center: c, r, depth: cut.depth, modulation: 0 }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureCheck {
    pub gl_nodes: usize,
    /// `max |GL − Simpson| / ∫|x|^α|φ|` over all matrix entries.
    pub max_disagreement: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct MomentMatrix {
    /// `(N+1) × (#elements)`, entry `(α, i) = ∫ x^α φ_i`.
    pub g: Mat<TwoFloat>,
    pub check: QuadratureCheck,
}

fn profile(f: &SampledFunction) -> Profile<'_> {
    Profile { origin: f.grid.origin[0], step: f.grid.step, hi: &f.values, lo: f.values_lo.as_deref() }
}

pub fn moment_matrix(basis: &BumpBasis, n: usize) -> Result<MomentMatrix> {
    moment_matrix_with(basis, n, Execution::default())
}

pub fn moment_matrix_with(basis: &BumpBasis, n: usize, exec: Execution) -> Result<MomentMatrix> {
    let rule = GaussLegendre::for_degree(n)?;
    let cols = map_slice(exec, &basis.elements, |e| {
        let p = profile(&e.sample);
        let gl = gl_moments(&p, n, &rule);
        let scale = abs_moments(&p, n, &rule);
        let worst = (0..=n)
            .map(|a| {
                let s = simpson_moment(&p, a as u32, 1e-14);
                let g = gl[a].hi() + gl[a].lo();
                (g - s).abs() / scale[a].max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max);
        (gl, worst)
    });
    let worst = cols.iter().map(|c| c.1).fold(0.0, f64::max);
    let g = Mat::from_fn(n + 1, cols.len(), |a, i| cols[i].0[a]);
    let check = QuadratureCheck { gl_nodes: rule.nodes.len(), max_disagreement: worst, passed: worst <= QUAD_AGREEMENT };
    if !check.passed {
        return Err(Error::Numerical(format!("quadrature cross-validation failed: {worst:e} > {QUAD_AGREEMENT:e}")));
    }
    Ok(MomentMatrix { g, check })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub alpha: usize,
    pub target: f64,
    pub achieved: f64,
    pub abs_error: f64,
    /// Relative to the target when it is nonzero, otherwise absolute.
    pub error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub n: usize,
    pub strategy: Strategy,
    pub coefficients: Vec<f64>,
    /// Low words of the double-double coefficients.
    pub coefficients_lo: Vec<f64>,
    pub residuals: Vec<ResidualRow>,
    pub max_residual: f64,
    pub condition_estimate: f64,
    pub quadrature: QuadratureCheck,
    pub lattice_step: f64,
    pub basis_summary: Vec<ElementSummary>,
}

/// Coefficients of the minimum-norm solution, in double-double.
pub fn solve_coefficients(g: &MomentMatrix, targets: &[f64]) -> Result<(Vec<TwoFloat>, f64)> {
    let solver = MinNormSolver::new(&g.g)?;
    let c: Vec<TwoFloat> = targets.iter().map(|v| TwoFloat::from(*v)).collect();
    Ok((solver.solve(&c)?, solver.condition_estimate()))
}

/// `f = ∑ λ_i x^{k_i} φ_i` on the union lattice, with double-double samples.
pub fn synth(basis: &BumpBasis, coefficients: &[TwoFloat]) -> Result<SampledFunction> {
    synth_with(basis, coefficients, Execution::default())
}

pub fn synth_with(basis: &BumpBasis, coefficients: &[TwoFloat], exec: Execution) -> Result<SampledFunction> {
    if coefficients.len() != basis.elements.len() {
        return Err(invalid(format!("{} coefficients for {} elements", coefficients.len(), basis.elements.len())));
    }
    let h = basis.lattice_step;
    let starts: Vec<i64> = basis.elements.iter().map(|e| (e.sample.grid.origin[0] / h).round() as i64).collect();
    let lo = *starts.iter().min().ok_or_else(|| invalid("empty basis"))?;
    let hi = basis.elements.iter().zip(&starts).map(|(e, s)| s + e.sample.len() as i64).max().unwrap_or(lo);
    let len = (hi - lo) as usize;
    let vals: Vec<TwoFloat> = map_range(exec, len, |i| {
        let gi = lo + i as i64;
        let mut acc = TwoFloat::from(0.0);
        for ((e, s), c) in basis.elements.iter().zip(&starts).zip(coefficients) {
            let k = gi - s;
            if k >= 0 && (k as usize) < e.sample.len() {
                let v = e.sample.values[k as usize];
                if v != 0.0 {
                    acc += *c * v;
                }
            }
        }
        acc
    });
    let support_lo = basis.elements.iter().map(|e| e.summary.support.0).fold(f64::INFINITY, f64::min);
    let support_hi = basis.elements.iter().map(|e| e.summary.support.1).fold(f64::NEG_INFINITY, f64::max);
    let f = SampledFunction {
        dim: 1,
        grid: Grid { origin: vec![lo as f64 * h], step: h, extents: vec![len] },
        values: vals.iter().map(|v| v.hi()).collect(),
        values_lo: Some(vals.iter().map(|v| v.lo()).collect()),
        support_box: vec![(support_lo, support_hi)],
    };
    // supp f ⊆ ∪ supports ⊆ K
    for (i, v) in f.values.iter().enumerate() {
        if *v != 0.0 {
            let x = f.coord(0, i);
            if !basis.elements.iter().any(|e| x >= e.summary.support.0 && x <= e.summary.support.1) {
                return Err(Error::Invariant(format!("synthesized function is nonzero at {x} outside every bump")));
            }
        }
    }
    Ok(f)
}

/// Independent re-quadrature of `f` against the targets.
pub fn residuals(f: &SampledFunction, targets: &[f64]) -> Result<Vec<ResidualRow>> {
    let n = targets.len().saturating_sub(1);
    let rule = GaussLegendre::for_degree(n)?;
    let m = gl_moments(&profile(f), n, &rule);
    Ok(targets
        .iter()
        .enumerate()
        .map(|(a, t)| {
            let diff = m[a] - TwoFloat::from(*t);
            let abs_error = (diff.hi() + diff.lo()).abs();
            let (error, passed) = if *t != 0.0 {
                let e = abs_error / t.abs();
                (e, e <= FIDELITY_REL)
            } else {
                (abs_error, abs_error <= FIDELITY_ABS)
            };
            ResidualRow { alpha: a, target: *t, achieved: m[a].hi() + m[a].lo(), abs_error, error, passed }
        })
        .collect())
}

pub struct Solution {
    pub report: SolveReport,
    pub function: SampledFunction,
    pub coefficients: Vec<TwoFloat>,
}

pub fn solve(basis: &BumpBasis, targets: &MomentTargets) -> Result<Solution> {
    let c = targets.to_vec()?;
    if targets.n != basis.n {
        return Err(invalid(format!("targets go to N = {} but the basis was placed for N = {}", targets.n, basis.n)));
    }
    let g = moment_matrix(basis, targets.n)?;
    solve_with_matrix(basis, &g, &c)
}

pub fn solve_with_matrix(basis: &BumpBasis, g: &MomentMatrix, c: &[f64]) -> Result<Solution> {
    let (lambda, cond) = solve_coefficients(g, c)?;
    let f = synth(basis, &lambda)?;
    let rows = residuals(&f, c)?;
    let max_residual = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    let report = SolveReport {
        n: c.len() - 1,
        strategy: basis.strategy,
        coefficients: lambda.iter().map(|v| v.hi() + v.lo()).collect(),
        coefficients_lo: lambda.iter().map(|v| v.lo()).collect(),
        residuals: rows,
        max_residual,
        condition_estimate: cond,
        quadrature: g.check.clone(),
        lattice_step: basis.lattice_step,
        basis_summary: basis.summary(),
    };
    if report.residuals.iter().any(|r| !r.passed) {
        return Err(Error::Invariant(format!("moment fidelity failed: max residual {max_residual:e}")));
    }
    Ok(Solution { report, function: f, coefficients: lambda })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearityCheck {
    /// `max |λ(c) + λ(c') − λ(c + c')| / max(1, max |λ(c + c')|)`.
    pub max_deviation: f64,
    pub passed: bool,
}

pub fn linearity_check(g: &MomentMatrix, c1: &[f64], c2: &[f64]) -> Result<LinearityCheck> {
    let sum: Vec<f64> = c1.iter().zip(c2).map(|(a, b)| a + b).collect();
    let (l1, _) = solve_coefficients(g, c1)?;
    let (l2, _) = solve_coefficients(g, c2)?;
    let (l12, _) = solve_coefficients(g, &sum)?;
    let scale = l12.iter().map(|v| v.hi().abs()).fold(1.0, f64::max);
    let dev = l1
        .iter()
        .zip(&l2)
        .zip(&l12)
        .map(|((a, b), s)| {
            let d = *a + *b - *s;
            (d.hi() + d.lo()).abs()
        })
        .fold(0.0, f64::max)
        / scale;
    Ok(LinearityCheck { max_deviation: dev, passed: dev <= LINEARITY_TOL })
}

/// Bump weight for a space: Gevrey(σ) for `S^σ`, `M` itself for general `M`,
/// and Gevrey(2) for Schwartz, whose compactly supported bumps need some
/// non-quasianalytic class.
pub fn weight_for_space(space: &SpaceSpec) -> WeightSpec {
    match space {
        SpaceSpec::Schwartz => WeightSpec::Gevrey { sigma: 2.0, horizon: None },
        SpaceSpec::GevreySigma(s) => WeightSpec::Gevrey { sigma: *s, horizon: None },
        SpaceSpec::GeneralM(m) => m.spec().clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub condition_estimate: f64,
    pub max_residual: f64,
    pub lattice_step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub space: String,
    pub rows: Vec<SweepRow>,
}

/// Windows basis and `δ_{α,0}` targets for each `N`.
pub fn conditioning_sweep(family: &SequenceFamily, space: &SpaceSpec, n_list: &[usize]) -> Result<SweepTable> {
    let k = StructuredSet::interval_union(family.clone(), 1)?;
    let opts = PlacementOptions { weight: weight_for_space(space), ..PlacementOptions::new(Strategy::Windows) };
    let mut rows = Vec::new();
    for &n in n_list {
        let basis = place_basis(&k, n, &opts)?;
        let sol = solve(&basis, &MomentTargets::delta(n))?;
        rows.push(SweepRow {
            n,
            condition_estimate: sol.report.condition_estimate,
            max_residual: sol.report.max_residual,
            lattice_step: basis.lattice_step,
        });
    }
    Ok(SweepTable { space: space.to_string(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn modulated_half_line_placement() {
        let k = StructuredSet::half_line(0.0);
        let b = place_basis(&k, 3, &PlacementOptions::new(Strategy::ModulatedSingleWindow)).unwrap();
        assert_eq!(b.elements.len(), 4);
        for e in &b.elements {
            assert!(e.summary.support.0 >= 1.125 && e.summary.support.1 <= 1.875);
        }
    }

    #[test]
    fn kab_windows_and_normalization() {
        let fam = SequenceFamily::new("j", "1/2", &[]).unwrap();
        let k = StructuredSet::interval_union(fam, 1).unwrap();
        let b = place_basis(&k, 2, &PlacementOptions::new(Strategy::Windows)).unwrap();
        let w: Vec<_> = b.elements.iter().map(|e| e.summary.window).collect();
        assert_eq!(w, vec![(1.0, 1.5), (2.0, 2.5), (3.0, 3.5)]);
        let g = moment_matrix(&b, 2).unwrap();
        for i in 0..3 {
            assert!((g.g.get(0, i) - 1.0).abs().hi() < 1e-14);
            // symmetric about the center
            let c = b.elements[i].summary.center;
            let d = g.g.get(1, i) - g.g.get(0, i) * c;
            assert!(d.abs().hi() < 1e-14, "{d:?}");
        }
        let bad = SequenceFamily::new("j", "1", &[]).unwrap();
        assert!(StructuredSet::interval_union(bad, 1).and_then(|k| place_basis(&k, 2, &PlacementOptions::new(Strategy::Windows))).is_err());
    }

    #[test]
    fn trivial_solves() {
        let k = StructuredSet::half_line(0.0);
        let b = place_basis(&k, 0, &PlacementOptions::new(Strategy::Windows)).unwrap();
        let s = solve(&b, &MomentTargets::from_vec(&[2.0])).unwrap();
        assert_relative_eq!(s.report.coefficients[0], 2.0, max_relative = 1e-14);
        assert_eq!(s.report.condition_estimate, 1.0);
        let z = solve(&b, &MomentTargets::from_vec(&[0.0])).unwrap();
        assert_eq!(z.report.coefficients, vec![0.0]);
        assert!(z.function.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn targets_json() {
        let t: MomentTargets = serde_json::from_str(r#"{"dim":1,"N":3,"values":{"0":1.0,"1":0.0,"2":2.0,"3":0.0}}"#).unwrap();
        assert_eq!(t.to_vec().unwrap(), vec![1.0, 0.0, 2.0, 0.0]);
        let bad: MomentTargets = serde_json::from_str(r#"{"dim":1,"N":2,"values":{"0":1.0,"2":2.0}}"#).unwrap();
        assert!(bad.to_vec().is_err());
    }
}
