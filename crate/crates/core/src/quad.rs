//! Quadrature of sampled functions.
//!
//! Samples are integrated as their piecewise-linear interpolant, cell by cell,
//! so a rule that is exact for polynomials of the cell's degree gives the
//! interpolant's moments exactly. Gauss–Legendre runs in double-double;
//! adaptive Simpson in `f64` serves as the independent cross-check.

use twofloat::TwoFloat;

use crate::error::{invalid, Result};
use crate::linalg::dd_div;

/// Gauss–Legendre rule on `[-1, 1]` with double-double nodes and weights.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<TwoFloat>,
    pub weights: Vec<TwoFloat>,
}

fn legendre_dd(n: usize, x: TwoFloat) -> (TwoFloat, TwoFloat) {
    let one = TwoFloat::from(1.0);
    let (mut p0, mut p1) = (one, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = (x * p1 * (2.0 * kf - 1.0) - p0 * (kf - 1.0)) / kf;
        p0 = p1;
        p1 = p2;
    }
    // derivative from the standard identity
    let dp = dd_div((x * p1 - p0) * (n as f64), x * x - 1.0);
    (p1, dp)
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("Gauss-Legendre needs at least one node"));
        }
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 1..=n {
            let guess = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut x = TwoFloat::from(guess);
            for _ in 0..30 {
                let (p, dp) = legendre_dd(n, x);
                let dx = dd_div(p, dp);
                x -= dx;
                if dx.hi().abs() < 1e-33 {
                    break;
                }
            }
            let (_, dp) = legendre_dd(n, x);
            let w = dd_div(TwoFloat::from(2.0), (TwoFloat::from(1.0) - x * x) * dp * dp);
            nodes.push(x);
            weights.push(w);
        }
        Ok(GaussLegendre { nodes, weights })
    }

    /// Points needed to integrate `x^max_power` times a linear function exactly.
    pub fn for_degree(max_power: usize) -> Result<Self> {
        GaussLegendre::new(max_power / 2 + 2)
    }
}

/// A piecewise-linear profile on the uniform grid `origin + i*step`.
/// `lo` carries optional double-double low parts of the samples.
#[derive(Clone, Copy, Debug)]
pub struct Profile<'a> {
    pub origin: f64,
    pub step: f64,
    pub hi: &'a [f64],
    pub lo: Option<&'a [f64]>,
}

impl Profile<'_> {
    fn value(&self, i: usize) -> TwoFloat {
        match self.lo {
            Some(lo) => TwoFloat::new_add(self.hi[i], lo[i]),
            None => TwoFloat::from(self.hi[i]),
        }
    }

    fn node(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step
    }
}

/// `∫ x^α f(x) dx` for `α = 0..=max_power`, in double-double.
pub fn gl_moments(f: &Profile<'_>, max_power: usize, rule: &GaussLegendre) -> Vec<TwoFloat> {
    let mut acc = vec![TwoFloat::from(0.0); max_power + 1];
    let n = f.hi.len();
    let half = TwoFloat::from(0.5 * f.step);
    for c in 0..n.saturating_sub(1) {
        let (v0, v1) = (f.value(c), f.value(c + 1));
        if v0.hi() == 0.0 && v1.hi() == 0.0 {
            continue;
        }
        let mid = TwoFloat::new_add(f.node(c), 0.5 * f.step);
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            let x = mid + half * *t;
            let s = (*t + 1.0) * 0.5;
            let fx = v0 + (v1 - v0) * s;
            let mut xp = *w * half * fx;
            for a in acc.iter_mut() {
                *a += xp;
                xp *= x;
            }
        }
    }
    acc
}

/// `∫ |x|^α |f(x)| dx`, the scale against which moment errors are judged.
pub fn abs_moments(f: &Profile<'_>, max_power: usize, rule: &GaussLegendre) -> Vec<f64> {
    let mut acc = vec![0.0; max_power + 1];
    let n = f.hi.len();
    let half = 0.5 * f.step;
    for c in 0..n.saturating_sub(1) {
        let (v0, v1) = (f.hi[c].abs(), f.hi[c + 1].abs());
        if v0 == 0.0 && v1 == 0.0 {
            continue;
        }
        let mid = f.node(c) + half;
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            let (t, w) = (t.hi(), w.hi());
            let x = (mid + half * t).abs();
            let mut xp = w * half * (v0 + (v1 - v0) * (t + 1.0) * 0.5);
            for a in acc.iter_mut() {
                *a += xp;
                xp *= x;
            }
        }
    }
    acc
}

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `∫ x^α f(x) dx` by adaptive Simpson on each cell, in `f64`.
pub fn simpson_moment(f: &Profile<'_>, alpha: u32, rel_tol: f64) -> f64 {
    let n = f.hi.len();
    let mut total = 0.0;
    for c in 0..n.saturating_sub(1) {
        let (v0, v1) = (f.hi[c], f.hi[c + 1]);
        if v0 == 0.0 && v1 == 0.0 {
            continue;
        }
        let (a, b) = (f.node(c), f.node(c + 1));
        let h = b - a;
        let g = |x: f64| x.powi(alpha as i32) * (v0 + (v1 - v0) * (x - a) / h);
        let scale = a.abs().max(b.abs()).powi(alpha as i32) * v0.abs().max(v1.abs()) * h;
        total += adaptive_simpson(&g, a, b, rel_tol * scale.max(f64::MIN_POSITIVE));
    }
    total
}
