//! Weight sequences `M = (M_p)` and their associated functions.
//!
//! Values are held as `ln M_p`. Everything downstream (`ν_M`, `ω_{M*}`, the
//! condition checks) works on logs, so Gevrey sequences stay usable far past
//! the point where `p!^σ` overflows.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::expr::{Env, Expr};
use crate::trend::{linear_fit, SLOPE_THRESHOLD};

/// Smallest allowed horizon.
pub const MIN_HORIZON: usize = 16;
pub const DEFAULT_HORIZON: usize = 256;

/// Past the horizon, closed-form generators are scanned at most this far.
const SCAN_LIMIT: u64 = 1 << 22;

/// JSON description of a weight sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Gevrey {
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
    },
    Table {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        extension: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
    },
    Expression {
        formula: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
    },
}

#[derive(Clone, Debug)]
enum Generator {
    Gevrey(f64),
    Table { log_values: Vec<f64>, extension: Option<Expr> },
    Expression(Expr),
}

/// A weight sequence with `ln M_0 ..= ln M_horizon` materialized eagerly.
#[derive(Clone, Debug)]
pub struct WeightSequence {
    spec: WeightSpec,
    generator: Generator,
    horizon: usize,
    log_m: Vec<f64>,
    log_fact: Vec<f64>,
}

/// `ln p!`, exact summation for small `p`.
pub fn ln_factorial(p: u64) -> f64 {
    if p < 2 {
        0.0
    } else if p <= 256 {
        (2..=p).map(|k| (k as f64).ln()).sum()
    } else {
        ln_gamma(p as f64 + 1.0)
    }
}

impl WeightSequence {
    pub fn gevrey(sigma: f64) -> Result<Self> {
        Self::from_spec(&WeightSpec::Gevrey { sigma, horizon: None })
    }

    pub fn expression(formula: &str, horizon: usize) -> Result<Self> {
        Self::from_spec(&WeightSpec::Expression { formula: formula.into(), horizon: Some(horizon) })
    }

    pub fn from_spec(spec: &WeightSpec) -> Result<Self> {
        let (generator, horizon) = match spec {
            WeightSpec::Gevrey { sigma, horizon } => {
                if !(*sigma > 0.0) || !sigma.is_finite() {
                    return Err(invalid(format!("Gevrey sigma must be positive, got {sigma}")));
                }
                (Generator::Gevrey(*sigma), horizon.unwrap_or(DEFAULT_HORIZON))
            }
            WeightSpec::Table { values, extension, horizon } => {
                if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return Err(invalid("table values must be positive and finite"));
                }
                let extension = extension.as_deref().map(Expr::parse).transpose()?;
                let h = match (&extension, horizon) {
                    (_, Some(h)) => *h,
                    (None, None) => values.len().saturating_sub(1),
                    (Some(_), None) => DEFAULT_HORIZON.max(values.len().saturating_sub(1)),
                };
                if extension.is_none() && h + 1 > values.len() {
                    return Err(invalid(format!(
                        "table has {} values but horizon {h} needs {} and no extension is given",
                        values.len(),
                        h + 1
                    )));
                }
                let log_values = values.iter().map(|v| v.ln()).collect();
                (Generator::Table { log_values, extension }, h)
            }
            WeightSpec::Expression { formula, horizon } => {
                let e = Expr::parse(formula)?;
                if let Some(bad) = e.identifiers().into_iter().find(|v| v != "p" && v != "e" && v != "pi") {
                    return Err(invalid(format!("weight formula uses unknown identifier `{bad}`")));
                }
                (Generator::Expression(e), horizon.unwrap_or(DEFAULT_HORIZON))
            }
        };
        if horizon < MIN_HORIZON {
            return Err(invalid(format!("horizon {horizon} below minimum {MIN_HORIZON}")));
        }
        let log_fact: Vec<f64> = (0..=horizon as u64).map(ln_factorial).collect();
        let mut ws = WeightSequence { spec: spec.clone(), generator, horizon, log_m: Vec::new(), log_fact };
        let mut log_m = Vec::with_capacity(horizon + 1);
        for p in 0..=horizon as u64 {
            let v = ws.generate(p)?;
            log_m.push(v);
        }
        ws.log_m = log_m;
        if ws.log_m[0].abs() > 1e-12 {
            return Err(invalid(format!("M_0 must equal 1, got {}", ws.log_m[0].exp())));
        }
        if ws.log_m[1] < -1e-12 {
            return Err(invalid(format!("M_1 must be at least 1, got {}", ws.log_m[1].exp())));
        }
        Ok(ws)
    }

    fn generate(&self, p: u64) -> Result<f64> {
        let v = match &self.generator {
            Generator::Gevrey(s) => s * self.ln_fact(p),
            Generator::Table { log_values, extension } => match log_values.get(p as usize) {
                Some(v) => *v,
                None => match extension {
                    Some(e) => positive_log(e, p)?,
                    None => return Err(Error::Horizon { index: p, horizon: self.horizon as u64 }),
                },
            },
            Generator::Expression(e) => positive_log(e, p)?,
        };
        if !v.is_finite() {
            return Err(invalid(format!("ln M_{p} is not finite")));
        }
        Ok(v)
    }

    fn ln_fact(&self, p: u64) -> f64 {
        match self.log_fact.get(p as usize) {
            Some(v) => *v,
            None => ln_factorial(p),
        }
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Gevrey exponent when the generator is `p!^σ`.
    pub fn gevrey_sigma(&self) -> Option<f64> {
        match self.generator {
            Generator::Gevrey(s) => Some(s),
            _ => None,
        }
    }

    /// Whether indices past the horizon can be generated.
    pub fn extends(&self) -> bool {
        !matches!(self.generator, Generator::Table { extension: None, .. })
    }

    /// `ln M_p`.
    pub fn log_value(&self, p: u64) -> Result<f64> {
        match self.log_m.get(p as usize) {
            Some(v) => Ok(*v),
            None => self.generate(p),
        }
    }

    /// `M_p`, possibly `+inf` when it overflows `f64`.
    pub fn value(&self, p: u64) -> Result<f64> {
        Ok(self.log_value(p)?.exp())
    }

    /// `ln M*_p = ln(M_p / p!)`.
    pub fn log_star(&self, p: u64) -> Result<f64> {
        Ok(self.log_value(p)? - self.ln_fact(p))
    }

    fn scan_limit(&self) -> u64 {
        if self.extends() {
            SCAN_LIMIT.max(self.horizon as u64)
        } else {
            self.horizon as u64
        }
    }
}

fn positive_log(e: &Expr, p: u64) -> Result<f64> {
    let (sign, ln) = e.eval_ln(&Env::new("p", p as f64))?;
    if sign <= 0.0 {
        return Err(invalid(format!("weight formula `{e}` is not positive at p = {p}")));
    }
    Ok(ln)
}

/// Result of evaluating `ν_M(t) = inf_p t^p M_p / p!`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuEvaluation {
    pub t: f64,
    pub value: f64,
    /// `ln value`, finite even when `value` underflows.
    pub log_value: f64,
    pub argmin_p: u64,
    pub truncation_p: u64,
}

/// Evaluate `ν_M(t)`.
///
/// The term sequence is scanned until it has increased for 3 consecutive
/// indices past the running minimum. Gevrey sequences locate the valley by
/// bisection on the (monotone) log-difference of consecutive terms instead.
pub fn nu_eval(m: &WeightSequence, t: f64) -> Result<NuEvaluation> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("nu_eval needs finite t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(NuEvaluation { t, value: 0.0, log_value: f64::NEG_INFINITY, argmin_p: 0, truncation_p: 0 });
    }
    let lt = t.ln();
    let term = |p: u64| -> Result<f64> { Ok(p as f64 * lt + m.log_star(p)?) };
    let argmin = match m.gevrey_sigma() {
        Some(sigma) => gevrey_argmin(sigma, lt)?,
        None => {
            let limit = m.scan_limit();
            let mut best_p = 0u64;
            let mut best = term(0)?;
            let mut prev = best;
            let mut rising = 0u32;
            let mut p = 1u64;
            loop {
                if p > limit {
                    return Err(Error::Truncation(limit));
                }
                let v = term(p)?;
                if v < best {
                    best = v;
                    best_p = p;
                    rising = 0;
                } else if v > prev {
                    rising += 1;
                } else {
                    rising = 0;
                }
                prev = v;
                if rising >= 3 && p >= best_p + 3 {
                    break;
                }
                p += 1;
            }
            best_p
        }
    };
    let log_value = term(argmin)?;
    Ok(NuEvaluation { t, value: log_value.exp(), log_value, argmin_p: argmin, truncation_p: argmin + 3 })
}

// Consecutive Gevrey terms differ by D_p = ln t + (σ-1) ln(p+1); the minimiser
// is the first p with D_p >= 0.
fn gevrey_argmin(sigma: f64, lt: f64) -> Result<u64> {
    let d = |p: u64| lt + (sigma - 1.0) * ((p + 1) as f64).ln();
    if d(0) >= 0.0 {
        return Ok(0);
    }
    if sigma <= 1.0 {
        return Err(Error::Truncation(u64::MAX));
    }
    let guess = (-lt / (sigma - 1.0)).exp() - 1.0;
    if !(guess < 1e15) {
        return Err(Error::Truncation(1_000_000_000_000_000));
    }
    let mut p = guess.ceil().max(0.0) as u64;
    while p > 0 && d(p - 1) >= 0.0 {
        p -= 1;
    }
    while d(p) < 0.0 {
        p += 1;
    }
    Ok(p)
}

/// `ω_{M*}(ρ) = sup_p ln(ρ^p / M*_p)`, by its own scan (stop after 3
/// consecutive decreases past the running max).
pub fn omega_star(m: &WeightSequence, rho: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(invalid(format!("omega_star needs rho > 0, got {rho}")));
    }
    let lr = rho.ln();
    let limit = m.scan_limit();
    let mut best = 0.0f64;
    let mut best_p = 0u64;
    let mut prev = 0.0f64;
    let mut falling = 0u32;
    let mut p = 1u64;
    loop {
        if p > limit {
            return Err(Error::Truncation(limit));
        }
        let v = p as f64 * lr - m.log_star(p)?;
        if v > best {
            best = v;
            best_p = p;
            falling = 0;
        } else if v < prev {
            falling += 1;
        } else {
            falling = 0;
        }
        prev = v;
        if falling >= 3 && p >= best_p + 3 {
            return Ok(best);
        }
        p += 1;
    }
}

/// Least `t` with `ν_M(t) = 1`, i.e. `exp(max_{p>=1} -ln M*_p / p)`.
pub fn nu_threshold(m: &WeightSequence) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for p in 1..=m.horizon() as u64 {
        best = best.max(-m.log_star(p)? / p as f64);
    }
    Ok(best.exp())
}

/// Solve `ν_M(t) = y` for `t`, returning the least solution when `y = 1`.
pub fn nu_invert(m: &WeightSequence, y: f64) -> Result<f64> {
    if !(y > 0.0 && y <= 1.0) {
        return Err(invalid(format!("nu_invert needs y in (0, 1], got {y}")));
    }
    let t_star = nu_threshold(m)?;
    if y == 1.0 {
        return Ok(t_star);
    }
    let ly = y.ln();
    let hi_eval = nu_eval(m, t_star)?;
    if hi_eval.log_value < ly {
        return Err(invalid(format!("y = {y} exceeds nu_M on the bracket")));
    }
    // Lower bracket by repeated halving in log space, floored at 1e-300.
    let floor = 1e-300f64.ln();
    let mut lo = t_star.ln() - 1.0;
    let mut step = 1.0;
    loop {
        let v = nu_eval(m, lo.exp())?;
        if v.log_value <= ly {
            break;
        }
        step *= 2.0;
        lo = (t_star.ln() - step).max(floor);
        if lo == floor {
            let v = nu_eval(m, lo.exp())?;
            if v.log_value > ly {
                return Err(invalid(format!("y = {y} lies below nu_M(1e-300)")));
            }
            break;
        }
    }
    let mut hi = t_star.ln();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = nu_eval(m, mid.exp())?;
        if v.log_value < ly {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    // On the final piece ν is a single monomial t^p M*_p; invert it exactly.
    let mut best_t = hi.exp();
    let mut best_err = (nu_eval(m, best_t)?.log_value - ly).abs();
    for cand in [lo, hi] {
        let p = nu_eval(m, cand.exp())?.argmin_p;
        if p == 0 {
            continue;
        }
        let t = ((ly - m.log_star(p)?) / p as f64).exp();
        let err = (nu_eval(m, t)?.log_value - ly).abs();
        if err < best_err {
            best_err = err;
            best_t = t;
        }
    }
    Ok(best_t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    LogConvex,
    NonQuasianalytic,
    M2,
    M3,
}

/// One inequality instance; `lhs`/`rhs` are natural logs of both sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub p: u64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub holds: bool,
    pub fitted_constant: Option<f64>,
    /// Tightest instances found, logs of both sides, constant included.
    pub evidence: Vec<Evidence>,
    /// Highest index checked. Verdicts are finite-horizon verdicts.
    pub checked_to: u64,
    /// Fitted constant at three quarters of the horizon, for the stability test.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant_at_three_quarters: Option<f64>,
    /// `(p, sum_{q<=p} M_{q-1}/M_q)` at powers of two.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub partial_sums: Vec<(u64, f64)>,
    pub note: String,
}

/// Allowed relative growth of a fitted constant across the last quartile.
const STABILITY_TOLERANCE: f64 = 0.05;
/// Exponent margin of the convergent reference series `p^{-1-δ}`.
const NQA_DELTA: f64 = 0.1;

fn tightest(mut ev: Vec<Evidence>, keep: usize) -> Vec<Evidence> {
    ev.sort_by(|a, b| (a.rhs - a.lhs).total_cmp(&(b.rhs - b.lhs)).then(a.p.cmp(&b.p)));
    ev.truncate(keep);
    ev
}

pub fn check_condition(m: &WeightSequence, which: Condition, p_max: usize) -> Result<ConditionReport> {
    if p_max < 4 {
        return Err(Error::InsufficientEvidence(format!("P = {p_max} < 4")));
    }
    if p_max > m.horizon() {
        return Err(Error::Horizon { index: p_max as u64, horizon: m.horizon() as u64 });
    }
    let l = |p: usize| m.log_m[p];
    let big_p = p_max as u64;
    let q3 = (3 * p_max) / 4;
    match which {
        Condition::LogConvex => {
            let mut ev = Vec::new();
            let mut holds = true;
            for p in 1..p_max {
                let lhs = 2.0 * l(p);
                let rhs = l(p - 1) + l(p + 1);
                if lhs > rhs + 1e-12 * (1.0 + lhs.abs()) {
                    holds = false;
                }
                ev.push(Evidence { p: p as u64, lhs, rhs });
            }
            Ok(ConditionReport {
                condition: which,
                holds,
                fitted_constant: None,
                evidence: tightest(ev, 3),
                checked_to: big_p,
                constant_at_three_quarters: None,
                partial_sums: Vec::new(),
                note: "M_p^2 <= M_{p-1} M_{p+1} for 1 <= p < P".into(),
            })
        }
        Condition::M2 => {
            // ln C_n = max_k (L_n - L_k - L_{n-k}) / n; C is the running max.
            let fit_to = |top: usize| -> (f64, Evidence) {
                let mut best = 0.0f64;
                let mut at = Evidence { p: 0, lhs: 0.0, rhs: 0.0 };
                for n in 2..=top {
                    for k in 1..n {
                        let c = (l(n) - l(k) - l(n - k)) / n as f64;
                        if c > best {
                            best = c;
                            at = Evidence { p: n as u64, lhs: l(n), rhs: 0.0 };
                        }
                    }
                }
                (best, at)
            };
            let (lc, _) = fit_to(p_max);
            let (lc3, _) = fit_to(q3);
            let mut ev = Vec::new();
            for n in 2..=p_max {
                for k in 1..n {
                    ev.push(Evidence {
                        p: n as u64,
                        lhs: l(n),
                        rhs: n as f64 * lc + l(k) + l(n - k),
                    });
                }
            }
            let stable = lc - lc3 <= STABILITY_TOLERANCE.ln_1p();
            Ok(ConditionReport {
                condition: which,
                holds: stable,
                fitted_constant: Some(lc.exp()),
                evidence: tightest(ev, 3),
                checked_to: big_p,
                constant_at_three_quarters: Some(lc3.exp()),
                partial_sums: Vec::new(),
                note: format!(
                    "M_{{p+q}} <= C^{{p+q}} M_p M_q for p+q <= P; stable if C grows by at most {}% over the last quartile",
                    STABILITY_TOLERANCE * 100.0
                ),
            })
        }
        Condition::M3 => {
            let nqa = check_condition(m, Condition::NonQuasianalytic, p_max)?;
            let tail_top = |top: usize| -> u64 {
                let t = (8 * top) as u64;
                if m.extends() {
                    t.max(m.horizon() as u64)
                } else {
                    m.horizon() as u64
                }
            };
            let fit_to = |top: usize| -> Result<(f64, Vec<Evidence>)> {
                let q_top = tail_top(top);
                let ratios: Vec<f64> = (1..=q_top)
                    .map(|q| Ok(m.log_value(q - 1)? - m.log_value(q)?))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .map(f64::exp)
                    .collect();
                // suffix sums of M_{q-1}/M_q for q = p+1 ..= q_top
                let mut suffix = vec![0.0f64; q_top as usize + 2];
                for q in (1..=q_top as usize).rev() {
                    suffix[q] = suffix[q + 1] + ratios[q - 1];
                }
                let mut best = f64::NEG_INFINITY;
                let mut ev = Vec::new();
                for p in 1..=top {
                    let lhs = suffix[p + 1].ln();
                    let rhs = (p as f64).ln() + l(p) - m.log_value(p as u64 + 1)?;
                    best = best.max(lhs - rhs);
                    ev.push(Evidence { p: p as u64, lhs, rhs });
                }
                Ok((best, ev))
            };
            let (lc, ev) = fit_to(p_max)?;
            let (lc3, _) = fit_to(q3)?;
            let ev = ev.into_iter().map(|e| Evidence { rhs: e.rhs + lc, ..e }).collect();
            let stable = lc - lc3 <= STABILITY_TOLERANCE.ln_1p();
            Ok(ConditionReport {
                condition: which,
                holds: stable && nqa.holds,
                fitted_constant: Some(lc.exp()),
                evidence: tightest(ev, 3),
                checked_to: big_p,
                constant_at_three_quarters: Some(lc3.exp()),
                partial_sums: nqa.partial_sums,
                note: format!(
                    "tail sums to q = {}; stable if C grows by at most {}% over the last quartile; requires the non-quasianalyticity test to pass",
                    tail_top(p_max),
                    STABILITY_TOLERANCE * 100.0
                ),
            })
        }
        Condition::NonQuasianalytic => {
            let mut sum = 0.0;
            let mut partial = Vec::new();
            let mut scaled = Vec::with_capacity(p_max);
            let mut ev = Vec::new();
            for p in 1..=p_max {
                let lr = l(p - 1) - l(p);
                sum += lr.exp();
                if p.is_power_of_two() || p == p_max {
                    partial.push((p as u64, sum));
                }
                // ℓ_p against the convergent reference p^{-1-δ}
                let s = lr + (1.0 + NQA_DELTA) * (p as f64).ln();
                scaled.push(s);
                ev.push(Evidence { p: p as u64, lhs: lr, rhs: -(1.0 + NQA_DELTA) * (p as f64).ln() });
            }
            let head = scaled[..q3].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let tail = scaled[q3..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let holds = tail <= head + 1e-12;
            Ok(ConditionReport {
                condition: which,
                holds,
                fitted_constant: Some(head.max(tail).exp()),
                evidence: tightest(ev, 3),
                checked_to: big_p,
                constant_at_three_quarters: None,
                partial_sums: partial,
                note: format!(
                    "ratio test: M_{{p-1}}/M_p * p^{} must not grow over the last quartile (heuristic)",
                    1.0 + NQA_DELTA
                ),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelationMode {
    Subset,
    StrictlySmaller,
    Equivalent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriState {
    Yes,
    No,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub mode: RelationMode,
    pub result: TriState,
    /// `ln (N_p/M_p)^{1/p}` for `p = 1..=P`.
    pub log_statistic: Vec<f64>,
    /// Slope of the statistic against `ln p` over the last quartile.
    pub slope: f64,
    pub checked_to: u64,
}

fn ratio_stat(n: &WeightSequence, m: &WeightSequence, p_max: usize) -> Result<Vec<f64>> {
    (1..=p_max as u64)
        .map(|p| Ok((n.log_value(p)? - m.log_value(p)?) / p as f64))
        .collect()
}

fn last_quartile_slope(stat: &[f64]) -> (f64, usize) {
    let q3 = (3 * stat.len()) / 4;
    let x: Vec<f64> = (q3..stat.len()).map(|i| ((i + 1) as f64).ln()).collect();
    (linear_fit(&x, &stat[q3..]).0, q3)
}

fn subset_test(stat: &[f64]) -> (TriState, f64) {
    let (slope, q3) = last_quartile_slope(stat);
    let head = stat[..q3].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tail = stat[q3..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let r = if slope <= SLOPE_THRESHOLD && tail <= head + SLOPE_THRESHOLD {
        TriState::Yes
    } else if slope > SLOPE_THRESHOLD && tail > head {
        TriState::No
    } else {
        TriState::Inconclusive
    };
    (r, slope)
}

/// Compare two weight sequences through `(N_p/M_p)^{1/p}`, `p <= P`.
pub fn relation(n: &WeightSequence, m: &WeightSequence, mode: RelationMode, p_max: usize) -> Result<RelationReport> {
    if p_max < 8 {
        return Err(Error::InsufficientEvidence(format!("P = {p_max} < 8")));
    }
    for w in [n, m] {
        if p_max > w.horizon() && !w.extends() {
            return Err(Error::Horizon { index: p_max as u64, horizon: w.horizon() as u64 });
        }
    }
    let stat = ratio_stat(n, m, p_max)?;
    let (result, slope) = match mode {
        RelationMode::Subset => subset_test(&stat),
        RelationMode::StrictlySmaller => {
            let (slope, q3) = last_quartile_slope(&stat);
            let monotone = stat[q3..].windows(2).all(|w| w[1] < w[0]);
            let r = if slope < -SLOPE_THRESHOLD && monotone {
                TriState::Yes
            } else if slope >= -SLOPE_THRESHOLD / 2.0 && !monotone || slope > 0.0 {
                TriState::No
            } else if slope.abs() <= SLOPE_THRESHOLD / 10.0 {
                // flat: bounded away from zero
                TriState::No
            } else {
                TriState::Inconclusive
            };
            (r, slope)
        }
        RelationMode::Equivalent => {
            let (a, slope) = subset_test(&stat);
            let back = ratio_stat(m, n, p_max)?;
            let (b, _) = subset_test(&back);
            let r = match (a, b) {
                (TriState::Yes, TriState::Yes) => TriState::Yes,
                (TriState::No, _) | (_, TriState::No) => TriState::No,
                _ => TriState::Inconclusive,
            };
            (r, slope)
        }
    };
    Ok(RelationReport { mode, result, log_statistic: stat, slope, checked_to: p_max as u64 })
}

/// Empirical Gevrey envelope
/// `C0 e^{-H0 x} <= ν(t) <= C1 e^{-H1 x}` with `x = (1/t)^{1/(σ-1)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub sigma: f64,
    /// Least-squares slope and intercept of `-ln ν` against `x`.
    pub slope: f64,
    pub intercept: f64,
    pub correlation: f64,
    pub residual_rms: f64,
    pub h0: f64,
    pub c0: f64,
    pub h1: f64,
    pub c1: f64,
    /// Exponent of the best monomial fit of `-ln ν` against `1/t`.
    pub monomial_exponent: f64,
    pub points: usize,
}

/// Relative spread between the fitted slope and the envelope exponents.
const ENVELOPE_SPREAD: f64 = 0.05;
const ENVELOPE_MIN_CORRELATION: f64 = 0.99;

pub fn gevrey_envelope_fit(sigma: f64, grid: &[f64]) -> Result<EnvelopeFit> {
    if !(sigma > 1.0) {
        return Err(invalid(format!("envelope fit needs sigma > 1, got {sigma}")));
    }
    if grid.len() < 20 {
        return Err(invalid(format!("envelope grid has {} points, need 20", grid.len())));
    }
    if grid.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(invalid("envelope grid must lie in (0, 1]"));
    }
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(0.0, f64::max);
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(invalid("envelope grid must span two decades"));
    }
    let m = WeightSequence::gevrey(sigma)?;
    let inv = 1.0 / (sigma - 1.0);
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    for &t in grid {
        xs.push((1.0 / t).powf(inv));
        ys.push(-nu_eval(&m, t)?.log_value);
    }
    let (slope, intercept, correlation) = linear_fit(&xs, &ys);
    let residual_rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    if !(correlation >= ENVELOPE_MIN_CORRELATION) || !(slope > 0.0) {
        return Err(Error::Numerical(format!(
            "envelope shape violated: correlation {correlation}, slope {slope}"
        )));
    }
    let h0 = slope * (1.0 + ENVELOPE_SPREAD);
    let h1 = slope * (1.0 - ENVELOPE_SPREAD);
    let ln_c0 = xs.iter().zip(&ys).map(|(x, y)| h0 * x - y).fold(f64::INFINITY, f64::min);
    let ln_c1 = xs.iter().zip(&ys).map(|(x, y)| h1 * x - y).fold(f64::NEG_INFINITY, f64::max);
    let (mx, my): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .zip(&ys)
        .filter(|(_, y)| **y > 1.0)
        .map(|(t, y)| ((1.0 / t).ln(), y.ln()))
        .unzip();
    let monomial_exponent = if mx.len() >= 2 { linear_fit(&mx, &my).0 } else { f64::NAN };
    Ok(EnvelopeFit {
        sigma,
        slope,
        intercept,
        correlation,
        residual_rms,
        h0,
        c0: ln_c0.exp(),
        h1,
        c1: ln_c1.exp(),
        monomial_exponent,
        points: grid.len(),
    })
}

/// `ν(t) <= ν(Ct)^a` on the grid, smallest `C = 2^i` that works.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerScalingFit {
    pub a: f64,
    pub c: f64,
    pub worst_margin: f64,
}

pub fn scaling_power_fit(m: &WeightSequence, a: f64, grid: &[f64]) -> Result<Option<PowerScalingFit>> {
    let base: Vec<f64> = grid.iter().map(|&t| Ok(nu_eval(m, t)?.log_value)).collect::<Result<_>>()?;
    for i in 0..=40 {
        let c = 2f64.powi(i);
        let mut worst = f64::INFINITY;
        for (&t, &lv) in grid.iter().zip(&base) {
            let rhs = a * nu_eval(m, c * t)?.log_value;
            worst = worst.min(rhs - lv);
        }
        if worst >= -1e-12 {
            return Ok(Some(PowerScalingFit { a, c, worst_margin: worst }));
        }
    }
    Ok(None)
}

/// `ν(at)^{C0} <= C1 ν(t)` on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationFit {
    pub a: f64,
    pub c0: f64,
    pub c1: f64,
    /// Grid point where `C1` is attained.
    pub attained_at: f64,
}

/// Candidates for `C0`; the first whose supremum is attained away from the
/// small-`t` end of the grid wins.
const DILATION_C0: [f64; 12] = [1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 32.0];

pub fn scaling_dilation_fit(m: &WeightSequence, a: f64, grid: &[f64]) -> Result<Option<DilationFit>> {
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    let lv: Vec<f64> = g.iter().map(|&t| Ok(nu_eval(m, t)?.log_value)).collect::<Result<_>>()?;
    let lva: Vec<f64> = g.iter().map(|&t| Ok(nu_eval(m, a * t)?.log_value)).collect::<Result<_>>()?;
    let edge = (g.len() / 10).max(1);
    for c0 in DILATION_C0 {
        let mut best = f64::NEG_INFINITY;
        let mut at = 0;
        for i in 0..g.len() {
            let v = c0 * lva[i] - lv[i];
            if v > best {
                best = v;
                at = i;
            }
        }
        if at >= edge {
            return Ok(Some(DilationFit { a, c0, c1: best.exp().max(f64::MIN_POSITIVE), attained_at: g[at] }));
        }
    }
    Ok(None)
}

/// `ν(t) <= C t^a` on the grid.
pub fn decay_constant(m: &WeightSequence, a: f64, grid: &[f64]) -> Result<Option<f64>> {
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    let mut best = f64::NEG_INFINITY;
    let mut at = 0;
    for (i, &t) in g.iter().enumerate() {
        let v = nu_eval(m, t)?.log_value - a * t.ln();
        if v > best {
            best = v;
            at = i;
        }
    }
    // Supremum at the small-t edge means the bound is not yet established.
    if at < (g.len() / 10).max(1) {
        return Ok(None);
    }
    Ok(Some(best.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gevrey_values() {
        let g2 = WeightSequence::gevrey(2.0).unwrap();
        assert_eq!(g2.value(0).unwrap(), 1.0);
        assert!((g2.value(3).unwrap() - 36.0).abs() < 1e-12);
        let g15 = WeightSequence::gevrey(1.5).unwrap();
        assert!((g15.value(4).unwrap() - 24f64.powf(1.5)).abs() < 1e-10);
        // beyond the horizon the closed form keeps going
        let far = g2.log_value(1000).unwrap();
        assert!((far - 2.0 * ln_gamma(1001.0)).abs() < 1e-9 * far);
    }

    #[test]
    fn table_without_extension_stops_at_horizon() {
        let values: Vec<f64> = (0..20).map(|p| ln_factorial(p).exp().powi(2)).collect();
        let m = WeightSequence::from_spec(&WeightSpec::Table { values, extension: None, horizon: None }).unwrap();
        assert_eq!(m.horizon(), 19);
        assert!(matches!(m.value(25), Err(Error::Horizon { .. })));
        let short = WeightSpec::Table { values: vec![1.0; 5], extension: None, horizon: None };
        assert!(WeightSequence::from_spec(&short).is_err());
    }

    #[test]
    fn normalization_enforced() {
        assert!(WeightSequence::expression("2*p!", 32).is_err());
        assert!(WeightSequence::expression("p!^2 * 2^p", 32).is_ok());
        assert!(WeightSequence::expression("0.5^p", 32).is_err());
    }

    #[test]
    fn nu_examples() {
        let g2 = WeightSequence::gevrey(2.0).unwrap();
        assert_eq!(nu_eval(&g2, 0.0).unwrap().value, 0.0);
        let one = nu_eval(&g2, 1.0).unwrap();
        assert_eq!((one.value, one.argmin_p), (1.0, 0));
        let v = nu_eval(&g2, 0.1).unwrap();
        assert!([9, 10].contains(&v.argmin_p));
        // brute force min of 0.1^p p! over p <= 100
        let brute = (0..=100).map(|p| 0.1f64.powi(p) * ln_factorial(p as u64).exp()).fold(f64::INFINITY, f64::min);
        assert!((v.value - brute).abs() < 1e-12 * brute);
        assert!((v.value - 3.6288e-4).abs() < 1e-8);
    }

    #[test]
    fn generic_scan_matches_gevrey_closed_form() {
        let g = WeightSequence::gevrey(2.0).unwrap();
        let e = WeightSequence::expression("p!^2", 256).unwrap();
        for t in [1e-2, 0.05, 0.1, 0.37, 1.0] {
            let a = nu_eval(&g, t).unwrap();
            let b = nu_eval(&e, t).unwrap();
            assert!((a.log_value - b.log_value).abs() < 1e-9 * (1.0 + a.log_value.abs()), "t = {t}");
        }
    }

    #[test]
    fn omega_examples() {
        let g2 = WeightSequence::gevrey(2.0).unwrap();
        assert_eq!(omega_star(&g2, 1.0).unwrap(), 0.0);
        assert_eq!(omega_star(&g2, 0.5).unwrap(), 0.0);
        let w = omega_star(&g2, 10.0).unwrap();
        assert!((w + nu_eval(&g2, 0.1).unwrap().value.ln()).abs() < 1e-12);
        assert!((w - 7.921).abs() < 1e-3);
    }

    #[test]
    fn invert_examples() {
        let g2 = WeightSequence::gevrey(2.0).unwrap();
        assert_eq!(nu_invert(&g2, 1.0).unwrap(), 1.0);
        let t = nu_invert(&g2, 0.1).unwrap();
        assert!((nu_eval(&g2, t).unwrap().value - 0.1).abs() <= 1e-13);
        let g3 = WeightSequence::gevrey(3.0).unwrap();
        let t = nu_invert(&g3, 1.0 / 50.0).unwrap();
        assert!((nu_eval(&g3, t).unwrap().value - 0.02).abs() <= 1e-13);
        assert!(nu_invert(&g2, 0.0).is_err());
        assert!(nu_invert(&g2, 1.5).is_err());
    }

    #[test]
    fn condition_examples() {
        let g2 = WeightSequence::gevrey(2.0).unwrap();
        assert!(check_condition(&g2, Condition::LogConvex, 64).unwrap().holds);
        let m2 = check_condition(&g2, Condition::M2, 64).unwrap();
        assert!(m2.holds);
        assert!(m2.fitted_constant.unwrap() >= 2.0);
        assert!(check_condition(&g2, Condition::M3, 64).unwrap().holds);
        let fact = WeightSequence::expression("p!", 128).unwrap();
        assert!(!check_condition(&fact, Condition::NonQuasianalytic, 64).unwrap().holds);
        assert!(!check_condition(&fact, Condition::M3, 64).unwrap().holds);
        let fast = WeightSequence::expression("exp(p^2)", 128).unwrap();
        assert!(!check_condition(&fast, Condition::M2, 64).unwrap().holds);
        assert!(check_condition(&g2, Condition::M2, 3).is_err());
    }

    #[test]
    fn relation_examples() {
        let g2 = WeightSequence::gevrey(2.0).unwrap();
        let g3 = WeightSequence::gevrey(3.0).unwrap();
        let r = relation(&g2, &g3, RelationMode::StrictlySmaller, 64).unwrap();
        assert_eq!(r.result, TriState::Yes);
        assert_eq!(relation(&g2, &g2, RelationMode::Equivalent, 64).unwrap().result, TriState::Yes);
        assert_eq!(relation(&g3, &g2, RelationMode::Subset, 64).unwrap().result, TriState::No);
        assert_eq!(relation(&g2, &g2, RelationMode::StrictlySmaller, 64).unwrap().result, TriState::No);
    }
}
