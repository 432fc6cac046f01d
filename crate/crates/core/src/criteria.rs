//! Solvability decision procedures for structured sets.
//!
//! Every numeric verdict is a finite-horizon classification: a statistic is
//! sampled along declared schedules and classified by [`crate::trend`]. For
//! built-in `K_{a,b}` families carrying closed-form asymptotics, `kab_check`
//! also has an exact mode that evaluates the limit of the ratio statistic
//! symbolically.
//!
//! Statistics use `h = 1`. The boundary weights are `w(d) = d` (Schwartz),
//! `w(d) = exp(-(1/d)^{1/(σ-1)})` (Gevrey) and `w(d) = ν_M(d)` (general `M`).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::growth::{
    combine, geometric_indices, membership, sample_tracks, GrowthSpec, GrowthVerdict, Polynomial, SamplePoint,
    SamplingPlan, Track,
};
use crate::par::{map_slice, Execution};
use crate::sets::{Asymptotic, FamilySpec, SequenceFamily, Shape, StructuredSet};
use crate::trend::{classify, linear_fit, TrendClass, TrendConfig, TrendReport};
use crate::weights::{
    check_condition, nu_eval, nu_invert, relation, Condition, RelationMode, TriState, WeightSequence, WeightSpec,
};

/// Interval index depth for the sampled (`nec`, `dim1`, `suff`) statistics.
/// Pairs are evaluated pointwise, so this costs nothing beyond the samples.
pub const DEEP_HORIZON: u64 = 1_000_000_000_000;
pub const KAB_HORIZON: u64 = 100_000;
pub const SEPARATION_CHECK_L: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

/// Numeric kab thresholds on the slope of `ln ρ_j` against `ln ln a_j`.
const KAB_FINITE_BETA: f64 = 0.05;
const KAB_DIVERGENT_BETA: f64 = 0.2;
/// Relative drop of the final-window slope below the preceding window's that
/// demotes an Unbounded track to Inconclusive.
const SLOPE_DECAY_TOL: f64 = 0.05;

#[derive(Clone, Debug)]
pub enum SpaceSpec {
    Schwartz,
    GevreySigma(f64),
    GeneralM(Arc<WeightSequence>),
}

/// JSON form of [`SpaceSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceDoc {
    Schwartz,
    Gevrey { sigma: f64 },
    General { weight: WeightSpec },
}

impl SpaceSpec {
    pub fn from_doc(doc: &SpaceDoc) -> Result<Self> {
        let s = match doc {
            SpaceDoc::Schwartz => SpaceSpec::Schwartz,
            SpaceDoc::Gevrey { sigma } => SpaceSpec::GevreySigma(*sigma),
            SpaceDoc::General { weight } => SpaceSpec::GeneralM(Arc::new(WeightSequence::from_spec(weight)?)),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn to_doc(&self) -> SpaceDoc {
        match self {
            SpaceSpec::Schwartz => SpaceDoc::Schwartz,
            SpaceSpec::GevreySigma(s) => SpaceDoc::Gevrey { sigma: *s },
            SpaceSpec::GeneralM(m) => SpaceDoc::General { weight: m.spec().clone() },
        }
    }

    pub fn general(m: WeightSequence) -> Self {
        SpaceSpec::GeneralM(Arc::new(m))
    }

    fn validate(&self) -> Result<()> {
        if let SpaceSpec::GevreySigma(s) = self {
            if !(*s > 1.0) {
                return Err(invalid(format!("Gevrey space needs sigma > 1, got {s}")));
            }
        }
        Ok(())
    }

    /// `ln w(d)` at `h = 1`.
    pub fn log_weight(&self, d: f64) -> Result<f64> {
        if d <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(match self {
            SpaceSpec::Schwartz => d.ln(),
            SpaceSpec::GevreySigma(s) => -(1.0 / d).powf(1.0 / (s - 1.0)),
            SpaceSpec::GeneralM(m) => nu_eval(m, d)?.log_value,
        })
    }

    /// Growth functional of the matching growth space.
    pub fn growth(&self, n: u32) -> GrowthSpec {
        match self {
            SpaceSpec::Schwartz => GrowthSpec::Schwartz { k: 1, n },
            SpaceSpec::GevreySigma(s) => GrowthSpec::GevreyGs { sigma: *s, eps: 1.0, n },
            SpaceSpec::GeneralM(m) => GrowthSpec::GeneralGs { m: m.clone(), h: 1.0, n },
        }
    }
}

impl FromStr for SpaceSpec {
    type Err = Error;

    /// `schwartz`, `gevrey:<sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("schwartz") {
            return Ok(SpaceSpec::Schwartz);
        }
        if let Some(rest) = s.strip_prefix("gevrey:") {
            let sigma: f64 = rest.parse().map_err(|_| invalid(format!("bad sigma in `{s}`")))?;
            let sp = SpaceSpec::GevreySigma(sigma);
            sp.validate()?;
            return Ok(sp);
        }
        Err(invalid(format!("unknown space `{s}` (expected `schwartz` or `gevrey:<sigma>`)")))
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceSpec::Schwartz => write!(f, "schwartz"),
            SpaceSpec::GevreySigma(s) => write!(f, "gevrey:{s}"),
            SpaceSpec::GeneralM(_) => write!(f, "general"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Solvable,
    NotSolvable,
    Inconclusive,
}

/// One witness-grid row: the statistic at exponent `l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LRow {
    pub l: f64,
    pub class: TrendClass,
    pub log_sup: f64,
    pub slope: f64,
    pub tracks: Vec<TrendReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateEvidence {
    pub coordinate: usize,
    pub statistic: String,
    pub rows: Vec<LRow>,
}

/// Ratio statistic `ρ_j = -ln w(gap_j) / ln a_j` of the numeric kab mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KabStatistic {
    pub j: Vec<u64>,
    pub rho: Vec<f64>,
    /// Slope of `ln ρ_j` against `ln ln a_j` over the final quartile.
    pub beta: Option<f64>,
    pub liminf_estimate: f64,
    pub final_increasing: bool,
    pub finite_beta: f64,
    pub divergent_beta: f64,
}

/// Closed-form limit of `ρ_j` for a family with known asymptotics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactDerivation {
    pub asymptotic: Asymptotic,
    /// `None` when `ρ_j → ∞`.
    pub rho_limit: Option<f64>,
    pub rule: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub coordinates: Vec<CoordinateEvidence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kab: Option<KabStatistic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactDerivation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_statistic: Option<LRow>,
    pub slope_threshold: f64,
    pub horizon: u64,
    pub l_grid: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub space: SpaceDoc,
    pub status: Status,
    pub witness_l: Option<f64>,
    /// For the necessary check: whether the necessary condition was observed to
    /// hold for every coordinate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub necessary_holds: Option<bool>,
    pub mode: String,
    pub certificate: Certificate,
    pub assumptions: Vec<String>,
}

/// `{1/2, 1, 2, 4, ...}` up to `l_max`, with `l_max` appended if missing.
pub fn witness_grid(l_max: f64) -> Vec<f64> {
    let mut g = vec![0.5];
    let mut l = 1.0;
    while l <= l_max {
        g.push(l);
        l *= 2.0;
    }
    if l_max > 0.5 && *g.last().unwrap() < l_max {
        g.push(l_max);
    }
    g.retain(|v| *v <= l_max.max(0.5));
    g
}

/// Runs the (M.2), (M.3) and log-convexity checks a general-`M` iff-verdict needs.
fn gs_assumptions(space: &SpaceSpec) -> Result<(bool, Vec<String>)> {
    match space {
        SpaceSpec::GeneralM(m) => {
            let p = m.horizon().min(64);
            let mut ok = true;
            let mut notes = Vec::new();
            for c in [Condition::LogConvex, Condition::M2, Condition::M3] {
                let r = check_condition(m, c, p)?;
                ok &= r.holds;
                notes.push(format!("{c:?} {} to P={p} (finite-horizon)", if r.holds { "verified" } else { "FAILED" }));
            }
            Ok((ok, notes))
        }
        SpaceSpec::GevreySigma(s) => Ok((true, vec![format!("Gevrey sigma={s}, eps=1, h=1")])),
        SpaceSpec::Schwartz => Ok((true, vec!["Schwartz, k=1".into()])),
    }
}

fn coord_stat(space: &SpaceSpec, i: usize, l: f64, p: &SamplePoint) -> Result<f64> {
    let xi = p.x[i].abs();
    if xi == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(l * xi.ln() + space.log_weight(p.d)?)
}

fn norm_stat(space: &SpaceSpec, l: f64, p: &SamplePoint) -> Result<f64> {
    let r = p.x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(l * r.ln() + space.log_weight(p.d)?)
}

fn eval_row(tracks: &[Track], l: f64, stat: &(dyn Fn(f64, &SamplePoint) -> Result<f64> + Sync)) -> Result<LRow> {
    let cfg = TrendConfig::default();
    let mut reports = Vec::new();
    let mut log_sup = f64::NEG_INFINITY;
    for tr in tracks {
        let mut xs = Vec::with_capacity(tr.points.len());
        let mut ys = Vec::with_capacity(tr.points.len());
        for p in &tr.points {
            let y = stat(l, p)?;
            if y.is_nan() {
                return Err(Error::Numerical(format!("statistic is NaN at {:?}", p.x)));
            }
            log_sup = log_sup.max(y);
            xs.push((1.0 + p.x.iter().map(|v| v * v).sum::<f64>().sqrt()).ln());
            ys.push(y);
        }
        let mut rep = classify(&xs, &ys, &cfg);
        if rep.class == TrendClass::Unbounded && rep.slope.is_finite() {
            // a slope that is still positive but falling fast may turn inside
            // any horizon (log-type growth of |x| against the weight)
            let cut = ((xs.len() as f64) * (1.0 - cfg.window)).floor() as usize;
            let earlier = classify(&xs[..cut], &ys[..cut], &cfg);
            if earlier.slope.is_finite() && rep.slope < (1.0 - SLOPE_DECAY_TOL) * earlier.slope {
                rep.class = TrendClass::Inconclusive;
            }
        }
        reports.push(rep);
    }
    let class = combine(reports.iter().map(|r| r.class));
    let slope = reports.iter().map(|r| r.slope).fold(f64::NEG_INFINITY, f64::max);
    Ok(LRow { l, class, log_sup, slope, tracks: reports })
}

/// Evaluate the witness grid, then bisect between the largest Bounded and the
/// smallest Unbounded exponent.
fn scan_l(
    tracks: &[Track],
    grid: &[f64],
    stat: &(dyn Fn(f64, &SamplePoint) -> Result<f64> + Sync),
    exec: Execution,
) -> Result<(Vec<LRow>, Option<f64>)> {
    let rows: Vec<LRow> = map_slice(exec, grid, |&l| eval_row(tracks, l, stat)).into_iter().collect::<Result<_>>()?;
    let first = rows.iter().position(|r| r.class == TrendClass::Unbounded);
    let Some(k) = first else {
        return Ok((rows, None));
    };
    let mut witness = rows[k].l;
    if k > 0 && rows[k - 1].class == TrendClass::Bounded {
        let (mut lo, mut hi) = (rows[k - 1].l, rows[k].l);
        for _ in 0..6 {
            let mid = 0.5 * (lo + hi);
            match eval_row(tracks, mid, stat)?.class {
                TrendClass::Unbounded => hi = mid,
                _ => lo = mid,
            }
        }
        witness = hi;
    }
    Ok((rows, Some(witness)))
}

fn deep_plan(horizon: u64) -> SamplingPlan {
    SamplingPlan { j_max: Some(horizon), ..SamplingPlan::default() }
}

fn bounded_verdict(check: &str, space: &SpaceSpec, l_max: f64, horizon: u64, assumptions: Vec<String>) -> Verdict {
    Verdict {
        check: check.into(),
        space: space.to_doc(),
        status: Status::NotSolvable,
        witness_l: None,
        necessary_holds: Some(false),
        mode: "numeric".into(),
        certificate: Certificate {
            slope_threshold: TrendConfig::default().slope_threshold,
            horizon,
            l_grid: witness_grid(l_max),
            notes: vec!["K is bounded, so |x|^l w(d_K(x)) is bounded for every l".into()],
            ..Certificate::default()
        },
        assumptions,
    }
}

/// Necessary condition: for every coordinate `i` some `l` must make
/// `sup |x_i|^l w(d_K(x))` infinite. Never returns `Solvable`.
pub fn necessary_check(k: &StructuredSet, space: &SpaceSpec, l_max: f64, horizon: u64) -> Result<Verdict> {
    necessary_check_with(k, space, l_max, horizon, Execution::default())
}

pub fn necessary_check_with(
    k: &StructuredSet,
    space: &SpaceSpec,
    l_max: f64,
    horizon: u64,
    exec: Execution,
) -> Result<Verdict> {
    space.validate()?;
    let (_, mut assumptions) = gs_assumptions(space)?;
    assumptions.push("necessary-only verdict".into());
    let Some(tracks) = sample_tracks(k, &deep_plan(horizon))? else {
        return Ok(bounded_verdict("necessary", space, l_max, horizon, assumptions));
    };
    let grid = witness_grid(l_max);
    let mut coords = Vec::new();
    let mut fails = false;
    let mut all_hold = true;
    for i in 0..k.dim {
        let stat = move |l: f64, p: &SamplePoint| coord_stat(space, i, l, p);
        let (rows, witness) = scan_l(&tracks, &grid, &stat, exec)?;
        if rows.iter().all(|r| r.class == TrendClass::Bounded) {
            fails = true;
        }
        if witness.is_none() {
            all_hold = false;
        }
        coords.push(CoordinateEvidence { coordinate: i + 1, statistic: format!("|x_{}|^l w(d_K(x))", i + 1), rows });
    }
    let (status, necessary_holds) = if fails {
        (Status::NotSolvable, Some(false))
    } else if all_hold {
        (Status::Inconclusive, Some(true))
    } else {
        (Status::Inconclusive, None)
    };
    Ok(Verdict {
        check: "necessary".into(),
        space: space.to_doc(),
        status,
        witness_l: None,
        necessary_holds,
        mode: "numeric".into(),
        certificate: Certificate {
            coordinates: coords,
            slope_threshold: TrendConfig::default().slope_threshold,
            horizon,
            l_grid: grid,
            ..Certificate::default()
        },
        assumptions,
    })
}

/// The d = 1 characterization: solvable iff `sup |x|^l w(d_K(x)) = ∞` for some `l`.
pub fn dim1_check(k: &StructuredSet, space: &SpaceSpec, l_max: f64) -> Result<Verdict> {
    dim1_check_with(k, space, l_max, DEEP_HORIZON, Execution::default())
}

pub fn dim1_check_with(
    k: &StructuredSet,
    space: &SpaceSpec,
    l_max: f64,
    horizon: u64,
    exec: Execution,
) -> Result<Verdict> {
    if k.dim != 1 {
        return Err(invalid(format!("dim1_check needs d = 1, got {}", k.dim)));
    }
    space.validate()?;
    let (ok, mut assumptions) = gs_assumptions(space)?;
    let Some(tracks) = sample_tracks(k, &deep_plan(horizon))? else {
        return Ok(bounded_verdict("dim1", space, l_max, horizon, assumptions));
    };
    let grid = witness_grid(l_max);
    let stat = |l: f64, p: &SamplePoint| norm_stat(space, l, p);
    let (rows, witness) = scan_l(&tracks, &grid, &stat, exec)?;
    let all_bounded = rows.iter().all(|r| r.class == TrendClass::Bounded);
    let mut status = match (witness, all_bounded) {
        (Some(_), _) => Status::Solvable,
        (None, true) => Status::NotSolvable,
        _ => Status::Inconclusive,
    };
    if !ok {
        status = Status::Inconclusive;
        assumptions.push("iff-verdict withheld: (M.2)/(M.3) not verified".into());
    }
    let witness_statistic = witness.map(|l| eval_row(&tracks, l, &stat)).transpose()?;
    Ok(Verdict {
        check: "dim1".into(),
        space: space.to_doc(),
        status,
        witness_l: if status == Status::Solvable { witness } else { None },
        necessary_holds: None,
        mode: "numeric".into(),
        certificate: Certificate {
            coordinates: vec![CoordinateEvidence { coordinate: 1, statistic: "|x|^l w(d_K(x))".into(), rows }],
            witness_statistic,
            slope_threshold: TrendConfig::default().slope_threshold,
            horizon,
            l_grid: grid,
            ..Certificate::default()
        },
        assumptions,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KabMode {
    /// Exact when the family carries asymptotics, numeric otherwise.
    Auto,
    Exact,
    Numeric,
}

/// Closed-form limit of `ρ_j = -ln w(gap_j) / ln a_j`.
pub fn exact_rho_limit(asym: &Asymptotic, space: &SpaceSpec) -> Result<ExactDerivation> {
    let Asymptotic { s, u, q, v, gamma, w, c_gap, .. } = *asym;
    if s < 0.0 || u < 0.0 || gamma < 0.0 || w < 0.0 || !(c_gap > 0.0) {
        return Err(invalid("exact mode needs s, u, gamma, w >= 0 and c_gap > 0"));
    }
    let sigma = match space {
        SpaceSpec::Schwartz => None,
        SpaceSpec::GevreySigma(s) => Some(*s),
        SpaceSpec::GeneralM(m) => match m.gevrey_sigma() {
            Some(s) if s > 1.0 => Some(s),
            _ => return Err(Error::Unsupported("exact mode for general M needs a Gevrey generator".into())),
        },
    };
    // growth of -ln gap: q ln j + v ln ln j + gamma (ln j)^w
    let super_log = gamma > 0.0 && w > 1.0;
    let log_like = gamma > 0.0 && w > 0.0;
    let da = |d: ExactDerivation| Ok(d);
    if s == 0.0 && u == 0.0 {
        return da(ExactDerivation { asymptotic: *asym, rho_limit: None, rule: "a_j bounded".into() });
    }
    match sigma {
        None => {
            if s > 0.0 {
                if super_log {
                    da(ExactDerivation {
                        asymptotic: *asym,
                        rho_limit: None,
                        rule: "Schwartz, s > 0: gamma (ln j)^w with w > 1 outgrows s ln j".into(),
                    })
                } else {
                    let extra = if gamma > 0.0 && w == 1.0 { gamma } else { 0.0 };
                    da(ExactDerivation {
                        asymptotic: *asym,
                        rho_limit: Some((q + extra) / s),
                        rule: "Schwartz, s > 0: rho -> (q + gamma [w = 1]) / s".into(),
                    })
                }
            } else if q > 0.0 || log_like {
                da(ExactDerivation {
                    asymptotic: *asym,
                    rho_limit: None,
                    rule: "Schwartz, a_j ~ log(e+j)^u: -ln gap outgrows u ln ln j".into(),
                })
            } else if q < 0.0 {
                da(ExactDerivation { asymptotic: *asym, rho_limit: Some(0.0), rule: "gap grows".into() })
            } else {
                da(ExactDerivation {
                    asymptotic: *asym,
                    rho_limit: Some(v / u),
                    rule: "Schwartz, a_j ~ log(e+j)^u, q = 0: rho -> v / u".into(),
                })
            }
        }
        Some(sigma) => {
            let kappa = 1.0 / (sigma - 1.0);
            if q < 0.0 {
                return da(ExactDerivation { asymptotic: *asym, rho_limit: Some(0.0), rule: "gap grows".into() });
            }
            if q > 0.0 || log_like {
                return da(ExactDerivation {
                    asymptotic: *asym,
                    rho_limit: None,
                    rule: "Gevrey: (1/gap)^{1/(sigma-1)} grows faster than any power of ln j".into(),
                });
            }
            // -ln w ~ c_gap^{-kappa} (ln j)^{v kappa}
            let e = v * kappa;
            if s > 0.0 {
                if e < 1.0 {
                    da(ExactDerivation {
                        asymptotic: *asym,
                        rho_limit: Some(0.0),
                        rule: "Gevrey, s > 0: v/(sigma-1) < 1".into(),
                    })
                } else if e == 1.0 {
                    da(ExactDerivation {
                        asymptotic: *asym,
                        rho_limit: Some(c_gap.powf(-kappa) / s),
                        rule: "Gevrey, s > 0: v/(sigma-1) = 1, rho -> c_gap^{-1/(sigma-1)} / s".into(),
                    })
                } else {
                    da(ExactDerivation {
                        asymptotic: *asym,
                        rho_limit: None,
                        rule: "Gevrey, s > 0: v/(sigma-1) > 1".into(),
                    })
                }
            } else if v <= 0.0 {
                da(ExactDerivation {
                    asymptotic: *asym,
                    rho_limit: Some(0.0),
                    rule: "Gevrey, a_j ~ log(e+j)^u: gap bounded below".into(),
                })
            } else {
                da(ExactDerivation {
                    asymptotic: *asym,
                    rho_limit: None,
                    rule: "Gevrey, a_j ~ log(e+j)^u: any power of ln j outgrows u ln ln j".into(),
                })
            }
        }
    }
}

fn kab_rho(fam: &SequenceFamily, space: &SpaceSpec, j: u64) -> Result<(f64, f64, f64)> {
    let (a, g) = fam.prefix_pair(j)?;
    let lw = space.log_weight(g)?;
    Ok((a, g, -lw / a.ln()))
}

/// `ceil(ρ) + 1`, the reported witness for a finite limit `ρ`.
fn witness_from_limit(rho: f64) -> f64 {
    let r = rho.max(0.0);
    let r = if (r - r.round()).abs() < 1e-6 { r.round() } else { r };
    r.ceil() + 1.0
}

/// Direct statistic `a_j^l w(gap_j)` along geometric `j`.
fn kab_direct_row(fam: &SequenceFamily, space: &SpaceSpec, js: &[u64], l: f64) -> Result<LRow> {
    let mut points = Vec::with_capacity(js.len());
    for &j in js {
        let (a, g) = fam.prefix_pair(j)?;
        points.push(SamplePoint { x: vec![a], d: g });
    }
    let tracks = [Track { label: "a_j^l w(gap_j)".into(), points }];
    let stat = |l: f64, p: &SamplePoint| Ok(l * p.x[0].abs().ln() + space.log_weight(p.d)?);
    eval_row(&tracks, l, &stat)
}

/// `K_{a,b}` characterization: solvable iff `sup_j a_j^l w(b_j - a_j) = ∞` for some `l`.
pub fn kab_check(fam: &SequenceFamily, space: &SpaceSpec, l_max: f64, horizon: u64) -> Result<Verdict> {
    kab_check_with(fam, space, l_max, horizon, KabMode::Auto, Execution::default())
}

pub fn kab_check_with(
    fam: &SequenceFamily,
    space: &SpaceSpec,
    l_max: f64,
    horizon: u64,
    mode: KabMode,
    exec: Execution,
) -> Result<Verdict> {
    space.validate()?;
    let (ok, mut assumptions) = gs_assumptions(space)?;
    let horizon = horizon.min(fam.horizon());
    if horizon < 16 {
        return Err(Error::InsufficientEvidence(format!("kab horizon {horizon} < 16")));
    }
    // ordering must hold on the whole prefix
    fam.materialize(horizon)?;
    let grid = witness_grid(l_max);
    let js = geometric_indices(horizon, 256);
    let use_exact = match mode {
        KabMode::Exact => true,
        KabMode::Numeric => false,
        KabMode::Auto => fam.asymptotic().is_some(),
    };
    let mut cert = Certificate {
        slope_threshold: TrendConfig::default().slope_threshold,
        horizon,
        l_grid: grid.clone(),
        ..Certificate::default()
    };
    let (mut status, witness, mode_label) = if use_exact {
        let asym = fam
            .asymptotic()
            .ok_or_else(|| Error::Unsupported("exact mode needs a family with closed-form asymptotics".into()))?;
        let d = exact_rho_limit(&asym, space)?;
        let r = match d.rho_limit {
            Some(rho) => {
                let l = witness_from_limit(rho);
                cert.witness_statistic = Some(kab_direct_row(fam, space, &js, l)?);
                (Status::Solvable, Some(l), "exact")
            }
            None => (Status::NotSolvable, None, "exact"),
        };
        cert.exact = Some(d);
        r
    } else {
        let vals: Vec<(f64, f64, f64)> =
            map_slice(exec, &js, |&j| kab_rho(fam, space, j)).into_iter().collect::<Result<_>>()?;
        let q3 = (3 * vals.len()) / 4;
        let tail = &vals[q3..];
        let rho: Vec<f64> = vals.iter().map(|v| v.2).collect();
        // ρ_j ≈ L + c / ln a_j for power-type families; the intercept estimates L
        let liminf = if tail.iter().all(|v| v.0 > 1.0) {
            let x: Vec<f64> = tail.iter().map(|v| 1.0 / v.0.ln()).collect();
            let y: Vec<f64> = tail.iter().map(|v| v.2).collect();
            let (_, c, _) = linear_fit(&x, &y);
            c.min(tail.iter().map(|v| v.2).fold(f64::INFINITY, f64::min))
        } else {
            tail.iter().map(|v| v.2).fold(f64::INFINITY, f64::min)
        };
        let increasing = tail.windows(2).all(|w| w[1].2 >= w[0].2);
        let degenerate = tail.iter().any(|v| v.0 <= 1.0);
        let mut stat = KabStatistic {
            j: js.clone(),
            rho,
            beta: None,
            liminf_estimate: liminf,
            final_increasing: increasing,
            finite_beta: KAB_FINITE_BETA,
            divergent_beta: KAB_DIVERGENT_BETA,
        };
        let out = if degenerate {
            // log a_j degenerate: fall back to the direct statistic
            cert.notes.push("a_j <= 1 in the final quartile; direct sup statistic used".into());
            let rows: Vec<LRow> = grid.iter().map(|&l| kab_direct_row(fam, space, &js, l)).collect::<Result<_>>()?;
            let w = rows.iter().find(|r| r.class == TrendClass::Unbounded).map(|r| r.l);
            let s = match w {
                Some(_) => Status::Solvable,
                None if rows.iter().all(|r| r.class == TrendClass::Bounded) => Status::NotSolvable,
                None => Status::Inconclusive,
            };
            cert.coordinates.push(CoordinateEvidence { coordinate: 1, statistic: "a_j^l w(gap_j)".into(), rows });
            (s, w)
        } else if tail.iter().all(|v| v.2 <= 0.0) {
            (Status::Solvable, Some(grid[0]))
        } else if tail.iter().any(|v| v.2 <= 0.0) {
            (Status::Inconclusive, None)
        } else {
            let x: Vec<f64> = tail.iter().map(|v| v.0.ln().ln()).collect();
            let y: Vec<f64> = tail.iter().map(|v| v.2.ln()).collect();
            let (beta, _, _) = linear_fit(&x, &y);
            stat.beta = Some(beta);
            if beta <= KAB_FINITE_BETA {
                (Status::Solvable, Some(witness_from_limit(liminf)))
            } else if beta >= KAB_DIVERGENT_BETA && increasing {
                (Status::NotSolvable, None)
            } else {
                (Status::Inconclusive, None)
            }
        };
        cert.kab = Some(stat);
        let (s, w) = out;
        let mut s = s;
        if let (Status::Solvable, Some(l)) = (s, w) {
            let row = kab_direct_row(fam, space, &js, l)?;
            if row.class != TrendClass::Unbounded {
                cert.notes.push(format!("witness l = {l} not confirmed by the direct statistic"));
                s = Status::Inconclusive;
            }
            cert.witness_statistic = Some(row);
        }
        (s, w, "numeric")
    };
    if !ok {
        status = Status::Inconclusive;
        assumptions.push("iff-verdict withheld: (M.2)/(M.3) not verified".into());
    }
    Ok(Verdict {
        check: "kab".into(),
        space: space.to_doc(),
        status,
        witness_l: if status == Status::Solvable { witness } else { None },
        necessary_holds: None,
        mode: mode_label.into(),
        certificate: cert,
        assumptions,
    })
}

/// Sufficient slice criterion. Never returns `NotSolvable`.
pub fn suff_check(k: &StructuredSet, space: &SpaceSpec, l_max: f64) -> Result<Verdict> {
    space.validate()?;
    let (ok, mut assumptions) = gs_assumptions(space)?;
    // cones and images reduce to the base set
    let (base, reduced) = match &k.shape {
        Shape::LinearImage { base, .. } => (base.as_ref(), true),
        _ => (k, false),
    };
    let d = base.dim;
    let grid = witness_grid(l_max);
    let cfg = TrendConfig::default();
    let ray = |base_pt: Vec<f64>, i: usize, dist: &dyn Fn(&[f64]) -> Result<f64>| -> Result<Track> {
        let mut points = Vec::new();
        for s in 0..64 {
            let t = 2f64.powf(s as f64 / 2.0);
            let mut x = base_pt.clone();
            x[i] += t;
            points.push(SamplePoint { d: dist(&x)?, x });
        }
        Ok(Track { label: format!("slice ray e{}", i + 1), points })
    };
    let mut slice_tracks: Vec<(usize, String, Vec<Track>)> = Vec::new();
    match &base.shape {
        Shape::Orthant => {
            for i in 0..d {
                let tr = ray(vec![1.0; d], i, &|x| base.d_cap(x))?;
                slice_tracks.push((i, "y in R^{d-1} (sampled at y = 1)".into(), vec![tr]));
            }
        }
        Shape::HalfLine { c } => {
            let tr = ray(vec![c + 1.0], 0, &|x| base.d_cap(x))?;
            slice_tracks.push((0, "whole line".into(), vec![tr]));
        }
        Shape::Box { lo, hi } => {
            if hi.iter().any(|h| h.is_finite()) {
                return Err(Error::Unsupported("suff_check needs every box factor unbounded above".into()));
            }
            let bp: Vec<f64> = lo.iter().map(|l| if l.is_finite() { l + 1.0 } else { 0.0 }).collect();
            for i in 0..d {
                let tr = ray(bp.clone(), i, &|x| base.d_cap(x))?;
                slice_tracks.push((i, "y in R^{d-1} (sampled at the base point)".into(), vec![tr]));
            }
        }
        Shape::IntervalUnionCrossSpace { family } => {
            let tracks = sample_tracks(base, &deep_plan(DEEP_HORIZON))?
                .ok_or_else(|| Error::Invariant("interval union reported bounded".into()))?;
            slice_tracks.push((0, "full R^{d-1} (sampled at y = 0)".into(), vec![tracks[0].clone()]));
            // slices {c_j} x R^{d-2} through interval midpoints
            for i in 1..d {
                let mut trs = Vec::new();
                for j in [1u64, 2, 3] {
                    let (a, g) = family.pair(j)?;
                    let mut bp = vec![0.0; d];
                    bp[0] = a + 0.5 * g;
                    let dj = (0.5 * g).min(1.0);
                    let mut tr = ray(bp, i, &|_| Ok(dj))?;
                    tr.label = format!("x1 = c_{j}, ray e{}", i + 1);
                    trs.push(tr);
                }
                slice_tracks.push((i, "{c_j} x R^{d-2}, c_j interval midpoints".into(), trs));
            }
        }
        _ => return Err(Error::Unsupported("suff_check supports orthants, boxes, cones and interval unions".into())),
    }
    let mut coords = Vec::new();
    let mut witnesses = Vec::new();
    for (i, label, tracks) in &slice_tracks {
        let stat = |l: f64, p: &SamplePoint| norm_stat(space, l, p);
        let (rows, w) = scan_l(tracks, &grid, &stat, Execution::default())?;
        witnesses.push(w);
        coords.push(CoordinateEvidence { coordinate: i + 1, statistic: format!("|x|^l w(d_K(x)) on {label}"), rows });
    }
    let all = witnesses.iter().all(|w| w.is_some());
    let mut status = if all { Status::Solvable } else { Status::Inconclusive };
    if !ok {
        status = Status::Inconclusive;
        assumptions.push("iff-verdict withheld: (M.2)/(M.3) not verified".into());
    }
    let mut notes = vec!["sufficient-only criterion".to_string()];
    if reduced {
        notes.push("evaluated on the preimage set; verdicts are invariant under invertible linear maps".into());
    }
    let witness = if all { witnesses.iter().flatten().cloned().fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))) } else { None };
    Ok(Verdict {
        check: "suff".into(),
        space: space.to_doc(),
        status,
        witness_l: if status == Status::Solvable { witness } else { None },
        necessary_holds: None,
        mode: "numeric".into(),
        certificate: Certificate {
            coordinates: coords,
            slope_threshold: cfg.slope_threshold,
            horizon: DEEP_HORIZON,
            l_grid: grid,
            notes,
            ..Certificate::default()
        },
        assumptions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationRow {
    pub l: f64,
    pub class: TrendClass,
    pub slope: f64,
    pub log_max: f64,
    pub argmax_j: u64,
    /// `j^l ν_N(ε_j)` does not increase over the final quartile.
    pub final_nonincreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub family: FamilySpec,
    pub j0: u64,
    pub j_range: u64,
    /// `max_j |j^2 ν_M(ε_j) / j - 1|` over `j >= j0`.
    pub m_identity_max_rel_error: f64,
    pub m_class: TrendClass,
    pub n_rows: Vec<SeparationRow>,
    pub verified: bool,
    pub notes: Vec<String>,
}

/// Build `a_j = j`, `b_j = j + ε_j` with `ν_M(ε_j) = 1/j`, separating `S^{M}`
/// from `S^{N}` when `N ≺ M`.
pub fn separating_family(m: &WeightSequence, n: &WeightSequence, j_range: u64) -> Result<(SequenceFamily, SeparationReport)> {
    separating_family_with(m, n, j_range, Execution::default())
}

pub fn separating_family_with(
    m: &WeightSequence,
    n: &WeightSequence,
    j_range: u64,
    exec: Execution,
) -> Result<(SequenceFamily, SeparationReport)> {
    if j_range < 16 {
        return Err(invalid("j_range must be at least 16"));
    }
    let p = m.horizon().min(n.horizon()).min(64);
    let rel = relation(n, m, RelationMode::StrictlySmaller, p)?;
    if rel.result != TriState::Yes {
        return Err(invalid(format!("precondition N ≺ M not established ({:?})", rel.result)));
    }
    for (name, w) in [("M", m), ("N", n)] {
        for c in [Condition::M2, Condition::M3] {
            if !check_condition(w, c, p)?.holds {
                return Err(invalid(format!("precondition {c:?} fails for {name}")));
            }
        }
    }
    let nu1 = nu_eval(m, 1.0)?.value;
    let mut j0 = 1u64;
    while !(1.0 / (j0 as f64) < nu1) {
        j0 += 1;
        if j0 > j_range {
            return Err(invalid("no j0 <= j_range with 1/j0 < nu_M(1)"));
        }
    }
    let js: Vec<u64> = (1..=j_range).collect();
    let eps: Vec<f64> = map_slice(exec, &js, |&j| if j < j0 { Ok(0.5) } else { nu_invert(m, 1.0 / j as f64) })
        .into_iter()
        .collect::<Result<_>>()?;
    let spec = FamilySpec {
        a: "j".into(),
        gap: None,
        gap_table: Some(eps.clone()),
        params: Default::default(),
        horizon: Some(j_range),
        asymptotic: None,
    };
    let fam = SequenceFamily::from_spec(&spec)?;
    fam.materialize(j_range)?;

    let mut notes = Vec::new();
    let mut max_err = 0.0f64;
    let mut xs = Vec::new();
    let mut ym = Vec::new();
    for (&j, &e) in js.iter().zip(&eps) {
        let v = nu_eval(m, e)?;
        if j >= j0 {
            let two = 2.0 * (j as f64).ln() + v.log_value;
            max_err = max_err.max((two - (j as f64).ln()).exp_m1().abs());
        }
        xs.push((j as f64).ln_1p());
        ym.push(2.0 * (j as f64).ln() + v.log_value);
    }
    let cfg = TrendConfig::default();
    let m_class = classify(&xs, &ym, &cfg).class;
    let ln_nu_n: Vec<f64> = map_slice(exec, &eps, |&e| nu_eval(n, e).map(|v| v.log_value)).into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for l in SEPARATION_CHECK_L {
        let y: Vec<f64> = js.iter().zip(&ln_nu_n).map(|(&j, lv)| l * (j as f64).ln() + lv).collect();
        let tr = classify(&xs, &y, &cfg);
        let (argmax, log_max) =
            y.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
        let q3 = (3 * y.len()) / 4;
        let head = y[..q3].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tail = y[q3..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        rows.push(SeparationRow {
            l,
            class: tr.class,
            slope: tr.slope,
            log_max,
            argmax_j: js[argmax],
            final_nonincreasing: tail <= head && tr.slope <= 0.0,
        });
    }
    let verified = max_err <= 1e-9 && m_class == TrendClass::Unbounded && rows.iter().all(|r| r.class == TrendClass::Bounded);
    if !verified {
        for r in rows.iter().filter(|r| r.class != TrendClass::Bounded) {
            notes.push(format!(
                "j^{} nu_N(eps_j) not yet bounded at j = {j_range}: maximum at j = {}",
                r.l, r.argmax_j
            ));
        }
    }
    Ok((
        fam,
        SeparationReport {
            family: spec,
            j0,
            j_range,
            m_identity_max_rel_error: max_err,
            m_class,
            n_rows: rows,
            verified,
            notes,
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub eps: f64,
    pub n: u32,
    pub verdicts: Vec<GrowthVerdict>,
    /// Largest `m` with every `x_i^m` bounded.
    pub largest_bounded_degree: Option<u32>,
    pub first_unbounded_degree: Option<u32>,
    pub cap_exists: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonScan {
    pub sigma: f64,
    pub probe_degree: u32,
    pub rows: Vec<EpsilonRow>,
    /// `ε` values at which a degree cap exists for every `n` in the grid.
    pub finite_dimensional_at: Vec<f64>,
}

pub fn epsilon_scan(k: &StructuredSet, sigma: f64, eps_grid: &[f64], n_grid: &[u32], probe_degree: u32) -> Result<EpsilonScan> {
    epsilon_scan_with(k, sigma, eps_grid, n_grid, probe_degree, Execution::default())
}

pub fn epsilon_scan_with(
    k: &StructuredSet,
    sigma: f64,
    eps_grid: &[f64],
    n_grid: &[u32],
    probe_degree: u32,
    exec: Execution,
) -> Result<EpsilonScan> {
    if !(sigma > 1.0) {
        return Err(invalid("epsilon_scan needs sigma > 1"));
    }
    let cells: Vec<(f64, u32)> = eps_grid.iter().flat_map(|&e| n_grid.iter().map(move |&n| (e, n))).collect();
    let plan = deep_plan(DEEP_HORIZON);
    let rows: Vec<EpsilonRow> = map_slice(exec, &cells, |&(eps, n)| -> Result<EpsilonRow> {
        let spec = GrowthSpec::GevreyGs { sigma, eps, n };
        let mut verdicts = Vec::new();
        for m in 0..=probe_degree {
            let mut v = GrowthVerdict::Bounded;
            for i in 0..k.dim {
                let mut alpha = vec![0; k.dim];
                alpha[i] = m;
                let r = membership(&Polynomial::monomial(alpha), k, &spec, &plan)?;
                v = match (v, r.verdict) {
                    (_, GrowthVerdict::Unbounded) | (GrowthVerdict::Unbounded, _) => GrowthVerdict::Unbounded,
                    (_, GrowthVerdict::Inconclusive) | (GrowthVerdict::Inconclusive, _) => GrowthVerdict::Inconclusive,
                    _ => GrowthVerdict::Bounded,
                };
            }
            verdicts.push(v);
        }
        let first_unbounded = verdicts.iter().position(|v| *v == GrowthVerdict::Unbounded).map(|p| p as u32);
        let upto = first_unbounded.unwrap_or(probe_degree + 1);
        let largest_bounded = (0..upto).rev().find(|&m| verdicts[..=m as usize].iter().all(|v| *v == GrowthVerdict::Bounded));
        Ok(EpsilonRow {
            eps,
            n,
            largest_bounded_degree: largest_bounded,
            first_unbounded_degree: first_unbounded,
            cap_exists: first_unbounded.is_some(),
            verdicts,
        })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let finite_dimensional_at = eps_grid
        .iter()
        .cloned()
        .filter(|&e| rows.iter().filter(|r| r.eps == e).all(|r| r.cap_exists))
        .collect();
    Ok(EpsilonScan { sigma, probe_degree, rows, finite_dimensional_at })
}
