//! `kmoment`: command-line front end.
//!
//! Every command writes one JSON document (stdout, or `--out`). Exit codes:
//! 0 success, 1 invalid input, 2 inconclusive, 3 internal invariant violation.

mod config;
mod parse;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use kmoment::bumps::{
    build_cutoff_with, build_partition_with, cutoffs_for_radii, derivative_bound_fit, norm_eval, norm_eval_cutoff,
    taylor_bound_check, taylor_bound_check_cutoff, BumpSpec, SampledFunction, TaylorNorm, FIT_RADII,
};
use kmoment::criteria::{
    dim1_check_with, epsilon_scan_with, kab_check_with, necessary_check_with, separating_family_with, suff_check,
    KabMode, SpaceSpec, Status, Verdict, DEEP_HORIZON, KAB_HORIZON,
};
use kmoment::error::{Error, Result};
use kmoment::growth::{growth_functional, membership, GrowthVerdict, SamplingPlan};
use kmoment::io;
use kmoment::par::Execution;
use kmoment::sets::{FamilySpec, SequenceFamily, SetSpec, StructuredSet};
use kmoment::solver::{self, MomentTargets, PlacementOptions, Strategy};
use kmoment::weights::{self, check_condition, gevrey_envelope_fit, nu_eval, nu_invert, TriState, WeightSequence};

pub const HORIZON_ENV: &str = "KMOMENT_HORIZON";

#[derive(Parser, Debug)]
#[command(name = "kmoment", version, about = "Solvability criteria and constructive solvers for K-moment problems")]
pub struct Cli {
    /// JSON config merged under explicit flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Group,
}

#[derive(Subcommand, Debug)]
enum Group {
    /// Weight sequences.
    #[command(subcommand)]
    Ws(WsCmd),
    /// Structured closed sets.
    #[command(subcommand)]
    Set(SetCmd),
    /// Growth-space membership.
    #[command(subcommand)]
    Growth(GrowthCmd),
    /// Solvability criteria.
    #[command(subcommand)]
    Criteria(CriteriaCmd),
    /// Cutoffs, partitions and norms.
    #[command(subcommand)]
    Bump(BumpCmd),
    /// Truncated moment solver.
    #[command(subcommand)]
    Solve(SolveCmd),
}

#[derive(Args, Debug, Clone)]
struct WeightArgs {
    /// Gevrey exponent σ, for `M_p = p!^σ`.
    #[arg(long, conflicts_with = "weight")]
    gevrey: Option<f64>,
    /// Weight as `gevrey:<σ>`, `expr:<formula>`, JSON or a JSON file.
    #[arg(long)]
    weight: Option<String>,
    /// Materialized weight horizon P.
    #[arg(long, env = HORIZON_ENV)]
    horizon: Option<usize>,
}

impl WeightArgs {
    fn get(&self) -> Result<WeightSequence> {
        match (&self.gevrey, &self.weight) {
            (Some(s), _) => parse::weight(&format!("gevrey:{s}"), self.horizon),
            (None, Some(w)) => parse::weight(w, self.horizon),
            (None, None) => Err(Error::InvalidInput("a weight is required (--gevrey or --weight)".into())),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct FamilyArgs {
    /// `a_j` as an expression in `j`.
    #[arg(long)]
    a: Option<String>,
    /// `gap_j = b_j - a_j` as an expression in `j`.
    #[arg(long)]
    gap: Option<String>,
    /// Named parameters `name=value`.
    #[arg(long = "param", value_delimiter = ',')]
    params: Vec<String>,
    /// Family materialization horizon.
    #[arg(long)]
    family_horizon: Option<u64>,
    /// Full family JSON (or file), or a built-in `log_power` (s), `power` (s, q),
    /// `gevrey_gap` (s, r) taking its parameters from `--param`; overrides `--a/--gap`.
    #[arg(long)]
    family: Option<String>,
}

impl FamilyArgs {
    fn given(&self) -> bool {
        self.a.is_some() || self.family.is_some()
    }

    fn builtin(&self, name: &str) -> Result<Option<SequenceFamily>> {
        let params: BTreeMap<String, f64> = self.params.iter().map(|p| parse::param(p)).collect::<Result<_>>()?;
        let get = |k: &str, default: Option<f64>| {
            params.get(k).copied().or(default).ok_or_else(|| Error::InvalidInput(format!("`{name}` needs --param {k}=…")))
        };
        Ok(Some(match name {
            "log_power" => SequenceFamily::log_power(get("s", Some(1.0))?)?,
            "power" => SequenceFamily::power(get("s", Some(1.0))?, get("q", None)?)?,
            "gevrey_gap" => SequenceFamily::gevrey_gap(get("s", Some(1.0))?, get("r", None)?)?,
            _ => return Ok(None),
        }))
    }

    fn get(&self) -> Result<SequenceFamily> {
        if let Some(fam) = self.family.as_deref().map(|f| self.builtin(f)).transpose()?.flatten() {
            return match self.family_horizon {
                Some(h) => SequenceFamily::from_spec(&FamilySpec { horizon: Some(h), ..fam.spec().clone() }),
                None => Ok(fam),
            };
        }
        let mut spec: FamilySpec = match (&self.family, &self.a, &self.gap) {
            (Some(f), _, _) => parse::json_arg(f)?,
            (None, Some(a), Some(g)) => FamilySpec {
                a: a.clone(),
                gap: Some(g.clone()),
                gap_table: None,
                params: Default::default(),
                horizon: None,
                asymptotic: None,
            },
            _ => return Err(Error::InvalidInput("a family needs --a and --gap (or --family)".into())),
        };
        for p in &self.params {
            let (k, v) = parse::param(p)?;
            spec.params.insert(k, v);
        }
        if let Some(h) = self.family_horizon {
            spec.horizon = Some(h);
        }
        SequenceFamily::from_spec(&spec)
    }
}

#[derive(Args, Debug, Clone)]
struct SetArgs {
    /// Set JSON (or file).
    #[arg(long)]
    set: Option<String>,
    /// `[c, ∞)`.
    #[arg(long, allow_hyphen_values = true)]
    half_line: Option<f64>,
    /// `[0, ∞)^d`.
    #[arg(long)]
    orthant: Option<usize>,
    /// Finite union `a:b,c:d`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    intervals: Vec<String>,
    /// Ambient dimension for a family union `K_{a,b} × R^{d-1}`.
    #[arg(long, default_value_t = 1)]
    cross_dim: usize,
    #[command(flatten)]
    family: FamilyArgs,
}

impl SetArgs {
    fn given(&self) -> bool {
        self.set.is_some() || self.half_line.is_some() || self.orthant.is_some() || !self.intervals.is_empty() || self.family.given()
    }

    fn get(&self) -> Result<StructuredSet> {
        if let Some(s) = &self.set {
            let spec: SetSpec = parse::json_arg(s)?;
            return StructuredSet::from_spec(&spec);
        }
        if let Some(c) = self.half_line {
            return Ok(StructuredSet::half_line(c));
        }
        if let Some(d) = self.orthant {
            return Ok(StructuredSet::orthant(d));
        }
        if !self.intervals.is_empty() {
            let iv = self.intervals.iter().map(|s| parse::interval(s)).collect::<Result<Vec<_>>>()?;
            return StructuredSet::finite_union(iv);
        }
        if self.family.given() {
            return StructuredSet::interval_union(self.family.get()?, self.cross_dim);
        }
        Err(Error::InvalidInput("a set is required (--set, --half-line, --orthant, --intervals or --a/--gap)".into()))
    }
}

#[derive(Args, Debug, Clone)]
struct SpaceArgs {
    /// `schwartz`, `gevrey:<σ>` or `general:<weight>`.
    #[arg(long, default_value = "schwartz")]
    space: String,
    /// Largest `l` in the witness grid.
    #[arg(long, default_value_t = 16.0)]
    l_max: f64,
    /// Horizon for weights named inside the space.
    #[arg(long, env = HORIZON_ENV)]
    horizon: Option<usize>,
}

impl SpaceArgs {
    fn get(&self) -> Result<SpaceSpec> {
        parse::space(&self.space, self.horizon)
    }
}

#[derive(Args, Debug, Clone)]
struct SampleOut {
    /// Also write the sampled function as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write the sampled function as binary with a JSON header line.
    #[arg(long)]
    bin: Option<PathBuf>,
}

impl SampleOut {
    fn write(&self, f: &SampledFunction, spec: Option<Value>) -> Result<()> {
        if let Some(p) = &self.csv {
            io::write_atomic(p, io::csv_string(f)?.as_bytes())?;
        }
        if let Some(p) = &self.bin {
            let mut buf = Vec::new();
            io::write_binary(f, spec, &mut buf)?;
            io::write_atomic(p, &buf)?;
        }
        Ok(())
    }
}

#[derive(Subcommand, Debug)]
enum WsCmd {
    /// Check log-convexity, non-quasianalyticity, (M.2), (M.3).
    Check {
        #[command(flatten)]
        w: WeightArgs,
        /// Comma list of `log-convex`, `nqa`, `m2`, `m3`, or `all`.
        #[arg(long, default_value = "all")]
        condition: String,
        /// Highest index checked; defaults to the horizon.
        #[arg(long)]
        p_max: Option<usize>,
    },
    /// `ν_M(t)`, or `M_p` with `--p`.
    Eval {
        #[command(flatten)]
        w: WeightArgs,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        p: Option<u64>,
    },
    /// Smallest `t` with `ν_M(t) ≥ y`.
    Invert {
        #[command(flatten)]
        w: WeightArgs,
        #[arg(long)]
        y: f64,
    },
    /// Compare weights N and M.
    Relate {
        /// The sequence N.
        #[arg(long)]
        n_weight: String,
        /// The sequence M.
        #[arg(long)]
        m_weight: String,
        /// `subset`, `strictly-smaller`, `equivalent`.
        #[arg(long, default_value = "subset")]
        mode: String,
        #[arg(long, default_value_t = 128)]
        p_max: usize,
        #[arg(long, env = HORIZON_ENV)]
        horizon: Option<usize>,
    },
    /// Fit the Gevrey envelope of `ν`.
    Envelope {
        #[arg(long)]
        sigma: f64,
        /// Grid of `t`; default 100 log-spaced points in `[1e-3, 1]`.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
    },
}

#[derive(Subcommand, Debug)]
enum SetCmd {
    /// Distance to the boundary and `d_K`.
    Dist {
        #[command(flatten)]
        s: SetArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
    },
    Contains {
        #[command(flatten)]
        s: SetArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
    },
    Info {
        #[command(flatten)]
        s: SetArgs,
    },
}

#[derive(Args, Debug, Clone)]
struct GrowthArgs {
    #[command(flatten)]
    s: SetArgs,
    /// Monomial exponents `3` or `2,1`, or a polynomial JSON.
    #[arg(long)]
    poly: String,
    /// `schwartz:k,n`, `gevrey:σ,ε,n`, or a growth JSON.
    #[arg(long)]
    growth: String,
    #[arg(long, env = HORIZON_ENV)]
    horizon: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum GrowthCmd {
    /// Is `P` in the growth space on `K`?
    Member {
        #[command(flatten)]
        g: GrowthArgs,
        #[arg(long, default_value_t = 64)]
        ray_points: usize,
        #[arg(long, default_value_t = 64)]
        interval_count: usize,
        #[arg(long)]
        j_max: Option<u64>,
    },
    /// The growth functional at one point.
    Functional {
        #[command(flatten)]
        g: GrowthArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
    },
}

#[derive(Subcommand, Debug)]
enum CriteriaCmd {
    /// Necessary condition (never Solvable).
    Nec {
        #[command(flatten)]
        s: SetArgs,
        #[command(flatten)]
        sp: SpaceArgs,
        #[arg(long, default_value_t = DEEP_HORIZON)]
        sample_horizon: u64,
    },
    /// One-dimensional characterization.
    Dim1 {
        #[command(flatten)]
        s: SetArgs,
        #[command(flatten)]
        sp: SpaceArgs,
        #[arg(long, default_value_t = DEEP_HORIZON)]
        sample_horizon: u64,
    },
    /// `K_{a,b}` statistic.
    Kab {
        #[command(flatten)]
        f: FamilyArgs,
        #[command(flatten)]
        sp: SpaceArgs,
        /// `auto`, `exact`, `numeric`.
        #[arg(long, default_value = "auto")]
        mode: String,
        #[arg(long, default_value_t = KAB_HORIZON)]
        sample_horizon: u64,
    },
    /// Sufficient condition (never NotSolvable).
    Suff {
        #[command(flatten)]
        s: SetArgs,
        #[command(flatten)]
        sp: SpaceArgs,
    },
    /// Family separating two weights.
    Separate {
        #[arg(long)]
        m_weight: String,
        #[arg(long)]
        n_weight: String,
        #[arg(long, default_value_t = 10_000)]
        j_range: u64,
        #[arg(long, env = HORIZON_ENV)]
        horizon: Option<usize>,
    },
    /// Scan ε for the Gevrey `N^ε` spaces.
    Epsscan {
        #[command(flatten)]
        s: SetArgs,
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4")]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,4")]
        n_grid: Vec<u32>,
        #[arg(long, default_value_t = 8)]
        probe_degree: u32,
    },
}

#[derive(Args, Debug, Clone)]
struct BumpArgs {
    #[command(flatten)]
    w: WeightArgs,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    center: f64,
    /// Convolution stages; automatic when absent.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value_t = 1.0 / 1024.0)]
    grid_step: f64,
}

impl BumpArgs {
    fn get(&self) -> Result<BumpSpec> {
        Ok(BumpSpec { m: Arc::new(self.w.get()?), r: self.r, center: self.center, depth: self.depth, grid_step: self.grid_step })
    }
}

#[derive(Subcommand, Debug)]
enum BumpCmd {
    /// Cutoff `θ`.
    Build {
        #[command(flatten)]
        b: BumpArgs,
        #[command(flatten)]
        o: SampleOut,
    },
    /// Partition-of-unity generator `ρ`.
    Partition {
        #[command(flatten)]
        b: BumpArgs,
        #[command(flatten)]
        o: SampleOut,
    },
    /// Weighted norm of a sample (file) or of the cutoff described by the flags.
    Normcheck {
        #[command(flatten)]
        b: BumpArgs,
        /// Sample file, binary or `x,value` CSV.
        #[arg(long)]
        sample: Option<PathBuf>,
        /// `schwartz:k,n` or `gs:h,n`.
        #[arg(long)]
        norm: String,
        #[arg(long, default_value_t = 4)]
        p_max: usize,
    },
    /// Fit `(C, h, k)` in the cutoff derivative bound across radii.
    Boundfit {
        #[command(flatten)]
        w: WeightArgs,
        #[arg(long, default_value_t = 6)]
        p_max: usize,
        /// Grid step as a fraction of each radius.
        #[arg(long, default_value_t = 1e-4)]
        rel_step: f64,
        #[arg(long, value_delimiter = ',')]
        radii: Vec<f64>,
    },
    /// Near-boundary Taylor bound for a cutoff placed in `K`.
    Taylorcheck {
        #[command(flatten)]
        b: BumpArgs,
        #[command(flatten)]
        s: SetArgs,
        /// `schwartz:k,m` or `gs:h,m`.
        #[arg(long)]
        norm: String,
        #[arg(long, default_value_t = 6)]
        p_max: usize,
    },
}

#[derive(Args, Debug, Clone)]
struct PlaceArgs {
    #[command(flatten)]
    s: SetArgs,
    /// `windows` or `modulated`.
    #[arg(long, default_value = "windows")]
    strategy: String,
    /// Window `a:b` for the modulated strategy.
    #[arg(long)]
    window: Option<String>,
    /// Shared lattice step (a power of two).
    #[arg(long)]
    lattice_step: Option<f64>,
    #[command(flatten)]
    w: WeightArgs,
}

impl PlaceArgs {
    fn set(&self) -> Result<StructuredSet> {
        if self.s.given() {
            self.s.get()
        } else {
            Ok(StructuredSet::half_line(0.0))
        }
    }

    fn options(&self) -> Result<PlacementOptions> {
        let strategy = match self.strategy.to_ascii_lowercase().as_str() {
            "windows" => Strategy::Windows,
            "modulated" | "modulated-single-window" => Strategy::ModulatedSingleWindow,
            other => return Err(Error::InvalidInput(format!("unknown strategy `{other}`"))),
        };
        let mut o = PlacementOptions::new(strategy);
        o.window = self.window.as_deref().map(parse::interval).transpose()?;
        o.lattice_step = self.lattice_step;
        if self.w.gevrey.is_some() || self.w.weight.is_some() {
            o.weight = self.w.get()?.spec().clone();
        }
        Ok(o)
    }
}

#[derive(Subcommand, Debug)]
enum SolveCmd {
    /// Place a bump basis.
    Place {
        #[command(flatten)]
        p: PlaceArgs,
        #[arg(long)]
        n: usize,
    },
    /// Solve for targets and re-check by quadrature.
    Run {
        #[command(flatten)]
        p: PlaceArgs,
        /// Targets JSON (or file).
        #[arg(long, conflicts_with = "values")]
        targets: Option<String>,
        /// Targets as a comma list `c_0,…,c_N`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        #[command(flatten)]
        o: SampleOut,
    },
    /// Conditioning of `δ_0` solves on a family as `N` grows.
    Sweep {
        #[command(flatten)]
        f: FamilyArgs,
        #[arg(long, default_value = "schwartz")]
        space: String,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        n_list: Vec<usize>,
        #[arg(long, env = HORIZON_ENV)]
        horizon: Option<usize>,
    },
}

struct Outcome {
    doc: Value,
    code: u8,
}

fn ok<T: Serialize>(v: &T) -> Result<Outcome> {
    Ok(Outcome { doc: serde_json::to_value(v)?, code: 0 })
}

fn verdict(v: Verdict) -> Result<Outcome> {
    let code = if v.status == Status::Inconclusive { 2 } else { 0 };
    Ok(Outcome { doc: serde_json::to_value(&v)?, code })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invariant(_) => 3,
        Error::InsufficientEvidence(_) => 2,
        _ => 1,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::Expression(_) => "expression",
        Error::Horizon { .. } => "horizon",
        Error::Truncation(_) => "truncation",
        Error::Ordering { .. } => "ordering",
        Error::OutsideSet(_) => "outside_set",
        Error::Unsupported(_) => "unsupported",
        Error::InsufficientEvidence(_) => "insufficient_evidence",
        Error::Numerical(_) => "numerical",
        Error::Invariant(_) => "invariant",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn load_sample(path: &PathBuf) -> Result<SampledFunction> {
    let bytes = std::fs::read(path)?;
    if bytes.first() == Some(&b'{') {
        Ok(io::read_binary(&mut bytes.as_slice())?.1)
    } else {
        io::read_csv_1d(&String::from_utf8_lossy(&bytes))
    }
}

fn run_ws(cmd: WsCmd) -> Result<Outcome> {
    match cmd {
        WsCmd::Check { w, condition, p_max } => {
            let m = w.get()?;
            let p = p_max.unwrap_or(m.horizon());
            let reports =
                parse::conditions(&condition)?.into_iter().map(|c| check_condition(&m, c, p)).collect::<Result<Vec<_>>>()?;
            let all = reports.iter().all(|r| r.holds);
            ok(&json!({"weight": m.spec(), "reports": reports, "all_hold": all}))
        }
        WsCmd::Eval { w, t, p } => {
            let m = w.get()?;
            match (t, p) {
                (Some(t), None) => {
                    let e = nu_eval(&m, t)?;
                    ok(&json!({"weight": m.spec(), "nu": e, "t": e.t, "value": e.value, "log_value": e.log_value}))
                }
                (None, Some(p)) => ok(&json!({"weight": m.spec(), "p": p, "value": m.value(p)?, "log_value": m.log_value(p)?})),
                _ => Err(Error::InvalidInput("give exactly one of --t and --p".into())),
            }
        }
        WsCmd::Invert { w, y } => {
            let m = w.get()?;
            let t = nu_invert(&m, y)?;
            ok(&json!({"weight": m.spec(), "y": y, "t": t, "nu_at_t": nu_eval(&m, t)?.value}))
        }
        WsCmd::Relate { n_weight, m_weight, mode, p_max, horizon } => {
            let n = parse::weight(&n_weight, horizon)?;
            let m = parse::weight(&m_weight, horizon)?;
            let r = weights::relation(&n, &m, parse::relation_mode(&mode)?, p_max)?;
            let code = if r.result == TriState::Inconclusive { 2 } else { 0 };
            Ok(Outcome { doc: json!({"n": n.spec(), "m": m.spec(), "report": r}), code })
        }
        WsCmd::Envelope { sigma, grid } => {
            let grid = if grid.is_empty() { (0..100).map(|i| 10f64.powf(-3.0 + 3.0 * i as f64 / 99.0)).collect() } else { grid };
            ok(&gevrey_envelope_fit(sigma, &grid)?)
        }
    }
}

fn run_set(cmd: SetCmd) -> Result<Outcome> {
    match cmd {
        SetCmd::Dist { s, x } => {
            let k = s.get()?;
            ok(&json!({"set": k.to_spec(), "x": x, "dist_boundary": k.dist_boundary(&x)?, "d_cap": k.d_cap(&x)?}))
        }
        SetCmd::Contains { s, x } => {
            let k = s.get()?;
            ok(&json!({"set": k.to_spec(), "x": x, "contains": k.contains(&x)?}))
        }
        SetCmd::Info { s } => {
            let k = s.get()?;
            ok(&json!({"set": k.to_spec(), "dim": k.dim, "bounded": k.is_bounded()}))
        }
    }
}

fn run_growth(cmd: GrowthCmd) -> Result<Outcome> {
    match cmd {
        GrowthCmd::Member { g, ray_points, interval_count, j_max } => {
            let k = g.s.get()?;
            let p = parse::polynomial(&g.poly)?;
            let spec = parse::growth(&g.growth, g.horizon)?;
            let r = membership(&p, &k, &spec, &SamplingPlan { ray_points, interval_count, j_max })?;
            let code = if r.verdict == GrowthVerdict::Inconclusive { 2 } else { 0 };
            Ok(Outcome { doc: json!({"set": k.to_spec(), "polynomial": p.to_spec(), "growth": spec.to_doc(), "report": r}), code })
        }
        GrowthCmd::Functional { g, x } => {
            let k = g.s.get()?;
            let p = parse::polynomial(&g.poly)?;
            let spec = parse::growth(&g.growth, g.horizon)?;
            let v = growth_functional(&p, &k, &spec, &x)?;
            ok(&json!({"x": x, "value": v, "d_cap": k.d_cap(&x)?}))
        }
    }
}

fn run_criteria(cmd: CriteriaCmd, exec: Execution) -> Result<Outcome> {
    match cmd {
        CriteriaCmd::Nec { s, sp, sample_horizon } => {
            verdict(necessary_check_with(&s.get()?, &sp.get()?, sp.l_max, sample_horizon, exec)?)
        }
        CriteriaCmd::Dim1 { s, sp, sample_horizon } => {
            verdict(dim1_check_with(&s.get()?, &sp.get()?, sp.l_max, sample_horizon, exec)?)
        }
        CriteriaCmd::Kab { f, sp, mode, sample_horizon } => {
            let mode = match mode.as_str() {
                "auto" => KabMode::Auto,
                "exact" => KabMode::Exact,
                "numeric" => KabMode::Numeric,
                other => return Err(Error::InvalidInput(format!("unknown kab mode `{other}`"))),
            };
            verdict(kab_check_with(&f.get()?, &sp.get()?, sp.l_max, sample_horizon, mode, exec)?)
        }
        CriteriaCmd::Suff { s, sp } => verdict(suff_check(&s.get()?, &sp.get()?, sp.l_max)?),
        CriteriaCmd::Separate { m_weight, n_weight, j_range, horizon } => {
            let m = parse::weight(&m_weight, horizon)?;
            let n = parse::weight(&n_weight, horizon)?;
            let (fam, rep) = separating_family_with(&m, &n, j_range, exec)?;
            let code = if rep.verified { 0 } else { 2 };
            Ok(Outcome { doc: json!({"family": fam.spec(), "report": rep}), code })
        }
        CriteriaCmd::Epsscan { s, sigma, eps, n_grid, probe_degree } => {
            ok(&epsilon_scan_with(&s.get()?, sigma, &eps, &n_grid, probe_degree, exec)?)
        }
    }
}

fn run_bump(cmd: BumpCmd, exec: Execution) -> Result<Outcome> {
    match cmd {
        BumpCmd::Build { b, o } => {
            let spec = b.get()?;
            let c = build_cutoff_with(&spec, exec)?;
            let doc = serde_json::to_value(spec.to_doc())?;
            o.write(&c.theta, Some(doc.clone()))?;
            ok(&json!({
                "spec": doc, "depth": c.depth, "widths": c.widths, "half_widths": c.half_widths,
                "checks": c.checks, "points": c.theta.len(), "grid": c.theta.grid, "support_box": c.theta.support_box,
            }))
        }
        BumpCmd::Partition { b, o } => {
            let spec = b.get()?;
            let p = build_partition_with(&spec, exec)?;
            let doc = serde_json::to_value(spec.to_doc())?;
            o.write(&p.rho, Some(doc.clone()))?;
            ok(&json!({
                "spec": doc, "c0": p.c0, "max_shift_sum_error": p.max_shift_sum_error, "integral": p.integral,
                "support_ok": p.support_ok, "points": p.rho.len(), "grid": p.rho.grid, "support_box": p.rho.support_box,
            }))
        }
        BumpCmd::Normcheck { b, sample, norm, p_max } => {
            let m = Arc::new(b.w.get()?);
            let kind = parse::norm(&norm, &m)?;
            let rep = match sample {
                Some(path) => norm_eval(&load_sample(&path)?, &kind, p_max)?,
                None => norm_eval_cutoff(&build_cutoff_with(&b.get()?, exec)?, &kind, p_max)?,
            };
            ok(&rep)
        }
        BumpCmd::Boundfit { w, p_max, rel_step, radii } => {
            let m = w.get()?;
            let radii = if radii.is_empty() { FIT_RADII.to_vec() } else { radii };
            let cs = cutoffs_for_radii(&m, &radii, rel_step)?;
            ok(&json!({"weight": m.spec(), "fit": derivative_bound_fit(&cs, &m, p_max)?}))
        }
        BumpCmd::Taylorcheck { b, s, norm, p_max } => {
            let spec = b.get()?;
            let k = s.get()?;
            let tn = match parse::norm(&norm, &spec.m)? {
                kmoment::bumps::NormKind::Schwartz { k, n } => TaylorNorm::Schwartz { k, m: n },
                kmoment::bumps::NormKind::Gs { m, h, n } => TaylorNorm::Gs { weight: m, h, m: n, p_max },
            };
            let c = build_cutoff_with(&spec, exec)?;
            let rep = taylor_bound_check_cutoff(&c, &k, &tn).or_else(|_| taylor_bound_check(&c.theta, &k, &tn))?;
            let code = if rep.violations.is_empty() { 0 } else { 3 };
            Ok(Outcome { doc: serde_json::to_value(&rep)?, code })
        }
    }
}

fn run_solve(cmd: SolveCmd) -> Result<Outcome> {
    match cmd {
        SolveCmd::Place { p, n } => {
            let basis = solver::place_basis(&p.set()?, n, &p.options()?)?;
            ok(&json!({"n": n, "strategy": basis.strategy, "lattice_step": basis.lattice_step, "elements": basis.summary()}))
        }
        SolveCmd::Run { p, targets, values, o } => {
            let t: MomentTargets = match targets {
                Some(t) => parse::json_arg(&t)?,
                None if !values.is_empty() => MomentTargets::from_vec(&values),
                None => return Err(Error::InvalidInput("targets are required (--targets or --values)".into())),
            };
            let basis = solver::place_basis(&p.set()?, t.n, &p.options()?)?;
            let sol = solver::solve(&basis, &t)?;
            o.write(&sol.function, Some(serde_json::to_value(&t)?))?;
            ok(&sol.report)
        }
        SolveCmd::Sweep { f, space, n_list, horizon } => {
            let sp = parse::space(&space, horizon)?;
            ok(&solver::conditioning_sweep(&f.get()?, &sp, &n_list)?)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    match cli.command {
        Group::Ws(c) => run_ws(c),
        Group::Set(c) => run_set(c),
        Group::Growth(c) => run_growth(c),
        Group::Criteria(c) => run_criteria(c, exec),
        Group::Bump(c) => run_bump(c, exec),
        Group::Solve(c) => run_solve(c),
    }
}

fn main() -> ExitCode {
    let argv = match config::merge(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("{}", io::value_to_string(&json!({"error": "config", "message": msg})));
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version are not failures; usage errors are invalid input
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let out = cli.out.clone();
    match run(cli) {
        Ok(o) => {
            let text = io::value_to_string(&o.doc);
            match out {
                Some(p) => {
                    if let Err(e) = io::write_atomic(&p, text.as_bytes()) {
                        eprintln!("{}", io::value_to_string(&json!({"error": "io", "message": e.to_string()})));
                        return ExitCode::from(1);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::from(o.code)
        }
        Err(e) => {
            eprint!("{}", io::value_to_string(&json!({"error": error_kind(&e), "message": e.to_string()})));
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::Invariant("x".into())), 3);
        assert_eq!(exit_code(&Error::InsufficientEvidence("x".into())), 2);
        assert_eq!(exit_code(&Error::InvalidInput("x".into())), 1);
        assert_eq!(exit_code(&Error::OutsideSet(vec![-1.0])), 1);
    }
}
