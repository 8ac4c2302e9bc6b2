//! Configuration-driven sweeps, figure presets, published-value checks and
//! deterministic CSV output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{
    eps_bounds, supp_mu_bounds, unique_opt_bounds, AlphaDenominator, BoundReport, BoundVariant,
};
use crate::ce::{tuple_decode, CommandExtension, PolicyTensor, RayFamily, PROB_TOL, SUPPORT_TOL};
use crate::domains::{domain_by_name, ray_kernel, Domain, GRID_CELLS, GRID_GOAL, ODT_TUPLE_LEN};
use crate::error::{LabError, Result};
use crate::recursion::{eudrl_step, iterate, IterateOptions};
use crate::seg::SegmentSpace;
use crate::values::{goal_reaching_objective, Reference};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Slack allowed when comparing a measured optimal mass against a bound.
pub const DOMINANCE_TOL: f64 = 1e-9;

/// Ray parameter standing in for the `α → 0⁺` limit.
pub const LIMIT_ALPHA: f64 = 1e-6;

/// Tolerance for limits approached at [`LIMIT_ALPHA`].
pub const LIMIT_TOL: f64 = 1e-4;

/// Default tolerance for exact published values.
pub const EXACT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterGrid {
    Alpha(Vec<f64>),
    Delta(Vec<f64>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialPolicy {
    #[default]
    Uniform,
    /// `count` strictly positive policies drawn from the config seed.
    Random { count: usize },
    Explicit { probs: Vec<f64> },
}

/// One sweep over a kernel grid, regularization levels and initial policies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: String,
    #[serde(default)]
    pub space: SegmentSpace,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    pub grid: ParameterGrid,
    #[serde(default)]
    pub initial: InitialPolicy,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Bound pipelines evaluated by [`run_bounds`].
    #[serde(default)]
    pub bounds: Vec<BoundVariant>,
    #[serde(default)]
    pub alpha_denominator: AlphaDenominator,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.0]
}

fn default_steps() -> usize {
    100
}

impl ExperimentConfig {
    pub fn new(domain: &str, grid: ParameterGrid) -> Self {
        Self {
            domain: domain.into(),
            space: SegmentSpace::Seg,
            epsilons: default_epsilons(),
            grid,
            initial: InitialPolicy::Uniform,
            n_steps: default_steps(),
            seed: 0,
            bounds: Vec::new(),
            alpha_denominator: AlphaDenominator::NPlusOne,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        domain_by_name(&self.domain)?;
        let values = match &self.grid {
            ParameterGrid::Alpha(v) | ParameterGrid::Delta(v) => v,
        };
        if values.is_empty() {
            return Err(LabError::DomainError("parameter grid is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(LabError::DomainError(format!("grid value {v} is not a valid parameter")));
        }
        if self.epsilons.is_empty() {
            return Err(LabError::DomainError("ε grid is empty".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(0.0..1.0).contains(*e)) {
            return Err(LabError::DomainError(format!("ε = {e} outside [0, 1)")));
        }
        if let InitialPolicy::Random { count: 0 } = self.initial {
            return Err(LabError::DomainError("random initial policy count is 0".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the compact JSON encoding.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).unwrap_or_default().as_bytes())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A CSV cell with a fixed textual rendering.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_nan() => "NaN".into(),
            Cell::Float(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn cells(&self, name: &str) -> Vec<&Cell> {
        match self.column(name) {
            Some(i) => self.rows.iter().map(|r| &r[i]).collect(),
            None => Vec::new(),
        }
    }

    pub fn floats(&self, name: &str) -> Vec<f64> {
        self.cells(name)
            .into_iter()
            .map(|c| c.as_f64().unwrap_or(f64::NAN))
            .collect()
    }

    /// Keeps the named columns in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Table> {
        let idx = names
            .iter()
            .map(|n| {
                self.column(n)
                    .ok_or_else(|| LabError::ShapeMismatch(format!("no column {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Table {
            columns: names.iter().map(|n| n.to_string()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        })
    }

    pub fn append(&mut self, other: Table) -> Result<()> {
        if self.columns.is_empty() {
            *self = other;
            return Ok(());
        }
        if self.columns != other.columns {
            return Err(LabError::ShapeMismatch("tables have different columns".into()));
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    /// CSV text preceded by `# key: value` metadata lines.
    pub fn to_csv(&self, meta: &Metadata) -> Result<String> {
        let mut out = format!(
            "# tool: udrl-lab\n# version: {}\n# config_sha256: {}\n# seed: {}\n",
            meta.version, meta.config_sha256, meta.seed
        );
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| LabError::Io(e.to_string()))?;
        out.push_str(&String::from_utf8_lossy(&bytes));
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Metadata {
    pub fn new(config_sha256: String, seed: u64) -> Self {
        Self {
            version: VERSION.into(),
            config_sha256,
            seed,
        }
    }
}

/// JSON written next to every CSV.
#[derive(Clone, Debug, Serialize)]
pub struct Sidecar<'a, C: Serialize> {
    pub tool: &'static str,
    pub metadata: &'a Metadata,
    pub config: &'a C,
    pub prob_tolerance: f64,
    pub support_tolerance: f64,
    pub dominance_tolerance: f64,
    pub rows: usize,
    pub runtime_seconds: f64,
}

pub fn write_outputs<C: Serialize>(
    dir: &Path,
    stem: &str,
    table: &Table,
    meta: &Metadata,
    config: &C,
    runtime_seconds: f64,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, table.to_csv(meta)?)?;
    let sidecar = Sidecar {
        tool: "udrl-lab",
        metadata: meta,
        config,
        prob_tolerance: PROB_TOL,
        support_tolerance: SUPPORT_TOL,
        dominance_tolerance: DOMINANCE_TOL,
        rows: table.rows.len(),
        runtime_seconds,
    };
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(csv_path)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| LabError::Io(format!("thread pool: {e}")))
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Point {
    alpha: f64,
    delta: f64,
}

fn grid_points(cfg: &ExperimentConfig, d: &Domain) -> Result<Vec<Point>> {
    match &cfg.grid {
        ParameterGrid::Delta(v) => v
            .iter()
            .map(|&delta| {
                let alpha = d.alpha_for_delta(delta);
                if alpha > 1.0 {
                    return Err(LabError::DomainError(format!(
                        "δ = {delta} is beyond the end of the {} ray",
                        d.name
                    )));
                }
                Ok(Point { alpha, delta })
            })
            .collect(),
        ParameterGrid::Alpha(v) => v
            .iter()
            .map(|&alpha| {
                Ok(Point {
                    alpha,
                    delta: d.ray.delta(alpha)?,
                })
            })
            .collect(),
    }
}

pub fn initial_policies(cfg: &ExperimentConfig, ce: &CommandExtension) -> Result<Vec<PolicyTensor>> {
    match &cfg.initial {
        InitialPolicy::Uniform => Ok(vec![PolicyTensor::uniform(ce)]),
        InitialPolicy::Random { count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            Ok((0..*count)
                .map(|_| PolicyTensor::random_positive(ce, &mut rng))
                .collect())
        }
        InitialPolicy::Explicit { probs } => Ok(vec![PolicyTensor::from_probs(ce, probs.clone())?]),
    }
}

/// One trace row per `(grid point, ε, initial policy, n)`.
pub fn run_iterate(cfg: &ExperimentConfig, jobs: usize) -> Result<Table> {
    cfg.validate()?;
    let d = domain_by_name(&cfg.domain)?;
    let reference = Reference::new(&d.ce, &d.kernel(0.0)?).ok();
    let points = grid_points(cfg, &d)?;
    let inits = initial_policies(cfg, &d.ce)?;
    let mut work = Vec::new();
    for p in &points {
        for &eps in &cfg.epsilons {
            for i in 0..inits.len() {
                work.push((*p, eps, i));
            }
        }
    }
    let opts = IterateOptions {
        reference: reference.as_ref(),
        ..Default::default()
    };
    let traces = pool(jobs)?.install(|| {
        work.par_iter()
            .map(|&(p, eps, i)| {
                let lam = d.kernel(p.alpha)?;
                iterate(&d.ce, &lam, &inits[i], cfg.n_steps, cfg.space, eps, &opts)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut table = Table::new(&[
        "config_id",
        "alpha",
        "delta",
        "epsilon",
        "init",
        "n",
        "optimal_mass",
        "j",
        "v_err",
        "q_err",
    ]);
    for (id, ((p, eps, i), trace)) in work.iter().zip(traces).enumerate() {
        for s in trace.steps {
            table.push(vec![
                id.into(),
                p.alpha.into(),
                p.delta.into(),
                (*eps).into(),
                (*i).into(),
                s.n.into(),
                s.optimal_mass.into(),
                s.j.into(),
                s.v_err.into(),
                s.q_err.into(),
            ]);
        }
    }
    Ok(table)
}

fn variant_name(v: BoundVariant) -> &'static str {
    match v {
        BoundVariant::SuppMu => "supp_mu",
        BoundVariant::UniqueOpt => "unique_opt",
        BoundVariant::Epsilon => "epsilon",
    }
}

/// Evaluates one bound pipeline; a structural premise failure becomes a flagged report.
pub fn evaluate_bound(
    variant: BoundVariant,
    ce: &CommandExtension,
    reference: &Reference,
    delta: f64,
    eps: f64,
    pi0: &PolicyTensor,
    denom: AlphaDenominator,
) -> Result<Option<BoundReport>> {
    let report = match variant {
        BoundVariant::SuppMu if eps == 0.0 => supp_mu_bounds(ce, reference, delta, denom),
        BoundVariant::UniqueOpt if eps == 0.0 => unique_opt_bounds(ce, reference, delta, Some(pi0)),
        BoundVariant::Epsilon if eps > 0.0 => eps_bounds(ce, reference, delta, eps, denom),
        _ => return Ok(None),
    };
    match report {
        Ok(r) => Ok(Some(r)),
        Err(LabError::PremiseViolated(msg)) => Ok(Some(BoundReport::violated(
            variant, ce, reference, delta, eps, msg,
        ))),
        Err(e) => Err(e),
    }
}

/// One row per `(grid point, ε, bound variant)`; with `n_steps > 0` the measured
/// optimal mass of the first initial policy at `n_steps` is reported alongside.
pub fn run_bounds(cfg: &ExperimentConfig, jobs: usize) -> Result<Table> {
    cfg.validate()?;
    if cfg.bounds.is_empty() {
        return Err(LabError::DomainError("no bound variant requested".into()));
    }
    let d = domain_by_name(&cfg.domain)?;
    let reference = Reference::new(&d.ce, &d.kernel(0.0)?)?;
    let points = grid_points(cfg, &d)?;
    let pi0 = initial_policies(cfg, &d.ce)?.swap_remove(0);
    let work: Vec<(Point, f64)> = points
        .iter()
        .flat_map(|&p| cfg.epsilons.iter().map(move |&e| (p, e)))
        .collect();
    let opts = IterateOptions {
        reference: Some(&reference),
        ..Default::default()
    };
    let rows = pool(jobs)?.install(|| {
        work.par_iter()
            .map(|&(p, eps)| {
                let measured = if cfg.n_steps > 0 {
                    let lam = d.kernel(p.alpha)?;
                    let t = iterate(&d.ce, &lam, &pi0, cfg.n_steps, cfg.space, eps, &opts)?;
                    t.steps[cfg.n_steps].optimal_mass
                } else {
                    f64::NAN
                };
                let mut reports = Vec::new();
                for &v in &cfg.bounds {
                    if let Some(r) = evaluate_bound(
                        v,
                        &d.ce,
                        &reference,
                        p.delta,
                        eps,
                        &pi0,
                        cfg.alpha_denominator,
                    )? {
                        reports.push(r);
                    }
                }
                Ok((p, measured, reports))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut table = Table::new(&BOUND_COLUMNS);
    let mut id = 0usize;
    for (p, measured, reports) in rows {
        for r in reports {
            table.push(bound_row(id, p, &r, measured));
            id += 1;
        }
    }
    Ok(table)
}

const BOUND_COLUMNS: [&str; 21] = [
    "config_id",
    "variant",
    "alpha",
    "delta",
    "epsilon",
    "premises_hold",
    "accumulation_bound",
    "limit",
    "x_l",
    "x_u",
    "delta0",
    "visitation_alpha",
    "gamma_n",
    "policy_bound",
    "q_bound",
    "v_bound",
    "j_bound",
    "rate",
    "measured",
    "dominates",
    "violations",
];

fn bound_row(id: usize, p: Point, r: &BoundReport, measured: f64) -> Vec<Cell> {
    let dominates = if r.premises_hold && measured.is_finite() && r.accumulation_bound.is_finite() {
        Cell::Bool(measured >= r.accumulation_bound - DOMINANCE_TOL)
    } else {
        Cell::Empty
    };
    vec![
        id.into(),
        variant_name(r.variant).into(),
        p.alpha.into(),
        r.delta.into(),
        r.epsilon.into(),
        r.premises_hold.into(),
        r.accumulation_bound.into(),
        r.limit.into(),
        r.x_l.into(),
        r.x_u.into(),
        r.delta0.into(),
        r.alpha.into(),
        r.gamma.last().cloned().unwrap_or(f64::NAN).into(),
        r.policy_bound.into(),
        r.q_bound.into(),
        r.v_bound.into(),
        r.j_bound.into(),
        r.rate.into(),
        measured.into(),
        dominates,
        r.violations.join("; ").into(),
    ]
}

/// `π₂` and `J^{π₂}` at each ray parameter, with every goal column of the initial state.
pub fn run_second_iterates(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let d = domain_by_name(&cfg.domain)?;
    let (na, ng) = (d.ce.num_actions(), d.ce.num_goals());
    let mut columns = vec![
        "domain".to_string(),
        "alpha".into(),
        "delta".into(),
        "n".into(),
        "j".into(),
    ];
    for g in 0..ng {
        for a in 0..na {
            columns.push(format!("pi_g{g}_a{a}"));
        }
    }
    let mut table = Table {
        columns,
        rows: Vec::new(),
    };
    let start = d
        .ce
        .mdp()
        .mu()
        .iter()
        .position(|&m| m > 0.0)
        .unwrap_or(0);
    for p in grid_points(cfg, &d)? {
        let lam = d.kernel(p.alpha)?;
        let mut pi = PolicyTensor::uniform(&d.ce);
        for _ in 0..cfg.n_steps {
            pi = eudrl_step(&d.ce, &lam, &pi, cfg.space, 0.0);
        }
        let mut row: Vec<Cell> = vec![
            d.name.clone().into(),
            p.alpha.into(),
            p.delta.into(),
            cfg.n_steps.into(),
            goal_reaching_objective(&d.ce, &lam, &pi).into(),
        ];
        for g in 0..ng {
            let x = d.ce.ext_index(start, d.ce.horizon(), g);
            row.extend(pi.dist(x).iter().map(|&v| Cell::Float(v)));
        }
        table.push(row);
    }
    Ok(table)
}

/// Comparison of one reference value against the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub domain: String,
    pub quantity: String,
    pub expected: Vec<f64>,
    pub measured: Vec<f64>,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn second_iterate(d: &Domain, alpha: f64) -> Result<(PolicyTensor, f64)> {
    let lam = d.kernel(alpha)?;
    let mut pi = PolicyTensor::uniform(&d.ce);
    for _ in 0..2 {
        pi = eudrl_step(&d.ce, &lam, &pi, SegmentSpace::Seg, 0.0);
    }
    let j = goal_reaching_objective(&d.ce, &lam, &pi);
    Ok((pi, j))
}

/// Distinct state paths of length `n` from `start` that end in the grid goal cell
/// under the deterministic grid kernel.
pub fn count_goal_paths(start: usize, n: usize) -> Result<usize> {
    let k = ray_kernel(RayFamily::Grid, 0.0)?;
    let mut paths: Vec<Vec<usize>> = vec![vec![start]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &paths {
            let s = *p.last().unwrap();
            for a in 0..k.num_actions() {
                for &(t, _) in k.successors(s, a) {
                    let mut q = p.clone();
                    q.push(t);
                    next.push(q);
                }
            }
        }
        next.sort();
        next.dedup();
        paths = next;
    }
    Ok(paths.iter().filter(|p| p[n] == GRID_GOAL).count())
}

fn measure(d: &Domain, quantity: &str) -> Result<Vec<f64>> {
    let alpha_of = |q: &str| if q.ends_with("_limit") { LIMIT_ALPHA } else { 0.0 };
    if quantity.starts_with("j_pi2_") {
        return Ok(vec![second_iterate(d, alpha_of(quantity))?.1]);
    }
    if let Some(rest) = quantity.strip_prefix("pi2_g") {
        let g: usize = rest[..rest.find('_').unwrap_or(rest.len())]
            .parse()
            .map_err(|_| LabError::DomainError(format!("bad quantity {quantity}")))?;
        let (pi, _) = second_iterate(d, alpha_of(quantity))?;
        return Ok(pi.dist(d.ce.ext_index(0, 1, g)).to_vec());
    }
    match quantity {
        "optimal_set_sizes" => Ok(Reference::new(&d.ce, &d.kernel(0.0)?)?
            .optimal_set_sizes()
            .into_iter()
            .map(|m| m as f64)
            .collect()),
        "mu_bar" => {
            let support: Vec<f64> = d.ce.mu_bar().iter().cloned().filter(|&m| m > 0.0).collect();
            let lo = support.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = support.iter().cloned().fold(0.0, f64::max);
            let mean = support.iter().sum::<f64>() / support.len() as f64;
            Ok(vec![if (lo - mean).abs() > (hi - mean).abs() { lo } else { hi }])
        }
        "shortest_paths_to_goal" => {
            let init = d.ce.mdp().mu().iter().position(|&m| m > 0.0).unwrap_or(0);
            let cell = tuple_decode(init, GRID_CELLS.len(), ODT_TUPLE_LEN)[ODT_TUPLE_LEN - 1];
            Ok(vec![count_goal_paths(cell, d.ce.horizon())? as f64])
        }
        other => Err(LabError::DomainError(format!("no measurement for {other}"))),
    }
}

/// Compares every reference value recorded on a domain with the pipeline.
pub fn check_domain(d: &Domain, exact_tol: f64) -> Result<Vec<Check>> {
    d.ground_truth
        .iter()
        .map(|t| {
            let measured = measure(d, &t.quantity)?;
            let tolerance = if t.quantity.ends_with("_limit") {
                LIMIT_TOL
            } else {
                exact_tol
            };
            let error = if measured.len() == t.value.len() {
                measured
                    .iter()
                    .zip(&t.value)
                    .map(|(m, e)| (m - e).abs())
                    .fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            Ok(Check {
                domain: d.name.clone(),
                quantity: t.quantity.clone(),
                expected: t.value.clone(),
                measured,
                error,
                tolerance,
                pass: error <= tolerance,
            })
        })
        .collect()
}

pub fn run_checks(domains: &[&str], exact_tol: f64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for name in domains {
        out.extend(check_domain(&domain_by_name(name)?, exact_tol)?);
    }
    Ok(out)
}

pub fn checks_table(checks: &[Check]) -> Table {
    let mut t = Table::new(&[
        "domain",
        "quantity",
        "index",
        "expected",
        "measured",
        "abs_err",
        "tolerance",
        "pass",
    ]);
    for c in checks {
        for (i, e) in c.expected.iter().enumerate() {
            let m = c.measured.get(i).cloned().unwrap_or(f64::NAN);
            t.push(vec![
                c.domain.clone().into(),
                c.quantity.clone().into(),
                i.into(),
                (*e).into(),
                m.into(),
                (m - e).abs().into(),
                c.tolerance.into(),
                c.pass.into(),
            ]);
        }
    }
    t
}

/// Log-spaced grid of `n` points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 12] = [
    "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "exb1",
    "exb2",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetKind {
    SecondIterates,
    OptimalMassTrace,
    ObjectiveTrace,
    Bounds,
    Checks,
}

/// A figure or report recipe. Grid densities are choices, not reference data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub kind: PresetKind,
    pub configs: Vec<ExperimentConfig>,
}

fn ray_alphas() -> Vec<f64> {
    let mut v = vec![0.0];
    v.extend(log_grid(1e-6, 1.0, 25));
    v
}

/// δ grid of the ℤ₃ walk traces.
pub const Z3_DELTAS: [f64; 12] = [
    0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.35, 0.5,
];

pub fn preset(name: &str, seed: u64) -> Result<Preset> {
    let cfg = |domain: &str, grid: ParameterGrid| {
        let mut c = ExperimentConfig::new(domain, grid);
        c.seed = seed;
        c
    };
    let rays = |a: &str, c: &str| -> Vec<ExperimentConfig> {
        [a, c]
            .iter()
            .map(|d| {
                let mut c = cfg(d, ParameterGrid::Alpha(ray_alphas()));
                c.n_steps = 2;
                c
            })
            .collect()
    };
    let z3 = || {
        let mut c = cfg("z3-walk", ParameterGrid::Delta(Z3_DELTAS.to_vec()));
        c.initial = InitialPolicy::Random { count: 10 };
        c.n_steps = 30;
        vec![c]
    };
    let bounds = |domain: &str, grid: Vec<f64>, variant: BoundVariant, space, eps: Vec<f64>| {
        let mut c = cfg(domain, ParameterGrid::Delta(grid));
        c.bounds = vec![variant];
        c.space = space;
        c.epsilons = eps;
        vec![c]
    };
    let (kind, configs) = match name {
        "fig1" => (PresetKind::SecondIterates, rays("example1-a", "example1-c")),
        "fig2" => (PresetKind::SecondIterates, rays("example2-a", "example2-c")),
        "fig3" => (PresetKind::OptimalMassTrace, z3()),
        "fig4" => (PresetKind::ObjectiveTrace, z3()),
        "fig5" => (
            PresetKind::Bounds,
            bounds("bandit", log_grid(1e-4, 0.4, 30), BoundVariant::SuppMu, SegmentSpace::Seg, vec![0.0]),
        ),
        "fig6" => (
            PresetKind::Bounds,
            bounds("grid", log_grid(1e-10, 1e-4, 25), BoundVariant::SuppMu, SegmentSpace::Seg, vec![0.0]),
        ),
        "fig7" => (
            PresetKind::Bounds,
            bounds("bandit", log_grid(1e-4, 0.3, 30), BoundVariant::UniqueOpt, SegmentSpace::Seg, vec![0.0]),
        ),
        "fig8" => (
            PresetKind::Bounds,
            bounds("odt-grid-22", log_grid(1e-7, 3e-3, 25), BoundVariant::UniqueOpt, SegmentSpace::Trail, vec![0.0]),
        ),
        "fig9" => (
            PresetKind::Bounds,
            bounds("bandit", log_grid(1e-5, 0.1, 25), BoundVariant::Epsilon, SegmentSpace::Seg, vec![0.05, 0.1, 0.2, 0.3]),
        ),
        "fig10" => (
            PresetKind::Bounds,
            bounds("odt-grid-20", log_grid(1e-14, 1e-9, 16), BoundVariant::Epsilon, SegmentSpace::Trail, vec![0.1]),
        ),
        "exb1" => (
            PresetKind::Checks,
            ["example1-a", "example1-c"]
                .iter()
                .map(|d| cfg(d, ParameterGrid::Alpha(vec![0.0, LIMIT_ALPHA])))
                .collect(),
        ),
        "exb2" => (
            PresetKind::Checks,
            ["example2-a", "example2-c"]
                .iter()
                .map(|d| cfg(d, ParameterGrid::Alpha(vec![0.0, LIMIT_ALPHA])))
                .collect(),
        ),
        other => return Err(LabError::UnknownPreset(other.into())),
    };
    Ok(Preset {
        name: name.into(),
        kind,
        configs,
    })
}

/// Runs a preset and returns its table.
pub fn run_preset(p: &Preset, jobs: usize, exact_tol: f64) -> Result<Table> {
    let mut table = Table::default();
    for c in &p.configs {
        let t = match p.kind {
            PresetKind::SecondIterates => run_second_iterates(c)?,
            PresetKind::OptimalMassTrace => run_iterate(c, jobs)?.select(&[
                "config_id",
                "delta",
                "init",
                "n",
                "optimal_mass",
                "v_err",
                "q_err",
            ])?,
            PresetKind::ObjectiveTrace => {
                run_iterate(c, jobs)?.select(&["config_id", "delta", "init", "n", "j"])?
            }
            PresetKind::Bounds => run_bounds(c, jobs)?,
            PresetKind::Checks => checks_table(&run_checks(&[c.domain.as_str()], exact_tol)?),
        };
        table.append(t)?;
    }
    Ok(table)
}

impl Preset {
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).unwrap_or_default().as_bytes())
    }
}

/// Writes `<name>.csv` and `<name>.json` for each named preset into `dir`.
pub fn cmd_reproduce(
    dir: &Path,
    names: &[String],
    seed: u64,
    jobs: usize,
    exact_tol: f64,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for name in names {
        let started = Instant::now();
        let p = preset(name, seed)?;
        let table = run_preset(&p, jobs, exact_tol)?;
        let meta = Metadata::new(p.hash(), seed);
        written.push(write_outputs(
            dir,
            name,
            &table,
            &meta,
            &p,
            started.elapsed().as_secs_f64(),
        )?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_rendering_is_fixed() {
        assert_eq!(Cell::Float(0.5).render(), "5.0000000000000000e-1");
        assert_eq!(Cell::Float(f64::NAN).render(), "NaN");
        assert_eq!(Cell::Empty.render(), "");
    }

    #[test]
    fn csv_has_metadata_and_unix_newlines() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1usize.into(), 0.25.into()]);
        let text = t.to_csv(&Metadata::new("abc".into(), 7)).unwrap();
        assert!(text.starts_with("# tool: udrl-lab\n"));
        assert!(text.contains("# seed: 7\n"));
        assert!(text.ends_with("a,b\n1,2.5000000000000000e-1\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn config_validation() {
        let c = ExperimentConfig::new("bandit", ParameterGrid::Delta(vec![0.01]));
        c.validate().unwrap();
        let json = c.to_json().unwrap();
        assert_eq!(ExperimentConfig::from_json(&json).unwrap(), c);
        assert_eq!(c.hash().len(), 64);
        let bad = ExperimentConfig::new("nowhere", ParameterGrid::Delta(vec![0.01]));
        assert!(matches!(bad.validate(), Err(LabError::UnknownDomain(_))));
        let empty = ExperimentConfig::new("bandit", ParameterGrid::Alpha(vec![]));
        assert!(empty.validate().is_err());
    }

    #[test]
    fn grid_path_counts() {
        let start = crate::domains::grid_cell((2, 2)).unwrap();
        assert_eq!(count_goal_paths(start, 4).unwrap(), 1);
        let start = crate::domains::grid_cell((2, 0)).unwrap();
        assert_eq!(count_goal_paths(start, 4).unwrap(), 3);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-4, 1e-1, 4);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[3] - 1e-1).abs() < 1e-15);
        assert!((g[1] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("fig99", 0), Err(LabError::UnknownPreset(_))));
        for name in PRESETS {
            preset(name, 0).unwrap();
        }
    }
}
