//! Parameter sweeps and critical-point estimation.
//!
//! Every replicate fixes one marked configuration (and, for bond percolation,
//! one set of edge marks). Because the coloured set is monotone in the
//! parameters, each replicate has a threshold `t` with `A_n` occurring at `p`
//! iff `p > t`. The empirical crossing curve is then the empirical CDF of the
//! thresholds, its half-point is their median, and order statistics give a
//! distribution-free confidence interval.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::enhancement::{bow_tie, coloured_set};
use crate::error::{check_unit, invalid, Error, Result};
use crate::exec::Execution;
use crate::graph::{build_graph, GilbertGraph};
use crate::percolation::{bond_crossing_occurs, crossing_occurs, edge_marks, CrossingSpec};
use crate::point_process::{sample_poisson, MarkedPointSet, Region};
use crate::stats::{median_ci_ranks, quantile_sorted, standard_normal, z_for_level, Proportion};
use crate::stream::{purpose, StreamSpec};
use crate::union_find::DisjointSets;

/// Stream tags separating the experiments driven from one master seed.
pub mod experiment {
    pub const SWEEP: u64 = 1;
    pub const HALF_POINT: u64 = 2;
    pub const LAMBDA_C: u64 = 3;
    pub const GAP: u64 = 4;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Site,
    Bond,
    /// Enhanced site percolation at fixed `q`, or along `q = p^2` when `None`.
    Enhanced { q: Option<f64> },
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Site => "site",
            Model::Bond => "bond",
            Model::Enhanced { .. } => "enhanced",
        }
    }

    /// Enhancement parameter used at site parameter `p`.
    pub fn q_at(&self, p: f64) -> f64 {
        match self {
            Model::Site | Model::Bond => 0.0,
            Model::Enhanced { q: Some(q) } => *q,
            Model::Enhanced { q: None } => p * p,
        }
    }
}

/// One sampled window `B_n` with its graph and (lazily) its edge marks.
pub struct Window {
    pub points: MarkedPointSet,
    pub graph: GilbertGraph,
    pub spec: CrossingSpec,
    edge_marks: Option<Vec<f64>>,
}

impl Window {
    pub fn sample(lambda: f64, n: f64, stream: &StreamSpec, with_edges: bool) -> Result<Self> {
        let spec = CrossingSpec::new(n)?;
        let points = sample_poisson(&spec.window(), lambda, &stream.child(purpose::POINTS))?;
        let graph = build_graph(&points);
        let edge_marks = with_edges.then(|| edge_marks(&graph, &stream.child(purpose::EDGE_MARKS)));
        Ok(Self {
            points,
            graph,
            spec,
            edge_marks,
        })
    }

    pub fn edge_marks(&self) -> &[f64] {
        self.edge_marks.as_deref().expect("window sampled without edge marks")
    }

    /// Direct evaluation of the crossing event at `p`.
    pub fn occurs(&self, model: Model, p: f64) -> bool {
        match model {
            Model::Bond => {
                let open: Vec<bool> = self.edge_marks().iter().map(|&x| x < p).collect();
                bond_crossing_occurs(&self.graph, &open, &self.spec)
            }
            Model::Site => {
                let red: Vec<bool> = self.points.marks.iter().map(|m| m.site < p).collect();
                crossing_occurs(&self.graph, &red, &self.spec)
            }
            Model::Enhanced { .. } => {
                let coloured = coloured_set(&self.graph, &self.points, p, model.q_at(p));
                crossing_occurs(&self.graph, &coloured, &self.spec)
            }
        }
    }

    /// Threshold `t`: the event occurs at `p` iff `p > t`. `+inf` when it
    /// never occurs, `-inf` when it needs no open element at all.
    pub fn threshold(&self, model: Model) -> f64 {
        let g = &self.graph;
        let source = |v: usize| self.spec.in_source(g.positions[v]);
        let target = |v: usize| self.spec.in_target(g.positions[v]);
        match model {
            Model::Site => {
                let order = sorted_by(self.points.marks.iter().map(|m| m.site));
                site_sweep_threshold(g, &order, |v| self.points.marks[v].site, source, target)
            }
            Model::Bond => bond_sweep_threshold(g, self.edge_marks(), source, target),
            Model::Enhanced { q } => self.enhanced_threshold(q),
        }
    }

    fn enhanced_threshold(&self, q: Option<f64>) -> f64 {
        let marks = &self.points.marks;
        let mut candidates: Vec<f64> = marks.iter().map(|m| m.site).collect();
        if q.is_none() {
            candidates.extend(marks.iter().map(|m| m.enhance.sqrt()));
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        // Colouring for p just above c.
        let occurs_above = |c: f64| {
            let red: Vec<bool> = marks.iter().map(|m| m.site <= c).collect();
            let coloured: Vec<bool> = (0..marks.len())
                .map(|v| {
                    red[v]
                        || (match q {
                            Some(q) => marks[v].enhance < q,
                            None => marks[v].enhance.sqrt() <= c,
                        } && bow_tie(&self.graph, &red, v).is_some())
                })
                .collect();
            crossing_occurs(&self.graph, &coloured, &self.spec)
        };
        let first = candidates.partition_point(|&c| !occurs_above(c));
        candidates.get(first).copied().unwrap_or(f64::INFINITY)
    }
}

fn sorted_by(keys: impl Iterator<Item = f64>) -> Vec<usize> {
    let keys: Vec<f64> = keys.collect();
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    order
}

/// Adds vertices in `order`, returning the key of the vertex whose arrival
/// joins a source vertex to a target vertex.
fn site_sweep_threshold<K, S, T>(g: &GilbertGraph, order: &[usize], key: K, source: S, target: T) -> f64
where
    K: Fn(usize) -> f64,
    S: Fn(usize) -> bool,
    T: Fn(usize) -> bool,
{
    let n = g.vertex_count();
    let (hub_s, hub_t) = (n, n + 1);
    let mut ds = DisjointSets::new(n + 2);
    let mut active = vec![false; n];
    for &v in order {
        active[v] = true;
        for &u in &g.adjacency[v] {
            if active[u] {
                ds.union(u, v);
            }
        }
        if source(v) {
            ds.union(v, hub_s);
        }
        if target(v) {
            ds.union(v, hub_t);
        }
        if ds.same(hub_s, hub_t) {
            return key(v);
        }
    }
    f64::INFINITY
}

fn bond_sweep_threshold<S, T>(g: &GilbertGraph, marks: &[f64], source: S, target: T) -> f64
where
    S: Fn(usize) -> bool,
    T: Fn(usize) -> bool,
{
    let n = g.vertex_count();
    let (hub_s, hub_t) = (n, n + 1);
    let mut ds = DisjointSets::new(n + 2);
    let (mut any_s, mut any_t) = (false, false);
    for v in 0..n {
        if source(v) {
            ds.union(v, hub_s);
            any_s = true;
        }
        if target(v) {
            ds.union(v, hub_t);
            any_t = true;
        }
    }
    if !(any_s && any_t) {
        return f64::INFINITY;
    }
    if ds.same(hub_s, hub_t) {
        return f64::NEG_INFINITY;
    }
    for e in sorted_by(marks.iter().copied()) {
        let (a, b) = g.edges[e];
        ds.union(a, b);
        if ds.same(hub_s, hub_t) {
            return marks[e];
        }
    }
    f64::INFINITY
}

/// Fraction of thresholds strictly below `p`: the empirical `theta_n(p)`.
pub fn empirical_theta(thresholds: &[f64], p: f64) -> f64 {
    if thresholds.is_empty() {
        return 0.0;
    }
    thresholds.iter().filter(|&&t| t < p).count() as f64 / thresholds.len() as f64
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepConfig {
    pub lambda: f64,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub n: Vec<f64>,
    pub p: Vec<f64>,
    pub replicates: u64,
    pub master_seed: u64,
}

impl SweepConfig {
    pub fn model(&self) -> Result<Model> {
        match self.model.as_str() {
            "site" => Ok(Model::Site),
            "bond" => Ok(Model::Bond),
            "enhanced" => Ok(Model::Enhanced { q: self.q }),
            other => invalid(format!("unknown model {other:?}; expected site, bond or enhanced")),
        }
    }

    pub fn validate(&self) -> Result<Model> {
        let model = self.model()?;
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return invalid(format!("lambda must be finite and nonnegative, got {}", self.lambda));
        }
        if self.n.is_empty() || self.p.is_empty() {
            return invalid("n and p grids must be nonempty");
        }
        for &n in &self.n {
            CrossingSpec::new(n)?;
        }
        for &p in &self.p {
            check_unit("p", p)?;
        }
        if let Some(q) = self.q {
            check_unit("q", q)?;
        }
        if self.replicates == 0 {
            return invalid("replicates must be positive");
        }
        Ok(model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: String,
    pub lambda: f64,
    pub n: f64,
    pub p: f64,
    pub q: f64,
    pub theta: f64,
    pub se: f64,
    pub reps: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["model", "lambda", "n", "p", "q", "theta", "se", "reps"])?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                r.lambda.to_string(),
                r.n.to_string(),
                r.p.to_string(),
                r.q.to_string(),
                r.theta.to_string(),
                r.se.to_string(),
                r.reps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Crossing frequencies over the `(n, p)` grid. Every grid point at a given
/// `n` sees the same replicate configurations.
pub fn sweep_theta(config: &SweepConfig, exec: Execution) -> Result<SweepResult> {
    let model = config.validate()?;
    let root = StreamSpec::new(config.master_seed).child(experiment::SWEEP);
    let mut rows = Vec::new();
    for (ni, &n) in config.n.iter().enumerate() {
        let ns = root.child(ni as u64);
        let per_rep = exec.map(config.replicates as usize, |r| -> Result<Vec<bool>> {
            let w = Window::sample(config.lambda, n, &ns.child(r as u64), model == Model::Bond)?;
            Ok(config.p.iter().map(|&p| w.occurs(model, p)).collect())
        });
        let mut counts = vec![0u64; config.p.len()];
        for rep in per_rep {
            for (c, hit) in counts.iter_mut().zip(rep?) {
                *c += hit as u64;
            }
        }
        for (&p, &c) in config.p.iter().zip(&counts) {
            let prop = Proportion::new(c, config.replicates);
            rows.push(SweepRow {
                model: model.name().to_string(),
                lambda: config.lambda,
                n,
                p,
                q: model.q_at(p),
                theta: prop.estimate(),
                se: prop.se(),
                reps: config.replicates,
            });
        }
    }
    Ok(SweepResult { rows })
}

// ---------------------------------------------------------------------------
// Half-points

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPointOptions {
    pub initial_replicates: u64,
    pub max_replicates: u64,
    /// Target width of the confidence interval of the half-point.
    pub tolerance: f64,
    pub level: f64,
}

impl Default for HalfPointOptions {
    fn default() -> Self {
        Self {
            initial_replicates: 400,
            max_replicates: 25_600,
            tolerance: 0.01,
            level: 0.95,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPoint {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicates: u64,
    pub level: f64,
}

impl HalfPoint {
    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    /// Normal-equivalent standard error implied by the interval.
    pub fn se(&self) -> f64 {
        self.width() / (2.0 * z_for_level(self.level))
    }

    pub fn scaled(&self, factor: f64) -> HalfPoint {
        HalfPoint {
            estimate: self.estimate * factor,
            ci_low: self.ci_low * factor,
            ci_high: self.ci_high * factor,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum HalfPointOutcome {
    Crossing(HalfPoint),
    /// Fewer than half of the replicates cross even when everything is open.
    NoCrossing { replicates: u64, theta_at_one: f64 },
}

impl HalfPointOutcome {
    pub fn crossing(&self) -> Option<HalfPoint> {
        match self {
            HalfPointOutcome::Crossing(h) => Some(*h),
            HalfPointOutcome::NoCrossing { .. } => None,
        }
    }
}

/// Median and order-statistic interval of a threshold sample, or `None` if
/// the median is not finite within `[0, upper]`.
pub fn median_with_ci(thresholds: &[f64], level: f64, upper: f64) -> Option<HalfPoint> {
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len();
    if r == 0 {
        return None;
    }
    let m = r.div_ceil(2) - 1;
    let estimate = sorted[m];
    if estimate.partial_cmp(&upper) != Some(std::cmp::Ordering::Less) {
        return None;
    }
    let (lo, hi) = median_ci_ranks(r, level);
    Some(HalfPoint {
        estimate: estimate.max(0.0),
        ci_low: sorted[lo].max(0.0),
        ci_high: sorted[hi].min(upper),
        replicates: r as u64,
        level,
    })
}

/// Thresholds of replicates `start..end` for several models on common windows.
pub fn window_thresholds(
    models: &[Model],
    lambda: f64,
    n: f64,
    start: u64,
    end: u64,
    stream: &StreamSpec,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    let with_edges = models.contains(&Model::Bond);
    let per_rep = exec.map_range(start as usize, end as usize, |r| -> Result<Vec<f64>> {
        let w = Window::sample(lambda, n, &stream.child(r as u64), with_edges)?;
        Ok(models.iter().map(|&m| w.threshold(m)).collect())
    });
    let mut out = vec![Vec::with_capacity((end - start) as usize); models.len()];
    for rep in per_rep {
        for (col, t) in out.iter_mut().zip(rep?) {
            col.push(t);
        }
    }
    Ok(out)
}

/// Half-points of several models on common windows, quadrupling the replicate
/// count until every interval is narrower than the tolerance.
pub fn joint_half_points(
    models: &[Model],
    lambda: f64,
    n: f64,
    options: &HalfPointOptions,
    stream: &StreamSpec,
    exec: Execution,
) -> Result<Vec<HalfPointOutcome>> {
    if !lambda.is_finite() || lambda < 0.0 {
        return invalid(format!("lambda must be finite and nonnegative, got {lambda}"));
    }
    CrossingSpec::new(n)?;
    if options.initial_replicates == 0 || options.tolerance.is_nan() || options.tolerance <= 0.0 {
        return invalid("half-point search needs positive replicates and tolerance");
    }
    let mut thresholds = vec![Vec::new(); models.len()];
    let mut reps = 0u64;
    let mut target = options.initial_replicates;
    loop {
        let fresh = window_thresholds(models, lambda, n, reps, target, stream, exec)?;
        for (all, new) in thresholds.iter_mut().zip(fresh) {
            all.extend(new);
        }
        reps = target;
        let outcomes: Vec<HalfPointOutcome> = thresholds
            .iter()
            .map(|t| match median_with_ci(t, options.level, 1.0) {
                Some(h) => HalfPointOutcome::Crossing(h),
                None => HalfPointOutcome::NoCrossing {
                    replicates: reps,
                    theta_at_one: empirical_theta(t, 1.0),
                },
            })
            .collect();
        let settled = outcomes.iter().all(|o| match o {
            HalfPointOutcome::Crossing(h) => h.width() <= options.tolerance,
            HalfPointOutcome::NoCrossing { .. } => true,
        });
        if settled || reps >= options.max_replicates {
            return Ok(outcomes);
        }
        target = (reps * 4).min(options.max_replicates);
    }
}

/// `p` at which the empirical `theta_n` reaches one half.
pub fn estimate_half_point(
    model: Model,
    lambda: f64,
    n: f64,
    options: &HalfPointOptions,
    stream: &StreamSpec,
    exec: Execution,
) -> Result<HalfPointOutcome> {
    Ok(joint_half_points(&[model], lambda, n, options, stream, exec)?.remove(0))
}

// ---------------------------------------------------------------------------
// Critical intensity

/// Per-configuration critical intensity for a left-right crossing of the
/// square `[-L, L)^2`: sample at `lambda_max` and thin by the site marks, so
/// the configuration at intensity `lambda` is the set of points with
/// `Y < lambda / lambda_max`. Also records the largest-cluster fraction at
/// each requested intensity.
pub struct BoxSweep {
    pub threshold: f64,
    pub largest_fraction: Vec<f64>,
}

pub fn box_sweep(half_width: f64, lambda_max: f64, grid: &[f64], stream: &StreamSpec) -> Result<BoxSweep> {
    let region = Region::square(half_width);
    let points = sample_poisson(&region, lambda_max, &stream.child(purpose::POINTS))?;
    let g = build_graph(&points);
    let n = g.vertex_count();
    let order = sorted_by(points.marks.iter().map(|m| m.site));
    let (hub_s, hub_t) = (n, n + 1);
    let mut ds = DisjointSets::new(n + 2);
    let mut active = vec![false; n];
    let mut largest = 0usize;
    let mut threshold = f64::INFINITY;
    let mut fractions = vec![0.0; grid.len()];
    let mut gi = 0;
    let mut grid_order: Vec<usize> = (0..grid.len()).collect();
    grid_order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
    let left = -half_width + CrossingSpec::TARGET_WIDTH;
    let right = half_width - CrossingSpec::TARGET_WIDTH;
    for (added, &v) in order.iter().enumerate() {
        let lam = points.marks[v].site * lambda_max;
        while gi < grid_order.len() && grid[grid_order[gi]] <= lam {
            fractions[grid_order[gi]] = if added == 0 { 0.0 } else { largest as f64 / added as f64 };
            gi += 1;
        }
        active[v] = true;
        // Hubs are excluded from cluster sizes: sizes are tracked on vertices.
        for &u in &g.adjacency[v] {
            if active[u] {
                ds.union(u, v);
            }
        }
        largest = largest.max(ds.set_size(v) - hub_members(&mut ds, v, hub_s, hub_t));
        let pos = g.positions[v];
        if pos.x < left {
            ds.union(v, hub_s);
        }
        if pos.x >= right {
            ds.union(v, hub_t);
        }
        if threshold.is_infinite() && ds.same(hub_s, hub_t) {
            threshold = lam;
        }
    }
    while gi < grid_order.len() {
        fractions[grid_order[gi]] = if n == 0 { 0.0 } else { largest as f64 / n as f64 };
        gi += 1;
    }
    Ok(BoxSweep {
        threshold,
        largest_fraction: fractions,
    })
}

fn hub_members(ds: &mut DisjointSets, v: usize, hub_s: usize, hub_t: usize) -> usize {
    let r = ds.find(v);
    (ds.find(hub_s) == r) as usize + (ds.find(hub_t) == r) as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaCriticalConfig {
    /// Half-widths `L` of the square windows.
    pub sizes: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub replicates: u64,
    pub bootstrap: u64,
    pub level: f64,
}

impl Default for LambdaCriticalConfig {
    fn default() -> Self {
        Self {
            sizes: vec![10.0, 20.0, 40.0],
            lambda_grid: (0..=16).map(|i| 1.0 + 0.05 * i as f64).collect(),
            replicates: 2000,
            bootstrap: 200,
            level: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n: f64,
    pub lambda: f64,
    pub crossing: f64,
    pub se: f64,
    pub largest_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCrossing {
    pub n_small: f64,
    pub n_large: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Crossing probability at the intersection.
    pub level: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeHalfPoint {
    pub n: f64,
    pub half_point: HalfPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub schema_version: u32,
    pub quantity: String,
    pub point_estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: String,
    pub pair_crossings: Vec<PairCrossing>,
    pub half_points: Vec<SizeHalfPoint>,
    /// Intensity of steepest growth of the largest-cluster fraction at the
    /// largest window, as a cross-check.
    pub largest_component_inflection: f64,
    pub curves: Vec<CurveRow>,
}

/// Intersection of two empirical crossing curves, from their quantile
/// functions: `Q_small(u) - Q_large(u)` is fitted linearly against the
/// normal score of `u` over the central levels and the root is mapped back.
pub fn curve_crossing(small: &[f64], large: &[f64]) -> Option<(f64, f64)> {
    let mut a = small.to_vec();
    let mut b = large.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (lo_u, hi_u) = (0.1, 0.9);
    let finite_upto = |s: &[f64]| s.iter().filter(|t| t.is_finite()).count() as f64 / s.len() as f64;
    if finite_upto(&a) < hi_u || finite_upto(&b) < hi_u {
        return None;
    }
    let a_fin: Vec<f64> = a.iter().copied().filter(|t| t.is_finite()).collect();
    let b_fin: Vec<f64> = b.iter().copied().filter(|t| t.is_finite()).collect();
    let qa = |u: f64| quantile_sorted(&a_fin, u * a.len() as f64 / a_fin.len() as f64);
    let qb = |u: f64| quantile_sorted(&b_fin, u * b.len() as f64 / b_fin.len() as f64);
    let normal = standard_normal();
    let steps = 80;
    let (mut sz, mut sg, mut szz, mut szg) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..=steps {
        let u = lo_u + (hi_u - lo_u) * i as f64 / steps as f64;
        let z = normal.inverse_cdf(u);
        let g = qa(u) - qb(u);
        sz += z;
        sg += g;
        szz += z * z;
        szg += z * g;
    }
    let k = (steps + 1) as f64;
    let slope = (k * szg - sz * sg) / (k * szz - sz * sz);
    let intercept = (sg - slope * sz) / k;
    if slope == 0.0 || !slope.is_finite() {
        return None;
    }
    let z_star = -intercept / slope;
    let u_star = normal.cdf(z_star);
    if !(0.01..=0.99).contains(&u_star) {
        return None;
    }
    Some((0.5 * (qa(u_star) + qb(u_star)), u_star))
}

/// Estimates the critical intensity of the Gilbert graph from left-right
/// crossings of square windows of several sizes.
pub fn estimate_lambda_c(config: &LambdaCriticalConfig, stream: &StreamSpec, exec: Execution) -> Result<CriticalEstimate> {
    if config.sizes.len() < 2 {
        return invalid("at least two window sizes are required");
    }
    if config.lambda_grid.len() < 2 || config.lambda_grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return invalid("lambda grid needs at least two positive values");
    }
    if config.replicates < 10 {
        return invalid("at least 10 replicates are required");
    }
    let mut sizes = config.sizes.clone();
    sizes.sort_by(f64::total_cmp);
    for &l in &sizes {
        if !(l > 1.0 && l.is_finite()) {
            return invalid(format!("window half-width must exceed 1, got {l}"));
        }
    }
    let grid_min = config.lambda_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let grid_max = config.lambda_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut thresholds = Vec::new();
    let mut curves = Vec::new();
    let mut largest_curve = Vec::new();
    for (si, &l) in sizes.iter().enumerate() {
        let ss = stream.child(si as u64);
        let sweeps = exec.map(config.replicates as usize, |r| box_sweep(l, grid_max, &config.lambda_grid, &ss.child(r as u64)));
        let mut ts = Vec::with_capacity(sweeps.len());
        let mut frac = vec![0.0; config.lambda_grid.len()];
        for s in sweeps {
            let s = s?;
            ts.push(s.threshold);
            for (f, x) in frac.iter_mut().zip(&s.largest_fraction) {
                *f += x;
            }
        }
        for (gi, &lam) in config.lambda_grid.iter().enumerate() {
            let theta = empirical_theta(&ts, lam);
            curves.push(CurveRow {
                n: l,
                lambda: lam,
                crossing: theta,
                se: (theta * (1.0 - theta) / ts.len() as f64).sqrt(),
                largest_fraction: frac[gi] / ts.len() as f64,
            });
        }
        largest_curve = frac.iter().map(|f| f / ts.len() as f64).collect();
        thresholds.push(ts);
    }

    let saturated = thresholds.iter().all(|t| empirical_theta(t, grid_min) > 0.9)
        || thresholds.iter().all(|t| empirical_theta(t, grid_max) < 0.1);
    if saturated {
        return Err(Error::WidenGrid(format!(
            "crossing curves are saturated over [{grid_min}, {grid_max}]"
        )));
    }

    let mut pairs = Vec::new();
    for i in 0..sizes.len() - 1 {
        let (small, large) = (&thresholds[i], &thresholds[i + 1]);
        let Some((estimate, level)) = curve_crossing(small, large) else {
            return Err(Error::WidenGrid(format!(
                "curves for n = {} and n = {} do not intersect",
                sizes[i],
                sizes[i + 1]
            )));
        };
        if !(grid_min..=grid_max).contains(&estimate) {
            return Err(Error::WidenGrid(format!(
                "curves for n = {} and n = {} meet at {estimate}, outside [{grid_min}, {grid_max}]",
                sizes[i],
                sizes[i + 1]
            )));
        }
        let mut rng = stream.child(purpose::BOOTSTRAP).child(i as u64).rng();
        let mut boots = Vec::with_capacity(config.bootstrap as usize);
        for _ in 0..config.bootstrap {
            let rs: Vec<f64> = (0..small.len()).map(|_| small[rng.random_range(0..small.len())]).collect();
            let rl: Vec<f64> = (0..large.len()).map(|_| large[rng.random_range(0..large.len())]).collect();
            if let Some((b, _)) = curve_crossing(&rs, &rl) {
                boots.push(b);
            }
        }
        boots.sort_by(f64::total_cmp);
        let alpha = (1.0 - config.level) / 2.0;
        let (ci_low, ci_high) = if boots.is_empty() {
            (estimate, estimate)
        } else {
            (quantile_sorted(&boots, alpha), quantile_sorted(&boots, 1.0 - alpha))
        };
        pairs.push(PairCrossing {
            n_small: sizes[i],
            n_large: sizes[i + 1],
            estimate,
            ci_low: ci_low.min(estimate),
            ci_high: ci_high.max(estimate),
            level,
        });
    }

    let half_points = sizes
        .iter()
        .zip(&thresholds)
        .filter_map(|(&n, t)| median_with_ci(t, config.level, grid_max).map(|h| SizeHalfPoint { n, half_point: h }))
        .collect::<Vec<_>>();

    // Consensus: inverse-variance weighted mean of the pairwise crossings and
    // the half-point at the largest window. The interval is the hull of their
    // intervals.
    let z = z_for_level(config.level);
    let mut parts: Vec<(f64, f64, f64)> = pairs.iter().map(|p| (p.estimate, p.ci_low, p.ci_high)).collect();
    if let Some(h) = half_points.iter().find(|h| h.n == sizes[sizes.len() - 1]) {
        parts.push((h.half_point.estimate, h.half_point.ci_low, h.half_point.ci_high));
    }
    let (mut wsum, mut wx) = (0.0, 0.0);
    for &(x, lo, hi) in &parts {
        let se = ((hi - lo) / (2.0 * z)).max(1e-9);
        wsum += 1.0 / (se * se);
        wx += x / (se * se);
    }
    let point_estimate = wx / wsum;
    let ci_low = parts.iter().map(|p| p.1).fold(point_estimate, f64::min);
    let ci_high = parts.iter().map(|p| p.2).fold(point_estimate, f64::max);

    Ok(CriticalEstimate {
        schema_version: 1,
        quantity: "lambda_c".into(),
        point_estimate,
        ci_low,
        ci_high,
        method: "curve-crossing across n".into(),
        pair_crossings: pairs,
        half_points,
        largest_component_inflection: steepest_point(&config.lambda_grid, &largest_curve),
        curves,
    })
}

/// Location of the largest slope of `ys` over `xs`, refined by a parabola
/// through the neighbouring slopes.
pub fn steepest_point(xs: &[f64], ys: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let x: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    if x.len() < 2 {
        return x.first().copied().unwrap_or(f64::NAN);
    }
    let slopes: Vec<f64> = (0..x.len() - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mids: Vec<f64> = (0..x.len() - 1).map(|i| 0.5 * (x[i] + x[i + 1])).collect();
    let k = (0..slopes.len()).max_by(|&a, &b| slopes[a].total_cmp(&slopes[b])).unwrap();
    if k == 0 || k + 1 == slopes.len() {
        return mids[k];
    }
    let (s0, s1, s2) = (slopes[k - 1], slopes[k], slopes[k + 1]);
    let denom = s0 - 2.0 * s1 + s2;
    if denom.abs() < 1e-300 {
        return mids[k];
    }
    let h = mids[k + 1] - mids[k];
    (mids[k] + 0.5 * h * (s0 - s2) / denom).clamp(mids[k - 1], mids[k + 1])
}

// ---------------------------------------------------------------------------
// Site/bond gap

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: f64,
    pub site: HalfPointOutcome,
    pub bond: HalfPointOutcome,
    pub gap: Option<f64>,
    pub gap_ci_low: Option<f64>,
    pub gap_ci_high: Option<f64>,
    /// Site and bond intervals do not overlap.
    pub disjoint: bool,
    /// Bond half-point is at most the site half-point.
    pub ordered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub schema_version: u32,
    pub lambda: f64,
    /// `lambda_c / lambda` using the supplied critical intensity, if any.
    pub site_prediction: Option<f64>,
    pub rows: Vec<GapRow>,
    pub ordering_holds_everywhere: bool,
}

/// Site and bond half-points on common windows at each size.
pub fn gap_experiment(
    lambda: f64,
    sizes: &[f64],
    lambda_c: Option<f64>,
    options: &HalfPointOptions,
    stream: &StreamSpec,
    exec: Execution,
) -> Result<GapReport> {
    if sizes.is_empty() {
        return invalid("at least one window size is required");
    }
    let z = z_for_level(options.level);
    let mut rows = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let out = joint_half_points(&[Model::Site, Model::Bond], lambda, n, options, &stream.child(i as u64), exec)?;
        let (site, bond) = (out[0], out[1]);
        let row = match (site.crossing(), bond.crossing()) {
            (Some(s), Some(b)) => {
                let gap = s.estimate - b.estimate;
                let half = z * (s.se().powi(2) + b.se().powi(2)).sqrt();
                GapRow {
                    n,
                    site,
                    bond,
                    gap: Some(gap),
                    gap_ci_low: Some(gap - half),
                    gap_ci_high: Some(gap + half),
                    disjoint: b.ci_high < s.ci_low || s.ci_high < b.ci_low,
                    ordered: b.estimate <= s.estimate,
                }
            }
            // Bond crosses where site does not: ordering holds trivially.
            (None, Some(_)) => GapRow {
                n,
                site,
                bond,
                gap: None,
                gap_ci_low: None,
                gap_ci_high: None,
                disjoint: false,
                ordered: true,
            },
            _ => GapRow {
                n,
                site,
                bond,
                gap: None,
                gap_ci_low: None,
                gap_ci_high: None,
                disjoint: false,
                ordered: false,
            },
        };
        rows.push(row);
    }
    Ok(GapReport {
        schema_version: 1,
        lambda,
        site_prediction: lambda_c.map(|c| c / lambda),
        ordering_holds_everywhere: rows.iter().all(|r| r.ordered),
        rows,
    })
}

/// Expected number of points in `B_n` at intensity `lambda`.
pub fn expected_points(lambda: f64, n: f64) -> f64 {
    lambda * PI * n * n
}
