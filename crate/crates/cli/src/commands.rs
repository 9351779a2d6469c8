//! Subcommand arguments, resolved configs and runners.

use std::fs::File;
use std::path::PathBuf;

use clap::Args;
use gilbertlab_core::coupling::{coupling_replicate, summarize};
use gilbertlab_core::enhancement::enhance;
use gilbertlab_core::estimation::{
    estimate_lambda_c, experiment, gap_experiment, sweep_theta, CriticalEstimate, HalfPointOptions, LambdaCriticalConfig,
    SweepConfig,
};
use gilbertlab_core::graph::build_graph;
use gilbertlab_core::oracle::{oracle_report, FixturePointSet};
use gilbertlab_core::pivotal::{estimate_pivotal_integral, pivotal_ratio_profile, russo_check as run_russo, Parameter, PivotalKind};
use gilbertlab_core::point_process::sample_poisson;
use gilbertlab_core::stream::purpose;
use gilbertlab_core::{Execution, MarkedPointSet, Point, Region, StreamSpec};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{load, CliError, Layer};
use crate::output::{OutDir, SCHEMA_VERSION};
use crate::ConfigArg;

/// Stream tags of the subcommands without their own experiment tag.
mod tag {
    pub const SAMPLE: u64 = 10;
    pub const PIVOTAL: u64 = 11;
    pub const RUSSO: u64 = 12;
    pub const COUPLE: u64 = 13;
}

pub struct Context {
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Context {
    fn layer(&self, config: &ConfigArg, subcommand: &str) -> Result<Layer, CliError> {
        let mut layer = Layer::new(load(config.config.as_deref(), subcommand)?);
        layer.set("masterSeed", self.seed);
        Ok(layer)
    }
}

fn exec() -> Execution {
    Execution::default()
}

fn default_n_list() -> Vec<f64> {
    vec![10.0, 20.0, 40.0]
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Poisson intensity.
    #[arg(long)]
    lambda: Option<f64>,
    /// Window radius.
    #[arg(long)]
    n: Option<f64>,
    /// Site parameter; when given, vertex states are written too.
    #[arg(long)]
    p: Option<f64>,
    /// Enhancement parameter (default p^2).
    #[arg(long)]
    q: Option<f64>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SampleConfig {
    lambda: f64,
    n: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(default)]
    master_seed: u64,
}

pub fn sample(ctx: &Context, a: SampleArgs) -> Result<(), CliError> {
    let mut layer = ctx.layer(&a.config, "sample")?;
    layer.set("lambda", a.lambda).set("n", a.n).set("p", a.p).set("q", a.q);
    let cfg: SampleConfig = layer.resolve()?;
    let stream = StreamSpec::new(cfg.master_seed).child(tag::SAMPLE);
    let points = sample_poisson(&Region::disk(cfg.n), cfg.lambda, &stream.child(purpose::POINTS))?;
    let graph = build_graph(&points);
    let mut out = OutDir::create(&ctx.out)?;
    out.write_with("points.csv", |w| points.write_csv(w))?;
    out.write_with("edges.csv", |w| graph.write_edges_csv(w))?;
    if let Some(p) = cfg.p {
        let coloring = enhance(&graph, &points, p, cfg.q.unwrap_or(p * p))?;
        out.write_with("states.csv", |w| coloring.write_csv(w))?;
    }
    out.finish("sample", &cfg, cfg.master_seed)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct ThetaArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    lambda: Option<f64>,
    /// site, bond or enhanced.
    #[arg(long)]
    model: Option<String>,
    /// Fixed enhancement parameter (enhanced model; default q = p^2).
    #[arg(long)]
    q: Option<f64>,
    /// Window radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<f64>>,
    /// Site or bond parameters, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long)]
    replicates: Option<u64>,
}

pub fn theta(ctx: &Context, a: ThetaArgs) -> Result<(), CliError> {
    let mut layer = ctx.layer(&a.config, "theta")?;
    layer
        .set("lambda", a.lambda)
        .set("model", a.model)
        .set("q", a.q)
        .set("n", a.n)
        .set("p", a.p)
        .set("replicates", a.replicates);
    let mut cfg: SweepConfig = layer.resolve()?;
    if cfg.model != "enhanced" {
        cfg.q = None;
    }
    let result = sweep_theta(&cfg, exec())?;
    let mut out = OutDir::create(&ctx.out)?;
    out.write_with("theta.csv", |w| result.write_csv(w))?;
    out.finish("theta", &cfg, cfg.master_seed)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct PivotalArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    /// pivotal1 or pivotal2; both when omitted.
    #[arg(long)]
    kind: Option<String>,
    /// Lattice spacing of a per-location ratio profile over B_n.
    #[arg(long)]
    profile_step: Option<f64>,
    /// Trials per profile location.
    #[arg(long)]
    profile_trials: Option<u64>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct PivotalConfig {
    lambda: f64,
    p: f64,
    q: f64,
    n: f64,
    #[serde(default = "default_trials")]
    trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<PivotalKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profile_step: Option<f64>,
    #[serde(default = "default_profile_trials")]
    profile_trials: u64,
    #[serde(default)]
    master_seed: u64,
}

fn default_trials() -> u64 {
    10_000
}

fn default_profile_trials() -> u64 {
    2_000
}

/// Lattice points of spacing `step` inside the open disk of radius `n`.
fn lattice(n: f64, step: f64) -> Result<Vec<Point>, CliError> {
    if !(step > 0.0 && step.is_finite()) || n / step > 200.0 {
        return Err(CliError::Config(format!("profile step {step} is not usable for n = {n}")));
    }
    let k = (n / step).floor() as i64;
    let window = Region::disk(n);
    Ok((-k..=k)
        .flat_map(|i| (-k..=k).map(move |j| Point::new(i as f64 * step, j as f64 * step)))
        .filter(|p| window.contains(*p))
        .collect())
}

pub fn pivotal(ctx: &Context, a: PivotalArgs) -> Result<(), CliError> {
    let mut layer = ctx.layer(&a.config, "pivotal")?;
    layer
        .set("lambda", a.lambda)
        .set("p", a.p)
        .set("q", a.q)
        .set("n", a.n)
        .set("trials", a.trials)
        .set("kind", a.kind)
        .set("profileStep", a.profile_step)
        .set("profileTrials", a.profile_trials);
    let cfg: PivotalConfig = layer.resolve()?;
    let root = StreamSpec::new(cfg.master_seed).child(tag::PIVOTAL);
    let kinds = match cfg.kind {
        Some(k) => vec![k],
        None => vec![PivotalKind::Pivotal1, PivotalKind::Pivotal2],
    };
    let estimates = kinds
        .iter()
        .map(|&k| {
            let s = root.child(match k {
                PivotalKind::Pivotal1 => 1,
                PivotalKind::Pivotal2 => 2,
            });
            estimate_pivotal_integral(k, cfg.lambda, cfg.p, cfg.q, cfg.n, cfg.trials, &s, exec())
        })
        .collect::<gilbertlab_core::Result<Vec<_>>>()?;
    let mut out = OutDir::create(&ctx.out)?;
    out.write_json(
        "pivotal.json",
        &json!({ "schema_version": SCHEMA_VERSION, "parameters": &cfg, "estimates": estimates }),
    )?;
    if let Some(step) = cfg.profile_step {
        let grid = lattice(cfg.n, step)?;
        let rows = pivotal_ratio_profile(cfg.lambda, cfg.p, cfg.q, cfg.n, &grid, cfg.profile_trials, &root.child(3), exec())?;
        out.write_with("pivotal_ratio.csv", |buf| {
            let mut w = csv_writer(buf);
            w.write_record(["x", "y", "pivotal1", "pivotal1_se", "pivotal2", "pivotal2_se", "ratio", "trials"])?;
            for r in &rows {
                w.write_record([
                    r.x.to_string(),
                    r.y.to_string(),
                    r.pivotal1.to_string(),
                    r.pivotal1_se.to_string(),
                    r.pivotal2.to_string(),
                    r.pivotal2_se.to_string(),
                    r.ratio.map(|x| x.to_string()).unwrap_or_default(),
                    r.trials.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
    }
    out.finish("pivotal", &cfg, cfg.master_seed)
}

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::Writer::from_writer(buf)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct RussoArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// p, q or both.
    #[arg(long)]
    parameter: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    /// Finite-difference step.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RussoConfig {
    #[serde(default = "default_parameter")]
    parameter: String,
    lambda: f64,
    p: f64,
    q: f64,
    n: f64,
    #[serde(default = "default_h")]
    h: f64,
    #[serde(default = "default_russo_trials")]
    trials: u64,
    #[serde(default)]
    master_seed: u64,
}

fn default_parameter() -> String {
    "both".into()
}

fn default_h() -> f64 {
    0.05
}

fn default_russo_trials() -> u64 {
    100_000
}

pub fn russo_check(ctx: &Context, a: RussoArgs) -> Result<(), CliError> {
    let mut layer = ctx.layer(&a.config, "russo-check")?;
    layer
        .set("parameter", a.parameter)
        .set("lambda", a.lambda)
        .set("p", a.p)
        .set("q", a.q)
        .set("n", a.n)
        .set("h", a.h)
        .set("trials", a.trials);
    let cfg: RussoConfig = layer.resolve()?;
    let params = match cfg.parameter.as_str() {
        "p" => vec![Parameter::P],
        "q" => vec![Parameter::Q],
        "both" => vec![Parameter::P, Parameter::Q],
        other => return Err(CliError::Config(format!("parameter must be p, q or both, got {other:?}"))),
    };
    let root = StreamSpec::new(cfg.master_seed).child(tag::RUSSO);
    let checks = params
        .iter()
        .map(|&par| {
            let s = root.child(match par {
                Parameter::P => 0,
                Parameter::Q => 1,
            });
            run_russo(par, cfg.lambda, cfg.p, cfg.q, cfg.n, cfg.h, cfg.trials, &s, exec())
        })
        .collect::<gilbertlab_core::Result<Vec<_>>>()?;
    let mut out = OutDir::create(&ctx.out)?;
    out.write_json(
        "russo.json",
        &json!({ "schema_version": SCHEMA_VERSION, "parameters": &cfg, "checks": checks }),
    )?;
    out.finish("russo-check", &cfg, cfg.master_seed)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct CoupleArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    replicates: Option<u64>,
    /// Restrict each window to its largest connected component.
    #[arg(long)]
    largest_component: bool,
    /// Write the variable provenance of replicate 0.
    #[arg(long)]
    dump_provenance: bool,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct CoupleConfig {
    lambda: f64,
    n: f64,
    p: f64,
    #[serde(default = "default_couple_replicates")]
    replicates: u64,
    #[serde(default)]
    largest_component: bool,
    #[serde(default)]
    dump_provenance: bool,
    #[serde(default)]
    master_seed: u64,
}

fn default_couple_replicates() -> u64 {
    100
}

pub fn couple(ctx: &Context, a: CoupleArgs) -> Result<(), CliError> {
    let mut layer = ctx.layer(&a.config, "couple")?;
    layer
        .set("lambda", a.lambda)
        .set("n", a.n)
        .set("p", a.p)
        .set("replicates", a.replicates)
        .flag("largestComponent", a.largest_component)
        .flag("dumpProvenance", a.dump_provenance);
    let cfg: CoupleConfig = layer.resolve()?;
    let stream = StreamSpec::new(cfg.master_seed).child(tag::COUPLE);
    let reports = exec()
        .map(cfg.replicates as usize, |r| {
            coupling_replicate(cfg.lambda, cfg.n, cfg.p, cfg.largest_component, r as u64, &stream).map(|x| x.0)
        })
        .into_iter()
        .collect::<gilbertlab_core::Result<Vec<_>>>()?;
    let summary = summarize(cfg.lambda, cfg.n, cfg.p, cfg.largest_component, &reports);
    let mut out = OutDir::create(&ctx.out)?;
    out.write_json(
        "coupling.json",
        &json!({ "schema_version": SCHEMA_VERSION, "parameters": &cfg, "summary": &summary, "replicates": reports }),
    )?;
    if cfg.dump_provenance && cfg.replicates > 0 {
        let (_, state) = coupling_replicate(cfg.lambda, cfg.n, cfg.p, cfg.largest_component, 0, &stream)?;
        out.write_with("provenance.csv", |w| state.write_provenance_csv(w))?;
    }
    out.finish("couple", &cfg, cfg.master_seed)?;
    if summary.domination_violations > 0 || summary.double_consumed > 0 || summary.active_path_violations > 0 {
        return Err(gilbertlab_core::Error::InvariantFailure(format!(
            "{} domination violations, {} double-consumed variables, {} active-path violations",
            summary.domination_violations, summary.double_consumed, summary.active_path_violations
        ))
        .into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Fixture in the `index,x,y,Y,Z` point format.
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    /// Insertion location `x,y` for pivotal probabilities; repeatable.
    #[arg(long = "x", value_parser = parse_point)]
    x: Vec<[f64; 2]>,
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected x,y")?;
    Ok([
        a.trim().parse().map_err(|e| format!("{e}"))?,
        b.trim().parse().map_err(|e| format!("{e}"))?,
    ])
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct OracleConfig {
    fixture: PathBuf,
    p: f64,
    q: f64,
    n: f64,
    #[serde(default)]
    x: Vec<[f64; 2]>,
    #[serde(default)]
    master_seed: u64,
}

pub fn oracle(ctx: &Context, a: OracleArgs) -> Result<(), CliError> {
    let mut layer = ctx.layer(&a.config, "oracle")?;
    layer
        .set("fixture", a.fixture)
        .set("p", a.p)
        .set("q", a.q)
        .set("n", a.n)
        .set("x", (!a.x.is_empty()).then_some(a.x));
    let cfg: OracleConfig = layer.resolve()?;
    let file = File::open(&cfg.fixture).map_err(|e| CliError::io(&cfg.fixture, e))?;
    let set = MarkedPointSet::read_csv(file, Region::disk(f64::MAX.sqrt()))?;
    let fixture = FixturePointSet::from_point_set(&set)?;
    let locations: Vec<Point> = cfg.x.iter().map(|&[x, y]| Point::new(x, y)).collect();
    let report = oracle_report(&fixture, cfg.p, cfg.q, cfg.n, &locations)?;
    let mut out = OutDir::create(&ctx.out)?;
    out.write_json("oracle.json", &report)?;
    out.finish("oracle", &cfg, cfg.master_seed)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct CriticalArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Square half-widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<f64>>,
    /// Intensity grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    bootstrap: Option<u64>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct CriticalConfig {
    #[serde(default = "default_n_list")]
    sizes: Vec<f64>,
    #[serde(default = "default_lambda_grid")]
    lambda_grid: Vec<f64>,
    #[serde(default = "default_critical_replicates")]
    replicates: u64,
    #[serde(default = "default_bootstrap")]
    bootstrap: u64,
    #[serde(default = "default_level")]
    level: f64,
    #[serde(default)]
    master_seed: u64,
}

fn default_lambda_grid() -> Vec<f64> {
    LambdaCriticalConfig::default().lambda_grid
}

fn default_critical_replicates() -> u64 {
    LambdaCriticalConfig::default().replicates
}

fn default_bootstrap() -> u64 {
    LambdaCriticalConfig::default().bootstrap
}

fn default_level() -> f64 {
    0.95
}

pub fn critical(ctx: &Context, a: CriticalArgs) -> Result<(), CliError> {
    let mut layer = ctx.layer(&a.config, "critical")?;
    layer
        .set("sizes", a.sizes)
        .set("lambdaGrid", a.lambda_grid)
        .set("replicates", a.replicates)
        .set("bootstrap", a.bootstrap);
    let cfg: CriticalConfig = layer.resolve()?;
    let lc = LambdaCriticalConfig {
        sizes: cfg.sizes.clone(),
        lambda_grid: cfg.lambda_grid.clone(),
        replicates: cfg.replicates,
        bootstrap: cfg.bootstrap,
        level: cfg.level,
    };
    let est = estimate_lambda_c(&lc, &StreamSpec::new(cfg.master_seed).child(experiment::LAMBDA_C), exec())?;
    let mut out = OutDir::create(&ctx.out)?;
    out.write_json("critical.json", &est)?;
    out.write_with("critical_curves.csv", |buf| {
        let mut w = csv_writer(buf);
        w.write_record(["n", "lambda", "crossing", "se", "largest_fraction"])?;
        for r in &est.curves {
            w.write_record([
                r.n.to_string(),
                r.lambda.to_string(),
                r.crossing.to_string(),
                r.se.to_string(),
                r.largest_fraction.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.finish("critical", &cfg, cfg.master_seed)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct GapArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Intensity; defaults to `factor * lambdaC`.
    #[arg(long)]
    lambda: Option<f64>,
    /// Critical intensity estimate.
    #[arg(long)]
    lambda_c: Option<f64>,
    /// critical.json from a previous `critical` run, read for lambdaC.
    #[arg(long)]
    critical: Option<PathBuf>,
    #[arg(long)]
    factor: Option<f64>,
    /// Window radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<f64>>,
    /// Target width of each half-point interval.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    initial_replicates: Option<u64>,
    #[arg(long)]
    max_replicates: Option<u64>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct GapConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    critical: Option<PathBuf>,
    #[serde(default = "default_factor")]
    factor: f64,
    #[serde(default = "default_n_list")]
    sizes: Vec<f64>,
    #[serde(default = "default_tolerance")]
    tolerance: f64,
    #[serde(default = "default_initial")]
    initial_replicates: u64,
    #[serde(default = "default_max")]
    max_replicates: u64,
    #[serde(default)]
    master_seed: u64,
}

fn default_factor() -> f64 {
    2.0
}

fn default_tolerance() -> f64 {
    HalfPointOptions::default().tolerance
}

fn default_initial() -> u64 {
    HalfPointOptions::default().initial_replicates
}

fn default_max() -> u64 {
    HalfPointOptions::default().max_replicates
}

pub fn gap(ctx: &Context, a: GapArgs) -> Result<(), CliError> {
    let mut layer = ctx.layer(&a.config, "gap")?;
    layer
        .set("lambda", a.lambda)
        .set("lambdaC", a.lambda_c)
        .set("critical", a.critical)
        .set("factor", a.factor)
        .set("sizes", a.sizes)
        .set("tolerance", a.tolerance)
        .set("initialReplicates", a.initial_replicates)
        .set("maxReplicates", a.max_replicates);
    let mut cfg: GapConfig = layer.resolve()?;
    if cfg.lambda_c.is_none() {
        if let Some(path) = &cfg.critical {
            let file = File::open(path).map_err(|e| CliError::io(path, e))?;
            let est: CriticalEstimate =
                serde_json::from_reader(file).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            cfg.lambda_c = Some(est.point_estimate);
        }
    }
    // The manifest records the intensity actually used.
    let lambda = match (cfg.lambda, cfg.lambda_c) {
        (Some(l), _) => l,
        (None, Some(c)) => cfg.factor * c,
        (None, None) => return Err(CliError::Config("gap needs lambda, lambdaC or a critical.json".into())),
    };
    cfg.lambda = Some(lambda);
    let opts = HalfPointOptions {
        initial_replicates: cfg.initial_replicates,
        max_replicates: cfg.max_replicates,
        tolerance: cfg.tolerance,
        level: 0.95,
    };
    let report = gap_experiment(
        lambda,
        &cfg.sizes,
        cfg.lambda_c,
        &opts,
        &StreamSpec::new(cfg.master_seed).child(experiment::GAP),
        exec(),
    )?;
    let mut out = OutDir::create(&ctx.out)?;
    out.write_json("gap.json", &report)?;
    out.finish("gap", &cfg, cfg.master_seed)
}
