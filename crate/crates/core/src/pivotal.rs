//! Insertion pivotality and the derivative identities of the enhanced model.
//!
//! Inserting a vertex at `x` with marks `(Y0, Z0)` into a configuration on
//! `B_n`:
//!
//! * `x` is 1-pivotal when `A_n` occurs with `Y0 = 0` but not with `Y0 = 1`
//!   (the sampled `Z0` is kept in both evaluations);
//! * `x` is 2-pivotal when `Y0 > p` and `A_n` occurs with `Z0 = 0` but not
//!   with `Z0 = 1`.
//!
//! By the Mecke formula the derivative of `theta_n` in `p` (resp. `q`) equals
//! `lambda * |B_n| * P[x uniform on B_n is 1-pivotal]` (resp. 2-pivotal). The
//! estimators below compute both sides independently.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::enhancement::{bow_tie, coloured_set, BowTieWitness};
use crate::error::{check_unit, invalid, Result};
use crate::exec::Execution;
use crate::graph::{build_graph, GilbertGraph};
use crate::percolation::{crossing_occurs, CrossingSpec};
use crate::point_process::{sample_poisson, MarkedPointSet, Marks, Point, Region};
use crate::stats::Proportion;
use crate::stream::{purpose, StreamSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotalKind {
    Pivotal1,
    Pivotal2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    P,
    Q,
}

impl Parameter {
    pub fn pivotal_kind(self) -> PivotalKind {
        match self {
            Parameter::P => PivotalKind::Pivotal1,
            Parameter::Q => PivotalKind::Pivotal2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InsertionTrial {
    pub base: MarkedPointSet,
    pub location: Point,
    pub marks: Marks,
}

/// Occurrence of `A_n` under the "low" override (`Y0 = 0` or `Z0 = 0`) and the
/// "high" override (`Y0 = 1` or `Z0 = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlipOutcome {
    pub occurs_low: bool,
    pub occurs_high: bool,
}

impl FlipOutcome {
    pub fn is_pivotal(&self) -> bool {
        self.occurs_low && !self.occurs_high
    }
}

/// The window configuration with the trial vertex inserted, its graph and the
/// inserted vertex's index.
struct Inserted {
    set: MarkedPointSet,
    graph: GilbertGraph,
    index: usize,
    spec: CrossingSpec,
}

impl Inserted {
    fn new(trial: &InsertionTrial, n: f64) -> Result<Self> {
        let spec = CrossingSpec::new(n)?;
        let window = spec.window();
        if !window.contains(trial.location) {
            return invalid(format!(
                "insertion point ({}, {}) lies outside B_{n}",
                trial.location.x, trial.location.y
            ));
        }
        let base = trial.base.restrict_to(&window);
        let (set, index) = base.insert(trial.location, trial.marks);
        let graph = build_graph(&set);
        Ok(Self {
            set,
            graph,
            index,
            spec,
        })
    }

    fn occurs_with(&mut self, marks: Marks, p: f64, q: f64) -> bool {
        self.set.marks[self.index] = marks;
        crossing_occurs(&self.graph, &coloured_set(&self.graph, &self.set, p, q), &self.spec)
    }
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    check_unit("p", p)?;
    check_unit("q", q)
}

pub fn pivotal_1_outcome(trial: &InsertionTrial, p: f64, q: f64, n: f64) -> Result<FlipOutcome> {
    check_pq(p, q)?;
    let mut ins = Inserted::new(trial, n)?;
    let z0 = trial.marks.enhance;
    let occurs_low = ins.occurs_with(Marks::new(0.0, z0), p, q);
    let occurs_high = ins.occurs_with(Marks::new(1.0, z0), p, q);
    Ok(FlipOutcome {
        occurs_low,
        occurs_high,
    })
}

pub fn is_pivotal_1(trial: &InsertionTrial, p: f64, q: f64, n: f64) -> Result<bool> {
    Ok(pivotal_1_outcome(trial, p, q, n)?.is_pivotal())
}

/// 2-pivotal outcome plus the inserted vertex's bow-tie witness (when the
/// inserted vertex is closed and correctly configured). `None` outcome means
/// `Y0 <= p`, so the trial cannot be 2-pivotal.
pub fn pivotal_2_outcome(
    trial: &InsertionTrial,
    p: f64,
    q: f64,
    n: f64,
) -> Result<(Option<FlipOutcome>, Option<BowTieWitness>)> {
    check_pq(p, q)?;
    let mut ins = Inserted::new(trial, n)?;
    let y0 = trial.marks.site;
    if y0 <= p {
        return Ok((None, None));
    }
    let occurs_low = ins.occurs_with(Marks::new(y0, 0.0), p, q);
    let occurs_high = ins.occurs_with(Marks::new(y0, 1.0), p, q);
    let red: Vec<bool> = ins.set.marks.iter().map(|m| m.site < p).collect();
    let witness = bow_tie(&ins.graph, &red, ins.index);
    Ok((
        Some(FlipOutcome {
            occurs_low,
            occurs_high,
        }),
        witness,
    ))
}

pub fn is_pivotal_2(trial: &InsertionTrial, p: f64, q: f64, n: f64) -> Result<bool> {
    Ok(pivotal_2_outcome(trial, p, q, n)?.0.is_some_and(|o| o.is_pivotal()))
}

pub fn is_pivotal(kind: PivotalKind, trial: &InsertionTrial, p: f64, q: f64, n: f64) -> Result<bool> {
    match kind {
        PivotalKind::Pivotal1 => is_pivotal_1(trial, p, q, n),
        PivotalKind::Pivotal2 => is_pivotal_2(trial, p, q, n),
    }
}

/// Uniform point of a region by rejection from its bounding box.
pub fn uniform_point<R: Rng>(rng: &mut R, region: &Region) -> Point {
    let (lo, hi) = region.bounding_box();
    loop {
        let p = Point::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if region.contains(p) {
            return p;
        }
    }
}

/// Fresh base configuration on `B_n` for one trial.
pub fn trial_configuration(lambda: f64, n: f64, stream: &StreamSpec) -> Result<MarkedPointSet> {
    sample_poisson(&Region::disk(n), lambda, &stream.child(purpose::POINTS))
}

/// Full insertion trial: configuration, uniform location and fresh marks.
pub fn sample_trial(lambda: f64, n: f64, stream: &StreamSpec) -> Result<InsertionTrial> {
    let base = trial_configuration(lambda, n, stream)?;
    let mut rng = stream.child(purpose::INSERTION).rng();
    let location = uniform_point(&mut rng, &Region::disk(n));
    let marks = Marks::new(rng.random(), rng.random());
    Ok(InsertionTrial {
        base,
        location,
        marks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PivotalEstimate {
    pub kind: PivotalKind,
    pub lambda: f64,
    pub n: f64,
    pub p: f64,
    pub q: f64,
    /// Fraction of pivotal trials: the average of `P_{n,i}(x)` over uniform `x`.
    pub frequency: f64,
    /// `lambda * pi * n^2 * frequency`.
    pub estimate: f64,
    pub standard_error: f64,
    pub pivotal_count: u64,
    pub trials: u64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return invalid(format!("intensity must be finite and nonnegative, got {lambda}"));
    }
    Ok(())
}

/// Monte Carlo estimate of `integral over B_n of lambda * P_{n,i}(x) dx`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_pivotal_integral(
    kind: PivotalKind,
    lambda: f64,
    p: f64,
    q: f64,
    n: f64,
    trials: u64,
    stream: &StreamSpec,
    exec: Execution,
) -> Result<PivotalEstimate> {
    check_pq(p, q)?;
    check_lambda(lambda)?;
    CrossingSpec::new(n)?;
    if trials == 0 {
        return invalid("at least one trial is required");
    }
    let hits = exec.map(trials as usize, |t| -> Result<bool> {
        let trial = sample_trial(lambda, n, &stream.child(t as u64))?;
        is_pivotal(kind, &trial, p, q, n)
    });
    let mut count = 0u64;
    for h in hits {
        count += h? as u64;
    }
    let prop = Proportion::new(count, trials);
    let scale = lambda * PI * n * n;
    Ok(PivotalEstimate {
        kind,
        lambda,
        n,
        p,
        q,
        frequency: prop.estimate(),
        estimate: scale * prop.estimate(),
        standard_error: scale * prop.se(),
        pivotal_count: count,
        trials,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteDifference {
    pub h: f64,
    pub estimate: f64,
    pub standard_error: f64,
    /// Trials in which `A_n` occurred at the upper but not the lower point.
    pub flips: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub parameter: Parameter,
    pub lambda: f64,
    pub n: f64,
    pub p: f64,
    pub q: f64,
    pub finite_difference: FiniteDifference,
    /// Same configurations at step `h / 2`, to show the step bias is small.
    pub half_step: FiniteDifference,
    pub pivotal: PivotalEstimate,
    pub combined_se: f64,
    /// `|fd - integral| / combined_se`.
    pub discrepancy_se: f64,
}

impl DerivativeCheck {
    pub fn consistent_within(&self, k: f64) -> bool {
        (self.finite_difference.estimate - self.pivotal.estimate).abs() <= k * self.combined_se
    }
}

/// Central finite differences of `theta_n` with common random numbers: each
/// configuration is evaluated at `x - h` and `x + h` (and at `x -/+ h/2`), so
/// the difference of indicators is itself a 0/1 flip indicator.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference(
    parameter: Parameter,
    lambda: f64,
    p: f64,
    q: f64,
    n: f64,
    h: f64,
    trials: u64,
    stream: &StreamSpec,
    exec: Execution,
) -> Result<(FiniteDifference, FiniteDifference)> {
    let spec = CrossingSpec::new(n)?;
    let at = |step: f64, sign: f64| match parameter {
        Parameter::P => (p + sign * step, q),
        Parameter::Q => (p, q + sign * step),
    };
    let flips = exec.map(trials as usize, |t| -> Result<(bool, bool)> {
        let config = trial_configuration(lambda, n, &stream.child(t as u64))?;
        let graph = build_graph(&config);
        let occurs = |(pp, qq): (f64, f64)| crossing_occurs(&graph, &coloured_set(&graph, &config, pp, qq), &spec);
        let full = occurs(at(h, 1.0)) && !occurs(at(h, -1.0));
        let half = occurs(at(h / 2.0, 1.0)) && !occurs(at(h / 2.0, -1.0));
        Ok((full, half))
    });
    let (mut full, mut half) = (0u64, 0u64);
    for f in flips {
        let (a, b) = f?;
        full += a as u64;
        half += b as u64;
    }
    let make = |count: u64, step: f64| {
        let prop = Proportion::new(count, trials);
        FiniteDifference {
            h: step,
            estimate: prop.estimate() / (2.0 * step),
            standard_error: prop.se() / (2.0 * step),
            flips: count,
        }
    };
    Ok((make(full, h), make(half, h / 2.0)))
}

/// Compares the finite-difference derivative of `theta_n` in `p` or `q` with
/// the pivotal integral, on independent streams.
#[allow(clippy::too_many_arguments)]
pub fn russo_check(
    parameter: Parameter,
    lambda: f64,
    p: f64,
    q: f64,
    n: f64,
    h: f64,
    trials: u64,
    stream: &StreamSpec,
    exec: Execution,
) -> Result<DerivativeCheck> {
    check_pq(p, q)?;
    check_lambda(lambda)?;
    let centre = match parameter {
        Parameter::P => p,
        Parameter::Q => q,
    };
    if !(h > 0.0 && h < centre.min(1.0 - centre)) {
        return invalid(format!(
            "step h = {h} must satisfy 0 < h < min(x, 1 - x) at x = {centre}"
        ));
    }
    if trials == 0 {
        return invalid("at least one trial is required");
    }
    let (fd, half) = finite_difference(parameter, lambda, p, q, n, h, trials, &stream.child(0), exec)?;
    let pivotal = estimate_pivotal_integral(
        parameter.pivotal_kind(),
        lambda,
        p,
        q,
        n,
        trials,
        &stream.child(1),
        exec,
    )?;
    let combined_se = (fd.standard_error.powi(2) + pivotal.standard_error.powi(2)).sqrt();
    let gap = (fd.estimate - pivotal.estimate).abs();
    let discrepancy_se = if combined_se > 0.0 {
        gap / combined_se
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(DerivativeCheck {
        parameter,
        lambda,
        n,
        p,
        q,
        finite_difference: fd,
        half_step: half,
        pivotal,
        combined_se,
        discrepancy_se,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub x: f64,
    pub y: f64,
    pub pivotal1: f64,
    pub pivotal1_se: f64,
    pub pivotal2: f64,
    pub pivotal2_se: f64,
    /// `P2 / P1`, absent where no 1-pivotal trial was observed.
    pub ratio: Option<f64>,
    pub trials: u64,
}

/// Per-location estimates of `P_{n,1}(x)` and `P_{n,2}(x)` and their ratio.
/// Both kinds are evaluated on the same trials.
#[allow(clippy::too_many_arguments)]
pub fn pivotal_ratio_profile(
    lambda: f64,
    p: f64,
    q: f64,
    n: f64,
    grid: &[Point],
    trials: u64,
    stream: &StreamSpec,
    exec: Execution,
) -> Result<Vec<RatioRow>> {
    check_pq(p, q)?;
    check_lambda(lambda)?;
    let window = CrossingSpec::new(n)?.window();
    if let Some(bad) = grid.iter().find(|x| !window.contains(**x)) {
        return invalid(format!("grid point ({}, {}) lies outside B_{n}", bad.x, bad.y));
    }
    if trials == 0 {
        return invalid("at least one trial is required");
    }
    grid.iter()
        .enumerate()
        .map(|(g, &location)| {
            let gs = stream.child(g as u64);
            let outcomes = exec.map(trials as usize, |t| -> Result<(bool, bool)> {
                let ts = gs.child(t as u64);
                let base = trial_configuration(lambda, n, &ts)?;
                let mut rng = ts.child(purpose::INSERTION).rng();
                let marks = Marks::new(rng.random(), rng.random());
                let trial = InsertionTrial {
                    base,
                    location,
                    marks,
                };
                Ok((is_pivotal_1(&trial, p, q, n)?, is_pivotal_2(&trial, p, q, n)?))
            });
            let (mut c1, mut c2) = (0u64, 0u64);
            for o in outcomes {
                let (a, b) = o?;
                c1 += a as u64;
                c2 += b as u64;
            }
            let (p1, p2) = (Proportion::new(c1, trials), Proportion::new(c2, trials));
            Ok(RatioRow {
                x: location.x,
                y: location.y,
                pivotal1: p1.estimate(),
                pivotal1_se: p1.se(),
                pivotal2: p2.estimate(),
                pivotal2_se: p2.se(),
                ratio: (c1 > 0).then(|| p2.estimate() / p1.estimate()),
                trials,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(coords: &[(f64, f64)], marks: &[Marks], n: f64) -> MarkedPointSet {
        let pts = coords.iter().map(|&(x, y)| Point::new(x, y)).collect();
        MarkedPointSet::from_parts(pts, marks.to_vec(), Region::disk(n), 1.0, 0)
    }

    #[test]
    fn empty_base_is_never_pivotal() {
        let trial = InsertionTrial {
            base: MarkedPointSet::unmarked(vec![], Region::disk(3.0)),
            location: Point::new(0.1, 0.0),
            marks: Marks::new(0.5, 0.5),
        };
        assert!(!is_pivotal_1(&trial, 0.5, 0.5, 3.0).unwrap());
        assert!(!is_pivotal_2(&trial, 0.5, 0.5, 3.0).unwrap());
    }

    #[test]
    fn completing_the_only_path() {
        let base = set(&[(0.0, 0.0), (1.8, 0.0)], &[Marks::new(0.1, 0.5); 2], 2.0);
        let trial = InsertionTrial {
            base,
            location: Point::new(0.9, 0.0),
            marks: Marks::new(0.7, 0.2),
        };
        let out = pivotal_1_outcome(&trial, 0.5, 0.5, 2.0).unwrap();
        assert_eq!(
            out,
            FlipOutcome {
                occurs_low: true,
                occurs_high: false
            }
        );
    }

    #[test]
    fn outside_location_is_rejected() {
        let trial = InsertionTrial {
            base: MarkedPointSet::unmarked(vec![], Region::disk(2.0)),
            location: Point::new(2.0, 0.0),
            marks: Marks::new(0.5, 0.5),
        };
        assert!(is_pivotal_1(&trial, 0.5, 0.5, 2.0).is_err());
    }

    /// Source pair, two red arm pairs around an empty centre, target vertex.
    fn bridge_without_centre() -> MarkedPointSet {
        set(
            &[
                (0.2, 0.0),
                (0.3, -0.2),
                (1.1, 0.1),
                (1.1, -0.1),
                (2.9, 0.1),
                (2.9, -0.1),
                (3.7, 0.0),
            ],
            &[Marks::new(0.1, 0.5); 7],
            4.0,
        )
    }

    #[test]
    fn green_centre_bridges_the_arms() {
        let trial = InsertionTrial {
            base: bridge_without_centre(),
            location: Point::new(2.0, 0.0),
            marks: Marks::new(0.9, 0.3),
        };
        let (out, witness) = pivotal_2_outcome(&trial, 0.7, 0.5, 4.0).unwrap();
        assert!(out.unwrap().is_pivotal());
        assert!(witness.is_some());
        // Red insertion would cross too, so with Z0 = 0.3 < q the closed vertex
        // turns green and the trial is not 1-pivotal.
        assert!(!is_pivotal_1(&trial, 0.7, 0.5, 4.0).unwrap());
        // With Z0 above q it is.
        let high_z = InsertionTrial {
            marks: Marks::new(0.9, 0.8),
            ..trial.clone()
        };
        assert!(is_pivotal_1(&high_z, 0.7, 0.5, 4.0).unwrap());
    }

    #[test]
    fn red_insertion_is_not_2_pivotal() {
        let trial = InsertionTrial {
            base: bridge_without_centre(),
            location: Point::new(2.0, 0.0),
            marks: Marks::new(0.7, 0.3),
        };
        assert!(!is_pivotal_2(&trial, 0.7, 0.5, 4.0).unwrap());
    }

    #[test]
    fn three_neighbours_cannot_be_2_pivotal() {
        let mut base = bridge_without_centre();
        base = base.remove(base.points.iter().position(|p| *p == Point::new(2.9, -0.1)).unwrap());
        let trial = InsertionTrial {
            base,
            location: Point::new(2.0, 0.0),
            marks: Marks::new(0.9, 0.3),
        };
        let (out, witness) = pivotal_2_outcome(&trial, 0.7, 0.5, 4.0).unwrap();
        assert!(!out.unwrap().is_pivotal());
        assert!(witness.is_none());
    }

    #[test]
    fn degenerate_parameters_give_zero() {
        let st = StreamSpec::new(3);
        let e = estimate_pivotal_integral(PivotalKind::Pivotal2, 2.0, 1.0, 0.5, 3.0, 200, &st, Execution::Parallel).unwrap();
        assert_eq!(e.estimate, 0.0);
        let e = estimate_pivotal_integral(PivotalKind::Pivotal1, 2.0, 0.0, 0.5, 3.0, 200, &st, Execution::Parallel).unwrap();
        assert_eq!(e.estimate, 0.0);
    }

    #[test]
    fn flat_region_has_zero_derivative() {
        // Tiny p: no red vertices anywhere, theta is identically zero near p.
        let c = russo_check(Parameter::P, 1.0, 0.002, 0.3, 3.0, 0.001, 300, &StreamSpec::new(4), Execution::Parallel).unwrap();
        assert_eq!(c.finite_difference.estimate, 0.0);
        assert!(c.pivotal.estimate <= 3.0 * c.pivotal.standard_error + 1e-12);
    }

    #[test]
    fn invalid_step_is_rejected() {
        let st = StreamSpec::new(1);
        assert!(russo_check(Parameter::P, 2.0, 0.7, 0.3, 4.0, 0.35, 10, &st, Execution::Sequential).is_err());
        assert!(russo_check(Parameter::Q, 2.0, 0.7, 0.3, 4.0, 0.0, 10, &st, Execution::Sequential).is_err());
        assert!(russo_check(Parameter::Q, 2.0, 0.7, 0.3, 4.0, 0.2, 10, &st, Execution::Sequential).is_ok());
    }

    #[test]
    fn ratio_undefined_without_pivotal1() {
        let rows = pivotal_ratio_profile(0.5, 0.0, 0.5, 3.0, &[Point::new(0.0, 0.0)], 50, &StreamSpec::new(2), Execution::Sequential).unwrap();
        assert_eq!(rows[0].pivotal1, 0.0);
        assert!(rows[0].ratio.is_none());
    }
}
