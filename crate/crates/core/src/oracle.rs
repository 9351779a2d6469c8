//! Exact probabilities on small fixed point sets by exhaustive enumeration.
//!
//! The primary route enumerates the `2^k` red/closed splits and, for each,
//! the subsets of correctly configured centres that turn green. The second
//! route enumerates the `3^k` joint mark classes (red, closed with low `Z`,
//! closed with high `Z`) directly and never asks which centres are
//! configured up front. Both are summed with compensated summation in a fixed
//! block order, so results do not depend on the thread count.

use serde::{Deserialize, Serialize};

use crate::enhancement::{bow_tie, configured_centers};
use crate::error::{check_unit, invalid, Error, Result};
use crate::exec::Execution;
use crate::graph::{build_graph, GilbertGraph};
use crate::percolation::{crossing_occurs, CrossingSpec};
use crate::pivotal::PivotalKind;
use crate::point_process::{MarkedPointSet, Marks, Point, Region};
use crate::stats::CompensatedSum;

pub const DEFAULT_CAP: usize = 14;

#[derive(Clone, Debug, PartialEq)]
pub struct FixturePointSet {
    pub points: MarkedPointSet,
    pub graph: GilbertGraph,
}

impl FixturePointSet {
    pub fn new(coords: &[Point]) -> Result<Self> {
        Self::with_cap(coords, DEFAULT_CAP)
    }

    pub fn with_cap(coords: &[Point], cap: usize) -> Result<Self> {
        if coords.len() > cap {
            return Err(Error::FixtureTooLarge {
                count: coords.len(),
                cap,
            });
        }
        if coords.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return invalid("fixture coordinates must be finite");
        }
        let extent = coords.iter().map(|p| p.norm_sq().sqrt()).fold(1.0, f64::max);
        let points = MarkedPointSet::unmarked(coords.to_vec(), Region::disk(extent + 1.0));
        let graph = build_graph(&points);
        Ok(Self { points, graph })
    }

    pub fn from_point_set(set: &MarkedPointSet) -> Result<Self> {
        Self::new(&set.points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check_window(&self, n: f64) -> Result<CrossingSpec> {
        let spec = CrossingSpec::new(n)?;
        if let Some(p) = self.points.points.iter().find(|p| !spec.window().contains(**p)) {
            return invalid(format!("fixture point ({}, {}) lies outside B_{n}", p.x, p.y));
        }
        Ok(spec)
    }

    /// The fixture with a given mark assignment, for Monte Carlo comparison.
    pub fn with_marks(&self, marks: Vec<Marks>) -> MarkedPointSet {
        self.points.with_marks(marks)
    }
}

/// Eight vertices: two sources near the origin, a left arm pair, a bow-tie
/// centre at (2, 0), a right arm pair and a target in the annulus of `B_4`.
/// Every crossing passes through the centre, either red or green.
pub fn bowtie_bridge_fixture() -> FixturePointSet {
    FixturePointSet::new(&bowtie_bridge_points()).expect("fixture within cap")
}

pub fn bowtie_bridge_points() -> Vec<Point> {
    [
        (0.2, 0.0),
        (0.3, -0.2),
        (1.1, 0.1),
        (1.1, -0.1),
        (2.0, 0.0),
        (2.9, 0.1),
        (2.9, -0.1),
        (3.7, 0.0),
    ]
    .iter()
    .map(|&(x, y)| Point::new(x, y))
    .collect()
}

/// The bridge fixture without its centre; inserting at (2, 0) restores it.
pub fn open_bridge_fixture() -> FixturePointSet {
    let pts: Vec<Point> = bowtie_bridge_points()
        .into_iter()
        .filter(|p| *p != Point::new(2.0, 0.0))
        .collect();
    FixturePointSet::new(&pts).expect("fixture within cap")
}

fn pow_weight(p: f64, on: u32, off: u32) -> f64 {
    p.powi(on as i32) * (1.0 - p).powi(off as i32)
}

const BLOCK: u64 = 256;

/// Sums `term(mask)` over `0..count` in fixed blocks.
fn block_sum<F>(count: u64, exec: Execution, term: F) -> f64
where
    F: Fn(u64) -> f64 + Sync + Send,
{
    let blocks = count.div_ceil(BLOCK);
    let partial = exec.map(blocks as usize, |b| {
        let start = b as u64 * BLOCK;
        let end = (start + BLOCK).min(count);
        (start..end).map(&term).collect::<CompensatedSum>().value()
    });
    partial.into_iter().collect::<CompensatedSum>().value()
}

fn red_from_mask(mask: u64, k: usize) -> Vec<bool> {
    (0..k).map(|i| mask >> i & 1 == 1).collect()
}

/// Exact `theta_n(p, q)` on a fixture (red/closed splits outer, green subsets inner).
pub fn exact_theta(fixture: &FixturePointSet, p: f64, q: f64, n: f64) -> Result<f64> {
    exact_theta_with(fixture, p, q, n, Execution::default())
}

pub fn exact_theta_with(fixture: &FixturePointSet, p: f64, q: f64, n: f64, exec: Execution) -> Result<f64> {
    check_unit("p", p)?;
    check_unit("q", q)?;
    let spec = fixture.check_window(n)?;
    let k = fixture.len();
    let g = &fixture.graph;
    Ok(block_sum(1u64 << k, exec, |mask| {
        let red = red_from_mask(mask, k);
        let reds = mask.count_ones();
        let w_site = pow_weight(p, reds, k as u32 - reds);
        if w_site == 0.0 {
            return 0.0;
        }
        let centers = configured_centers(g, &red);
        let c = centers.len();
        let mut inner = CompensatedSum::default();
        for s in 0u64..(1 << c) {
            let greens = s.count_ones();
            let w = pow_weight(q, greens, c as u32 - greens);
            if w == 0.0 {
                continue;
            }
            let mut coloured = red.clone();
            for (j, wit) in centers.iter().enumerate() {
                if s >> j & 1 == 1 {
                    coloured[wit.center] = true;
                }
            }
            if crossing_occurs(g, &coloured, &spec) {
                inner.add(w);
            }
        }
        w_site * inner.value()
    }))
}

/// Exact `theta_n(p, q)` by enumerating the three mark classes of every
/// vertex jointly.
pub fn exact_theta_joint(fixture: &FixturePointSet, p: f64, q: f64, n: f64) -> Result<f64> {
    check_unit("p", p)?;
    check_unit("q", q)?;
    let spec = fixture.check_window(n)?;
    let k = fixture.len();
    let g = &fixture.graph;
    let class_weight = [p, (1.0 - p) * q, (1.0 - p) * (1.0 - q)];
    let total = 3u64.pow(k as u32);
    Ok(block_sum(total, Execution::default(), |code| {
        // Digit i of `code` in base 3 is the class of vertex i; the low-Z
        // digits vary slowest when read from the top.
        let mut classes = vec![0u8; k];
        let mut rest = code;
        for c in classes.iter_mut() {
            *c = (rest % 3) as u8;
            rest /= 3;
        }
        let w: f64 = classes.iter().map(|&c| class_weight[c as usize]).product();
        if w == 0.0 {
            return 0.0;
        }
        let red: Vec<bool> = classes.iter().map(|&c| c == 0).collect();
        let coloured: Vec<bool> = (0..k)
            .map(|v| red[v] || (classes[v] == 1 && bow_tie(g, &red, v).is_some()))
            .collect();
        if crossing_occurs(g, &coloured, &spec) {
            w
        } else {
            0.0
        }
    }))
}

/// Exact probability that inserting a vertex at `x` is 1- or 2-pivotal.
pub fn exact_pivotal(
    fixture: &FixturePointSet,
    x: Point,
    p: f64,
    q: f64,
    n: f64,
    kind: PivotalKind,
) -> Result<f64> {
    check_unit("p", p)?;
    check_unit("q", q)?;
    let spec = fixture.check_window(n)?;
    if !spec.window().contains(x) {
        return invalid(format!("insertion point ({}, {}) lies outside B_{n}", x.x, x.y));
    }
    let (set, x_idx) = fixture.points.insert(x, Marks::new(0.0, 0.0));
    let g = build_graph(&set);
    let k = fixture.len();
    // Fixture vertex i sits at index i or i + 1 in the augmented graph.
    let slot = |i: usize| if i < x_idx { i } else { i + 1 };

    Ok(block_sum(1u64 << k, Execution::default(), |mask| {
        let reds = mask.count_ones();
        let w_site = pow_weight(p, reds, k as u32 - reds);
        if w_site == 0.0 {
            return 0.0;
        }
        let mut red = vec![false; k + 1];
        for i in 0..k {
            red[slot(i)] = mask >> i & 1 == 1;
        }
        let flips = |low_red: &[bool], high_red: &[bool], low_extra: bool, high_extra: bool| -> f64 {
            // Green candidates among fixture vertices under either evaluation.
            let low_c: Vec<usize> = configured_centers(&g, low_red)
                .iter()
                .map(|w| w.center)
                .filter(|&c| c != x_idx)
                .collect();
            let high_c: Vec<usize> = configured_centers(&g, high_red)
                .iter()
                .map(|w| w.center)
                .filter(|&c| c != x_idx)
                .collect();
            let mut union: Vec<usize> = low_c.iter().chain(&high_c).copied().collect();
            union.sort_unstable();
            union.dedup();
            let u = union.len();
            let mut acc = CompensatedSum::default();
            for s in 0u64..(1 << u) {
                let greens = s.count_ones();
                let w = pow_weight(q, greens, u as u32 - greens);
                if w == 0.0 {
                    continue;
                }
                let mut lo = low_red.to_vec();
                let mut hi = high_red.to_vec();
                for (j, &c) in union.iter().enumerate() {
                    if s >> j & 1 == 1 {
                        if low_c.contains(&c) {
                            lo[c] = true;
                        }
                        if high_c.contains(&c) {
                            hi[c] = true;
                        }
                    }
                }
                lo[x_idx] |= low_extra;
                hi[x_idx] |= high_extra;
                if crossing_occurs(&g, &lo, &spec) && !crossing_occurs(&g, &hi, &spec) {
                    acc.add(w);
                }
            }
            acc.value()
        };
        let mut closed = red.clone();
        closed[x_idx] = false;
        match kind {
            PivotalKind::Pivotal1 => {
                let mut low = red.clone();
                low[x_idx] = p > 0.0;
                // Closed insertion: green only if configured and Z0 < q.
                let configured = bow_tie(&g, &closed, x_idx).is_some();
                let with_low_z = if configured && q > 0.0 {
                    q * flips(&low, &closed, false, true)
                } else {
                    0.0
                };
                let with_high_z = (if configured { 1.0 - q } else { 1.0 }) * flips(&low, &closed, false, false);
                w_site * (with_low_z + with_high_z)
            }
            PivotalKind::Pivotal2 => {
                if p >= 1.0 {
                    return 0.0;
                }
                let configured = bow_tie(&g, &closed, x_idx).is_some();
                if !configured || q <= 0.0 {
                    return 0.0;
                }
                w_site * (1.0 - p) * flips(&closed, &closed, true, false)
            }
        }
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub schema_version: u32,
    pub vertices: usize,
    pub p: f64,
    pub q: f64,
    pub n: f64,
    pub theta: f64,
    pub theta_joint: f64,
    pub pivotal: Vec<PivotalValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PivotalValue {
    pub x: f64,
    pub y: f64,
    pub pivotal1: f64,
    pub pivotal2: f64,
}

pub fn oracle_report(fixture: &FixturePointSet, p: f64, q: f64, n: f64, locations: &[Point]) -> Result<OracleReport> {
    let pivotal = locations
        .iter()
        .map(|&x| {
            Ok(PivotalValue {
                x: x.x,
                y: x.y,
                pivotal1: exact_pivotal(fixture, x, p, q, n, PivotalKind::Pivotal1)?,
                pivotal2: exact_pivotal(fixture, x, p, q, n, PivotalKind::Pivotal2)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleReport {
        schema_version: 1,
        vertices: fixture.len(),
        p,
        q,
        n,
        theta: exact_theta(fixture, p, q, n)?,
        theta_joint: exact_theta_joint(fixture, p, q, n)?,
        pivotal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form for the bridge fixture: a red source, one red vertex in
    /// each arm pair, a red target, and a red centre or a configured green one.
    fn bridge_theta(p: f64, q: f64) -> f64 {
        let pair = 1.0 - (1.0 - p).powi(2);
        pair * p * (p * pair * pair + (1.0 - p) * q * p.powi(4))
    }

    #[test]
    fn two_points_need_both_red() {
        let f = FixturePointSet::new(&[Point::new(0.0, 0.0), Point::new(0.9, 0.0)]).unwrap();
        for p in [0.1, 0.5, 0.8] {
            assert!((exact_theta(&f, p, 0.0, 1.0).unwrap() - p * p).abs() < 1e-15);
        }
    }

    #[test]
    fn bridge_fixture_matches_closed_form() {
        let f = bowtie_bridge_fixture();
        for &(p, q) in &[(0.5, 0.5), (0.7, 0.3), (0.9, 0.1), (0.7, 0.5)] {
            let a = exact_theta(&f, p, q, 4.0).unwrap();
            let b = exact_theta_joint(&f, p, q, 4.0).unwrap();
            assert!((a - bridge_theta(p, q)).abs() < 1e-13, "{p} {q}");
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn p_one_is_connectivity() {
        let f = bowtie_bridge_fixture();
        assert_eq!(exact_theta(&f, 1.0, 0.3, 4.0).unwrap(), 1.0);
        let gap = FixturePointSet::new(&[Point::new(0.0, 0.0), Point::new(3.7, 0.0)]).unwrap();
        assert_eq!(exact_theta(&gap, 1.0, 0.3, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        let pts: Vec<Point> = (0..15).map(|i| Point::new(i as f64 * 0.1, 0.0)).collect();
        assert!(matches!(
            FixturePointSet::new(&pts),
            Err(Error::FixtureTooLarge { count: 15, cap: 14 })
        ));
    }

    #[test]
    fn points_outside_window_are_rejected() {
        let f = bowtie_bridge_fixture();
        assert!(exact_theta(&f, 0.5, 0.5, 3.0).is_err());
    }

    #[test]
    fn empty_fixture_has_no_pivotal_points() {
        let f = FixturePointSet::new(&[]).unwrap();
        for kind in [PivotalKind::Pivotal1, PivotalKind::Pivotal2] {
            assert_eq!(exact_pivotal(&f, Point::new(0.1, 0.0), 0.5, 0.5, 2.0, kind).unwrap(), 0.0);
        }
    }

    #[test]
    fn pivotal2_vanishes_at_p_one() {
        let f = open_bridge_fixture();
        assert_eq!(
            exact_pivotal(&f, Point::new(2.0, 0.0), 1.0, 0.5, 4.0, PivotalKind::Pivotal2).unwrap(),
            0.0
        );
    }

    #[test]
    fn open_bridge_pivotal_closed_forms() {
        let f = open_bridge_fixture();
        let x = Point::new(2.0, 0.0);
        let (p, q): (f64, f64) = (0.7, 0.5);
        let pair = 1.0 - (1.0 - p).powi(2);
        let green_path = pair * p.powi(4) * p;
        let red_path = pair.powi(3) * p;
        let p1 = exact_pivotal(&f, x, p, q, 4.0, PivotalKind::Pivotal1).unwrap();
        let p2 = exact_pivotal(&f, x, p, q, 4.0, PivotalKind::Pivotal2).unwrap();
        assert!((p1 - (red_path - q * green_path)).abs() < 1e-13);
        assert!((p2 - (1.0 - p) * green_path).abs() < 1e-13);
    }
}
