//! Site and bond states on a Gilbert graph and the crossing events.

use rand::Rng;

use crate::error::{check_unit, invalid, Result};
use crate::graph::GilbertGraph;
use crate::point_process::{MarkedPointSet, Point, Region};
use crate::stream::StreamSpec;
use crate::union_find::DisjointSets;

/// Red/closed state of every vertex: red iff its site mark is below `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteState {
    pub red: Vec<bool>,
}

impl SiteState {
    pub fn is_red(&self, v: usize) -> bool {
        self.red[v]
    }

    pub fn red_count(&self) -> usize {
        self.red.iter().filter(|&&r| r).count()
    }
}

pub fn color_sites(points: &MarkedPointSet, p: f64) -> Result<SiteState> {
    check_unit("p", p)?;
    Ok(SiteState {
        red: points.marks.iter().map(|m| m.site < p).collect(),
    })
}

/// Open/closed state of every edge, with the uniform edge marks it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct BondState {
    pub marks: Vec<f64>,
    pub open: Vec<bool>,
}

impl BondState {
    /// Re-thresholds the same edge marks at a different `p`.
    pub fn at(&self, p: f64) -> Result<BondState> {
        check_unit("p", p)?;
        Ok(BondState {
            marks: self.marks.clone(),
            open: self.marks.iter().map(|&x| x < p).collect(),
        })
    }
}

/// One uniform mark per canonical edge, drawn in edge order from `stream`.
pub fn edge_marks(graph: &GilbertGraph, stream: &StreamSpec) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..graph.edge_count()).map(|_| rng.random::<f64>()).collect()
}

pub fn open_bonds(graph: &GilbertGraph, p: f64, stream: &StreamSpec) -> Result<BondState> {
    check_unit("p", p)?;
    let marks = edge_marks(graph, stream);
    let open = marks.iter().map(|&x| x < p).collect();
    Ok(BondState { marks, open })
}

/// Geometry of the crossing event: from the open disk of radius 0.5 to the
/// annulus `n - 0.5 <= |x| < n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossingSpec {
    pub n: f64,
}

impl CrossingSpec {
    pub const SOURCE_RADIUS: f64 = 0.5;
    pub const TARGET_WIDTH: f64 = 0.5;

    pub fn new(n: f64) -> Result<Self> {
        if !n.is_finite() || n <= 0.5 {
            return invalid(format!("window radius n must exceed 0.5, got {n}"));
        }
        Ok(Self { n })
    }

    pub fn window(&self) -> Region {
        Region::disk(self.n)
    }

    pub fn source_region(&self) -> Region {
        Region::disk(Self::SOURCE_RADIUS)
    }

    pub fn target_region(&self) -> Region {
        Region::annulus((self.n - Self::TARGET_WIDTH).max(0.0), self.n)
    }

    pub fn in_source(&self, p: Point) -> bool {
        self.source_region().contains(p)
    }

    pub fn in_target(&self, p: Point) -> bool {
        self.target_region().contains(p)
    }
}

/// Whether an active source vertex is joined to an active target vertex using
/// active vertices and active edges only.
pub fn connects<V, E, S, T>(graph: &GilbertGraph, active_vertex: V, active_edge: E, source: S, target: T) -> bool
where
    V: Fn(usize) -> bool,
    E: Fn(usize) -> bool,
    S: Fn(usize) -> bool,
    T: Fn(usize) -> bool,
{
    let n = graph.vertex_count();
    // Two virtual vertices: n is the source hub, n + 1 the target hub.
    let mut ds = DisjointSets::new(n + 2);
    let mut any_source = false;
    let mut any_target = false;
    for v in 0..n {
        if !active_vertex(v) {
            continue;
        }
        if source(v) {
            ds.union(v, n);
            any_source = true;
        }
        if target(v) {
            ds.union(v, n + 1);
            any_target = true;
        }
    }
    if !(any_source && any_target) {
        return false;
    }
    if ds.same(n, n + 1) {
        return true;
    }
    for (id, &(i, j)) in graph.edges.iter().enumerate() {
        if active_vertex(i) && active_vertex(j) && active_edge(id) {
            ds.union(i, j);
        }
    }
    ds.same(n, n + 1)
}

/// `A_n`: a coloured path from a coloured vertex in `B_0.5` to a coloured
/// vertex in the boundary annulus. The graph must already be restricted to
/// the window.
pub fn crossing_occurs(graph: &GilbertGraph, coloured: &[bool], spec: &CrossingSpec) -> bool {
    connects(
        graph,
        |v| coloured[v],
        |_| true,
        |v| spec.in_source(graph.positions[v]),
        |v| spec.in_target(graph.positions[v]),
    )
}

/// `A'_n`: a coloured path from `B_0.5` to a coloured vertex farther than
/// `n - 2` from the origin.
pub fn crossing_prime_occurs(graph: &GilbertGraph, coloured: &[bool], n: f64) -> bool {
    let far = (n - 2.0).max(0.0);
    connects(
        graph,
        |v| coloured[v],
        |_| true,
        |v| graph.positions[v].norm_sq() < 0.25,
        |v| graph.positions[v].norm_sq() > far * far,
    )
}

/// Bond crossing: every vertex present, paths through open edges.
pub fn bond_crossing_occurs(graph: &GilbertGraph, open: &[bool], spec: &CrossingSpec) -> bool {
    connects(
        graph,
        |_| true,
        |e| open[e],
        |v| spec.in_source(graph.positions[v]),
        |v| spec.in_target(graph.positions[v]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::point_process::{sample_poisson, Marks};

    fn set(coords: &[(f64, f64)], ys: &[f64]) -> MarkedPointSet {
        let pts = coords.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let marks = ys.iter().map(|&y| Marks::new(y, 0.5)).collect();
        MarkedPointSet::from_parts(pts, marks, Region::disk(10.0), 1.0, 0)
    }

    #[test]
    fn site_threshold_rule() {
        let s = set(&[(0.0, 0.0), (1.0, 0.0)], &[0.2, 0.7]);
        assert_eq!(color_sites(&s, 0.5).unwrap().red, vec![true, false]);
        assert_eq!(color_sites(&s, 1.0).unwrap().red_count(), 2);
        assert_eq!(color_sites(&s, 0.0).unwrap().red_count(), 0);
        assert!(color_sites(&s, 1.5).is_err());
        assert!(color_sites(&s, -0.1).is_err());
    }

    #[test]
    fn bond_extremes_and_reproducibility() {
        let pts = sample_poisson(&Region::disk(5.0), 2.0, &StreamSpec::new(4)).unwrap();
        let g = build_graph(&pts);
        let st = StreamSpec::new(5);
        assert!(open_bonds(&g, 1.0, &st).unwrap().open.iter().all(|&o| o));
        assert!(open_bonds(&g, 0.0, &st).unwrap().open.iter().all(|&o| !o));
        assert_eq!(open_bonds(&g, 0.3, &st).unwrap(), open_bonds(&g, 0.3, &st).unwrap());
        assert!(open_bonds(&g, 2.0, &st).is_err());
    }

    #[test]
    fn bond_open_fraction() {
        // Enough points for well over 10^4 edges.
        let pts = sample_poisson(&Region::disk(25.0), 2.0, &StreamSpec::new(8)).unwrap();
        let g = build_graph(&pts);
        assert!(g.edge_count() > 10_000);
        let b = open_bonds(&g, 0.3, &StreamSpec::new(9)).unwrap();
        let frac = b.open.iter().filter(|&&o| o).count() as f64 / g.edge_count() as f64;
        let sigma = (0.3 * 0.7 / g.edge_count() as f64).sqrt();
        assert!((frac - 0.3).abs() < 3.0 * sigma, "{frac}");
    }

    #[test]
    fn direct_edge_crossing() {
        let s = set(&[(0.0, 0.0), (0.9, 0.0)], &[0.1, 0.1]);
        let g = build_graph(&s);
        let spec = CrossingSpec::new(1.0).unwrap();
        assert!(crossing_occurs(&g, &[true, true], &spec));
        assert!(!crossing_occurs(&g, &[false, true], &spec));
        assert!(!crossing_occurs(&g, &[true, false], &spec));
    }

    #[test]
    fn no_source_vertex() {
        let s = set(&[(0.6, 0.0), (1.5, 0.0)], &[0.1, 0.1]);
        let g = build_graph(&s);
        assert!(!crossing_occurs(&g, &[true, true], &CrossingSpec::new(2.0).unwrap()));
    }

    #[test]
    fn prime_needs_far_vertex() {
        let s = set(&[(0.0, 0.0), (0.9, 0.0), (1.8, 0.0)], &[0.1; 3]);
        let g = build_graph(&s);
        // n = 4: needs a vertex beyond radius 2.
        assert!(!crossing_prime_occurs(&g, &[true; 3], 4.0));
        assert!(crossing_prime_occurs(&g, &[true; 3], 3.5));
    }

    #[test]
    fn crossing_spec_validation() {
        assert!(CrossingSpec::new(0.5).is_err());
        assert!(CrossingSpec::new(f64::INFINITY).is_err());
        let s = CrossingSpec::new(4.0).unwrap();
        assert!(s.in_target(Point::new(3.5, 0.0)));
        assert!(!s.in_target(Point::new(4.0, 0.0)));
        assert!(!s.in_source(Point::new(0.5, 0.0)));
    }
}
