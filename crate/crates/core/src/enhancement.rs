//! Bow-tie enhancement of site percolation.
//!
//! A closed vertex is *correctly configured* when it has exactly four
//! neighbours, all red, and the only edges among those four form two disjoint
//! pairs. A correctly configured vertex turns green when its enhancement mark
//! is below `q`. Configured status depends only on the red/closed split, so
//! the enhancement is a single pass after site colouring.

use std::io::Write;

use crate::error::{check_unit, Result};
use crate::graph::{build_graph, GilbertGraph};
use crate::percolation::{color_sites, connects, crossing_occurs, CrossingSpec, SiteState};
use crate::point_process::MarkedPointSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VertexState {
    Red,
    Green,
    ClosedUncoloured,
}

impl VertexState {
    pub fn is_coloured(self) -> bool {
        !matches!(self, VertexState::ClosedUncoloured)
    }

    pub fn code(self) -> char {
        match self {
            VertexState::Red => 'R',
            VertexState::Green => 'G',
            VertexState::ClosedUncoloured => 'C',
        }
    }
}

/// Evidence that `center` is correctly configured: its four neighbours split
/// into two adjacent pairs. Each pair is in increasing order and the first
/// pair contains the lowest-index neighbour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BowTieWitness {
    pub center: usize,
    pub pairs: [(usize, usize); 2],
}

impl BowTieWitness {
    pub fn arms(&self) -> [usize; 4] {
        [self.pairs[0].0, self.pairs[0].1, self.pairs[1].0, self.pairs[1].1]
    }

    /// Re-checks the witness against the graph from scratch, describing the
    /// first broken invariant.
    pub fn violation(&self, graph: &GilbertGraph, red: &[bool]) -> Option<String> {
        let c = self.center;
        if red[c] {
            return Some(format!("centre {c} is red"));
        }
        let mut arms = self.arms().to_vec();
        arms.sort_unstable();
        if arms != graph.adjacency[c] {
            return Some(format!("arms {arms:?} are not the neighbours of {c}"));
        }
        if let Some(&u) = arms.iter().find(|&&u| !red[u]) {
            return Some(format!("arm {u} of centre {c} is closed"));
        }
        let [(a, b), (x, y)] = self.pairs;
        if !(a < b && x < y && a < x) {
            return Some(format!("pairs {:?} are not in canonical order", self.pairs));
        }
        if !graph.are_adjacent(a, b) || !graph.are_adjacent(x, y) {
            return Some(format!("a pair of centre {c} is not joined"));
        }
        for u in [a, b] {
            for w in [x, y] {
                if graph.are_adjacent(u, w) {
                    return Some(format!("arms {u} and {w} join the two pairs of centre {c}"));
                }
            }
        }
        None
    }
}

/// Bow-tie test on a red/closed assignment given as a slice.
pub fn bow_tie(graph: &GilbertGraph, red: &[bool], v: usize) -> Option<BowTieWitness> {
    if red[v] {
        return None;
    }
    let nb = &graph.adjacency[v];
    if nb.len() != 4 || nb.iter().any(|&u| !red[u]) {
        return None;
    }
    let mut induced = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            if graph.are_adjacent(nb[i], nb[j]) {
                induced += 1;
            }
        }
    }
    if induced != 2 {
        return None;
    }
    let anchor = nb[0];
    let mut partners = nb[1..].iter().filter(|&&u| graph.are_adjacent(anchor, u));
    let partner = *partners.next()?;
    if partners.next().is_some() {
        return None;
    }
    let rest: Vec<usize> = nb[1..].iter().copied().filter(|&u| u != partner).collect();
    if !graph.are_adjacent(rest[0], rest[1]) {
        return None;
    }
    Some(BowTieWitness {
        center: v,
        pairs: [(anchor, partner), (rest[0], rest[1])],
    })
}

pub fn correctly_configured(graph: &GilbertGraph, site: &SiteState, v: usize) -> Option<BowTieWitness> {
    bow_tie(graph, &site.red, v)
}

/// Every correctly configured vertex, in index order.
pub fn configured_centers(graph: &GilbertGraph, red: &[bool]) -> Vec<BowTieWitness> {
    (0..graph.vertex_count()).filter_map(|v| bow_tie(graph, red, v)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnhancedColoring {
    pub states: Vec<VertexState>,
    pub p: f64,
    pub q: f64,
    /// Witnesses of the green vertices, in index order.
    pub witnesses: Vec<BowTieWitness>,
}

impl EnhancedColoring {
    pub fn coloured(&self) -> Vec<bool> {
        self.states.iter().map(|s| s.is_coloured()).collect()
    }

    pub fn green_count(&self) -> usize {
        self.witnesses.len()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "state"])?;
        for (i, s) in self.states.iter().enumerate() {
            w.write_record([i.to_string(), s.code().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Enhanced colouring from a red/closed split and a green rule applied to
/// configured centres.
pub fn enhance_with<F>(graph: &GilbertGraph, red: &[bool], p: f64, q: f64, mut turns_green: F) -> EnhancedColoring
where
    F: FnMut(&BowTieWitness) -> bool,
{
    let mut states: Vec<VertexState> = red
        .iter()
        .map(|&r| if r { VertexState::Red } else { VertexState::ClosedUncoloured })
        .collect();
    let mut witnesses = Vec::new();
    for w in configured_centers(graph, red) {
        if turns_green(&w) {
            states[w.center] = VertexState::Green;
            witnesses.push(w);
        }
    }
    EnhancedColoring {
        states,
        p,
        q,
        witnesses,
    }
}

pub fn enhance(graph: &GilbertGraph, points: &MarkedPointSet, p: f64, q: f64) -> Result<EnhancedColoring> {
    check_unit("q", q)?;
    let site = color_sites(points, p)?;
    Ok(enhance_with(graph, &site.red, p, q, |w| {
        points.marks[w.center].enhance < q
    }))
}

/// Coloured set as a bitmap, without building the full colouring record.
pub fn coloured_set(graph: &GilbertGraph, points: &MarkedPointSet, p: f64, q: f64) -> Vec<bool> {
    let mut coloured: Vec<bool> = points.marks.iter().map(|m| m.site < p).collect();
    let red = coloured.clone();
    for v in 0..graph.vertex_count() {
        if !red[v] && points.marks[v].enhance < q && bow_tie(graph, &red, v).is_some() {
            coloured[v] = true;
        }
    }
    coloured
}

/// Which vertices may influence enhancements inside the window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EnhancementScope {
    /// Only vertices inside `B_n` exist.
    #[default]
    Window,
    /// Vertices outside `B_n` count towards configured status; crossing paths
    /// still stay inside `B_n`.
    FullPlane,
}

/// Evaluates `A_n` for a marked configuration at `(p, q)`.
pub fn theta_event(points: &MarkedPointSet, p: f64, q: f64, n: f64) -> Result<bool> {
    theta_event_with_scope(points, p, q, n, EnhancementScope::Window)
}

pub fn theta_event_with_scope(
    points: &MarkedPointSet,
    p: f64,
    q: f64,
    n: f64,
    scope: EnhancementScope,
) -> Result<bool> {
    check_unit("p", p)?;
    check_unit("q", q)?;
    let spec = CrossingSpec::new(n)?;
    match scope {
        EnhancementScope::Window => {
            let inside = points.restrict_to(&spec.window());
            let graph = build_graph(&inside);
            Ok(crossing_occurs(&graph, &coloured_set(&graph, &inside, p, q), &spec))
        }
        EnhancementScope::FullPlane => {
            let graph = build_graph(points);
            let coloured = coloured_set(&graph, points, p, q);
            let window = spec.window();
            Ok(connects(
                &graph,
                |v| coloured[v] && window.contains(graph.positions[v]),
                |_| true,
                |v| spec.in_source(graph.positions[v]),
                |v| spec.in_target(graph.positions[v]),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point_process::{Marks, Point, Region};

    /// Closed centre at the origin with two pairs of red arms.
    fn bow_tie_set() -> MarkedPointSet {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(0.9, 0.1),
            Point::new(0.9, -0.1),
            Point::new(-0.9, 0.1),
            Point::new(-0.9, -0.1),
        ];
        let marks = vec![
            Marks::new(0.9, 0.1),
            Marks::new(0.1, 0.9),
            Marks::new(0.1, 0.9),
            Marks::new(0.1, 0.9),
            Marks::new(0.1, 0.9),
        ];
        MarkedPointSet::from_parts(pts, marks, Region::disk(5.0), 1.0, 0)
    }

    #[test]
    fn bow_tie_witness() {
        let s = bow_tie_set();
        let g = build_graph(&s);
        let site = color_sites(&s, 0.5).unwrap();
        assert_eq!(s.points[0], Point::ORIGIN);
        let w = correctly_configured(&g, &site, 0).expect("configured");
        // Equidistant arms are ordered lexicographically, so the left pair
        // holds the lowest indices and anchors the first pair.
        let idx = |x: f64, y: f64| s.points.iter().position(|p| *p == Point::new(x, y)).unwrap();
        let left = (idx(-0.9, -0.1), idx(-0.9, 0.1));
        let right = (idx(0.9, -0.1), idx(0.9, 0.1));
        assert_eq!(w.pairs, [left, right]);
        assert!(w.pairs[0].0 < w.pairs[1].0);
    }

    #[test]
    fn red_center_is_not_configured() {
        let s = bow_tie_set();
        let g = build_graph(&s);
        let mut site = color_sites(&s, 0.5).unwrap();
        site.red[0] = true;
        assert!(correctly_configured(&g, &site, 0).is_none());
    }

    #[test]
    fn fifth_neighbour_breaks_configuration() {
        let mut s = bow_tie_set();
        s = s.insert(Point::new(0.0, 0.8), Marks::new(0.1, 0.5)).0;
        let g = build_graph(&s);
        let site = color_sites(&s, 0.5).unwrap();
        let c = s.points.iter().position(|p| *p == Point::ORIGIN).unwrap();
        assert_eq!(g.degree(c), 5);
        assert!(correctly_configured(&g, &site, c).is_none());
    }

    #[test]
    fn closed_arm_breaks_configuration() {
        let s = bow_tie_set();
        let g = build_graph(&s);
        let mut site = color_sites(&s, 0.5).unwrap();
        site.red[3] = false;
        assert!(correctly_configured(&g, &site, 0).is_none());
    }

    #[test]
    fn extra_cross_edge_breaks_configuration() {
        // Arms close enough that the pairs touch each other.
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(0.45, 0.1),
            Point::new(0.45, -0.1),
            Point::new(-0.45, 0.1),
            Point::new(-0.45, -0.1),
        ];
        let s = MarkedPointSet::from_parts(pts, vec![Marks::new(0.1, 0.1); 5], Region::disk(5.0), 1.0, 0);
        let g = build_graph(&s);
        let mut red = vec![true; 5];
        red[0] = false;
        assert!(bow_tie(&g, &red, 0).is_none());
    }

    #[test]
    fn q_extremes() {
        let s = bow_tie_set();
        let g = build_graph(&s);
        let none = enhance(&g, &s, 0.5, 0.0).unwrap();
        assert_eq!(none.green_count(), 0);
        assert_eq!(none.coloured(), color_sites(&s, 0.5).unwrap().red);
        let all = enhance(&g, &s, 0.5, 1.0).unwrap();
        assert_eq!(all.green_count(), 1);
        assert_eq!(all.states[0], VertexState::Green);
        assert_eq!(all.coloured(), coloured_set(&g, &s, 0.5, 1.0));
        assert!(enhance(&g, &s, 0.5, 1.1).is_err());
    }

    #[test]
    fn theta_event_basics() {
        let s = MarkedPointSet::from_parts(
            vec![Point::new(0.0, 0.0), Point::new(0.9, 0.0)],
            vec![Marks::new(0.1, 0.5); 2],
            Region::disk(1.0),
            1.0,
            0,
        );
        assert!(theta_event(&s, 0.5, 0.0, 1.0).unwrap());
        let empty = MarkedPointSet::unmarked(vec![], Region::disk(1.0));
        assert!(!theta_event(&empty, 0.5, 0.5, 1.0).unwrap());
    }

    #[test]
    fn outside_vertices_do_not_enhance_in_window_scope() {
        // Path 0 -> green centre -> far arm; the centre's fifth neighbour
        // sits outside B_n and only matters in the full-plane scope.
        let pts = vec![
            Point::new(0.1, 0.0),
            Point::new(0.2, 0.2),
            Point::new(1.0, 0.1),
            Point::new(1.0, -0.1),
            Point::new(1.9, 0.0),
            Point::new(2.8, 0.1),
            Point::new(2.8, -0.1),
            Point::new(2.85, 0.3),
        ];
        let mut marks = vec![Marks::new(0.1, 0.1); 8];
        marks[4] = Marks::new(0.9, 0.1);
                let s = MarkedPointSet::from_parts(pts, marks, Region::disk(10.0), 1.0, 0);
        let n = 2.86;
        assert!(!Region::disk(n).contains(Point::new(2.85, 0.3)));
        assert!(theta_event(&s, 0.5, 0.5, n).unwrap());
        assert!(!theta_event_with_scope(&s, 0.5, 0.5, n, EnhancementScope::FullPlane).unwrap());
    }

    #[test]
    fn coloring_csv() {
        let s = bow_tie_set();
        let g = build_graph(&s);
        let c = enhance(&g, &s, 0.5, 1.0).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,state\n0,G\n1,R\n2,R\n3,R\n4,R\n");
    }
}
