//! Gilbert's unit-distance graph built with a cell list.

use std::io::Write;

use crate::error::Result;
use crate::point_process::{MarkedPointSet, Point};
use crate::union_find::DisjointSets;

/// Connection radius used throughout the crate.
pub const CONNECTION_RADIUS: f64 = 1.0;

/// Uniform grid of square cells with side equal to the connection radius.
/// Vertices are bucketed by counting sort, so each cell's members are a
/// contiguous, index-ordered slice.
#[derive(Clone, Debug)]
pub struct CellIndex {
    side: f64,
    origin: (i64, i64),
    cols: usize,
    rows: usize,
    starts: Vec<usize>,
    members: Vec<usize>,
}

impl CellIndex {
    pub fn new(points: &[Point], side: f64) -> Self {
        let cell_of = |p: &Point| ((p.x / side).floor() as i64, (p.y / side).floor() as i64);
        if points.is_empty() {
            return Self {
                side,
                origin: (0, 0),
                cols: 0,
                rows: 0,
                starts: vec![0],
                members: Vec::new(),
            };
        }
        let (mut min_c, mut min_r, mut max_c, mut max_r) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        for p in points {
            let (c, r) = cell_of(p);
            min_c = min_c.min(c);
            min_r = min_r.min(r);
            max_c = max_c.max(c);
            max_r = max_r.max(r);
        }
        let cols = (max_c - min_c + 1) as usize;
        let rows = (max_r - min_r + 1) as usize;
        let slot = |p: &Point| {
            let (c, r) = cell_of(p);
            (r - min_r) as usize * cols + (c - min_c) as usize
        };
        let mut starts = vec![0usize; cols * rows + 1];
        for p in points {
            starts[slot(p) + 1] += 1;
        }
        for i in 1..starts.len() {
            starts[i] += starts[i - 1];
        }
        let mut fill = starts.clone();
        let mut members = vec![0usize; points.len()];
        for (i, p) in points.iter().enumerate() {
            let s = slot(p);
            members[fill[s]] = i;
            fill[s] += 1;
        }
        Self {
            side,
            origin: (min_c, min_r),
            cols,
            rows,
            starts,
            members,
        }
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Integer cell coordinates of a point.
    pub fn cell_of(&self, p: Point) -> (i64, i64) {
        ((p.x / self.side).floor() as i64, (p.y / self.side).floor() as i64)
    }

    /// Vertices stored in cell `(c, r)`.
    pub fn cell(&self, c: i64, r: i64) -> &[usize] {
        let (c0, r0) = self.origin;
        if c < c0 || r < r0 {
            return &[];
        }
        let (dc, dr) = ((c - c0) as usize, (r - r0) as usize);
        if dc >= self.cols || dr >= self.rows {
            return &[];
        }
        let s = dr * self.cols + dc;
        &self.members[self.starts[s]..self.starts[s + 1]]
    }

    /// Vertices in the 3x3 block around the cell containing `p`.
    pub fn block(&self, p: Point) -> impl Iterator<Item = usize> + '_ {
        let (c, r) = self.cell_of(p);
        (-1..=1).flat_map(move |dr| (-1..=1).flat_map(move |dc| self.cell(c + dc, r + dr).iter().copied()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GilbertGraph {
    pub positions: Vec<Point>,
    /// Sorted neighbour lists.
    pub adjacency: Vec<Vec<usize>>,
    /// Edge ids parallel to `adjacency`.
    pub incident_edges: Vec<Vec<usize>>,
    /// Canonical edge list: pairs `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub connection_radius: f64,
}

impl GilbertGraph {
    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Canonical index of edge `{a, b}`, if present.
    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a]
            .binary_search(&b)
            .ok()
            .map(|k| self.incident_edges[a][k])
    }

    pub fn write_edges_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j"])?;
        for &(i, j) in &self.edges {
            w.write_record([i.to_string(), j.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the unit-distance graph over `points` (closed rule `|x - y| <= 1`).
pub fn build_graph(points: &MarkedPointSet) -> GilbertGraph {
    build_graph_from_positions(&points.points, CONNECTION_RADIUS)
}

pub fn build_graph_from_positions(positions: &[Point], radius: f64) -> GilbertGraph {
    let n = positions.len();
    let r2 = radius * radius;
    let index = CellIndex::new(positions, radius);
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &p) in positions.iter().enumerate() {
        for j in index.block(p) {
            if j != i && p.dist_sq(positions[j]) <= r2 {
                adjacency[i].push(j);
            }
        }
        adjacency[i].sort_unstable();
    }
    let mut edges = Vec::new();
    let mut incident_edges: Vec<Vec<usize>> = adjacency.iter().map(|a| vec![0; a.len()]).collect();
    for i in 0..n {
        for (k, &j) in adjacency[i].iter().enumerate() {
            if j > i {
                let id = edges.len();
                edges.push((i, j));
                incident_edges[i][k] = id;
                let back = adjacency[j].binary_search(&i).expect("symmetric adjacency");
                incident_edges[j][back] = id;
            }
        }
    }
    GilbertGraph {
        positions: positions.to_vec(),
        adjacency,
        incident_edges,
        edges,
        connection_radius: radius,
    }
}

/// Component labels of the active subgraph. Labels are dense and numbered in
/// order of each component's lowest vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling {
    pub labels: Vec<Option<usize>>,
    pub sizes: Vec<usize>,
}

impl Labeling {
    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn active_count(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Vertex sets of all components, each in increasing order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.sizes.len()];
        for (v, l) in self.labels.iter().enumerate() {
            if let Some(l) = l {
                out[*l].push(v);
            }
        }
        out
    }
}

/// Connected components through active vertices and active edges. An edge is
/// used only if it is active and both endpoints are active.
pub fn components<V, E>(graph: &GilbertGraph, active_vertex: V, active_edge: E) -> Labeling
where
    V: Fn(usize) -> bool,
    E: Fn(usize) -> bool,
{
    let n = graph.vertex_count();
    let active: Vec<bool> = (0..n).map(&active_vertex).collect();
    let mut ds = DisjointSets::new(n);
    for (id, &(i, j)) in graph.edges.iter().enumerate() {
        if active[i] && active[j] && active_edge(id) {
            ds.union(i, j);
        }
    }
    let mut root_label = vec![usize::MAX; n];
    let mut labels = vec![None; n];
    let mut sizes = Vec::new();
    for v in 0..n {
        if !active[v] {
            continue;
        }
        let r = ds.find(v);
        if root_label[r] == usize::MAX {
            root_label[r] = sizes.len();
            sizes.push(0);
        }
        labels[v] = Some(root_label[r]);
        sizes[root_label[r]] += 1;
    }
    Labeling { labels, sizes }
}

/// Largest component size over the number of active vertices (0 when none).
pub fn largest_component_fraction(labeling: &Labeling) -> f64 {
    let active = labeling.active_count();
    if active == 0 {
        return 0.0;
    }
    *labeling.sizes.iter().max().unwrap() as f64 / active as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point_process::Region;

    fn graph_of(coords: &[(f64, f64)]) -> GilbertGraph {
        let pts = coords.iter().map(|&(x, y)| Point::new(x, y)).collect();
        build_graph(&MarkedPointSet::unmarked(pts, Region::disk(100.0)))
    }

    #[test]
    fn close_pair_is_joined() {
        let g = graph_of(&[(0.0, 0.0), (0.9, 0.0)]);
        assert_eq!(g.edges, vec![(0, 1)]);
        assert_eq!(g.edge_id(1, 0), Some(0));
    }

    #[test]
    fn far_pair_is_not_joined() {
        let g = graph_of(&[(0.0, 0.0), (1.0001, 0.0)]);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn unit_distance_is_joined() {
        let g = graph_of(&[(0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn empty_graph() {
        let g = graph_of(&[]);
        assert_eq!(g.vertex_count(), 0);
        let lab = components(&g, |_| true, |_| true);
        assert_eq!(largest_component_fraction(&lab), 0.0);
    }

    #[test]
    fn path_components() {
        let g = graph_of(&[(0.0, 0.0), (0.9, 0.0), (1.8, 0.0)]);
        let all = components(&g, |_| true, |_| true);
        assert_eq!(all.sizes, vec![3]);
        assert_eq!(largest_component_fraction(&all), 1.0);
        let cut = components(&g, |v| v != 1, |_| true);
        assert_eq!(cut.sizes, vec![1, 1]);
        assert_eq!(cut.labels[1], None);
        let none = components(&g, |_| false, |_| true);
        assert_eq!(largest_component_fraction(&none), 0.0);
    }

    #[test]
    fn three_plus_one() {
        let g = graph_of(&[(0.0, 0.0), (0.9, 0.0), (1.8, 0.0), (5.0, 5.0)]);
        let lab = components(&g, |_| true, |_| true);
        assert_eq!(largest_component_fraction(&lab), 0.75);
    }

    #[test]
    fn edge_ids_are_canonical() {
        let g = graph_of(&[(0.0, 0.0), (0.5, 0.0), (0.0, 0.6), (0.7, 0.7)]);
        let mut sorted = g.edges.clone();
        sorted.sort();
        assert_eq!(g.edges, sorted);
        for (id, &(i, j)) in g.edges.iter().enumerate() {
            assert!(i < j);
            assert_eq!(g.edge_id(i, j), Some(id));
            assert_eq!(g.edge_id(j, i), Some(id));
        }
    }
}
