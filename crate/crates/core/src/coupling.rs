//! Dynamic coupling of the enhanced site process inside bond percolation.
//!
//! Starting from independent Bernoulli(`p`) edge variables `X_e` and vertex
//! variables `Z_v`, the site values `Y_v` are revealed one at a time. When no
//! unrevealed vertex touches an active (open) vertex, the lowest unrevealed
//! vertex takes its own `Z_v`; otherwise the lowest frontier vertex `y` takes
//! `X_{yy'}` for its active neighbour `y'` with the earliest edge. Every `Y_v`
//! comes from a distinct fresh variable, so the site process has the right
//! law, and every red cluster is spanned by open edges. Correctly configured
//! closed vertices are then made green using two unexamined arm edges, which
//! happens with probability `p^2`.

use std::collections::BTreeSet;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::enhancement::{configured_centers, enhance_with, EnhancedColoring};
use crate::error::{check_unit, Error, Result};
use crate::graph::{build_graph, build_graph_from_positions, components, GilbertGraph};
use crate::point_process::{sample_poisson, Region};
use crate::stats::Proportion;
use crate::stream::{purpose, StreamSpec};

/// Which fresh variable determined a vertex's site value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Vertex { vertex: usize },
    /// Edge variable of `edge`, read through the active neighbour `via`.
    Edge { edge: usize, via: usize },
}

#[derive(Clone, Debug)]
pub struct CouplingState {
    pub graph: GilbertGraph,
    pub edge_open: Vec<bool>,
    pub vertex_open: Vec<bool>,
    pub assigned: Vec<Option<bool>>,
    pub provenance: Vec<Option<Provenance>>,
    /// Step at which each vertex was assigned.
    pub step: Vec<usize>,
    pub examined: Vec<bool>,
    edge_uses: Vec<u32>,
    vertex_uses: Vec<u32>,
}

impl CouplingState {
    pub fn new(graph: GilbertGraph, edge_open: Vec<bool>, vertex_open: Vec<bool>) -> Self {
        assert_eq!(edge_open.len(), graph.edge_count());
        assert_eq!(vertex_open.len(), graph.vertex_count());
        let (n, m) = (graph.vertex_count(), graph.edge_count());
        Self {
            graph,
            edge_open,
            vertex_open,
            assigned: vec![None; n],
            provenance: vec![None; n],
            step: vec![usize::MAX; n],
            examined: vec![false; m],
            edge_uses: vec![0; m],
            vertex_uses: vec![0; n],
        }
    }

    /// Site values as a red bitmap. Unassigned vertices count as closed.
    pub fn red(&self) -> Vec<bool> {
        self.assigned.iter().map(|a| a == &Some(true)).collect()
    }

    fn consume_edge(&mut self, e: usize) -> bool {
        self.edge_uses[e] += 1;
        self.examined[e] = true;
        self.edge_open[e]
    }

    fn consume_vertex(&mut self, v: usize) -> bool {
        self.vertex_uses[v] += 1;
        self.vertex_open[v]
    }

    pub fn consumed_variables(&self) -> usize {
        self.edge_uses.iter().filter(|&&u| u > 0).count() + self.vertex_uses.iter().filter(|&&u| u > 0).count()
    }

    pub fn double_consumed(&self) -> usize {
        self.edge_uses.iter().filter(|&&u| u > 1).count() + self.vertex_uses.iter().filter(|&&u| u > 1).count()
    }

    pub fn write_provenance_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["vertex", "step", "Y", "source", "variable", "via"])?;
        for v in 0..self.graph.vertex_count() {
            let y = match self.assigned[v] {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            let (source, variable, via) = match self.provenance[v] {
                Some(Provenance::Vertex { vertex }) => ("Z", vertex.to_string(), String::new()),
                Some(Provenance::Edge { edge, via }) => ("X", edge.to_string(), via.to_string()),
                None => ("", String::new(), String::new()),
            };
            w.write_record([v.to_string(), self.step[v].to_string(), y.into(), source.into(), variable, via])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Bernoulli(`p`) edge and vertex variables for a graph.
pub fn draw_variables(graph: &GilbertGraph, p: f64, stream: &StreamSpec) -> (Vec<bool>, Vec<bool>) {
    let mut er = stream.child(purpose::COUPLING_EDGES).rng();
    let mut vr = stream.child(purpose::COUPLING_VERTICES).rng();
    let edges = (0..graph.edge_count()).map(|_| er.random::<f64>() < p).collect();
    let vertices = (0..graph.vertex_count()).map(|_| vr.random::<f64>() < p).collect();
    (edges, vertices)
}

pub fn run_coupling(graph: GilbertGraph, p: f64, stream: &StreamSpec) -> Result<CouplingState> {
    check_unit("p", p)?;
    let (edges, vertices) = draw_variables(&graph, p, stream);
    Ok(run_coupling_with(graph, edges, vertices))
}

/// Runs the revelation procedure to full assignment on given variables.
pub fn run_coupling_with(graph: GilbertGraph, edge_open: Vec<bool>, vertex_open: Vec<bool>) -> CouplingState {
    let mut st = CouplingState::new(graph, edge_open, vertex_open);
    let n = st.graph.vertex_count();
    let mut frontier: BTreeSet<usize> = BTreeSet::new();
    let mut next_unassigned = 0usize;
    for step in 0..n {
        let y = if let Some(y) = frontier.pop_first() {
            let (edge, via) = st.graph.adjacency[y]
                .iter()
                .zip(&st.graph.incident_edges[y])
                .filter(|(u, _)| st.assigned[**u] == Some(true))
                .map(|(&u, &e)| (e, u))
                .min()
                .expect("frontier vertex has an active neighbour");
            let value = st.consume_edge(edge);
            st.assigned[y] = Some(value);
            st.provenance[y] = Some(Provenance::Edge { edge, via });
            y
        } else {
            while st.assigned[next_unassigned].is_some() {
                next_unassigned += 1;
            }
            let y = next_unassigned;
            let value = st.consume_vertex(y);
            st.assigned[y] = Some(value);
            st.provenance[y] = Some(Provenance::Vertex { vertex: y });
            y
        };
        st.step[y] = step;
        if st.assigned[y] == Some(true) {
            for &u in &st.graph.adjacency[y] {
                if st.assigned[u].is_none() {
                    frontier.insert(u);
                }
            }
        }
    }
    st
}

/// Arm edges chosen for one configured centre.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmChoice {
    pub center: usize,
    pub edges: [usize; 2],
    pub green: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledEnhancement {
    pub coloring: EnhancedColoring,
    pub arms: Vec<ArmChoice>,
}

/// Greens every correctly configured vertex whose first unexamined edge into
/// each arm pair is open. Consumes those edges.
pub fn apply_coupled_enhancement(state: &mut CouplingState, p: f64) -> Result<CoupledEnhancement> {
    let red = state.red();
    let centers = configured_centers(&state.graph, &red);
    let mut arms = Vec::with_capacity(centers.len());
    for w in &centers {
        let c = w.center;
        let touched = state.graph.incident_edges[c].iter().filter(|&&e| state.examined[e]).count();
        if touched > 1 {
            return Err(Error::InvariantFailure(format!(
                "configured vertex {c} already has {touched} examined edges"
            )));
        }
        let mut chosen = [0usize; 2];
        for (k, &(a, b)) in w.pairs.iter().enumerate() {
            let e = [a, b]
                .iter()
                .map(|&u| state.graph.edge_id(c, u).expect("arm is a neighbour"))
                .filter(|&e| !state.examined[e])
                .min()
                .ok_or_else(|| {
                    Error::InvariantFailure(format!("no unexamined edge from {c} into arm pair ({a}, {b})"))
                })?;
            chosen[k] = e;
        }
        let open = chosen.map(|e| state.consume_edge(e));
        arms.push(ArmChoice {
            center: c,
            edges: chosen,
            green: open[0] && open[1],
        });
    }
    let greens: BTreeSet<usize> = arms.iter().filter(|a| a.green).map(|a| a.center).collect();
    let coloring = enhance_with(&state.graph, &red, p, p * p, |w| greens.contains(&w.center));
    Ok(CoupledEnhancement { coloring, arms })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    /// Vertex sets of the coloured clusters.
    pub coloured_clusters: Vec<Vec<usize>>,
    /// Bond cluster label of every vertex.
    pub bond_labels: Vec<usize>,
    /// Indices into `coloured_clusters` that straddle several bond clusters.
    pub violations: Vec<usize>,
}

impl DominationReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn verify_domination(state: &CouplingState, coloring: &EnhancedColoring) -> DominationReport {
    let g = &state.graph;
    let bond = components(g, |_| true, |e| state.edge_open[e]);
    let bond_labels: Vec<usize> = bond.labels.iter().map(|l| l.expect("all vertices active")).collect();
    let coloured = coloring.coloured();
    let clusters = components(g, |v| coloured[v], |_| true).members();
    let violations = clusters
        .iter()
        .enumerate()
        .filter(|(_, c)| c.iter().any(|&v| bond_labels[v] != bond_labels[c[0]]))
        .map(|(i, _)| i)
        .collect();
    DominationReport {
        coloured_clusters: clusters,
        bond_labels,
        violations,
    }
}

/// Structural audit of one coupling run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsumptionAudit {
    pub consumed_variables: usize,
    pub double_consumed: usize,
    pub unassigned: usize,
    /// Vertices read through an edge whose `via` vertex was not active before them.
    pub active_path_violations: usize,
}

pub fn audit(state: &CouplingState) -> ConsumptionAudit {
    let active_path_violations = (0..state.graph.vertex_count())
        .filter(|&v| match state.provenance[v] {
            Some(Provenance::Edge { edge, via }) => {
                let (a, b) = state.graph.edges[edge];
                let touches = (a == v && b == via) || (b == v && a == via);
                !(touches && state.assigned[via] == Some(true) && state.step[via] < state.step[v])
            }
            _ => false,
        })
        .count();
    ConsumptionAudit {
        consumed_variables: state.consumed_variables(),
        double_consumed: state.double_consumed(),
        unassigned: state.assigned.iter().filter(|a| a.is_none()).count(),
        active_path_violations,
    }
}

/// Subgraph induced by the largest connected component (ties: the one with
/// the lowest vertex), reindexed in the original order.
pub fn largest_component_subgraph(graph: &GilbertGraph) -> GilbertGraph {
    let lab = components(graph, |_| true, |_| true);
    let Some((best, _)) = lab.sizes.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))) else {
        return graph.clone();
    };
    let positions: Vec<_> = (0..graph.vertex_count())
        .filter(|&v| lab.labels[v] == Some(best))
        .map(|v| graph.positions[v])
        .collect();
    build_graph_from_positions(&positions, graph.connection_radius)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub replicate: u64,
    pub vertices: usize,
    pub edges: usize,
    pub red: usize,
    pub configured: usize,
    pub green: usize,
    pub coloured_clusters: usize,
    pub violations: Vec<Vec<usize>>,
    pub audit: ConsumptionAudit,
}

/// One coupling replicate on a fresh window `B_n`.
pub fn coupling_replicate(
    lambda: f64,
    n: f64,
    p: f64,
    largest_component_only: bool,
    replicate: u64,
    stream: &StreamSpec,
) -> Result<(ReplicateReport, CouplingState)> {
    let rs = stream.child(replicate);
    let points = sample_poisson(&Region::disk(n), lambda, &rs.child(purpose::POINTS))?;
    let mut graph = build_graph(&points);
    if largest_component_only {
        graph = largest_component_subgraph(&graph);
    }
    let mut state = run_coupling(graph, p, &rs)?;
    let enhanced = apply_coupled_enhancement(&mut state, p)?;
    let report = verify_domination(&state, &enhanced.coloring);
    let rep = ReplicateReport {
        replicate,
        vertices: state.graph.vertex_count(),
        edges: state.graph.edge_count(),
        red: state.red().iter().filter(|&&r| r).count(),
        configured: enhanced.arms.len(),
        green: enhanced.arms.iter().filter(|a| a.green).count(),
        coloured_clusters: report.coloured_clusters.len(),
        violations: report
            .violations
            .iter()
            .map(|&i| report.coloured_clusters[i].clone())
            .collect(),
        audit: audit(&state),
    };
    Ok((rep, state))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSummary {
    pub lambda: f64,
    pub n: f64,
    pub p: f64,
    pub replicates: u64,
    pub largest_component_only: bool,
    pub domination_violations: usize,
    pub double_consumed: usize,
    pub active_path_violations: usize,
    pub configured_centers: u64,
    pub green_centers: u64,
    pub green_frequency: f64,
    pub green_frequency_se: f64,
    pub expected_green_probability: f64,
}

pub fn summarize(lambda: f64, n: f64, p: f64, largest_component_only: bool, reports: &[ReplicateReport]) -> CouplingSummary {
    let configured: u64 = reports.iter().map(|r| r.configured as u64).sum();
    let green: u64 = reports.iter().map(|r| r.green as u64).sum();
    let prop = Proportion::new(green, configured);
    let expected = p * p;
    CouplingSummary {
        lambda,
        n,
        p,
        replicates: reports.len() as u64,
        largest_component_only,
        domination_violations: reports.iter().map(|r| r.violations.len()).sum(),
        double_consumed: reports.iter().map(|r| r.audit.double_consumed).sum(),
        active_path_violations: reports.iter().map(|r| r.audit.active_path_violations).sum(),
        configured_centers: configured,
        green_centers: green,
        green_frequency: prop.estimate(),
        green_frequency_se: if configured > 0 {
            (expected * (1.0 - expected) / configured as f64).sqrt()
        } else {
            0.0
        },
        expected_green_probability: expected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point_process::{MarkedPointSet, Point};

    fn graph_of(coords: &[(f64, f64)]) -> GilbertGraph {
        let pts = coords.iter().map(|&(x, y)| Point::new(x, y)).collect();
        build_graph(&MarkedPointSet::unmarked(pts, Region::disk(100.0)))
    }

    #[test]
    fn edgeless_graph_uses_vertex_variables() {
        let g = graph_of(&[(0.0, 0.0), (3.0, 0.0), (6.0, 0.0)]);
        let st = run_coupling_with(g, vec![], vec![true, false, true]);
        assert_eq!(st.assigned, vec![Some(true), Some(false), Some(true)]);
        assert!(st.provenance.iter().enumerate().all(|(v, p)| *p == Some(Provenance::Vertex { vertex: v })));
    }

    #[test]
    fn path_reads_edge_after_active_start() {
        let g = graph_of(&[(0.0, 0.0), (0.9, 0.0)]);
        let st = run_coupling_with(g, vec![false], vec![true, true]);
        assert_eq!(st.assigned, vec![Some(true), Some(false)]);
        assert_eq!(st.provenance[1], Some(Provenance::Edge { edge: 0, via: 0 }));
        assert!(st.examined[0]);
        assert_eq!(audit(&st).double_consumed, 0);
    }

    #[test]
    fn closed_start_moves_to_next_vertex() {
        let g = graph_of(&[(0.0, 0.0), (0.9, 0.0)]);
        let st = run_coupling_with(g, vec![true], vec![false, true]);
        assert_eq!(st.assigned, vec![Some(false), Some(true)]);
        assert_eq!(st.provenance[1], Some(Provenance::Vertex { vertex: 1 }));
        assert!(!st.examined[0]);
    }

    /// Bow tie around a centre at (2, 0) plus a source vertex near the origin.
    fn bow_tie_graph() -> GilbertGraph {
        graph_of(&[(0.2, 0.0), (1.1, 0.1), (1.1, -0.1), (2.0, 0.0), (2.9, 0.1), (2.9, -0.1)])
    }

    #[test]
    fn bow_tie_centre_turns_green_with_open_arms() {
        let g = bow_tie_graph();
        let centre = g.positions.iter().position(|p| *p == Point::new(2.0, 0.0)).unwrap();
        // Centre closed via its vertex variable, every edge open.
        let mut vertex_open = vec![true; g.vertex_count()];
        vertex_open[centre] = false;
        // Force the centre's own value to come from Z: make edges into the
        // centre closed from the arms that reach it first.
        let mut edge_open = vec![true; g.edge_count()];
        for &e in &g.incident_edges[centre] {
            edge_open[e] = false;
        }
        let mut st = run_coupling_with(g.clone(), edge_open.clone(), vertex_open);
        assert_eq!(st.assigned[centre], Some(false));
        let enh = apply_coupled_enhancement(&mut st, 0.5).unwrap();
        assert_eq!(enh.arms.len(), 1);
        assert!(!enh.arms[0].green);

        // Now open the arms but keep the first-read edge closed.
        let mut edge_open2 = vec![true; g.edge_count()];
        let first = g.incident_edges[centre].iter().copied().min().unwrap();
        edge_open2[first] = false;
        let mut st = run_coupling_with(g, edge_open2, vec![true; 6]);
        assert_eq!(st.assigned[centre], Some(false));
        let enh = apply_coupled_enhancement(&mut st, 0.5).unwrap();
        assert!(enh.arms[0].green);
        assert!(!enh.arms[0].edges.contains(&first));
        let rep = verify_domination(&st, &enh.coloring);
        assert!(rep.holds());
        assert_eq!(rep.coloured_clusters.len(), 1);
    }

    #[test]
    fn no_configured_vertices_leave_colouring_unchanged() {
        let g = graph_of(&[(0.0, 0.0), (0.9, 0.0), (1.8, 0.0)]);
        let mut st = run_coupling_with(g, vec![true, false], vec![true, true, true]);
        let red = st.red();
        let enh = apply_coupled_enhancement(&mut st, 0.5).unwrap();
        assert!(enh.arms.is_empty());
        assert_eq!(enh.coloring.coloured(), red);
    }

    #[test]
    fn extremes_are_dominated() {
        let pts = sample_poisson(&Region::disk(6.0), 3.0, &StreamSpec::new(2)).unwrap();
        for p in [0.0, 1.0] {
            let mut st = run_coupling(build_graph(&pts), p, &StreamSpec::new(3)).unwrap();
            let enh = apply_coupled_enhancement(&mut st, p).unwrap();
            let rep = verify_domination(&st, &enh.coloring);
            assert!(rep.holds());
            if p == 0.0 {
                assert!(rep.coloured_clusters.is_empty());
            } else {
                assert!(enh.coloring.coloured().iter().all(|&c| c));
            }
        }
    }

    #[test]
    fn largest_component_is_kept() {
        let g = graph_of(&[(0.0, 0.0), (0.9, 0.0), (1.8, 0.0), (5.0, 5.0)]);
        let sub = largest_component_subgraph(&g);
        assert_eq!(sub.vertex_count(), 3);
        assert_eq!(sub.edge_count(), 2);
    }

    #[test]
    fn provenance_csv_has_a_row_per_vertex() {
        let g = graph_of(&[(0.0, 0.0), (0.9, 0.0)]);
        let st = run_coupling_with(g, vec![true], vec![true, false]);
        let mut buf = Vec::new();
        st.write_provenance_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "vertex,step,Y,source,variable,via\n0,0,1,Z,0,\n1,1,1,X,0,0\n");
    }
}
