use std::collections::VecDeque;

use gilbertlab_core::enhancement::coloured_set;
use gilbertlab_core::graph::{build_graph, GilbertGraph};
use gilbertlab_core::percolation::{bond_crossing_occurs, crossing_occurs, crossing_prime_occurs, edge_marks, CrossingSpec};
use gilbertlab_core::point_process::sample_poisson;
use gilbertlab_core::StreamSpec;

/// Breadth-first search from all coloured source vertices.
fn bfs_crossing(g: &GilbertGraph, coloured: &[bool], open_edge: &dyn Fn(usize, usize) -> bool, spec: &CrossingSpec, site: bool) -> bool {
    let n = g.vertex_count();
    let usable = |v: usize| !site || coloured[v];
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| usable(v) && spec.in_source(g.positions[v])).collect();
    for &v in &queue {
        seen[v] = true;
    }
    while let Some(v) = queue.pop_front() {
        if spec.in_target(g.positions[v]) {
            return true;
        }
        for &u in &g.adjacency[v] {
            if !seen[u] && usable(u) && open_edge(v, u) {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    false
}

#[test]
fn site_crossing_matches_bfs() {
    let spec = CrossingSpec::new(5.0).unwrap();
    let mut hits = 0;
    for r in 0..300u64 {
        let set = sample_poisson(&spec.window(), 2.5, &StreamSpec::new(21).child(r)).unwrap();
        let g = build_graph(&set);
        let red: Vec<bool> = set.marks.iter().map(|m| m.site < 0.65).collect();
        let expected = bfs_crossing(&g, &red, &|_, _| true, &spec, true);
        assert_eq!(crossing_occurs(&g, &red, &spec), expected, "replicate {r}");
        hits += expected as u32;
    }
    assert!(hits > 10 && hits < 290, "test should exercise both outcomes, got {hits}");
}

#[test]
fn bond_crossing_matches_bfs() {
    let spec = CrossingSpec::new(5.0).unwrap();
    let mut hits = 0;
    for r in 0..300u64 {
        let s = StreamSpec::new(22).child(r);
        let set = sample_poisson(&spec.window(), 2.0, &s.child(1)).unwrap();
        let g = build_graph(&set);
        let marks = edge_marks(&g, &s.child(2));
        let open: Vec<bool> = marks.iter().map(|&x| x < 0.35).collect();
        let all = vec![true; g.vertex_count()];
        let expected = bfs_crossing(&g, &all, &|a, b| open[g.edge_id(a, b).unwrap()], &spec, false);
        assert_eq!(bond_crossing_occurs(&g, &open, &spec), expected);
        hits += expected as u32;
    }
    assert!(hits > 10 && hits < 290, "got {hits}");
}

#[test]
fn crossing_implies_primed_crossing() {
    // A_n is contained in A'_n: 10^4 sampled configurations.
    let n = 4.0;
    let spec = CrossingSpec::new(n).unwrap();
    let mut a = 0;
    for r in 0..10_000u64 {
        let set = sample_poisson(&spec.window(), 1.8, &StreamSpec::new(23).child(r)).unwrap();
        let g = build_graph(&set);
        let coloured = coloured_set(&g, &set, 0.75, 0.5);
        if crossing_occurs(&g, &coloured, &spec) {
            a += 1;
            assert!(crossing_prime_occurs(&g, &coloured, n), "replicate {r}");
        }
    }
    assert!(a > 100);
}

#[test]
fn site_crossing_is_monotone_in_p() {
    let spec = CrossingSpec::new(4.0).unwrap();
    for r in 0..200u64 {
        let set = sample_poisson(&spec.window(), 2.5, &StreamSpec::new(24).child(r)).unwrap();
        let g = build_graph(&set);
        let mut prev = false;
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            let red: Vec<bool> = set.marks.iter().map(|m| m.site < p).collect();
            let now = crossing_occurs(&g, &red, &spec);
            assert!(!prev || now);
            prev = now;
        }
    }
}
