use gilbertlab_core::enhancement::{bow_tie, coloured_set, configured_centers, enhance, VertexState};
use gilbertlab_core::graph::{build_graph, build_graph_from_positions};
use gilbertlab_core::point_process::sample_poisson;
use gilbertlab_core::{Marks, MarkedPointSet, Point, Region, StreamSpec};
use proptest::prelude::*;

/// A planted bow tie centred at `c` with arms at distance `r` and pair
/// half-angle `a`, rotated by `phi`.
fn planted(c: Point, r: f64, a: f64, phi: f64) -> Vec<Point> {
    let mut pts = vec![c];
    for side in [0.0, std::f64::consts::PI] {
        for s in [-1.0, 1.0] {
            let t = phi + side + s * a;
            pts.push(Point::new(c.x + r * t.cos(), c.y + r * t.sin()));
        }
    }
    pts
}

#[test]
fn planted_bow_tie_is_recognised() {
    let pts = planted(Point::new(0.0, 0.0), 0.9, 0.3, 0.7);
    let g = build_graph_from_positions(&pts, 1.0);
    let centre = g.positions.iter().position(|p| *p == Point::new(0.0, 0.0)).unwrap();
    let mut red = vec![true; 5];
    red[centre] = false;
    let w = bow_tie(&g, &red, centre).unwrap();
    assert_eq!(w.violation(&g, &red), None);
    // Closing an arm or opening the centre breaks it.
    red[w.pairs[1].0] = false;
    assert!(bow_tie(&g, &red, centre).is_none());
}

#[test]
fn wide_arms_are_not_a_bow_tie() {
    // Pair members more than 1 apart leave the neighbours unmatched.
    let pts = planted(Point::new(0.0, 0.0), 0.95, 0.7, 0.0);
    let g = build_graph_from_positions(&pts, 1.0);
    let mut red = vec![true; 5];
    red[0] = false;
    assert!(bow_tie(&g, &red, 0).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn witnesses_satisfy_invariants(seed in any::<u64>(), lambda in 0.8f64..2.5, p in 0.3f64..0.95, q in 0.0f64..1.0) {
        let set = sample_poisson(&Region::disk(5.0), lambda, &StreamSpec::new(seed)).unwrap();
        let g = build_graph(&set);
        let col = enhance(&g, &set, p, q).unwrap();
        let red: Vec<bool> = set.marks.iter().map(|m| m.site < p).collect();
        let centres = configured_centers(&g, &red);
        for w in &centres {
            prop_assert_eq!(w.violation(&g, &red), None);
            for &u in &g.adjacency[w.center] {
                prop_assert!(red[u]);
                prop_assert!(centres.iter().all(|o| o.center != u));
            }
        }
        for (v, s) in col.states.iter().enumerate() {
            match s {
                VertexState::Green => {
                    prop_assert!(col.witnesses.iter().any(|w| w.center == v));
                    prop_assert!(set.marks[v].enhance < q);
                }
                VertexState::Red => prop_assert!(red[v]),
                VertexState::ClosedUncoloured => prop_assert!(!red[v]),
            }
        }
    }

    #[test]
    fn coloured_set_is_monotone(seed in any::<u64>(), p in 0.0f64..0.9, q in 0.0f64..0.9) {
        let set = sample_poisson(&Region::disk(5.0), 1.6, &StreamSpec::new(seed)).unwrap();
        let g = build_graph(&set);
        let base = coloured_set(&g, &set, p, q);
        for (p2, q2) in [(p + 0.1, q), (p, q + 0.1)] {
            let up = coloured_set(&g, &set, p2, q2);
            prop_assert!(base.iter().zip(&up).all(|(a, b)| !a || *b));
        }
    }

    #[test]
    fn planted_bow_ties_under_rotation(phi in 0.0f64..std::f64::consts::TAU, r in 0.6f64..0.99, a in 0.1f64..0.45) {
        let pts = planted(Point::new(1.0, -2.0), r, a, phi);
        let set = MarkedPointSet::from_parts(
            pts.clone(),
            vec![Marks::new(0.9, 0.1), Marks::new(0.1, 0.5), Marks::new(0.1, 0.5), Marks::new(0.1, 0.5), Marks::new(0.1, 0.5)],
            Region::disk(10.0),
            1.0,
            0,
        );
        let g = build_graph(&set);
        let centre = set.points.iter().position(|p| *p == Point::new(1.0, -2.0)).unwrap();
        let col = enhance(&g, &set, 0.5, 0.2).unwrap();
        prop_assert_eq!(col.states[centre], VertexState::Green);
        prop_assert_eq!(col.witnesses.len(), 1);
    }
}
