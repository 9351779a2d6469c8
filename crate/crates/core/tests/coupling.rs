use gilbertlab_core::coupling::{coupling_replicate, run_coupling, summarize};
use gilbertlab_core::graph::build_graph;
use gilbertlab_core::point_process::sample_poisson;
use gilbertlab_core::{Region, StreamSpec};

#[test]
fn revealed_site_values_are_independent_bernoulli() {
    // Marginal and adjacent-pair frequencies of the revealed site values.
    let p = 0.6;
    let (mut red, mut total, mut both, mut pairs) = (0u64, 0u64, 0u64, 0u64);
    for r in 0..300u64 {
        let s = StreamSpec::new(41).child(r);
        let set = sample_poisson(&Region::disk(5.0), 1.5, &s.child(1)).unwrap();
        let st = run_coupling(build_graph(&set), p, &s).unwrap();
        let y = st.red();
        red += y.iter().filter(|&&v| v).count() as u64;
        total += y.len() as u64;
        for &(a, b) in &st.graph.edges {
            pairs += 1;
            both += (y[a] && y[b]) as u64;
        }
    }
    let f = red as f64 / total as f64;
    assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / total as f64).sqrt(), "marginal {f}");
    // Edges share vertices, so allow for positive correlation between terms.
    let g = both as f64 / pairs as f64;
    assert!((g - p * p).abs() < 8.0 * (p * p * (1.0 - p * p) / pairs as f64).sqrt(), "pair {g}");
}

#[test]
fn domination_and_accounting_hold() {
    for &p in &[0.3, 0.5, 0.7] {
        let stream = StreamSpec::new(42);
        let reports: Vec<_> = (0..100)
            .map(|r| coupling_replicate(3.0, 8.0, p, false, r, &stream).unwrap().0)
            .collect();
        let s = summarize(3.0, 8.0, p, false, &reports);
        assert_eq!(s.domination_violations, 0);
        assert_eq!(s.double_consumed, 0);
        assert_eq!(s.active_path_violations, 0);
        assert!(reports.iter().all(|r| r.audit.unassigned == 0));
    }
}

#[test]
fn largest_component_mode() {
    let stream = StreamSpec::new(43);
    for r in 0..20 {
        let (rep, st) = coupling_replicate(1.2, 8.0, 0.5, true, r, &stream).unwrap();
        assert!(rep.violations.is_empty());
        let lab = gilbertlab_core::graph::components(&st.graph, |_| true, |_| true);
        assert!(lab.component_count() <= 1);
    }
}

#[test]
fn green_frequency_is_p_squared() {
    let p = 0.5;
    let stream = StreamSpec::new(44);
    let reports: Vec<_> = (0..600)
        .map(|r| coupling_replicate(1.5, 10.0, p, false, r, &stream).unwrap().0)
        .collect();
    let s = summarize(1.5, 10.0, p, false, &reports);
    assert!(s.configured_centers > 100, "only {} configured centres", s.configured_centers);
    assert!((s.green_frequency - p * p).abs() < 3.5 * s.green_frequency_se);
}
