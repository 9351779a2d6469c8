use gilbertlab_core::pivotal::{
    estimate_pivotal_integral, pivotal_1_outcome, pivotal_2_outcome, russo_check, sample_trial, Parameter, PivotalKind,
};
use gilbertlab_core::{Execution, StreamSpec};

#[test]
fn q_derivative_at_a_second_point() {
    let c = russo_check(Parameter::Q, 2.0, 0.6, 0.5, 4.0, 0.05, 30_000, &StreamSpec::new(51), Execution::default()).unwrap();
    assert!(c.consistent_within(3.0), "{c:?}");
}

#[test]
fn degenerate_parameters_give_zero() {
    let s = StreamSpec::new(52);
    let e = estimate_pivotal_integral(PivotalKind::Pivotal2, 2.0, 1.0, 0.5, 4.0, 2000, &s, Execution::default()).unwrap();
    assert_eq!(e.pivotal_count, 0);
    let e = estimate_pivotal_integral(PivotalKind::Pivotal1, 2.0, 0.0, 0.5, 4.0, 2000, &s, Execution::default()).unwrap();
    assert_eq!(e.pivotal_count, 0);
}

#[test]
fn flat_region_has_zero_derivative() {
    let c = russo_check(Parameter::P, 2.0, 0.06, 0.3, 6.0, 0.05, 2000, &StreamSpec::new(53), Execution::default()).unwrap();
    assert_eq!(c.finite_difference.flips, 0);
    assert_eq!(c.pivotal.pivotal_count, 0);
}

#[test]
fn pivotal_trials_are_consistent() {
    // 2-pivotal needs a configured inserted vertex; 1-pivotal flips occurrence.
    let (mut p1, mut p2) = (0, 0);
    for t in 0..20_000u64 {
        let trial = sample_trial(2.0, 3.0, &StreamSpec::new(54).child(t)).unwrap();
        let o = pivotal_1_outcome(&trial, 0.7, 0.4, 3.0).unwrap();
        p1 += o.is_pivotal() as u32;
        assert!(!(o.occurs_high && !o.occurs_low), "colouring must be monotone");
        if let (Some(o2), w) = pivotal_2_outcome(&trial, 0.7, 0.4, 3.0).unwrap() {
            if o2.is_pivotal() {
                p2 += 1;
                assert!(w.is_some());
            }
        }
    }
    assert!(p1 > 100);
    let _ = p2;
}
