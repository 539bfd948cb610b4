use prodnet::validate_state;
use prodnet_bench::{pareto_samples, warm_state};

#[test]
fn warm_state_is_valid() {
    let s = warm_state(100, 20, 1);
    assert_eq!(s.t, 20);
    assert!(validate_state(&s).is_empty());
}

#[test]
fn pareto_samples_have_the_requested_tail() {
    let x = pareto_samples(20_000, 1.5, 2);
    assert!(x.iter().all(|&v| v >= 1.0));
    // P(X > 4) = 4^-1.5 = 0.125
    let share = x.iter().filter(|&&v| v > 4.0).count() as f64 / x.len() as f64;
    assert!((share - 0.125).abs() < 0.01, "{share}");
}
