use stein_gamma::bounds::d2_bound_chaos;
use stein_gamma::chaos::{covariance, ChaosVector};
use stein_gamma::experiments::{
    build_example1_reduced, build_example2, example1_sweep, fit_rate, sweep_rows, DEFAULT_SWEEP,
};

#[test]
fn example1_bound_rate_over_wide_range() {
    let ns: Vec<usize> = (1..=30)
        .map(|k| (10f64 * 1000f64.powf(k as f64 / 30.0)).round() as usize)
        .collect();
    let totals: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let (u, g) = build_example1_reduced(n).unwrap();
            d2_bound_chaos(&u, &ChaosVector::new(vec![g.into()]).unwrap(), 1.0, 0.0)
                .unwrap()
                .total
        })
        .collect();
    let slope = fit_rate(&ns, &totals).unwrap().slope;
    assert!((slope + 0.5).abs() < 0.05, "{slope}");
}

#[test]
fn example1_empirical_distance_below_bound() {
    for p in example1_sweep(&DEFAULT_SWEEP, 100_000, 11).unwrap() {
        let e = p.empirical.unwrap();
        let bound = p.dw_bound.unwrap();
        assert!(e.mean < bound + 3.0 * e.std_error, "n {}: {} vs {}", p.n, e.mean, bound);
    }
}

#[test]
fn example2_variance_and_covariance() {
    let ex = build_example2(3, 1.0).unwrap();
    assert!((covariance(&ex.u, &ex.v).unwrap() - 1.0).abs() < 1e-13);
    let ex = build_example2(1000, 1.0).unwrap();
    let var = covariance(&ex.v, &ex.v).unwrap();
    assert!((var / 2.0 - 1.0).abs() < 0.02, "{var}");
    assert_eq!(ex.rank_deficit(), 1);
}

#[test]
fn sweep_rows_carry_running_slopes() {
    let pts = example1_sweep(&DEFAULT_SWEEP, 0, 1).unwrap();
    let rows = sweep_rows(pts.iter().map(|p| (p.n, &p.report, None)));
    assert_eq!(rows.len(), DEFAULT_SWEEP.len());
    assert!(rows[0].slope_running.is_none());
    let last = rows.last().unwrap().slope_running.unwrap();
    assert!((last + 0.5).abs() < 0.1, "{last}");
}
