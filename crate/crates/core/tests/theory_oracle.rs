mod common;

use outlier_mmd::theory::{gaussian_population_mmd2, GaussianSpec};
use outlier_mmd::KernelSpec;

#[test]
fn closed_form_agrees_with_brute_force_integration() {
    let pairs = [
        ((0.0, 1.0), (1.5, 1.0), 1.0),
        ((0.0, 1.0), (0.0, 2.0), 1.0),
        ((-1.0, 0.5), (1.0, 1.5), 0.7),
    ];
    for (i, ((m1, s1), (m2, s2), bw)) in pairs.into_iter().enumerate() {
        let p = GaussianSpec::new(m1, s1).unwrap();
        let q = GaussianSpec::new(m2, s2).unwrap();
        let kernel = KernelSpec::gaussian(bw).unwrap();
        let exact = gaussian_population_mmd2(&p, &q, bw).unwrap();
        let (mc, se) = common::monte_carlo_mmd2(&p, &q, &kernel, 2_000_000, i as u64);
        assert!(
            (mc - exact).abs() <= 3.0 * se,
            "pair {i}: closed form {exact}, monte carlo {mc} +- {se}"
        );
    }
}

#[test]
fn experiment_pair_rounds_to_reference() {
    let p = GaussianSpec::new(0.0, 1.0).unwrap();
    let q = GaussianSpec::new(1.5, 1.0).unwrap();
    let v = gaussian_population_mmd2(&p, &q, 1.0).unwrap();
    assert!((v - 0.36109).abs() < 5e-6);
}
