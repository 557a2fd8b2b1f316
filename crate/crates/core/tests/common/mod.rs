#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;

use outlier_mmd::simgen::stream;
use outlier_mmd::theory::GaussianSpec;
use outlier_mmd::KernelSpec;

/// Brute-force population MMD^2 from `draws` independent quadruples
/// `(X, X', Y, Y')`, averaging `k(X,X') + k(Y,Y') - k(X,Y') - k(X',Y)`.
/// Returns the mean and its standard error.
pub fn monte_carlo_mmd2(
    p: &GaussianSpec,
    q: &GaussianSpec,
    kernel: &KernelSpec,
    draws: u64,
    seed: u64,
) -> (f64, f64) {
    let mut rng = stream(seed, 0xC0FFEE, 0);
    let mut draw = |g: &GaussianSpec| -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        g.mu + g.sigma * z
    };
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..draws {
        let (x, x2, y, y2) = (draw(p), draw(p), draw(q), draw(q));
        let h = kernel.eval(x, x2) + kernel.eval(y, y2) - kernel.eval(x, y2) - kernel.eval(x2, y);
        sum += h;
        sum_sq += h * h;
    }
    let t = draws as f64;
    let mean = sum / t;
    let var = (sum_sq / t - mean * mean) * t / (t - 1.0);
    (mean, (var / t).sqrt())
}

/// Largest violation of "non-increasing" in a series, measured in combined
/// standard errors of consecutive points. Non-positive when monotone.
pub fn worst_increase(values: &[(f64, f64)]) -> f64 {
    values
        .windows(2)
        .map(|w| {
            let (a, sa) = w[0];
            let (b, sb) = w[1];
            let diff = b - a;
            if diff <= 0.0 {
                0.0
            } else {
                let se = (sa * sa + sb * sb).sqrt();
                if se == 0.0 {
                    f64::INFINITY
                } else {
                    diff / se
                }
            }
        })
        .fold(0.0, f64::max)
}
