//! Reference computations for the statistical tests.

use micronas::eval::stats::rank;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Two-sided signed-rank p-value by enumerating all 2^n sign patterns.
pub fn brute_force_p(d: &[f64]) -> f64 {
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, _) = rank(&abs);
    let observed: f64 = ranks.iter().zip(d).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let n = d.len();
    let (mut lower, mut upper) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed + 1e-9 {
            lower += 1;
        }
        if w >= observed - 1e-9 {
            upper += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (2.0 * (lower.min(upper) as f64) / total).min(1.0)
}

/// Differences of length `n` with frequent ties in magnitude.
pub fn tied_differences(rng: &mut impl Rng, n: usize, integral: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.gen_range(1..6) as f64 * if integral { 1.0 } else { 0.37 + rng.gen::<f64>() };
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

/// Kolmogorov-Smirnov distance of a sample from Uniform(0, 1).
pub fn ks_distance(mut p: Vec<f64>) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
        .fold(0.0, f64::max)
}

pub fn normal_sample(rng: &mut impl Rng, n: usize, sd: f64) -> Vec<f64> {
    let d = Normal::new(0.0, sd).unwrap();
    (0..n).map(|_| d.sample(rng)).collect()
}
