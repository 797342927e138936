//! Hypothesis tests: Wilcoxon signed-rank, Kruskal-Wallis, Shapiro-Wilk,
//! Levene, plus Bonferroni adjustment.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal};

use crate::error::{Error, Result};

/// Largest non-zero-difference count for which the Wilcoxon p-value is exact.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    WilcoxonExact,
    WilcoxonNormal,
    KruskalWallis,
    ShapiroWilk,
    Levene,
}

impl TestMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMethod::WilcoxonExact => "wilcoxon_exact",
            TestMethod::WilcoxonNormal => "wilcoxon_normal",
            TestMethod::KruskalWallis => "kruskal_wallis",
            TestMethod::ShapiroWilk => "shapiro_wilk",
            TestMethod::Levene => "levene",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub n: usize,
    pub adjusted_p: Option<f64>,
}

impl TestResult {
    fn new(statistic: f64, p_value: f64, method: TestMethod, n: usize) -> Self {
        Self {
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            method,
            n,
            adjusted_p: None,
        }
    }
}

fn stat_err(msg: impl Into<String>) -> Error {
    Error::Statistics(msg.into())
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(stat_err("input contains non-finite values"))
    }
}

/// Mid-ranks (1-based) of `values` and the tie sizes encountered.
pub fn rank(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = mid;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn tie_term(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

/// Distribution of the doubled positive-rank sum under the null: entry `s`
/// counts sign assignments whose doubled W+ equals `s`.
fn signed_rank_counts(doubled_ranks: &[usize]) -> Vec<f64> {
    let total: usize = doubled_ranks.iter().sum();
    let mut counts = vec![0.0; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in doubled_ranks {
        reach += r;
        for s in (r..=reach).rev() {
            counts[s] += counts[s - r];
        }
    }
    counts
}

/// Two-sided exact p-value for doubled W+ = `observed`.
fn exact_signed_rank_p(doubled_ranks: &[usize], observed: usize) -> f64 {
    let counts = signed_rank_counts(doubled_ranks);
    let all: f64 = counts.iter().sum();
    let lower: f64 = counts[..=observed].iter().sum::<f64>() / all;
    let upper: f64 = counts[observed..].iter().sum::<f64>() / all;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Paired two-sided Wilcoxon signed-rank test on `x - y`. Zero differences
/// are dropped; the statistic is min(W+, W-).
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(stat_err(format!(
            "paired samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    check_finite(x)?;
    check_finite(y)?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Err(stat_err("all paired differences are zero"));
    }
    let n = d.len();
    if n < 5 {
        return Err(stat_err(format!("{n} non-zero differences; at least 5 required")));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = rank(&abs);
    let w_plus: f64 = ranks.iter().zip(&d).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let statistic = w_plus.min(total - w_plus);
    if n <= WILCOXON_EXACT_MAX_N {
        // Mid-ranks are multiples of 1/2, so doubling makes them integral.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let p = exact_signed_rank_p(&doubled, (2.0 * w_plus).round() as usize);
        Ok(TestResult::new(statistic, p, TestMethod::WilcoxonExact, n))
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
        if var <= 0.0 {
            return Err(stat_err("zero variance in signed ranks"));
        }
        let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let p = 2.0 * (1.0 - standard_normal().cdf(z));
        Ok(TestResult::new(statistic, p, TestMethod::WilcoxonNormal, n))
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Kruskal-Wallis H with tie correction; chi-square p on k-1 df.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(stat_err("at least two groups required"));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(stat_err("empty group"));
    }
    let pooled: Vec<f64> = groups.concat();
    check_finite(&pooled)?;
    let n = pooled.len() as f64;
    let (ranks, ties) = rank(&pooled);
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
    let correction = 1.0 - tie_term(&ties) / (n * n * n - n);
    if correction <= 0.0 {
        return Err(stat_err("all values identical"));
    }
    let h = h / correction;
    let df = (groups.len() - 1) as f64;
    let p = 1.0 - ChiSquared::new(df).expect("positive df").cdf(h.max(0.0));
    Ok(TestResult::new(h, p, TestMethod::KruskalWallis, pooled.len()))
}

/// c0 + c1 x + c2 x² + ...
fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

const SW_C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const SW_C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const SW_C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const SW_C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const SW_C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const SW_C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const SW_G: [f64; 2] = [-2.273, 0.459];

/// Shapiro-Wilk W with Royston's approximation to its null distribution.
pub fn shapiro_wilk(x: &[f64]) -> Result<TestResult> {
    let n = x.len();
    if !(3..=5000).contains(&n) {
        return Err(stat_err(format!("sample size {n} outside 3..=5000")));
    }
    check_finite(x)?;
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    if s[n - 1] - s[0] < 1e-19 * s[0].abs().max(1.0) {
        return Err(stat_err("constant sample"));
    }
    let nf = n as f64;
    let half = n / 2;
    // Coefficients for the upper half, a[0] pairing the extremes.
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let normal = standard_normal();
        let m: Vec<f64> = (1..=half)
            .map(|i| -normal.inverse_cdf((i as f64 - 0.375) / (nf + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / nf.sqrt();
        let a1 = poly(&SW_C1, rsn) + m[0] / ssumm2;
        let (first, fac) = if n > 5 {
            let a2 = poly(&SW_C2, rsn) + m[1] / ssumm2;
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
            a[1] = a2;
            (2, fac)
        } else {
            let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
            (1, fac)
        };
        a[0] = a1;
        for i in first..half {
            a[i] = m[i] / fac;
        }
    }
    let mean = s.iter().sum::<f64>() / nf;
    let ss: f64 = s.iter().map(|v| (v - mean) * (v - mean)).sum();
    let num: f64 = (0..half).map(|i| a[i] * (s[n - 1 - i] - s[i])).sum();
    let w = (num * num / ss).min(1.0);

    let p = if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = std::f64::consts::FRAC_PI_3;
        (pi6 * (w.sqrt().asin() - stqr)).max(0.0)
    } else {
        let mut y = (1.0 - w).ln();
        let (m, sd) = if n <= 11 {
            let gamma = poly(&SW_G, nf);
            if y >= gamma {
                return Ok(TestResult::new(w, 1e-99, TestMethod::ShapiroWilk, n));
            }
            y = -(gamma - y).ln();
            (poly(&SW_C3, nf), poly(&SW_C4, nf).exp())
        } else {
            let ln_n = nf.ln();
            (poly(&SW_C5, ln_n), poly(&SW_C6, ln_n).exp())
        };
        1.0 - standard_normal().cdf((y - m) / sd)
    };
    Ok(TestResult::new(w, p, TestMethod::ShapiroWilk, n))
}

/// Centre used for Levene's absolute deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeveneCenter {
    #[default]
    Mean,
    Median,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Levene's test for equal variances with an F(k-1, N-k) p-value.
pub fn levene(groups: &[Vec<f64>], center: LeveneCenter) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(stat_err("at least two groups required"));
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(stat_err("every group needs at least two values"));
    }
    for g in groups {
        check_finite(g)?;
    }
    let z: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let c = match center {
                LeveneCenter::Mean => g.iter().sum::<f64>() / g.len() as f64,
                LeveneCenter::Median => median(g),
            };
            g.iter().map(|v| (v - c).abs()).collect()
        })
        .collect();
    let k = groups.len() as f64;
    let n: usize = groups.iter().map(Vec::len).sum();
    let nf = n as f64;
    let means: Vec<f64> = z.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let grand = z.iter().flatten().sum::<f64>() / nf;
    let between: f64 = z
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum();
    let within: f64 = z
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    if within <= 0.0 {
        return Err(stat_err("zero spread within every group"));
    }
    let w = (nf - k) / (k - 1.0) * between / within;
    let f = FisherSnedecor::new(k - 1.0, nf - k).map_err(|e| stat_err(e.to_string()))?;
    Ok(TestResult::new(w, 1.0 - f.cdf(w), TestMethod::Levene, n))
}

/// Multiplies each p-value by the family size, capping at 1.
pub fn bonferroni(p_values: &[f64]) -> Result<Vec<f64>> {
    if p_values.is_empty() {
        return Err(stat_err("no p-values to adjust"));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(stat_err(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len() as f64;
    Ok(p_values.iter().map(|p| (p * m).min(1.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilcoxon_mixed_signs() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, -4.0, 5.0], &[0.0; 5]).unwrap();
        assert_eq!(r.statistic, 4.0);
        assert!((r.p_value - 0.4375).abs() < 1e-12);
        assert_eq!(r.method, TestMethod::WilcoxonExact);
    }

    #[test]
    fn wilcoxon_all_positive() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert!((r.p_value - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_identical_samples() {
        let x = [0.3, 0.5, 0.9, 0.1, 0.2];
        assert!(matches!(wilcoxon_signed_rank(&x, &x), Err(Error::Statistics(_))));
    }

    #[test]
    fn kruskal_wallis_three_blocks() {
        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]]).unwrap();
        assert!((r.statistic - 7.2).abs() < 1e-12);
        assert!((r.p_value - (-3.6f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn kruskal_wallis_identical_values() {
        assert!(kruskal_wallis(&[vec![1.0, 1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn bonferroni_examples() {
        let adj = bonferroni(&[0.004; 10]).unwrap();
        assert!((adj[0] - 0.04).abs() < 1e-15);
        assert_eq!(bonferroni(&[0.5; 10]).unwrap()[0], 1.0);
        assert_eq!(bonferroni(&[0.3]).unwrap(), vec![0.3]);
        assert!(bonferroni(&[1.2]).is_err());
    }

    #[test]
    fn levene_duplicate_groups() {
        let g = vec![1.0, 2.5, 3.0, 7.0];
        let r = levene(&[g.clone(), g], LeveneCenter::Mean).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mid_ranks() {
        let (r, ties) = rank(&[10.0, 20.0, 10.0, 30.0]);
        assert_eq!(r, vec![1.5, 3.0, 1.5, 4.0]);
        assert_eq!(ties, vec![2]);
    }
}
