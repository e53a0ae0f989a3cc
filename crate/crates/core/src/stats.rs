//! Small estimation helpers shared by the verification campaigns.

/// Two-sided z for a 95% interval.
pub const Z_95: f64 = 1.959963984540054;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0, "Wilson interval needs at least one trial");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F1 − F2|`.
pub fn ks2_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0usize, 0usize);
    let (n1, n2) = (xs.len() as f64, ys.len() as f64);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    d
}

/// Asymptotic two-sample KS p-value via the Kolmogorov distribution
/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2 k² λ²}`.
pub fn ks2_pvalue(a: &[f64], b: &[f64]) -> f64 {
    let d = ks2_statistic(a, b);
    let n1 = a.len() as f64;
    let n2 = b.len() as f64;
    let ne = n1 * n2 / (n1 + n2);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Weighted least-squares line fit with known per-point variances
/// (`w_k = 1/σ_k²`). `slope_se` is the exact standard error under those
/// variances.
#[derive(Debug, Clone, Copy)]
pub struct WeightedFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> WeightedFit {
    assert!(x.len() == y.len() && x.len() == w.len() && x.len() >= 2);
    let sw: f64 = w.iter().sum();
    let xbar: f64 = x.iter().zip(w).map(|(xi, wi)| wi * xi).sum::<f64>() / sw;
    let ybar: f64 = y.iter().zip(w).map(|(yi, wi)| wi * yi).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        sxx += wi * (xi - xbar) * (xi - xbar);
        sxy += wi * (xi - xbar) * (yi - ybar);
    }
    let slope = sxy / sxx;
    WeightedFit {
        slope,
        intercept: ybar - slope * xbar,
        slope_se: (1.0 / sxx).sqrt(),
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn wilson_brackets_the_proportion() {
        let (lo, hi) = wilson_interval(50, 100, Z_95);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!((lo - 0.404).abs() < 5e-3 && (hi - 0.596).abs() < 5e-3);
        let (lo, hi) = wilson_interval(0, 100_000, Z_95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 1e-4);
        let (lo, hi) = wilson_interval(100, 100, Z_95);
        assert!(lo < 1.0 && hi == 1.0);
    }

    #[test]
    fn ks_identical_samples() {
        let a = vec![0.0, 0.0, 1.0, 2.0];
        assert_eq!(ks2_statistic(&a, &a), 0.0);
        assert_eq!(ks2_pvalue(&a, &a), 1.0);
    }

    #[test]
    fn ks_disjoint_samples() {
        let a = vec![0.0, 0.1, 0.2, 0.3];
        let b = vec![1.0, 1.1, 1.2, 1.3];
        assert_eq!(ks2_statistic(&a, &b), 1.0);
        assert!(ks2_pvalue(&a, &b) < 0.05);
    }

    #[test]
    fn ks_same_distribution_rarely_rejects() {
        let mut rng = SplitMix64::new(7);
        let mut rejections = 0;
        for _ in 0..50 {
            let a: Vec<f64> = (0..200).map(|_| rng.next_f64()).collect();
            let b: Vec<f64> = (0..200).map(|_| rng.next_f64()).collect();
            if ks2_pvalue(&a, &b) < 0.01 {
                rejections += 1;
            }
        }
        assert!(rejections <= 3, "{rejections} rejections out of 50");
    }

    #[test]
    fn weighted_fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let w = [1.0, 4.0, 1.0, 2.0];
        let fit = weighted_linear_fit(&x, &y, &w);
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!(fit.slope_se > 0.0);
    }

    #[test]
    fn median_and_variance() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
        assert!((sample_variance(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-12);
    }
}
