//! Small statistics helpers: Kolmogorov–Smirnov distance and moments.

/// One-sample Kolmogorov–Smirnov statistic against a reference CDF.
///
/// `samples` need not be sorted; a sorted copy is made internally.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let fx = cdf(x);
        let below = fx - i as f64 / n;
        let above = (i as f64 + 1.0) / n - fx;
        d = d.max(below).max(above);
    }
    d
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0);
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_zero_for_perfect_fit() {
        // Empirical CDF of U(0,1) at the quantile midpoints.
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d <= 0.5 / 1000.0 + 1e-12, "d = {d}");
    }

    #[test]
    fn ks_detects_gross_mismatch() {
        let xs = vec![0.9, 0.91, 0.95, 0.99];
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d > 0.8);
    }

    #[test]
    fn moments_helpers() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((std_dev(&xs) - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
