//! Exact small-sample statistics. Counts are handled as `u128` integers so
//! that tail sums and probability comparisons are exact.

use super::AnalysisError;

/// Largest `n` for which binomial coefficients are computed exactly.
pub const MAX_EXACT_N: u64 = 120;

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Two-sided exact binomial test of `k` successes in `n` trials at p = 0.5:
/// twice the upper tail beyond the larger of `k` and `n - k`, capped at 1.
pub fn sign_test_p(k: u64, n: u64) -> Result<f64, AnalysisError> {
    if k > n {
        return Err(AnalysisError::Invalid(format!("k = {k} exceeds n = {n}")));
    }
    if n > MAX_EXACT_N {
        return Err(AnalysisError::Invalid(format!("n = {n} exceeds the exact limit {MAX_EXACT_N}")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let extreme = k.max(n - k);
    let tail: u128 = (extreme..=n).map(|i| binomial(n, i)).sum();
    let total = 1u128 << n;
    if 2 * tail >= total {
        return Ok(1.0);
    }
    Ok((2 * tail) as f64 / total as f64)
}

/// A 2×2 table: rows are property membership (with, without), columns are
/// the reward split (good, bad).
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Table2x2 {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl Table2x2 {
    pub fn new(n11: u64, n10: u64, n01: u64, n00: u64) -> Self {
        Table2x2 { n11, n10, n01, n00 }
    }

    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    /// Log odds ratio with 0.5 added to every cell.
    pub fn haldane_log_odds_ratio(&self) -> f64 {
        let c = |v: u64| v as f64 + 0.5;
        ((c(self.n11) * c(self.n00)) / (c(self.n10) * c(self.n01))).ln()
    }
}

/// Two-sided Fisher exact test: total probability of all tables with the
/// observed margins that are no more likely than the observed one.
pub fn fisher_exact(t: &Table2x2) -> Result<f64, AnalysisError> {
    let g = t.total();
    if g > MAX_EXACT_N {
        return Err(AnalysisError::Invalid(format!("table total {g} exceeds the exact limit {MAX_EXACT_N}")));
    }
    let with = t.n11 + t.n10;
    let good = t.n11 + t.n01;
    let weight = |x: u64| binomial(with, x) * binomial(g - with, good - x);
    let observed = weight(t.n11);
    let lo = good.saturating_sub(g - with);
    let hi = with.min(good);
    let tail: u128 = (lo..=hi).map(weight).filter(|w| *w <= observed).sum();
    let denom = binomial(g, good);
    Ok((tail as f64 / denom as f64).min(1.0))
}

/// Smallest attainable two-sided Fisher p for a property held by `k` of `g`
/// items when the good column holds `half` of them.
pub fn p_min_ceiling(k: u64, g: u64, half: u64) -> Result<f64, AnalysisError> {
    if k == 0 || k >= g || half == 0 || half >= g {
        return Err(AnalysisError::Invalid(format!("need 0 < k < g and 0 < half < g, got k={k}, g={g}, half={half}")));
    }
    if g > MAX_EXACT_N {
        return Err(AnalysisError::Invalid(format!("g = {g} exceeds the exact limit {MAX_EXACT_N}")));
    }
    let k = if k <= half { k } else { g - k };
    let p = 2.0 * binomial(g - k, half - k.min(half)) as f64 / binomial(g, half) as f64;
    Ok(p.min(1.0))
}

/// Benjamini–Hochberg adjusted q-values, returned in input order.
pub fn bh_fdr(p_values: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if let Some(p) = p_values.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(AnalysisError::Invalid(format!("p-value {p} outside (0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        running = running.min(p_values[i] * m as f64 / (rank + 1) as f64);
        q[i] = running.min(1.0);
    }
    Ok(q)
}

/// Median; an even count averages the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Z-scores with the sample (n − 1) standard deviation; `None` when fewer than
/// two values are given or they have no spread.
pub fn zscores(values: &[f64]) -> Option<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd <= 0.0 || !sd.is_finite() {
        return None;
    }
    Some(values.iter().map(|v| (v - mean) / sd).collect())
}

/// Wilson score interval for a proportion `k / n` (z = 1.96 for 95 %).
pub fn wilson_interval(k: u64, n: u64, z: f64) -> Option<(f64, f64)> {
    if n == 0 || k > n {
        return None;
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    Some(((centre - half).max(0.0), (centre + half).min(1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(14, 7), 3432);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(5, 6), 0);
        assert_eq!(binomial(120, 60), 96614908840363322603893139521372656);
    }

    #[test]
    fn sign_test_examples() {
        assert!((sign_test_p(16, 16).unwrap() - 2.0 / 65536.0).abs() < 1e-15);
        assert_eq!(sign_test_p(8, 16).unwrap(), 1.0);
        assert!((sign_test_p(15, 16).unwrap() - 34.0 / 65536.0).abs() < 1e-15);
        assert_eq!(sign_test_p(1, 16).unwrap(), sign_test_p(15, 16).unwrap());
        assert!(sign_test_p(3, 2).is_err());
    }

    #[test]
    fn fisher_examples() {
        let t = Table2x2::new(7, 0, 0, 7);
        assert!((fisher_exact(&t).unwrap() - 2.0 / 3432.0).abs() < 1e-15);
        assert!((t.haldane_log_odds_ratio() - 225f64.ln()).abs() < 1e-12);
        assert_eq!(fisher_exact(&Table2x2::new(4, 3, 3, 4)).unwrap(), 1.0);
    }

    #[test]
    fn p_min_values() {
        let expect = [(3, 0.192), (4, 0.070), (5, 0.021), (6, 0.005)];
        for (k, v) in expect {
            assert!((p_min_ceiling(k, 14, 7).unwrap() - v).abs() < 5e-4, "k={k}");
        }
        assert_eq!(p_min_ceiling(11, 14, 7).unwrap(), p_min_ceiling(3, 14, 7).unwrap());
        assert!(p_min_ceiling(0, 14, 7).is_err());
    }

    #[test]
    fn bh_examples() {
        let q = bh_fdr(&[0.001, 0.02, 0.04]).unwrap();
        for (a, b) in q.iter().zip([0.003, 0.03, 0.04]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(bh_fdr(&[0.3; 5]).unwrap(), vec![0.3; 5]);
        assert_eq!(bh_fdr(&[0.7]).unwrap(), vec![0.7]);
        assert!(bh_fdr(&[0.0]).is_err());
    }

    #[test]
    fn zscore_example() {
        let z = zscores(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        for (a, b) in z.iter().zip([-1.161895, -0.387298, 0.387298, 1.161895]) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(zscores(&[2.0, 2.0]).is_none());
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
    }

    #[test]
    fn wilson_contains_the_estimate() {
        let (lo, hi) = wilson_interval(12, 16, 1.96).unwrap();
        assert!(lo < 0.75 && 0.75 < hi);
        assert!(wilson_interval(0, 0, 1.96).is_none());
    }
}
