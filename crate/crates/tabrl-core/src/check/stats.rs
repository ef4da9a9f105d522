/// One-sided 99% normal quantile.
pub const Z_99: f64 = 2.3263478740408408;

/// Pearson statistic against a uniform expectation.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// Pearson statistic against an arbitrary expected distribution.
/// `probs` must sum to 1 and be positive where counts can land.
pub fn chi_square_expected(counts: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(counts.len(), probs.len(), "counts/probs length mismatch");
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = total as f64 * p;
            let d = c as f64 - e;
            d * d / e
        })
        .sum()
}

/// 99th-percentile chi-square critical value via the Wilson-Hilferty cube
/// approximation; good to a fraction of a percent for df >= 3.
pub fn chi_square_crit_99(df: usize) -> f64 {
    let k = df as f64;
    let t = 1.0 - 2.0 / (9.0 * k) + Z_99 * (2.0 / (9.0 * k)).sqrt();
    k * t * t * t
}

/// Four-sigma binomial tolerance around p for n trials: wide enough that a
/// correct sampler fails roughly once per 16000 runs.
pub fn binomial_tol(p: f64, n: u64) -> f64 {
    4.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn critical_values_match_tables() {
        // Reference values from standard chi-square tables.
        for (df, expect) in [(5usize, 15.09), (9, 21.67), (19, 36.19), (99, 134.64)] {
            let got = chi_square_crit_99(df);
            assert!(
                (got - expect).abs() / expect < 0.01,
                "df {df}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn uniform_counts_pass_and_skewed_counts_fail() {
        let mut rng = crate::rng::stream(1, "stats-test", 0);
        let k = 16usize;
        let mut counts = vec![0u64; k];
        for _ in 0..16_000 {
            counts[rng.gen_range(0..k)] += 1;
        }
        assert!(chi_square_uniform(&counts) < chi_square_crit_99(k - 1));

        let mut skewed = vec![1000u64; k];
        skewed[0] = 1600;
        assert!(chi_square_uniform(&skewed) > chi_square_crit_99(k - 1));
    }
}
