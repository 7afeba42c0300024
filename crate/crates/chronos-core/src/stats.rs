//! Goodness-of-fit statistics for validating sampled records against the
//! analytic densities they were drawn from.

use crate::error::{Error, Result};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Kolmogorov-Smirnov statistic: sup |F_empirical - F| over the sample.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut sup = 0.0_f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        sup = sup.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    sup
}

/// Asymptotic 1% critical value for the KS statistic at sample size n.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// Outcome of a chi-square goodness-of-fit test on binned counts.
#[derive(Clone, Copy, Debug)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub rejected: bool,
    /// Bins that survived pooling of low-expectation cells.
    pub pooled_bins: usize,
}

/// Chi-square test of observed against expected counts at significance
/// alpha. Adjacent cells are pooled until each pooled cell carries at least
/// min_expected expected counts, the standard validity guard.
pub fn chi_square_gof(
    observed: &[f64],
    expected: &[f64],
    alpha: f64,
    min_expected: f64,
) -> Result<ChiSquareTest> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::Domain(format!(
            "chi-square needs matching nonempty count lists, got {} and {}",
            observed.len(),
            expected.len()
        )));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "significance level must be inside (0, 1), got {alpha}"
        )));
    }
    if expected.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::Domain(
            "expected counts must be finite and nonnegative".into(),
        ));
    }

    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut acc_o, mut acc_e) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        acc_o += o;
        acc_e += e;
        if acc_e >= min_expected {
            pooled.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 || acc_o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc_o;
                last.1 += acc_e;
            }
            None => pooled.push((acc_o, acc_e)),
        }
    }
    if pooled.len() < 2 {
        return Err(Error::Domain(format!(
            "chi-square needs at least two pooled cells with expectation \
             {min_expected}, got {}",
            pooled.len()
        )));
    }

    let statistic: f64 = pooled
        .iter()
        .map(|(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum();
    let dof = pooled.len() - 1;
    let critical = ChiSquared::new(dof as f64)
        .expect("dof >= 1")
        .inverse_cdf(1.0 - alpha);
    Ok(ChiSquareTest {
        statistic,
        dof,
        critical,
        rejected: statistic > critical,
        pooled_bins: pooled.len(),
    })
}

/// Sample mean and its standard error (Bessel-corrected).
pub fn mean_and_standard_error(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::Domain(
            "standard error needs at least two samples".into(),
        ));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_accepts_the_true_cdf_and_flags_a_wrong_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let samples: Vec<f64> = (0..50_000).map(|_| rng.gen::<f64>()).collect();
        let good = ks_statistic(&samples, |x| x.clamp(0.0, 1.0));
        assert!(good < ks_critical_1pct(samples.len()), "ks {good}");
        let bad = ks_statistic(&samples, |x| x.clamp(0.0, 1.0).powi(2));
        assert!(bad > ks_critical_1pct(samples.len()));
    }

    #[test]
    fn ks_of_a_perfect_grid_is_half_a_step() {
        // Points at (i + 0.5)/n under the uniform CDF: sup deviation 1/(2n).
        let n = 100;
        let samples: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert_relative_eq!(
            ks_statistic(&samples, |x| x),
            0.5 / n as f64,
            epsilon = 1e-12
        );
    }

    #[test]
    fn chi_square_is_zero_on_exact_agreement() {
        let counts = [10.0, 20.0, 30.0, 40.0];
        let t = chi_square_gof(&counts, &counts, 0.01, 5.0).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!(!t.rejected);
        assert_eq!(t.dof, 3);
    }

    #[test]
    fn chi_square_critical_matches_reference_quantiles() {
        let t = chi_square_gof(&[60.0, 40.0], &[50.0, 50.0], 0.01, 5.0).unwrap();
        assert_eq!(t.dof, 1);
        // The quantile comes from a numerical inverse cdf good to ~1e-5.
        assert_relative_eq!(t.critical, 6.63489660102121, max_relative = 1e-5);
        // (60-50)^2/50 + (40-50)^2/50 = 4, below the 1% cut.
        assert_relative_eq!(t.statistic, 4.0, epsilon = 1e-12);
        assert!(!t.rejected);
    }

    #[test]
    fn low_expectation_cells_are_pooled() {
        let expected = [1.0, 1.0, 1.0, 1.0, 1.0, 50.0, 50.0];
        let observed = [2.0, 0.0, 1.0, 1.0, 1.0, 50.0, 50.0];
        let t = chi_square_gof(&observed, &expected, 0.01, 5.0).unwrap();
        // First five cells pool into one of expectation 5.
        assert_eq!(t.pooled_bins, 3);
        assert_eq!(t.dof, 2);
        assert_eq!(t.statistic, 0.0);
    }

    #[test]
    fn trailing_slack_merges_into_the_last_cell() {
        let expected = [50.0, 50.0, 2.0];
        let observed = [50.0, 50.0, 2.0];
        let t = chi_square_gof(&observed, &expected, 0.01, 5.0).unwrap();
        assert_eq!(t.pooled_bins, 2);
        assert_eq!(t.statistic, 0.0);
    }

    #[test]
    fn chi_square_rejects_a_shifted_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 10_000;
        let mut observed = vec![0.0; 10];
        for _ in 0..n {
            // Triangular-ish skew via max of two uniforms.
            let x: f64 = rng.gen::<f64>().max(rng.gen::<f64>());
            observed[((x * 10.0) as usize).min(9)] += 1.0;
        }
        let expected = vec![n as f64 / 10.0; 10];
        assert!(chi_square_gof(&observed, &expected, 0.01, 5.0).unwrap().rejected);
    }

    #[test]
    fn mean_and_se_on_a_known_list() {
        let (mean, se) = mean_and_standard_error(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_relative_eq!(mean, 2.5, epsilon = 1e-15);
        // Sample variance 5/3, se = sqrt(5/12).
        assert_relative_eq!(se, (5.0_f64 / 12.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(chi_square_gof(&[1.0], &[1.0, 2.0], 0.01, 5.0).is_err());
        assert!(chi_square_gof(&[], &[], 0.01, 5.0).is_err());
        assert!(chi_square_gof(&[1.0, 1.0], &[1.0, 1.0], 1.5, 5.0).is_err());
        assert!(chi_square_gof(&[1.0, 1.0], &[1.0, f64::NAN], 0.01, 5.0).is_err());
        assert!(mean_and_standard_error(&[1.0]).is_err());
    }
}
