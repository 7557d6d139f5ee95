//! Pearson correlation and the Wilcoxon rank-sum test.

use serde::Serialize;
use statrs::function::erf::erfc;
use thiserror::Error;

/// Combined sample size up to which [`wilcoxon_rank_sum`] enumerates the
/// exact null distribution.
pub const EXACT_THRESHOLD: usize = 12;

/// Largest combined sample size accepted when exact mode is forced.
pub const EXACT_LIMIT: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("sample is empty")]
    EmptySample,
    #[error("non-finite observation")]
    NonFinite,
    #[error("exact enumeration limited to {EXACT_LIMIT} observations, got {0}")]
    TooLargeForExact(usize),
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let n = xs.len();
    if n < 2 {
        return Err(StatsError::TooShort(n));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSumMode {
    Exact,
    /// Normal approximation with tie-corrected variance and a 0.5
    /// continuity correction.
    NormalApproximation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankSumResult {
    /// Sum of the pooled midranks of the first sample.
    pub statistic: f64,
    /// Mann-Whitney U of the first sample.
    pub u: f64,
    /// Continuity-corrected standard score, reported in both modes.
    pub z: f64,
    /// Two-sided p-value from the mode's null distribution.
    pub p_value: f64,
    pub mode: RankSumMode,
    pub n1: usize,
    pub n2: usize,
}

/// Midranks (1-based, ties averaged) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j share the average of ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Wilcoxon rank-sum test of `a` against `b`; exact when
/// `a.len() + b.len() <= EXACT_THRESHOLD`, normal approximation otherwise.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumResult, StatsError> {
    let mode = if a.len() + b.len() <= EXACT_THRESHOLD {
        RankSumMode::Exact
    } else {
        RankSumMode::NormalApproximation
    };
    wilcoxon_rank_sum_with(a, b, mode)
}

pub fn wilcoxon_rank_sum_with(a: &[f64], b: &[f64], mode: RankSumMode) -> Result<RankSumResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    if mode == RankSumMode::Exact && n > EXACT_LIMIT {
        return Err(StatsError::TooLargeForExact(n));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let statistic: f64 = ranks[..n1].iter().sum();
    let u = statistic - (n1 * (n1 + 1)) as f64 / 2.0;
    let z = normal_score(&pooled, statistic, n1, n2);
    let p_value = match mode {
        RankSumMode::Exact => exact_p(&ranks, n1),
        RankSumMode::NormalApproximation => erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0),
    };
    Ok(RankSumResult {
        statistic,
        u,
        z,
        p_value,
        mode,
        n1,
        n2,
    })
}

fn normal_score(pooled: &[f64], statistic: f64, n1: usize, n2: usize) -> f64 {
    let n = (n1 + n2) as f64;
    let expected = n1 as f64 * (n + 1.0) / 2.0;
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let variance = if n > 1.0 {
        n1 as f64 * n2 as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    if variance <= 0.0 {
        return 0.0;
    }
    let d = statistic - expected;
    d.signum() * (d.abs() - 0.5).max(0.0) / variance.sqrt()
}

/// Two-sided exact p-value: the share of all `C(n, n1)` assignments of the
/// pooled midranks to the first sample whose rank sum deviates from its
/// expectation at least as much as the observed one.
fn exact_p(ranks: &[f64], n1: usize) -> f64 {
    // doubled midranks are integers, which keeps the comparison exact
    let doubled: Vec<i64> = ranks.iter().map(|r| (r * 2.0).round() as i64).collect();
    let n = doubled.len() as i64;
    let centre = n1 as i64 * (n + 1);
    let observed = (doubled[..n1].iter().sum::<i64>() - centre).abs();

    struct Walk<'a> {
        doubled: &'a [i64],
        centre: i64,
        observed: i64,
        hits: u64,
        total: u64,
    }

    impl Walk<'_> {
        fn run(&mut self, start: usize, left: usize, sum: i64) {
            if left == 0 {
                self.total += 1;
                if (sum - self.centre).abs() >= self.observed {
                    self.hits += 1;
                }
                return;
            }
            for i in start..=self.doubled.len() - left {
                self.run(i + 1, left - 1, sum + self.doubled[i]);
            }
        }
    }

    let mut walk = Walk {
        doubled: &doubled,
        centre,
        observed,
        hits: 0,
        total: 0,
    };
    walk.run(0, n1, 0);
    walk.hits as f64 / walk.total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 3.0, 4.5];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_hand_computed() {
        // means 2.5/2.5; deviations (-1.5,-0.5,0.5,1.5) and (-1.5,0.5,-0.5,1.5)
        // Σdxdy = 2.25 - 0.25 - 0.25 + 2.25 = 4; Σdx² = Σdy² = 5  => 0.8
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-15);
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(
            pearson(&[1.0, 2.0], &[1.0]).unwrap_err(),
            StatsError::LengthMismatch { left: 2, right: 1 }
        );
        assert_eq!(pearson(&[1.0], &[1.0]).unwrap_err(), StatsError::TooShort(1));
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap_err(), StatsError::ZeroVariance);
        assert_eq!(pearson(&[1.0, 2.0], &[f64::NAN, 2.0]).unwrap_err(), StatsError::NonFinite);
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
        assert_eq!(midranks(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn identical_samples_are_null() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(r.z, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.mode, RankSumMode::Exact);

        let a: Vec<f64> = (0..20).map(f64::from).collect();
        let r = wilcoxon_rank_sum(&a, &a).unwrap();
        assert_eq!(r.mode, RankSumMode::NormalApproximation);
        assert_eq!(r.z, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn exact_two_by_two() {
        // rank sums of the 6 two-element subsets of {1,2,3,4}: 3,4,5,5,6,7;
        // observed 3 is 2 away from 5, matched by 3 and 7 => 2/6
        let r = wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 3.0);
        assert_eq!(r.u, 0.0);
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn normal_approximation_reference() {
        // 1..5 vs 6..10: W = 15, E = 27.5, var = 25*11/12, z = -(12.5-0.5)/sqrt(22.9167)
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [6.0, 7.0, 8.0, 9.0, 10.0];
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        assert_eq!(r.mode, RankSumMode::Exact);
        assert!((r.p_value - 2.0 / 252.0).abs() < 1e-15);
        let approx = wilcoxon_rank_sum_with(&a, &b, RankSumMode::NormalApproximation).unwrap();
        let z = -12.0 / (25.0_f64 * 11.0 / 12.0).sqrt();
        assert!((approx.z - z).abs() < 1e-12);
        // two-sided normal tail at |z| = 2.50672
        assert!((approx.p_value - 0.012186).abs() < 1e-5);
    }

    #[test]
    fn rank_sum_errors() {
        assert_eq!(wilcoxon_rank_sum(&[], &[1.0]).unwrap_err(), StatsError::EmptySample);
        let big: Vec<f64> = (0..30).map(f64::from).collect();
        assert_eq!(
            wilcoxon_rank_sum_with(&big, &big, RankSumMode::Exact).unwrap_err(),
            StatsError::TooLargeForExact(60)
        );
    }

    #[test]
    fn all_tied_sample_is_null() {
        let r = wilcoxon_rank_sum_with(&[3.0; 7], &[3.0; 9], RankSumMode::NormalApproximation).unwrap();
        assert_eq!(r.z, 0.0);
        assert_eq!(r.p_value, 1.0);
    }
}
