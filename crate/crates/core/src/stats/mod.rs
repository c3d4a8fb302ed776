//! Statistical primitives: t-tests, Wilson and Newcombe intervals,
//! percentiles, multi-seed summaries and the resampling helpers in
//! [`sampling`].

pub mod dist;
pub mod sampling;

use serde::{Deserialize, Serialize};

pub use dist::{normal_quantile, student_t_cdf, student_t_two_sided};
pub use sampling::{balanced_sample, balanced_subset, cap_to_percentile, derive_seed, stream_rng, CaseKey};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("sample too small: need at least {needed}, got {got}")]
    TooSmall { needed: usize, got: usize },
    #[error("both samples have zero variance")]
    ZeroVariance,
    #[error("need 0 <= k <= n and n >= 1 (k = {k}, n = {n})")]
    BadCounts { k: u64, n: u64 },
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("empty sample")]
    Empty,
    #[error("percentile must lie in [0, 100], got {0}")]
    BadQuantile(f64),
    #[error("non-finite value in sample")]
    NonFinite,
}

/// Welch (unequal variances) or Student (pooled variance) two-sample test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestVariant {
    #[default]
    Welch,
    Pooled,
}

/// Mean of one group with a normal-approximation confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupMean {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub a: GroupMean,
    pub b: GroupMean,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, ss / (n - 1.0))
}

/// Mean ± z·SE with z the normal quantile for `1 - alpha/2`.
pub fn group_mean(xs: &[f64], alpha: f64) -> Result<GroupMean, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::Empty);
    }
    check_alpha(alpha)?;
    let (mean, var) = if xs.len() == 1 {
        (xs[0], 0.0)
    } else {
        mean_var(xs)
    };
    let sd = var.sqrt();
    let half = normal_quantile(1.0 - alpha / 2.0) * sd / (xs.len() as f64).sqrt();
    Ok(GroupMean {
        n: xs.len(),
        mean,
        sd,
        ci_low: mean - half,
        ci_high: mean + half,
    })
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    t_test(a, b, TTestVariant::Welch)
}

/// Two-sample t-test of `mean(a) - mean(b)` with a two-sided p-value.
pub fn t_test(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TTestResult, StatsError> {
    for xs in [a, b] {
        if xs.len() < 2 {
            return Err(StatsError::TooSmall {
                needed: 2,
                got: xs.len(),
            });
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::NonFinite);
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if va == 0.0 && vb == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (se, df) = match variant {
        TTestVariant::Welch => {
            let (sa, sb) = (va / na, vb / nb);
            let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
            ((sa + sb).sqrt(), df)
        }
        TTestVariant::Pooled => {
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), na + nb - 2.0)
        }
    };
    let t = (ma - mb) / se;
    let p = student_t_two_sided(t, df);
    Ok(TTestResult {
        t,
        df,
        p,
        a: group_mean(a, 0.05)?,
        b: group_mean(b, 0.05)?,
    })
}

fn check_alpha(alpha: f64) -> Result<(), StatsError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(StatsError::BadAlpha(alpha))
    }
}

/// Wilson score interval for `k` successes in `n` trials at level `1 - alpha`.
pub fn wilson_interval(k: u64, n: u64, alpha: f64) -> Result<(f64, f64), StatsError> {
    if n == 0 || k > n {
        return Err(StatsError::BadCounts { k, n });
    }
    check_alpha(alpha)?;
    let z = normal_quantile(1.0 - alpha / 2.0);
    let z2 = z * z;
    let (kf, nf) = (k as f64, n as f64);
    // roots of (n + z²)p² - (2k + z²)p + k²/n = 0
    let root = z * (z2 + 4.0 * kf * (nf - kf) / nf).sqrt();
    let denom = 2.0 * (nf + z2);
    let lower = if k == 0 { 0.0 } else { (2.0 * kf + z2 - root) / denom };
    let upper = if k == n { 1.0 } else { (2.0 * kf + z2 + root) / denom };
    Ok((lower.max(0.0), upper.min(1.0)))
}

/// Confidence interval for a difference of two independent proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropDiffCI {
    pub d: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
}

impl PropDiffCI {
    /// True when the interval excludes zero.
    pub fn significant(&self) -> bool {
        self.lower > 0.0 || self.upper < 0.0
    }
}

/// Newcombe's hybrid score interval for `k1/n1 - k2/n2`, combining the two
/// Wilson intervals by square-and-add.
pub fn newcombe_diff_ci(k1: u64, n1: u64, k2: u64, n2: u64, alpha: f64) -> Result<PropDiffCI, StatsError> {
    let (l1, u1) = wilson_interval(k1, n1, alpha)?;
    let (l2, u2) = wilson_interval(k2, n2, alpha)?;
    let p1 = k1 as f64 / n1 as f64;
    let p2 = k2 as f64 / n2 as f64;
    let d = p1 - p2;
    let lower = d - ((p1 - l1).powi(2) + (u2 - p2).powi(2)).sqrt();
    let upper = d + ((u1 - p1).powi(2) + (p2 - l2).powi(2)).sqrt();
    Ok(PropDiffCI {
        d,
        lower: lower.max(-1.0),
        upper: upper.min(1.0),
        alpha,
    })
}

/// Linear-interpolation percentile: `h = (n-1)·q/100` on the sorted sample.
pub fn percentile(values: &[f64], q: f64) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(StatsError::BadQuantile(q));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, q))
}

pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Result<f64, StatsError> {
    percentile(values, 50.0)
}

/// Significance stars: 3 at p < 0.001, 2 at p < 0.01, 1 at p < 0.05.
pub fn star_level(p: f64) -> u8 {
    if p < 0.001 {
        3
    } else if p < 0.01 {
        2
    } else if p < 0.05 {
        1
    } else {
        0
    }
}

pub fn stars(level: u8) -> String {
    "★".repeat(level as usize)
}

pub const DEFAULT_LEVELS: [f64; 3] = [0.05, 0.01, 0.001];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelFraction {
    pub level: f64,
    /// Fraction of seeds with `p < level`.
    pub frac_significant: f64,
}

/// Aggregate of one test repeated across resampling seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub n_seeds: usize,
    pub levels: Vec<LevelFraction>,
    pub median_t: f64,
    pub median_p: f64,
    pub t_min: f64,
    pub t_max: f64,
}

pub fn multi_seed_summary(results: &[TTestResult], levels: &[f64]) -> Result<SeedSummary, StatsError> {
    if results.is_empty() {
        return Err(StatsError::Empty);
    }
    let ts: Vec<f64> = results.iter().map(|r| r.t).collect();
    let ps: Vec<f64> = results.iter().map(|r| r.p).collect();
    let n = results.len();
    Ok(SeedSummary {
        n_seeds: n,
        levels: levels
            .iter()
            .map(|&level| LevelFraction {
                level,
                frac_significant: ps.iter().filter(|&&p| p < level).count() as f64 / n as f64,
            })
            .collect(),
        median_t: median(&ts)?,
        median_p: median(&ps)?,
        t_min: ts.iter().copied().fold(f64::INFINITY, f64::min),
        t_max: ts.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// True iff at least `threshold` of the flags are set (inclusive).
pub fn seed_consensus(flags: &[bool], threshold: f64) -> bool {
    if flags.is_empty() {
        return false;
    }
    let hits = flags.iter().filter(|&&f| f).count();
    hits as f64 / flags.len() as f64 >= threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identical_samples_t_zero() {
        let a = [1.0, 2.5, 3.0, 4.5];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn small_samples_known_value() {
        // a = {1,2,3}, b = {1..6}: means 2 and 3.5, variances 1 and 3.5
        let r = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let se = (1.0f64 / 3.0 + 3.5 / 6.0).sqrt();
        assert_relative_eq!(r.t, -1.5 / se, epsilon = 1e-12);
        let df = (1.0f64 / 3.0 + 3.5 / 6.0).powi(2) / ((1.0f64 / 3.0).powi(2) / 2.0 + (3.5f64 / 6.0).powi(2) / 5.0);
        assert_relative_eq!(r.df, df, epsilon = 1e-12);
        assert!(r.p > 0.1 && r.p < 0.3);
    }

    #[test]
    fn large_shift_is_significant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.5 + rng.random::<f64>() * 0.1).collect();
        assert!(welch_t_test(&a, &b).unwrap().p < 0.001);
    }

    #[test]
    fn t_test_errors() {
        assert!(matches!(welch_t_test(&[1.0], &[1.0, 2.0]), Err(StatsError::TooSmall { .. })));
        assert_eq!(welch_t_test(&[1.0, 1.0], &[2.0, 2.0]), Err(StatsError::ZeroVariance));
        assert!(welch_t_test(&[1.0, 1.0], &[2.0, 3.0]).is_ok());
    }

    #[test]
    fn pooled_variant_matches_textbook() {
        let a = [2.0, 4.0, 6.0];
        let b = [1.0, 2.0, 3.0, 4.0];
        let r = t_test(&a, &b, TTestVariant::Pooled).unwrap();
        // sp² = (2·4 + 3·(5/3)) / 5 = 2.6
        let t = (4.0 - 2.5) / (2.6f64 * (1.0 / 3.0 + 0.25)).sqrt();
        assert_relative_eq!(r.t, t, epsilon = 1e-12);
        assert_eq!(r.df, 5.0);
    }

    #[test]
    fn wilson_boundaries() {
        assert_eq!(wilson_interval(0, 10, 0.05).unwrap().0, 0.0);
        assert_eq!(wilson_interval(10, 10, 0.05).unwrap().1, 1.0);
        assert!(wilson_interval(1, 0, 0.05).is_err());
        assert!(wilson_interval(11, 10, 0.05).is_err());
        assert!(wilson_interval(1, 10, 0.0).is_err());
    }

    #[test]
    fn wilson_half_of_ten() {
        let (lo, hi) = wilson_interval(5, 10, 0.05).unwrap();
        assert_relative_eq!(lo, 0.236_593_090_512_564_6, epsilon = 1e-9);
        assert_relative_eq!(hi, 0.763_406_909_487_435_4, epsilon = 1e-9);
    }

    #[test]
    fn newcombe_symmetric_when_equal() {
        let ci = newcombe_diff_ci(30, 60, 30, 60, 0.05).unwrap();
        assert_eq!(ci.d, 0.0);
        assert_relative_eq!(ci.lower, -ci.upper, epsilon = 1e-15);
        assert!(!ci.significant());
    }

    #[test]
    fn newcombe_extreme_separation() {
        let ci = newcombe_diff_ci(10, 10, 0, 10, 0.05).unwrap();
        assert_eq!(ci.d, 1.0);
        assert!(ci.significant());
        assert!(ci.upper <= 1.0 && ci.lower > 0.0);
        assert!(newcombe_diff_ci(1, 0, 0, 10, 0.05).is_err());
    }

    #[test]
    fn newcombe_reference_example() {
        // Newcombe (1998) example: 56/70 vs 48/80 -> (0.0524, 0.3339)
        let ci = newcombe_diff_ci(56, 70, 48, 80, 0.05).unwrap();
        assert_relative_eq!(ci.d, 0.2, epsilon = 1e-12);
        assert_relative_eq!(ci.lower, 0.0524, epsilon = 1e-4);
        assert_relative_eq!(ci.upper, 0.3339, epsilon = 1e-4);
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0], 50.0).unwrap(), 2.0);
        assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 25.0).unwrap(), 1.75);
        assert_eq!(percentile(&[5.0, -1.0, 2.0], 0.0).unwrap(), -1.0);
        assert_eq!(percentile(&[5.0, -1.0, 2.0], 100.0).unwrap(), 5.0);
        assert_eq!(percentile(&[], 50.0), Err(StatsError::Empty));
        assert!(percentile(&[1.0], 101.0).is_err());
    }

    #[test]
    fn stars_by_p() {
        assert_eq!(star_level(0.0005), 3);
        assert_eq!(star_level(0.005), 2);
        assert_eq!(star_level(0.02), 1);
        assert_eq!(star_level(0.05), 0);
        assert_eq!(stars(3), "★★★");
    }

    fn fake(t: f64, p: f64) -> TTestResult {
        let g = GroupMean {
            n: 2,
            mean: 0.0,
            sd: 1.0,
            ci_low: 0.0,
            ci_high: 0.0,
        };
        TTestResult { t, df: 10.0, p, a: g, b: g }
    }

    #[test]
    fn summary_levels() {
        let results: Vec<_> = (0..20).map(|_| fake(2.2, 0.04)).collect();
        let s = multi_seed_summary(&results, &DEFAULT_LEVELS).unwrap();
        assert_eq!(s.levels[0].frac_significant, 1.0);
        assert_eq!(s.levels[1].frac_significant, 0.0);
        assert_eq!(s.levels[2].frac_significant, 0.0);
    }

    #[test]
    fn summary_median_and_range() {
        let results = [fake(-3.0, 0.01), fake(-1.0, 0.3), fake(-2.0, 0.05)];
        let s = multi_seed_summary(&results, &DEFAULT_LEVELS).unwrap();
        assert_eq!(s.median_t, -2.0);
        assert_eq!((s.t_min, s.t_max), (-3.0, -1.0));
        assert_eq!(s.median_p, 0.05);
    }

    #[test]
    fn consensus_threshold_inclusive() {
        let flags = |k: usize| (0..20).map(|i| i < k).collect::<Vec<_>>();
        assert!(seed_consensus(&flags(16), 0.8));
        assert!(!seed_consensus(&flags(15), 0.8));
        assert!(seed_consensus(&flags(20), 0.8));
        assert!(!seed_consensus(&[], 0.8));
    }

    proptest! {
        #[test]
        fn t_test_antisymmetric(
            a in prop::collection::vec(-100.0f64..100.0, 2..30),
            b in prop::collection::vec(-100.0f64..100.0, 2..30),
        ) {
            if let (Ok(ab), Ok(ba)) = (welch_t_test(&a, &b), welch_t_test(&b, &a)) {
                prop_assert_eq!(ab.t, -ba.t);
                prop_assert_eq!(ab.p, ba.p);
                prop_assert!((0.0..=1.0).contains(&ab.p));
                let diff = ab.a.mean - ab.b.mean;
                prop_assert!(diff == 0.0 || ab.t.signum() == diff.signum());
            }
        }

        #[test]
        fn wilson_contains_estimate(n in 1u64..500, frac in 0.0f64..=1.0, alpha in 0.001f64..0.5) {
            let k = (frac * n as f64).round() as u64;
            let (lo, hi) = wilson_interval(k, n, alpha).unwrap();
            let p = k as f64 / n as f64;
            prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        }

        #[test]
        fn wilson_narrows_with_n(k in 0u64..20, scale in 1u64..10) {
            let n = 20;
            let (lo1, hi1) = wilson_interval(k, n, 0.05).unwrap();
            let (lo2, hi2) = wilson_interval(k * (scale + 1), n * (scale + 1), 0.05).unwrap();
            prop_assert!(hi2 - lo2 < hi1 - lo1);
        }

        #[test]
        fn newcombe_swap_negates(n1 in 1u64..200, n2 in 1u64..200, f1 in 0.0f64..=1.0, f2 in 0.0f64..=1.0) {
            let k1 = (f1 * n1 as f64).floor() as u64;
            let k2 = (f2 * n2 as f64).floor() as u64;
            let ab = newcombe_diff_ci(k1, n1, k2, n2, 0.05).unwrap();
            let ba = newcombe_diff_ci(k2, n2, k1, n1, 0.05).unwrap();
            prop_assert!((ab.lower + ba.upper).abs() < 1e-12);
            prop_assert!((ab.upper + ba.lower).abs() < 1e-12);
            prop_assert!(-1.0 <= ab.lower && ab.lower <= ab.d && ab.d <= ab.upper && ab.upper <= 1.0);
        }

        #[test]
        fn percentile_monotone(values in prop::collection::vec(-1e3f64..1e3, 1..50), q1 in 0.0f64..=100.0, q2 in 0.0f64..=100.0) {
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            prop_assert!(percentile(&values, lo).unwrap() <= percentile(&values, hi).unwrap());
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(percentile(&values, 100.0).unwrap(), max);
        }
    }
}
