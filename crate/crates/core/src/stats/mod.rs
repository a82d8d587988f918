//! Rank statistics, significance tests, and outlier capping.

mod special;

pub use special::{beta_inc, gamma_q, ln_gamma};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("need at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("empty input")]
    Empty,
    #[error("every value exceeds the hard limit {0}")]
    AllAboveHardLimit(f64),
    #[error("bad parameters: {0}")]
    BadParams(String),
}

/// Outcome of a significance test. `df` is the chi-square degrees of
/// freedom for Kruskal-Wallis and the Welch-Satterthwaite value for Welch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample (n - 1) variance. Zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// 1-based ranks with ties sharing the average of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && xs[idx[j]] == xs[idx[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean(i+1..=j)
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with tie-averaged ranks.
///
/// Returns `Ok(None)` when either rank sequence is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Option<f64>, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooShort { needed: 2, got: a.len() });
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

/// Kendall's tau-b. Quadratic; intended for report-sized inputs.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<Option<f64>, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooShort { needed: 2, got: a.len() });
    }
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_a, mut ties_b) = (0i64, 0i64);
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let da = a[i].total_cmp(&a[j]) as i64;
            let db = b[i].total_cmp(&b[j]) as i64;
            if da == 0 && db == 0 {
                continue;
            } else if da == 0 {
                ties_a += 1;
            } else if db == 0 {
                ties_b += 1;
            } else if da == db {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n1 = (concordant + discordant + ties_a) as f64;
    let n2 = (concordant + discordant + ties_b) as f64;
    if n1 == 0.0 || n2 == 0.0 {
        return Ok(None);
    }
    Ok(Some((concordant - discordant) as f64 / (n1 * n2).sqrt()))
}

/// Survival function of the chi-square distribution.
pub fn chi2_sf(x: f64, df: u32) -> Result<f64, StatsError> {
    if df == 0 || x.is_nan() || x < 0.0 {
        return Err(StatsError::BadParams(format!("chi2_sf(x={x}, df={df})")));
    }
    Ok(gamma_q(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

/// One-sided upper tail P(T > x) of Student's t.
pub fn t_sf(x: f64, df: f64) -> Result<f64, StatsError> {
    if df.is_nan() || df <= 0.0 || x.is_nan() {
        return Err(StatsError::BadParams(format!("t_sf(x={x}, df={df})")));
    }
    if x.is_infinite() {
        return Ok(if x > 0.0 { 0.0 } else { 1.0 });
    }
    let tail = 0.5 * beta_inc(df / 2.0, 0.5, df / (df + x * x));
    Ok(if x >= 0.0 { tail } else { 1.0 - tail }.clamp(0.0, 1.0))
}

/// Kruskal-Wallis H test with tie correction and chi-square p-value.
pub fn kruskal_wallis<G: AsRef<[f64]>>(groups: &[G]) -> Result<TestResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(i) = groups.iter().position(|g| g.as_ref().is_empty()) {
        return Err(StatsError::EmptyGroup(i));
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.as_ref().iter().copied()).collect();
    let n = pooled.len();
    if n < 3 {
        return Err(StatsError::TooShort { needed: 3, got: n });
    }
    let df = (groups.len() - 1) as f64;
    let ranks = average_ranks(&pooled);
    let nf = n as f64;

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_sum += t * t * t - t;
        i = j;
    }
    let correction = 1.0 - tie_sum / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Ok(TestResult { statistic: 0.0, df, p_two_sided: 1.0 });
    }

    let mut offset = 0;
    let mut weighted = 0.0;
    for g in groups {
        let len = g.as_ref().len();
        let r_mean = ranks[offset..offset + len].iter().sum::<f64>() / len as f64;
        weighted += len as f64 * r_mean * r_mean;
        offset += len;
    }
    let h = (12.0 / (nf * (nf + 1.0)) * weighted - 3.0 * (nf + 1.0)) / correction;
    let h = h.max(0.0);
    let p = chi2_sf(h, groups.len() as u32 - 1)?;
    Ok(TestResult { statistic: h, df, p_two_sided: p })
}

/// Welch's unequal-variance t test, two-sided.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooShort { needed: 2, got: s.len() });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Ok(if ma == mb {
            TestResult { statistic: 0.0, df: na + nb - 2.0, p_two_sided: 1.0 }
        } else {
            let t = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
            TestResult { statistic: t, df: na + nb - 2.0, p_two_sided: 0.0 }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let p = (2.0 * t_sf(t.abs(), df)?).min(1.0);
    Ok(TestResult { statistic: t, df, p_two_sided: p })
}

/// Bonferroni-corrected significance threshold.
pub fn bonferroni(alpha: f64, comparisons: u32) -> Result<f64, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) || comparisons == 0 {
        return Err(StatsError::BadParams(format!(
            "bonferroni(alpha={alpha}, m={comparisons})"
        )));
    }
    Ok(alpha / comparisons as f64)
}

/// Number of unordered pairs among `k` items.
pub fn pairs(k: usize) -> u32 {
    (k * k.saturating_sub(1) / 2) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capped {
    pub values: Vec<f64>,
    pub t_max: f64,
    pub replaced: usize,
}

/// Caps values above `mean + k * std`, where mean and sample std are taken
/// over values at or below `hard_limit`.
pub fn cap_outliers(times: &[f64], k: f64, hard_limit: f64) -> Result<Capped, StatsError> {
    if times.is_empty() {
        return Err(StatsError::Empty);
    }
    let kept: Vec<f64> = times.iter().copied().filter(|&t| t <= hard_limit).collect();
    if kept.is_empty() {
        return Err(StatsError::AllAboveHardLimit(hard_limit));
    }
    let t_max = mean(&kept) + k * sample_std(&kept);
    let values = cap_at(times, t_max);
    let replaced = times.iter().filter(|&&t| t > t_max).count();
    Ok(Capped { values, t_max, replaced })
}

/// Replaces every value above `t_max` with `t_max`.
pub fn cap_at(times: &[f64], t_max: f64) -> Vec<f64> {
    times.iter().map(|&t| t.min(t_max)).collect()
}

/// Percentile in [0, 100] by linear interpolation between closest ranks.
pub fn percentile(xs: &[f64], q: f64) -> Result<f64, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(StatsError::BadParams(format!("percentile q={q}")));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn spearman_anchors() {
        assert_eq!(spearman(&[1., 2., 3.], &[1., 2., 3.]).unwrap(), Some(1.0));
        assert_eq!(spearman(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), Some(-1.0));
        let rho = spearman(&[1., 2., 3., 4., 5.], &[5., 6., 7., 8., 7.]).unwrap().unwrap();
        assert!(close(rho, 0.820_782_681_668_123_3, 1e-12));
        assert_eq!(average_ranks(&[5., 6., 7., 8., 7.]), vec![1., 2., 3.5, 5., 3.5]);
    }

    #[test]
    fn spearman_errors_and_undefined() {
        assert_eq!(spearman(&[1., 2.], &[1.]), Err(StatsError::LengthMismatch(2, 1)));
        assert!(matches!(spearman(&[1.], &[1.]), Err(StatsError::TooShort { .. })));
        assert_eq!(spearman(&[1., 2., 3.], &[2., 2., 2.]).unwrap(), None);
    }

    #[test]
    fn kruskal_anchor_and_degenerate() {
        let r = kruskal_wallis(&[vec![1., 2., 3.], vec![4., 5., 6.], vec![7., 8., 9.]]).unwrap();
        assert!(close(r.statistic, 7.2, 1e-12));
        assert!(close(r.p_two_sided, (-3.6f64).exp(), 1e-12));
        assert_eq!(r.df, 2.0);

        let same = kruskal_wallis(&[vec![5., 5.], vec![5., 5.]]).unwrap();
        assert_eq!((same.statistic, same.p_two_sided), (0.0, 1.0));
        let r = kruskal_wallis(&[vec![1., 2.], vec![1., 2.]]).unwrap();
        assert!(close(r.statistic, 0.0, 1e-12));
        assert!(close(r.p_two_sided, 1.0, 1e-12));

        assert_eq!(kruskal_wallis(&[vec![1.0], vec![]]), Err(StatsError::EmptyGroup(1)));
        assert_eq!(kruskal_wallis(&[vec![1.0, 2.0]]), Err(StatsError::TooFewGroups(1)));
    }

    #[test]
    fn welch_anchor() {
        let r = welch_t(&[1., 2., 3., 4.], &[2., 4., 6., 8.]).unwrap();
        assert!(close(r.statistic, -1.732_050_807_568_877_4, 1e-12));
        assert!(close(r.df, 4.411_764_705_882_353, 1e-12));
        assert!(close(r.p_two_sided, 0.151_580_504_845_303_83, 1e-10));

        let same = welch_t(&[1., 2., 3.], &[1., 2., 3.]).unwrap();
        assert_eq!((same.statistic, same.p_two_sided), (0.0, 1.0));
        let flat = welch_t(&[4., 4.], &[4., 4.]).unwrap();
        assert_eq!((flat.statistic, flat.p_two_sided), (0.0, 1.0));
        assert!(matches!(welch_t(&[1.0], &[1.0, 2.0]), Err(StatsError::TooShort { .. })));
    }

    #[test]
    fn bonferroni_thresholds() {
        assert_eq!(bonferroni(0.05, 6).unwrap(), 0.05 / 6.0);
        assert!(close(bonferroni(0.05, 6).unwrap(), 0.008_333, 1e-6));
        assert_eq!(bonferroni(0.05, 10).unwrap(), 0.005);
        assert_eq!(bonferroni(0.05, 1).unwrap(), 0.05);
        assert!(bonferroni(0.0, 3).is_err());
        assert!(bonferroni(0.05, 0).is_err());
        assert_eq!(pairs(4), 6);
        assert_eq!(pairs(5), 10);
    }

    #[test]
    fn capping_rules() {
        let c = cap_outliers(&[2., 2., 2., 2., 2.], 5.0, 600.0).unwrap();
        assert_eq!(c.values, vec![2.0; 5]);
        assert_eq!((c.t_max, c.replaced), (2.0, 0));

        let c = cap_outliers(&[10., 10., 10., 10., 700.], 5.0, 600.0).unwrap();
        assert_eq!(c.t_max, 10.0);
        assert_eq!(c.values, vec![10.0; 5]);
        assert_eq!(c.replaced, 1);

        assert_eq!(cap_outliers(&[], 5.0, 600.0), Err(StatsError::Empty));
        assert!(matches!(
            cap_outliers(&[700.0], 5.0, 600.0),
            Err(StatsError::AllAboveHardLimit(_))
        ));
    }

    #[test]
    fn tail_anchors() {
        for k in 1..10 {
            assert_eq!(chi2_sf(0.0, k).unwrap(), 1.0);
        }
        assert!(close(chi2_sf(7.2, 2).unwrap(), 0.027_323_722_447_292_555, 1e-14));
        assert!(close(t_sf(0.0, 3.0).unwrap(), 0.5, 1e-15));
        assert!(close(t_sf(1.0, 1.0).unwrap(), 0.25, 1e-14));
        assert!(close(t_sf(2.5, 3.7).unwrap(), 0.035_911_011_455_913_376, 1e-12));
        assert!(close(t_sf(-1.2, 10.5).unwrap(), 0.871_742_714_835_161_1, 1e-12));
        assert!(close(chi2_sf(3.3, 5).unwrap(), 0.653_841_682_394_454_5, 1e-12));
        assert!(chi2_sf(-1.0, 2).is_err());
        assert!(t_sf(1.0, 0.0).is_err());
    }

    #[test]
    fn percentile_linear() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&xs, 50.0).unwrap(), 2.5);
        assert_eq!(percentile(&xs, 25.0).unwrap(), 1.75);
        assert_eq!(percentile(&xs, 100.0).unwrap(), 4.0);
        assert_eq!(percentile(&[7.0], 75.0).unwrap(), 7.0);
    }

    #[test]
    fn kendall_simple() {
        assert_eq!(kendall_tau(&[1., 2., 3.], &[1., 2., 3.]).unwrap(), Some(1.0));
        assert_eq!(kendall_tau(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), Some(-1.0));
        assert_eq!(kendall_tau(&[1., 1.], &[1., 2.]).unwrap(), None);
    }
}
