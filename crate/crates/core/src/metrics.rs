//! Performance statistics for daily return series.
//!
//! Annualization uses 252 trading days and the arithmetic convention
//! (mean × 252), appropriate for a self-financing long-short spread; the
//! Sharpe ratio takes a zero risk-free rate for the same reason. Inference
//! uses the Newey–West long-run variance with a Bartlett kernel:
//!
//! ```text
//! LRV = (γ₀ + 2 Σ_{l=1..L} (1 − l/(L+1)) γ_l) · T/(T−p)
//! t   = mean / sqrt(LRV / T)
//! ```
//!
//! with automatic bandwidth `L = floor(4 (T/100)^(2/9))`. The `T/(T−p)`
//! small-sample scaling makes the `L = 0` case collapse exactly to the
//! textbook t-statistic. The same estimator provides HAC standard errors for
//! the factor regression coefficients.

use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::TRADING_DAYS_PER_YEAR;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("series too short: {len} observations, need >= {min}")]
    TooShort { len: usize, min: usize },
    #[error("zero volatility: Sharpe ratio undefined")]
    ZeroVolatility,
    #[error("long-run variance is not positive ({lrv})")]
    NonPositiveVariance { lrv: f64 },
    #[error("series length mismatch: y has {y_len}, X has {x_len}")]
    LengthMismatch { y_len: usize, x_len: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("bad factor file {path}: {reason}")]
    BadFactorFile { path: String, reason: String },
}

/// Headline performance metrics of a long-short return series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerfReport {
    pub r_ann: f64,
    pub sigma_ann: f64,
    pub sharpe: f64,
    pub mdd: f64,
    pub to_ann: f64,
    pub t_nw: f64,
    pub n_days: usize,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Annualized return, volatility, and Sharpe ratio of a daily series.
pub fn annualized_stats(daily: &[f64]) -> Result<(f64, f64, f64), MetricsError> {
    if daily.len() < 2 {
        return Err(MetricsError::TooShort {
            len: daily.len(),
            min: 2,
        });
    }
    let r_ann = mean(daily) * TRADING_DAYS_PER_YEAR;
    let sigma_ann = sample_std(daily) * TRADING_DAYS_PER_YEAR.sqrt();
    if sigma_ann == 0.0 {
        return Err(MetricsError::ZeroVolatility);
    }
    Ok((r_ann, sigma_ann, r_ann / sigma_ann))
}

/// Maximum drawdown of the compounded cumulative curve, in [−1, 0]. The
/// curve starts at 1 before the first return, so a single loss of x% is a
/// drawdown of −x%.
pub fn max_drawdown(daily: &[f64]) -> Result<f64, MetricsError> {
    if daily.is_empty() {
        return Err(MetricsError::TooShort { len: 0, min: 1 });
    }
    let mut level = 1.0f64;
    let mut peak = 1.0f64;
    let mut mdd = 0.0f64;
    for r in daily {
        level *= 1.0 + r;
        peak = peak.max(level);
        mdd = mdd.min(level / peak - 1.0);
    }
    Ok(mdd)
}

/// Automatic Bartlett bandwidth: `floor(4 (T/100)^(2/9))`.
pub fn automatic_lag(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

fn bartlett_lrv(demeaned: &[f64], lag: usize, n_params: usize) -> Result<f64, MetricsError> {
    let t = demeaned.len();
    let gamma = |l: usize| -> f64 {
        demeaned[l..]
            .iter()
            .zip(&demeaned[..t - l])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / t as f64
    };
    let mut lrv = gamma(0);
    let max_lag = lag.min(t - 1);
    for l in 1..=max_lag {
        let w = 1.0 - l as f64 / (max_lag as f64 + 1.0);
        lrv += 2.0 * w * gamma(l);
    }
    lrv *= t as f64 / (t - n_params) as f64;
    if lrv <= 0.0 {
        return Err(MetricsError::NonPositiveVariance { lrv });
    }
    Ok(lrv)
}

/// Newey–West t-statistic of the series mean with automatic bandwidth.
pub fn newey_west_tstat(daily: &[f64]) -> Result<f64, MetricsError> {
    newey_west_tstat_with_lag(daily, automatic_lag(daily.len()))
}

/// Newey–West t-statistic with an explicit bandwidth. With `lag = 0` this
/// equals `mean / (s / sqrt(T))` exactly.
pub fn newey_west_tstat_with_lag(daily: &[f64], lag: usize) -> Result<f64, MetricsError> {
    let t = daily.len();
    if t < 10 {
        return Err(MetricsError::TooShort { len: t, min: 10 });
    }
    let m = mean(daily);
    let demeaned: Vec<f64> = daily.iter().map(|x| x - m).collect();
    let lrv = bartlett_lrv(&demeaned, lag, 1)?;
    Ok(m / (lrv / t as f64).sqrt())
}

/// OLS with intercept and HAC (Bartlett) coefficient covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorRegressionResult {
    /// Daily intercept.
    pub alpha: f64,
    /// Slope per factor column, in input order.
    pub betas: Vec<f64>,
    /// Newey–West t-statistics: intercept first, then one per factor.
    pub t_stats: Vec<f64>,
    pub r_squared: f64,
    pub n_obs: usize,
}

/// Regress `y` on factor columns (each of the same length as `y`) with an
/// intercept. Coefficient covariance uses the Bartlett-kernel HAC estimator
/// with the same automatic bandwidth rule as [`newey_west_tstat`].
pub fn factor_regression(
    y: &[f64],
    factors: &[Vec<f64>],
) -> Result<FactorRegressionResult, MetricsError> {
    let t = y.len();
    for col in factors {
        if col.len() != t {
            return Err(MetricsError::LengthMismatch {
                y_len: t,
                x_len: col.len(),
            });
        }
    }
    let p = factors.len() + 1;
    if t < p + 2 || t < 10 {
        return Err(MetricsError::TooShort { len: t, min: 10.max(p + 2) });
    }
    let mut design = DMatrix::<f64>::zeros(t, p);
    for row in 0..t {
        design[(row, 0)] = 1.0;
        for (c, col) in factors.iter().enumerate() {
            design[(row, c + 1)] = col[row];
        }
    }
    let yv = DVector::from_column_slice(y);
    let xtx = design.transpose() * &design;
    let xtx_inv = xtx.try_inverse().ok_or(MetricsError::RankDeficient)?;
    let beta = &xtx_inv * design.transpose() * &yv;

    let residuals = &yv - &design * &beta;

    // HAC covariance of the score process g_t = x_t * u_t.
    let lag = automatic_lag(t).min(t - 1);
    let mut scores = DMatrix::<f64>::zeros(t, p);
    for row in 0..t {
        for c in 0..p {
            scores[(row, c)] = design[(row, c)] * residuals[row];
        }
    }
    let mut s = DMatrix::<f64>::zeros(p, p);
    for l in 0..=lag {
        let w = 1.0 - l as f64 / (lag as f64 + 1.0);
        let top = scores.rows(l, t - l);
        let bottom = scores.rows(0, t - l);
        let gamma = top.transpose() * bottom / t as f64;
        if l == 0 {
            s += &gamma;
        } else {
            s += (&gamma + gamma.transpose()) * w;
        }
    }
    s *= t as f64 / (t - p) as f64;
    let cov = &xtx_inv * (s * t as f64) * &xtx_inv;

    let t_stats: Vec<f64> = (0..p)
        .map(|c| beta[c] / cov[(c, c)].sqrt())
        .collect();

    let y_mean = mean(y);
    let sst: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let ssr: f64 = residuals.iter().map(|u| u * u).sum();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };

    Ok(FactorRegressionResult {
        alpha: beta[0],
        betas: beta.iter().skip(1).copied().collect(),
        t_stats,
        r_squared,
        n_obs: t,
    })
}

/// Dated factor return columns loaded from `factors.csv`.
#[derive(Debug, Clone)]
pub struct FactorTable {
    pub dates: Vec<NaiveDate>,
    pub names: Vec<String>,
    /// One column per factor, aligned with `dates`.
    pub columns: Vec<Vec<f64>>,
}

impl FactorTable {
    /// Inner-join the factor columns onto the given dates. Errors if any
    /// requested date has no factor row.
    pub fn aligned_to(&self, dates: &[NaiveDate]) -> Result<Vec<Vec<f64>>, MetricsError> {
        let index: std::collections::HashMap<NaiveDate, usize> = self
            .dates
            .iter()
            .enumerate()
            .map(|(i, d)| (*d, i))
            .collect();
        let mut out = vec![Vec::with_capacity(dates.len()); self.columns.len()];
        for d in dates {
            let row = index.get(d).ok_or_else(|| MetricsError::BadFactorFile {
                path: String::new(),
                reason: format!("no factor row for date {d}"),
            })?;
            for (c, col) in self.columns.iter().enumerate() {
                out[c].push(col[*row]);
            }
        }
        Ok(out)
    }
}

/// Load `factors.csv` (header `date,<factor>,...`; returns as decimals).
pub fn load_factors(path: &Path) -> Result<FactorTable, MetricsError> {
    let path_str = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|source| MetricsError::Csv {
        path: path_str.clone(),
        source,
    })?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|source| MetricsError::Csv {
            path: path_str.clone(),
            source,
        })?
        .iter()
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    if names.is_empty() {
        return Err(MetricsError::BadFactorFile {
            path: path_str,
            reason: "no factor columns".into(),
        });
    }
    let mut dates = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for rec in reader.records() {
        let rec = rec.map_err(|source| MetricsError::Csv {
            path: path_str.clone(),
            source,
        })?;
        let raw_date = rec.get(0).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
            MetricsError::BadFactorFile {
                path: path_str.clone(),
                reason: format!("bad date `{raw_date}`"),
            }
        })?;
        dates.push(date);
        for (c, raw) in rec.iter().skip(1).enumerate() {
            let v: f64 = raw.trim().parse().map_err(|_| MetricsError::BadFactorFile {
                path: path_str.clone(),
                reason: format!("bad value `{raw}` on {date}"),
            })?;
            columns[c].push(v);
        }
    }
    Ok(FactorTable {
        dates,
        names,
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn classic_tstat(xs: &[f64]) -> f64 {
        mean(xs) / (sample_std(xs) / (xs.len() as f64).sqrt())
    }

    #[test]
    fn zero_series_has_no_sharpe() {
        let daily = vec![0.0; 252];
        assert!(matches!(
            annualized_stats(&daily),
            Err(MetricsError::ZeroVolatility)
        ));
    }

    #[test]
    fn alternating_series_closed_form() {
        let daily: Vec<f64> = (0..252).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        let (r_ann, sigma_ann, sharpe) = annualized_stats(&daily).unwrap();
        assert!(r_ann.abs() < 1e-15);
        // Direct formula: sd = 0.01 * sqrt(n/(n-1)) for a mean-zero ±0.01 series.
        let n = 252.0f64;
        let expected = 0.01 * (n / (n - 1.0)).sqrt() * n.sqrt();
        assert!((sigma_ann - expected).abs() < 1e-6);
        assert_eq!(sharpe, 0.0);
    }

    #[test]
    fn near_constant_series_matches_direct_evaluation() {
        let mut daily = vec![0.001; 100];
        daily[50] = -0.001;
        let (r_ann, sigma_ann, sharpe) = annualized_stats(&daily).unwrap();
        let m = daily.iter().sum::<f64>() / 100.0;
        let sd = (daily.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 99.0).sqrt();
        assert!((r_ann - m * 252.0).abs() < 1e-15);
        assert!((sigma_ann - sd * 252.0f64.sqrt()).abs() < 1e-15);
        assert!((sharpe - r_ann / sigma_ann).abs() < 1e-12);
    }

    #[test]
    fn drawdown_of_monotone_curve_is_zero() {
        let daily = vec![0.01, 0.005, 0.02];
        assert_eq!(max_drawdown(&daily).unwrap(), 0.0);
    }

    #[test]
    fn drawdown_hand_curve() {
        // Curve [1, 1.1, 0.99, 1.2]: peak 1.1, trough 0.99.
        let daily = vec![0.1, -0.1, 1.2 / 0.99 - 1.0];
        let mdd = max_drawdown(&daily).unwrap();
        assert!((mdd - (-0.10)).abs() < 1e-12, "mdd {mdd}");
    }

    #[test]
    fn drawdown_single_loss() {
        assert_eq!(max_drawdown(&[-0.5]).unwrap(), -0.5);
    }

    #[test]
    fn automatic_lag_rule() {
        // floor(4 (T/100)^(2/9))
        assert_eq!(automatic_lag(100), 4);
        assert_eq!(automatic_lag(2000), 7);
        assert_eq!(automatic_lag(50), 3);
    }

    #[test]
    fn lag_zero_equals_classic_tstat() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let xs: Vec<f64> = (0..300)
                .map(|_| 0.0002 + 0.01 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let t_nw = newey_west_tstat_with_lag(&xs, 0).unwrap();
            let t_classic = classic_tstat(&xs);
            assert!(
                (t_nw - t_classic).abs() < 1e-12,
                "{t_nw} vs {t_classic}"
            );
        }
    }

    #[test]
    fn iid_series_se_ratio_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xs: Vec<f64> = (0..2000)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let t_nw = newey_west_tstat(&xs).unwrap();
        let t_iid = classic_tstat(&xs);
        // Equal means, so the SE ratio is the inverse t ratio.
        let ratio = (t_iid / t_nw).abs();
        assert!(ratio > 0.8 && ratio < 1.2, "ratio {ratio}");
    }

    #[test]
    fn positive_autocorrelation_shrinks_tstat() {
        let mut wins = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut x = 0.0;
            let xs: Vec<f64> = (0..1000)
                .map(|_| {
                    x = 0.9 * x + rng.sample::<f64, _>(StandardNormal);
                    x
                })
                .collect();
            let t_nw = newey_west_tstat(&xs).unwrap();
            let t_iid = classic_tstat(&xs);
            if t_nw.abs() < t_iid.abs() {
                wins += 1;
            }
        }
        assert!(wins >= 95, "only {wins}/100 trials shrank");
    }

    #[test]
    fn tstat_requires_ten_observations() {
        assert!(matches!(
            newey_west_tstat(&[0.01; 9]),
            Err(MetricsError::TooShort { .. })
        ));
    }

    #[test]
    fn scaling_leaves_sharpe_and_tstat_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..400)
            .map(|_| 0.0005 + 0.01 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let scaled: Vec<f64> = xs.iter().map(|x| 3.5 * x).collect();
        let (r1, s1, sh1) = annualized_stats(&xs).unwrap();
        let (r2, s2, sh2) = annualized_stats(&scaled).unwrap();
        assert!((sh1 - sh2).abs() < 1e-12);
        assert!((r2 - 3.5 * r1).abs() < 1e-12);
        assert!((s2 - 3.5 * s1).abs() < 1e-12);
        let t1 = newey_west_tstat(&xs).unwrap();
        let t2 = newey_west_tstat(&scaled).unwrap();
        assert!((t1 - t2).abs() < 1e-10);
    }

    #[test]
    fn identity_fit() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 50.0 - 0.5).collect();
        let res = factor_regression(&x, &[x.clone()]).unwrap();
        assert!(res.alpha.abs() < 1e-12);
        assert!((res.betas[0] - 1.0).abs() < 1e-12);
        assert!((res.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_fit_recovers_coefficients() {
        let x: Vec<f64> = (0..80).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 + 2.0 * v).collect();
        let res = factor_regression(&y, &[x]).unwrap();
        assert!((res.alpha - 0.5).abs() < 1e-10);
        assert!((res.betas[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn independent_noise_rarely_significant() {
        let mut significant = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
            let y: Vec<f64> = (0..300)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let x: Vec<f64> = (0..300)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let res = factor_regression(&y, &[x]).unwrap();
            if res.t_stats[1].abs() >= 1.96 {
                significant += 1;
            }
        }
        assert!(significant <= 10, "{significant}/100 spuriously significant");
    }

    #[test]
    fn rank_deficiency_detected() {
        let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let x2 = x.clone();
        assert!(matches!(
            factor_regression(&x, &[x.clone(), x2]),
            Err(MetricsError::RankDeficient)
        ));
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x1: Vec<f64> = (0..200).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let x2: Vec<f64> = (0..200).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = (0..200)
            .map(|i| 0.1 + 0.7 * x1[i] - 0.3 * x2[i] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let res = factor_regression(&y, &[x1.clone(), x2.clone()]).unwrap();
        let fitted: Vec<f64> = (0..200)
            .map(|i| res.alpha + res.betas[0] * x1[i] + res.betas[1] * x2[i])
            .collect();
        let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let dot1: f64 = resid.iter().zip(&x1).map(|(u, v)| u * v).sum();
        let dot2: f64 = resid.iter().zip(&x2).map(|(u, v)| u * v).sum();
        let dot0: f64 = resid.iter().sum();
        assert!(dot0.abs() < 1e-8 && dot1.abs() < 1e-8 && dot2.abs() < 1e-8);
    }

    #[test]
    fn constant_only_regression_matches_nw_tstat() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let y: Vec<f64> = (0..500)
            .map(|_| 0.0003 + 0.01 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let res = factor_regression(&y, &[]).unwrap();
        let t = newey_west_tstat(&y).unwrap();
        assert!((res.t_stats[0] - t).abs() < 1e-10);
        assert!((res.alpha - mean(&y)).abs() < 1e-15);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn drawdown_bounded(returns in proptest::collection::vec(-0.5f64..0.5, 1..200)) {
                let mdd = max_drawdown(&returns).unwrap();
                prop_assert!((-1.0..=0.0).contains(&mdd));
                let monotone = returns.iter().all(|&r| r >= 0.0);
                if monotone {
                    prop_assert_eq!(mdd, 0.0);
                }
            }
        }
    }

    #[test]
    fn factor_table_alignment() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("factors.csv");
        std::fs::write(
            &path,
            "date,mkt,smb\n2020-01-01,0.001,0.002\n2020-01-02,-0.001,0.0\n2020-01-03,0.002,0.001\n",
        )
        .unwrap();
        let table = load_factors(&path).unwrap();
        assert_eq!(table.names, vec!["mkt", "smb"]);
        let want = [
            NaiveDate::from_ymd_opt(2020, 1, 3).unwrap(),
            NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        ];
        let aligned = table.aligned_to(&want).unwrap();
        assert_eq!(aligned[0], vec![0.002, 0.001]);
        assert_eq!(aligned[1], vec![0.001, 0.002]);
        assert!(table
            .aligned_to(&[NaiveDate::from_ymd_opt(2021, 1, 1).unwrap()])
            .is_err());
    }
}
