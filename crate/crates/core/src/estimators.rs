//! Point and variance estimators for the three designs, the SRS baseline, and
//! theoretical variance formulas for validation.
//!
//! Sample variances use divisor `n - 1` throughout; the unbiasedness targets
//! force it. MVSR and RPOR carry design-based variance estimators that are
//! unbiased for the model+design variance of the point estimator. CPOR has no
//! unbiased variance estimator; it borrows the RPOR form (generalized to
//! unequal strata) and flags the result as conservative.

use serde::{Deserialize, Serialize};

use crate::designs::{Allocation, DesignKind, RankedRecord, StratifiedPopulation};
use crate::{Error, Result};

/// Non-fatal estimation conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Warning {
    /// Variance estimation needs at least two observations per stratum.
    VarianceNeedsTwoPerStratum,
    /// Variance estimation needs at least two observations in total.
    VarianceNeedsTwoObservations,
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::VarianceNeedsTwoPerStratum => {
                f.write_str("variance omitted: needs n >= 2 per stratum")
            }
            Warning::VarianceNeedsTwoObservations => {
                f.write_str("variance omitted: needs at least 2 observations")
            }
        }
    }
}

/// Point and variance estimate for one target variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableEstimate {
    /// Original column index of the variable.
    pub column: usize,
    pub mu_hat: f64,
    pub var_hat: Option<f64>,
}

/// Estimates for every target variable of one design pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub design: DesignKind,
    pub estimates: Vec<VariableEstimate>,
    /// Realized per-stratum sample sizes.
    pub sample_sizes: Vec<usize>,
    /// True when the variance estimator is borrowed (CPOR).
    pub conservative_variance: bool,
    pub warnings: Vec<Warning>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with divisor n-1.
fn sample_variance(values: &[f64], center: f64) -> f64 {
    let ss: f64 = values.iter().map(|v| (v - center) * (v - center)).sum();
    ss / (values.len() as f64 - 1.0)
}

fn target_matrix(samples: &[Vec<RankedRecord>]) -> Vec<Vec<Vec<f64>>> {
    // [stratum][variable][observation]
    samples
        .iter()
        .map(|stratum| {
            if stratum.is_empty() {
                return Vec::new();
            }
            let r = stratum[0].target_values.len();
            (0..r)
                .map(|j| stratum.iter().map(|rec| rec.target_values[j]).collect())
                .collect()
        })
        .collect()
}

fn n_target_variables(samples: &[Vec<RankedRecord>]) -> Result<usize> {
    let mut r = None;
    for stratum in samples {
        for rec in stratum {
            let len = rec.target_values.len();
            if *r.get_or_insert(len) != len {
                return Err(Error::InvalidEstimationInput(
                    "records carry mixed target dimensions".into(),
                ));
            }
        }
    }
    r.ok_or_else(|| Error::InvalidEstimationInput("no sampled records".into()))
}

/// MVSR estimator: unweighted mean of stratum sample means, with the
/// two-component design variance estimator.
pub fn estimate_mvsr(
    population: &StratifiedPopulation,
    samples: &[Vec<RankedRecord>],
) -> Result<EstimateReport> {
    if population.design != DesignKind::Mvsr {
        return Err(Error::DesignMismatch(format!(
            "estimate_mvsr got a {} population",
            population.design
        )));
    }
    equal_stratum_report(population, samples, DesignKind::Mvsr)
}

/// RPOR estimator: same point estimator as MVSR with the single-extension
/// design variance estimator.
pub fn estimate_rpor(
    population: &StratifiedPopulation,
    samples: &[Vec<RankedRecord>],
) -> Result<EstimateReport> {
    if population.design != DesignKind::Rpor {
        return Err(Error::DesignMismatch(format!(
            "estimate_rpor got a {} population",
            population.design
        )));
    }
    equal_stratum_report(population, samples, DesignKind::Rpor)
}

fn equal_stratum_report(
    population: &StratifiedPopulation,
    samples: &[Vec<RankedRecord>],
    design: DesignKind,
) -> Result<EstimateReport> {
    let m = population.m();
    if samples.len() != m {
        return Err(Error::InvalidEstimationInput(format!(
            "{} sample strata for m={m}",
            samples.len()
        )));
    }
    let n = samples[0].len();
    if n == 0 || samples.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidEstimationInput(
            "equal non-zero n per stratum required".into(),
        ));
    }
    let k = population.replications;
    let r = n_target_variables(samples)?;
    let matrix = target_matrix(samples);
    let mut estimates = Vec::with_capacity(r);
    let mut warnings = Vec::new();
    for j in 0..r {
        let stratum_means: Vec<f64> = matrix.iter().map(|s| mean(&s[j])).collect();
        let mu_hat = mean(&stratum_means);
        let var_hat = if n < 2 {
            if j == 0 {
                warnings.push(Warning::VarianceNeedsTwoPerStratum);
            }
            None
        } else {
            Some(match design {
                DesignKind::Mvsr => mvsr_variance(&matrix, &stratum_means, mu_hat, j, m, k, n),
                DesignKind::Rpor => rpor_variance(&matrix, mu_hat, j, m, k, n),
                DesignKind::Cpor => unreachable!("CPOR uses estimate_cpor"),
            })
        };
        estimates.push(VariableEstimate {
            column: population.target_columns.get(j).copied().unwrap_or(j),
            mu_hat,
            var_hat,
        });
    }
    Ok(EstimateReport {
        design,
        estimates,
        sample_sizes: vec![n; m],
        conservative_variance: false,
        warnings,
    })
}

fn mvsr_variance(
    matrix: &[Vec<Vec<f64>>],
    stratum_means: &[f64],
    mu_hat: f64,
    j: usize,
    m: usize,
    k: usize,
    n: usize,
) -> f64 {
    let (mf, kf, nf) = (m as f64, k as f64, n as f64);
    let within: f64 = matrix
        .iter()
        .zip(stratum_means)
        .map(|(s, &xbar)| {
            let ss: f64 = s[j].iter().map(|x| (x - xbar) * (x - xbar)).sum();
            ss / (nf * (nf - 1.0))
        })
        .sum();
    let between: f64 = stratum_means
        .iter()
        .map(|&xb| (xb - mu_hat) * (xb - mu_hat))
        .sum();
    (kf - 1.0) / (mf * (mf * kf - 1.0)) * within + between / (mf * (mf * kf - 1.0))
}

fn rpor_variance(
    matrix: &[Vec<Vec<f64>>],
    mu_hat: f64,
    j: usize,
    m: usize,
    k: usize,
    n: usize,
) -> f64 {
    let (mf, kf, nf) = (m as f64, k as f64, n as f64);
    let around_estimate: f64 = matrix
        .iter()
        .map(|s| {
            s[j].iter()
                .map(|x| (x - mu_hat) * (x - mu_hat))
                .sum::<f64>()
        })
        .sum();
    let within: f64 = matrix
        .iter()
        .map(|s| sample_variance(&s[j], mean(&s[j])))
        .sum();
    (around_estimate + (kf - nf) * within) / (nf * mf * (kf * mf - 1.0))
}

/// CPOR estimator: stratum means weighted by W_h = K_h / (K m); empty strata
/// contribute zero. The variance estimator generalizes the RPOR form to
/// unequal strata and is flagged conservative.
pub fn estimate_cpor(
    population: &StratifiedPopulation,
    samples: &[Vec<RankedRecord>],
    allocation: &Allocation,
) -> Result<EstimateReport> {
    if population.design != DesignKind::Cpor {
        return Err(Error::DesignMismatch(format!(
            "estimate_cpor got a {} population",
            population.design
        )));
    }
    let m = population.m();
    if samples.len() != m || allocation.per_stratum.len() != m {
        return Err(Error::DesignMismatch(format!(
            "m={m} but {} sample strata and {} allocations",
            samples.len(),
            allocation.per_stratum.len()
        )));
    }
    let sizes = population.stratum_sizes();
    for h in 0..m {
        if samples[h].len() != allocation.per_stratum[h] {
            return Err(Error::DesignMismatch(format!(
                "stratum {}: allocation {} but {} sampled",
                h + 1,
                allocation.per_stratum[h],
                samples[h].len()
            )));
        }
        if allocation.per_stratum[h] > sizes[h] {
            return Err(Error::DesignMismatch(format!(
                "stratum {}: allocation {} exceeds size {}",
                h + 1,
                allocation.per_stratum[h],
                sizes[h]
            )));
        }
        if sizes[h] > 0 && allocation.per_stratum[h] == 0 {
            return Err(Error::DesignMismatch(format!(
                "stratum {} is non-empty but was allocated no samples",
                h + 1
            )));
        }
    }
    let total_pop: usize = sizes.iter().sum(); // K * m
    let total_sample: usize = allocation.per_stratum.iter().sum(); // n * m
    if total_sample == 0 {
        return Err(Error::InvalidEstimationInput("no sampled records".into()));
    }
    let r = n_target_variables(samples)?;
    let matrix = target_matrix(samples);
    let mut estimates = Vec::with_capacity(r);
    let mut warnings = Vec::new();
    let can_estimate_variance = total_sample >= 2;
    for j in 0..r {
        let mut mu_hat = 0.0;
        for (h, stratum) in matrix.iter().enumerate() {
            if sizes[h] == 0 {
                continue;
            }
            let weight = sizes[h] as f64 / total_pop as f64;
            mu_hat += weight * mean(&stratum[j]);
        }
        let var_hat = if can_estimate_variance {
            let around_estimate: f64 = matrix
                .iter()
                .map(|s| {
                    if s.is_empty() {
                        0.0
                    } else {
                        s[j].iter()
                            .map(|x| (x - mu_hat) * (x - mu_hat))
                            .sum::<f64>()
                    }
                })
                .sum();
            let fpc_within: f64 = (0..m)
                .map(|h| {
                    if allocation.per_stratum[h] >= 2 {
                        let s2 = sample_variance(&matrix[h][j], mean(&matrix[h][j]));
                        (sizes[h] - allocation.per_stratum[h]) as f64 * s2
                    } else {
                        0.0
                    }
                })
                .sum();
            Some((around_estimate + fpc_within) / (total_sample as f64 * (total_pop as f64 - 1.0)))
        } else {
            if j == 0 {
                warnings.push(Warning::VarianceNeedsTwoObservations);
            }
            None
        };
        estimates.push(VariableEstimate {
            column: population.target_columns.get(j).copied().unwrap_or(j),
            mu_hat,
            var_hat,
        });
    }
    Ok(EstimateReport {
        design: DesignKind::Cpor,
        estimates,
        sample_sizes: allocation.per_stratum.clone(),
        conservative_variance: true,
        warnings,
    })
}

/// Simple-random-sample baseline: mean and s^2 / n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrsBaseline {
    pub mu_hat: f64,
    pub var_hat: Option<f64>,
    pub n: usize,
}

pub fn srs_baseline(values: &[f64]) -> Result<SrsBaseline> {
    if values.is_empty() {
        return Err(Error::InvalidEstimationInput("empty sample".into()));
    }
    let mu = mean(values);
    let var = if values.len() >= 2 {
        Some(sample_variance(values, mu) / values.len() as f64)
    } else {
        None
    };
    Ok(SrsBaseline {
        mu_hat: mu,
        var_hat: var,
        n: values.len(),
    })
}

/// Model parameters for the theoretical MVSR variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Full correlation matrix.
    pub rho: Vec<Vec<f64>>,
    /// Index of the ranking variable.
    pub ranking_variable: usize,
    /// Stratum (order-statistic) means of the ranking variable for set size m,
    /// e.g. from [`normal_order_statistic_means`].
    pub ranking_stratum_means: Option<Vec<f64>>,
}

impl ModelParams {
    fn validate(&self) -> Result<()> {
        let r = self.mean.len();
        if self.sd.len() != r || self.rho.len() != r {
            return Err(Error::MissingModelParams(
                "mean/sd/rho sizes disagree".into(),
            ));
        }
        if self.sd.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::MissingModelParams("sd must be positive".into()));
        }
        for (i, row) in self.rho.iter().enumerate() {
            if row.len() != r {
                return Err(Error::InvalidCorrelation("rho is not square".into()));
            }
            if (row[i] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidCorrelation("rho diagonal != 1".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if v.abs() > 1.0 + 1e-12 || (self.rho[j][i] - v).abs() > 1e-12 {
                    return Err(Error::InvalidCorrelation(format!("rho({i},{j}) = {v}")));
                }
            }
        }
        if self.ranking_variable >= r {
            return Err(Error::MissingModelParams(
                "ranking variable out of range".into(),
            ));
        }
        Ok(())
    }
}

/// Theoretical variance of the MVSR estimator for each variable.
///
/// For the ranking variable: `(1/nm) (sigma^2 - ((1 - n/K)/m) sum_h
/// (mu_(h) - mu)^2)`. Concomitant variables scale the order-statistic spread
/// by `rho^2 (sigma_j / sigma_1)^2`, the linear-regression link.
pub fn theoretical_variance_mvsr(
    params: &ModelParams,
    m: usize,
    k: usize,
    n: usize,
) -> Result<Vec<f64>> {
    params.validate()?;
    let stratum_means = params
        .ranking_stratum_means
        .as_ref()
        .ok_or_else(|| Error::MissingModelParams("ranking stratum means required".into()))?;
    if stratum_means.len() != m {
        return Err(Error::MissingModelParams(format!(
            "{} stratum means for m={m}",
            stratum_means.len()
        )));
    }
    let lead = params.ranking_variable;
    let mu_lead = params.mean[lead];
    let sd_lead = params.sd[lead];
    let spread: f64 = stratum_means
        .iter()
        .map(|&mh| (mh - mu_lead) * (mh - mu_lead))
        .sum();
    let (mf, kf, nf) = (m as f64, k as f64, n as f64);
    let fpc = 1.0 - nf / kf;
    Ok((0..params.mean.len())
        .map(|j| {
            let sigma_j = params.sd[j];
            let scale = if j == lead {
                1.0
            } else {
                let rho = params.rho[lead][j];
                rho * rho * (sigma_j / sd_lead) * (sigma_j / sd_lead)
            };
            (sigma_j * sigma_j - fpc / mf * scale * spread) / (nf * mf)
        })
        .collect())
}

/// Standard normal density.
fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF via erfc.
fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Adaptive Simpson integration.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 40)
}

/// Means of the m order statistics of a normal sample, by numeric integration
/// of the order-statistic densities (absolute tolerance well under 1e-8).
pub fn normal_order_statistic_means(m: usize, mean: f64, sd: f64) -> Vec<f64> {
    // m! / ((h-1)! (m-h)!) stays tiny for the set sizes used here.
    let ln_factorial = |x: usize| -> f64 { (2..=x).map(|i| (i as f64).ln()).sum() };
    (1..=m)
        .map(|h| {
            let coeff = (ln_factorial(m) - ln_factorial(h - 1) - ln_factorial(m - h)).exp();
            let integrand = move |z: f64| {
                let cdf = normal_cdf(z);
                coeff * z * cdf.powi(h as i32 - 1) * (1.0 - cdf).powi((m - h) as i32) * phi(z)
            };
            let ez = adaptive_simpson(&integrand, -12.0, 12.0, 1e-11);
            mean + sd * ez
        })
        .collect()
}
