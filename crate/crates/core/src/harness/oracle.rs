//! Exhaustive-enumeration oracles.
//!
//! Each oracle walks every assignment of a small design, forms the plain
//! average over assignments, and compares it with the closed form.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::{ExperimentConfig, Metric, Report, Rule};
use crate::designs::{center_columns, enumerate_partitions_capped, factorial_contrasts, indicator_cov, DesignSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    cov_estimator, factorial_effects, factorial_null_moments, finite_pop_ls, neyman_cov_true,
    regression_adjusted_point, tau_hat, tau_true, AdjustmentCoefs, FactorialNullMoments,
    ObservedData,
};
use crate::linalg::max_abs_diff;
use crate::popstats::{moments_of, pot_cov_structure, ContrastSpec, PotentialTable};
use crate::randtests::{rank_mean_null_cov, standardized_rank_means_of};

/// Moments of `tau_hat` over all assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentOracle {
    pub assignments: usize,
    pub mean: DVector<f64>,
    /// Divisor is the number of assignments.
    pub cov: DMatrix<f64>,
    /// Mean of the covariance estimator; absent when an arm has one unit.
    pub mean_cov_estimate: Option<DMatrix<f64>>,
}

/// Mean and covariance of vectors that are equally likely.
fn uniform_moments(values: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let k = values[0].len();
    let b = values.len() as f64;
    let mean = values.iter().fold(DVector::zeros(k), |acc, v| acc + v) / b;
    let cov = values.iter().fold(DMatrix::zeros(k, k), |acc, v| {
        let d = v - &mean;
        acc + &d * d.transpose()
    }) / b;
    (mean, cov)
}

pub fn enumerate_moments(
    table: &PotentialTable,
    contrast: &ContrastSpec,
    spec: &DesignSpec,
    cap: u128,
) -> Result<MomentOracle> {
    let with_estimate = spec.sizes().iter().all(|&s| s >= 2);
    let mut estimates = Vec::new();
    let mut v_sum: Option<DMatrix<f64>> = None;
    for assignment in enumerate_partitions_capped(spec, cap)? {
        let data = ObservedData::observe(table, &assignment)?;
        estimates.push(tau_hat(&data, contrast)?);
        if with_estimate {
            let v = cov_estimator(&data, contrast)?;
            v_sum = Some(match v_sum {
                Some(acc) => acc + v,
                None => v,
            });
        }
    }
    let (mean, cov) = uniform_moments(&estimates);
    let count = estimates.len();
    Ok(MomentOracle {
        assignments: count,
        mean,
        cov,
        mean_cov_estimate: v_sum.map(|s| s / count as f64),
    })
}

/// Largest gap between enumerated indicator covariances and
/// [`indicator_cov`] over all `(i, j, q, r)`.
pub fn indicator_cov_discrepancy(spec: &DesignSpec, cap: u128) -> Result<f64> {
    let n = spec.n_units();
    let arms = spec.n_arms();
    let cells = n * arms;
    let mut first = vec![0.0; cells];
    let mut second = vec![0.0; cells * cells];
    let mut count = 0usize;
    let mut iter = enumerate_partitions_capped(spec, cap)?;
    while let Some(labels) = iter.next_labels() {
        count += 1;
        for i in 0..n {
            let a = i * arms + labels[i];
            first[a] += 1.0;
            for j in 0..n {
                second[a * cells + j * arms + labels[j]] += 1.0;
            }
        }
    }
    let b = count as f64;
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            for q in 0..arms {
                for r in 0..arms {
                    let a = i * arms + q;
                    let c = j * arms + r;
                    let enumerated = second[a * cells + c] / b - first[a] / b * first[c] / b;
                    worst = worst.max((enumerated - indicator_cov(spec, i, j, q, r)?).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Enumerated mean and covariance of the standardized rank means under the
/// sharp null with ranks `1..N`.
pub fn enumerate_rank_means(spec: &DesignSpec, cap: u128) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if spec.sizes().iter().any(|&s| s >= spec.n_units()) {
        return Err(Error::Argument("every arm must leave units outside it".into()));
    }
    let ranks: Vec<f64> = (1..=spec.n_units()).map(|r| r as f64).collect();
    let mut values = Vec::new();
    let mut iter = enumerate_partitions_capped(spec, cap)?;
    while let Some(labels) = iter.next_labels() {
        values.push(standardized_rank_means_of(&ranks, labels, spec.n_arms()));
    }
    Ok(uniform_moments(&values))
}

/// Both sides of the variance decomposition around the population least
/// squares coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionDecomposition {
    pub var_given: f64,
    pub var_optimal: f64,
    pub var_difference: f64,
}

impl RegressionDecomposition {
    pub fn residual(&self) -> f64 {
        (self.var_given - self.var_optimal - self.var_difference).abs()
    }
}

/// Arm 0 is treatment with outcomes `y1`.
pub fn regression_decomposition(
    y1: &[f64],
    y0: &[f64],
    x: &DMatrix<f64>,
    spec: &DesignSpec,
    coefs: &AdjustmentCoefs,
    cap: u128,
) -> Result<RegressionDecomposition> {
    if spec.n_arms() != 2 || y1.len() != spec.n_units() || y0.len() != spec.n_units() {
        return Err(Error::InvalidInput("need a two-arm design matching the outcomes".into()));
    }
    let optimal = AdjustmentCoefs {
        beta1: finite_pop_ls(y1, x)?.as_slice().to_vec(),
        beta0: finite_pop_ls(y0, x)?.as_slice().to_vec(),
    };
    let table = PotentialTable::from_scalar_arms(&[y1.to_vec(), y0.to_vec()])?;
    let x = center_columns(x.clone());
    let mut given = Vec::new();
    let mut best = Vec::new();
    let mut diff = Vec::new();
    for assignment in enumerate_partitions_capped(spec, cap)? {
        let data = ObservedData::observe(&table, &assignment)?.with_covariates(x.clone())?;
        let g = regression_adjusted_point(&data, coefs)?;
        let o = regression_adjusted_point(&data, &optimal)?;
        given.push(g);
        best.push(o);
        diff.push(g - o);
    }
    let var = |v: &[f64]| {
        let m = moments_of(v);
        m.variance * (v.len() as f64 - 1.0) / v.len() as f64
    };
    Ok(RegressionDecomposition {
        var_given: var(&given),
        var_optimal: var(&best),
        var_difference: var(&diff),
    })
}

/// Enumerated null moments of the factorial effect estimators with outcome
/// `y` under the sharp null, next to the closed form.
pub fn enumerate_factorial_null(
    y: &[f64],
    sizes: &[usize],
    cap: u128,
) -> Result<(FactorialNullMoments, FactorialNullMoments)> {
    let q = sizes.len();
    if !q.is_power_of_two() || q < 2 {
        return Err(Error::Argument(format!("{q} arms is not a 2^K design")));
    }
    let spec = factorial_contrasts(q.trailing_zeros() as usize)?;
    let design = DesignSpec::new(sizes.to_vec())?;
    let table = PotentialTable::sharp_null(DMatrix::from_column_slice(y.len(), 1, y), q)?;
    let mut values = Vec::new();
    for assignment in enumerate_partitions_capped(&design, cap)? {
        let data = ObservedData::observe(&table, &assignment)?;
        values.push(factorial_effects(&data, &spec)?);
    }
    let (_, cov) = uniform_moments(&values);
    let e = cov.nrows();
    let enumerated = FactorialNullMoments {
        variances: (0..e).map(|a| cov[(a, a)]).collect(),
        correlations: (0..e)
            .map(|a| (0..e).map(|b| cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt()).collect())
            .collect(),
    };
    let formula = factorial_null_moments(moments_of(y).variance, sizes, &spec)?;
    Ok((enumerated, formula))
}

fn factorial_gap(a: &FactorialNullMoments, b: &FactorialNullMoments) -> f64 {
    let v = a
        .variances
        .iter()
        .zip(&b.variances)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let c = a
        .correlations
        .iter()
        .flatten()
        .zip(b.correlations.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    v.max(c)
}

/// Bundled instances for the oracle suite.
pub struct Instance {
    pub name: &'static str,
    pub table: PotentialTable,
    pub contrast: ContrastSpec,
    pub spec: DesignSpec,
}

pub fn bundled_instances() -> Result<Vec<Instance>> {
    let three_arm = PotentialTable::from_scalar_arms(&[
        vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0],
        vec![2.0, 6.0, 5.0, 3.0, 5.0, 8.0],
        vec![9.0, 7.0, 9.0, 3.0, 2.0, 3.0],
    ])?;
    let vector_two_arm = PotentialTable::new(vec![
        DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 4.0, 2.0, -2.0, 7.0, 0.0, 1.0, 3.0, 3.0, 5.0, -1.0]),
        DMatrix::from_row_slice(6, 2, &[2.0, 1.0, 0.0, 0.0, 1.0, 5.0, -3.0, 2.0, 2.0, 2.0, 6.0, 4.0]),
    ])?;
    let sharp = PotentialTable::sharp_null(
        DMatrix::from_column_slice(6, 1, &[4.0, -1.0, 0.0, 7.0, 2.0, 2.0]),
        3,
    )?;
    Ok(vec![
        Instance {
            name: "three_arm_balanced",
            table: three_arm.clone(),
            contrast: ContrastSpec::versus_first(3, 1)?,
            spec: DesignSpec::new(vec![2, 2, 2])?,
        },
        Instance {
            name: "three_arm_unbalanced",
            table: three_arm.clone(),
            contrast: ContrastSpec::new(vec![
                DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
                DMatrix::from_row_slice(2, 1, &[-1.0, 0.5]),
                DMatrix::from_row_slice(2, 1, &[0.0, -1.0]),
            ])?,
            spec: DesignSpec::new(vec![1, 2, 3])?,
        },
        Instance {
            name: "vector_outcome",
            table: vector_two_arm,
            contrast: ContrastSpec::difference(2, 2, 0, 1)?,
            spec: DesignSpec::new(vec![2, 4])?,
        },
        Instance {
            name: "sharp_null",
            table: sharp,
            contrast: ContrastSpec::versus_first(3, 1)?,
            spec: DesignSpec::new(vec![2, 2, 2])?,
        },
    ])
}

pub fn run_oracle_suite(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let started = Instant::now();
    let cap = config.enum_cap();
    let tol = config.tolerances.oracle;
    let mut metrics = Vec::new();

    for inst in bundled_instances()? {
        let oracle = enumerate_moments(&inst.table, &inst.contrast, &inst.spec, cap)?;
        let tau = tau_true(&inst.table, &inst.contrast)?;
        let cov = neyman_cov_true(&inst.table, &inst.contrast, inst.spec.sizes())?;
        let name = inst.name;
        metrics.push(Metric::discrepancy(
            &format!("{name}/mean"),
            "exact-moments-mean",
            (&oracle.mean - &tau).amax(),
            tol,
        ));
        metrics.push(Metric::discrepancy(
            &format!("{name}/covariance"),
            "exact-moments-covariance",
            max_abs_diff(&oracle.cov, &cov),
            tol,
        ));
        if let Some(v) = &oracle.mean_cov_estimate {
            let bias_term =
                pot_cov_structure(&inst.table, &inst.contrast)?.s2_tau / inst.table.n_units() as f64;
            metrics.push(Metric::discrepancy(
                &format!("{name}/estimator_bias"),
                "conservative-bias-identity",
                max_abs_diff(&(v - &oracle.cov), &bias_term),
                tol,
            ));
            if name == "sharp_null" {
                metrics.push(Metric::discrepancy(
                    "sharp_null/bias_term",
                    "conservative-bias-identity",
                    bias_term.amax(),
                    tol,
                ));
            }
        }
    }

    let itol = config.tolerances.indicator;
    for sizes in [vec![2, 2, 2], vec![1, 2, 3], vec![3, 3], vec![1, 5], vec![1, 1, 4]] {
        let spec = DesignSpec::new(sizes.clone())?;
        metrics.push(Metric::discrepancy(
            &format!("indicator_covariance/{sizes:?}"),
            "indicator-covariance",
            indicator_cov_discrepancy(&spec, cap)?,
            itol,
        ));
    }

    for sizes in [vec![2, 2, 2], vec![1, 2, 3], vec![2, 4], vec![1, 1, 4]] {
        let spec = DesignSpec::new(sizes.clone())?;
        let (mean, cov) = enumerate_rank_means(&spec, cap)?;
        metrics.push(Metric::discrepancy(
            &format!("rank_means/{sizes:?}/mean"),
            "standardized-rank-means",
            mean.amax(),
            tol,
        ));
        metrics.push(Metric::discrepancy(
            &format!("rank_means/{sizes:?}/covariance"),
            "standardized-rank-means",
            max_abs_diff(&cov, &rank_mean_null_cov(&sizes)),
            tol,
        ));
    }

    let y1 = [5.0, 3.0, 8.0, 1.0, 4.0, 7.0, 2.0, 6.0];
    let y0 = [2.0, 2.0, 5.0, 0.0, 1.0, 6.0, 2.0, 3.0];
    let x = DMatrix::from_row_slice(
        8,
        2,
        &[1.0, 0.0, 0.0, 1.0, 3.0, 2.0, -1.0, 0.0, 1.0, -1.0, 2.0, 3.0, 0.0, 0.0, 2.0, 1.0],
    );
    for (n1, coefs) in [
        (4, AdjustmentCoefs::common(vec![0.7, -0.3])),
        (3, AdjustmentCoefs { beta1: vec![1.5, 0.0], beta0: vec![-0.5, 2.0] }),
        (5, AdjustmentCoefs::zero(2)),
    ] {
        let spec = DesignSpec::two_arm(n1, 8 - n1)?;
        let d = regression_decomposition(&y1, &y0, &x, &spec, &coefs, cap)?;
        metrics.push(Metric::discrepancy(
            &format!("regression_decomposition/n1={n1}"),
            "regression-variance-decomposition",
            d.residual(),
            tol,
        ));
    }

    let y6 = [3.0, 0.0, 2.0, 5.0, 1.0, 4.0];
    let y8 = [1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0];
    for (y, sizes) in [(&y6[..], vec![1, 2, 2, 1]), (&y8[..], vec![2, 2, 2, 2]), (&y8[..], vec![1, 3, 3, 1])] {
        let (enumerated, formula) = enumerate_factorial_null(y, &sizes, cap)?;
        metrics.push(Metric::discrepancy(
            &format!("factorial_null/{sizes:?}"),
            "factorial-null-moments",
            factorial_gap(&enumerated, &formula),
            tol,
        ));
        if sizes == [1, 2, 2, 1] {
            metrics.push(Metric::new(
                "factorial_null/[1, 2, 2, 1]/main_effect_correlation",
                "factorial-null-moments",
                enumerated.correlations[0][1],
                tol,
                Rule::Near { target: 1.0 / 3.0 },
            ));
        }
    }

    let pair = PotentialTable::from_scalar_arms(&[vec![1.0, 3.0], vec![0.0, 2.0]])?;
    let pair_oracle = enumerate_moments(
        &pair,
        &ContrastSpec::scalar(&[1.0, -1.0])?,
        &DesignSpec::two_arm(1, 1)?,
        cap,
    )?;
    metrics.push(Metric::new(
        "two_unit/variance",
        "exact-moments-covariance",
        pair_oracle.cov[(0, 0)],
        tol,
        Rule::Near { target: 4.0 },
    ));

    Ok(Report::finish(config, metrics, Vec::new(), started))
}
