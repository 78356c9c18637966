//! Contrast estimators, their exact repeated-sampling moments, conservative
//! variance estimators and confidence regions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::designs::{center_columns, Assignment, FactorialSpec};
use crate::distlib::{chi2_quantile, std_normal_quantile};
use crate::error::{Error, Result};
use crate::linalg::{check_nonsingular, column_means, row_covariance, spd_solve, to_rows};
use crate::popstats::{pot_cov_structure, ContrastSpec, PotentialTable};

/// Observed outcomes `Y_i = Y_i(L_i)` with optional covariates and clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    assignment: Assignment,
    y: DMatrix<f64>,
    x: Option<DMatrix<f64>>,
    clusters: Option<Vec<usize>>,
}

impl ObservedData {
    /// `y` is `N x p`; covariates, if any, are centered here.
    pub fn new(
        assignment: Assignment,
        y: DMatrix<f64>,
        x: Option<DMatrix<f64>>,
        clusters: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = assignment.n_units();
        if y.nrows() != n || y.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "outcome matrix is {}x{}, expected {n} rows",
                y.nrows(),
                y.ncols()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("outcomes must be finite".into()));
        }
        let x = match x {
            Some(x) => {
                if x.nrows() != n {
                    return Err(Error::InvalidInput(format!(
                        "covariates have {} rows, expected {n}",
                        x.nrows()
                    )));
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput("covariates must be finite".into()));
                }
                Some(center_columns(x))
            }
            None => None,
        };
        if let Some(c) = &clusters {
            if c.len() != n {
                return Err(Error::InvalidInput(format!(
                    "cluster map has {} entries, expected {n}",
                    c.len()
                )));
            }
        }
        Ok(Self {
            assignment,
            y,
            x,
            clusters,
        })
    }

    /// Scalar outcomes without covariates.
    pub fn scalar(assignment: Assignment, y: &[f64]) -> Result<Self> {
        Self::new(assignment, DMatrix::from_column_slice(y.len(), 1, y), None, None)
    }

    /// Reveal the outcomes of `table` under `assignment`.
    pub fn observe(table: &PotentialTable, assignment: &Assignment) -> Result<Self> {
        if table.n_units() != assignment.n_units() || table.n_arms() != assignment.n_arms() {
            return Err(Error::InvalidInput(
                "assignment does not match the potential table".into(),
            ));
        }
        let y = DMatrix::from_fn(table.n_units(), table.dim(), |i, k| {
            table.arm(assignment.labels()[i])[(i, k)]
        });
        Self::new(assignment.clone(), y, None, None)
    }

    pub fn with_covariates(mut self, x: DMatrix<f64>) -> Result<Self> {
        let a = self.assignment.clone();
        let y = std::mem::replace(&mut self.y, DMatrix::zeros(0, 0));
        Self::new(a, y, Some(x), self.clusters)
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn x(&self) -> Option<&DMatrix<f64>> {
        self.x.as_ref()
    }

    pub fn clusters(&self) -> Option<&[usize]> {
        self.clusters.as_deref()
    }

    pub fn n_units(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_arms(&self) -> usize {
        self.assignment.n_arms()
    }

    pub fn dim(&self) -> usize {
        self.y.ncols()
    }

    pub fn arm_sizes(&self) -> Vec<usize> {
        self.assignment.counts()
    }

    /// First outcome column as a slice.
    pub fn y_scalar(&self) -> &[f64] {
        &self.y.as_slice()[..self.n_units()]
    }

    fn arm_rows(&self, m: &DMatrix<f64>, q: usize) -> DMatrix<f64> {
        let idx: Vec<usize> = self.assignment.units_in(q).collect();
        m.select_rows(idx.iter())
    }

    pub fn arm_outcomes(&self, q: usize) -> DMatrix<f64> {
        self.arm_rows(&self.y, q)
    }

    pub fn arm_mean(&self, q: usize) -> Result<DVector<f64>> {
        let rows = self.arm_outcomes(q);
        if rows.nrows() == 0 {
            return Err(Error::ArmTooSmall {
                arm: q + 1,
                size: 0,
                required: 1,
            });
        }
        Ok(column_means(&rows))
    }

    pub fn arm_cov(&self, q: usize) -> Result<DMatrix<f64>> {
        let rows = self.arm_outcomes(q);
        if rows.nrows() < 2 {
            return Err(Error::ArmTooSmall {
                arm: q + 1,
                size: rows.nrows(),
                required: 2,
            });
        }
        Ok(row_covariance(&rows))
    }

    fn require_two_arm(&self) -> Result<()> {
        if self.n_arms() != 2 {
            return Err(Error::InvalidInput(format!(
                "two arms required, data has {}",
                self.n_arms()
            )));
        }
        Ok(())
    }

    fn require_scalar(&self) -> Result<()> {
        if self.dim() != 1 {
            return Err(Error::InvalidInput(format!(
                "scalar outcome required, data has dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Point estimate and covariance estimate of a contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub point: Vec<f64>,
    pub cov_estimate: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub method: String,
}

impl EstimateReport {
    pub fn point_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.point.clone())
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let k = self.point.len();
        DMatrix::from_fn(k, k, |i, j| self.cov_estimate[i][j])
    }

    /// Standard errors, the square roots of the diagonal.
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.point.len())
            .map(|i| self.cov_estimate[i][i].max(0.0).sqrt())
            .collect()
    }
}

/// `tau(A) = sum_q A_q Ybar(q)`.
pub fn tau_true(table: &PotentialTable, contrast: &ContrastSpec) -> Result<DVector<f64>> {
    contrast.check_table(table)?;
    let means: Vec<_> = (0..table.n_arms()).map(|q| table.arm_mean(q)).collect();
    Ok(contrast.apply(&means))
}

fn check_data(data: &ObservedData, contrast: &ContrastSpec) -> Result<()> {
    if contrast.n_arms() != data.n_arms() || contrast.dim() != data.dim() {
        return Err(Error::InvalidInput(format!(
            "contrast is for {} arms of dimension {}, data has {} arms of dimension {}",
            contrast.n_arms(),
            contrast.dim(),
            data.n_arms(),
            data.dim()
        )));
    }
    Ok(())
}

/// `sum_q A_q Yhat(q)` with arm-wise sample means.
pub fn tau_hat(data: &ObservedData, contrast: &ContrastSpec) -> Result<DVector<f64>> {
    check_data(data, contrast)?;
    let means = (0..data.n_arms())
        .map(|q| data.arm_mean(q))
        .collect::<Result<Vec<_>>>()?;
    Ok(contrast.apply(&means))
}

/// Exact covariance of `tau_hat` over complete randomization with `sizes`.
pub fn neyman_cov_true(
    table: &PotentialTable,
    contrast: &ContrastSpec,
    sizes: &[usize],
) -> Result<DMatrix<f64>> {
    if sizes.len() != table.n_arms() || sizes.iter().sum::<usize>() != table.n_units() {
        return Err(Error::Argument(format!(
            "arm sizes {sizes:?} do not fit {} units in {} arms",
            table.n_units(),
            table.n_arms()
        )));
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::Argument("arm sizes must be positive".into()));
    }
    let cs = pot_cov_structure(table, contrast)?;
    let k = contrast.n_effects();
    let mut v = DMatrix::zeros(k, k);
    for (q, a) in contrast.matrices().iter().enumerate() {
        v += a * cs.s2_within(q) * a.transpose() / sizes[q] as f64;
    }
    v -= &cs.s2_tau / table.n_units() as f64;
    Ok(v)
}

/// `V_A = sum_q A_q s^2_q A_q' / n_q` with sample covariances.
pub fn cov_estimator(data: &ObservedData, contrast: &ContrastSpec) -> Result<DMatrix<f64>> {
    check_data(data, contrast)?;
    let sizes = data.arm_sizes();
    let k = contrast.n_effects();
    let mut v = DMatrix::zeros(k, k);
    for (q, a) in contrast.matrices().iter().enumerate() {
        v += a * data.arm_cov(q)? * a.transpose() / sizes[q] as f64;
    }
    Ok(v)
}

pub fn estimate(data: &ObservedData, contrast: &ContrastSpec) -> Result<EstimateReport> {
    let point = tau_hat(data, contrast)?;
    let cov = cov_estimator(data, contrast)?;
    Ok(EstimateReport {
        point: point.as_slice().to_vec(),
        cov_estimate: to_rows(&cov),
        sizes: data.arm_sizes(),
        method: "neyman".into(),
    })
}

/// `{mu : (tau_hat - mu)' V^-1 (tau_hat - mu) <= q_{K, 1 - alpha}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldRegion {
    pub center: Vec<f64>,
    pub shape: Vec<Vec<f64>>,
    pub alpha: f64,
    pub chi2_threshold: f64,
}

pub fn wald_region(report: &EstimateReport, alpha: f64) -> Result<WaldRegion> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let k = report.point.len();
    Ok(WaldRegion {
        center: report.point.clone(),
        shape: report.cov_estimate.clone(),
        alpha,
        chi2_threshold: chi2_quantile(k, 1.0 - alpha)?,
    })
}

impl WaldRegion {
    fn shape_matrix(&self) -> DMatrix<f64> {
        let k = self.center.len();
        DMatrix::from_fn(k, k, |i, j| self.shape[i][j])
    }

    /// Wald statistic at `mu`.
    pub fn statistic(&self, mu: &[f64]) -> Result<f64> {
        if mu.len() != self.center.len() {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, region has {}",
                mu.len(),
                self.center.len()
            )));
        }
        let d = DVector::from_iterator(mu.len(), self.center.iter().zip(mu).map(|(c, m)| c - m));
        let sol = spd_solve(&self.shape_matrix(), &d)?;
        Ok(d.dot(&sol))
    }

    pub fn contains(&self, mu: &[f64]) -> Result<bool> {
        Ok(self.statistic(mu)? <= self.chi2_threshold)
    }

    /// Endpoints when `K = 1`.
    pub fn interval(&self) -> Option<(f64, f64)> {
        if self.center.len() != 1 {
            return None;
        }
        let half = (self.chi2_threshold * self.shape[0][0]).sqrt();
        Some((self.center[0] - half, self.center[0] + half))
    }

    pub fn check_shape(&self) -> Result<()> {
        check_nonsingular(&self.shape_matrix()).map(|_| ())
    }
}

/// `tau_hat +/- z_{1-alpha/2} sqrt(s1^2/n1 + s0^2/n0)` for two-arm scalar data.
pub fn neyman_ci(data: &ObservedData, alpha: f64) -> Result<(f64, f64)> {
    data.require_two_arm()?;
    data.require_scalar()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (point, var) = two_arm_adjusted(data, &[], &[], 2)?;
    let half = std_normal_quantile(1.0 - alpha / 2.0)? * var.sqrt();
    Ok((point - half, point + half))
}

/// Coefficients of the covariate-adjusted difference in means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentCoefs {
    pub beta1: Vec<f64>,
    pub beta0: Vec<f64>,
}

impl AdjustmentCoefs {
    pub fn zero(k: usize) -> Self {
        Self {
            beta1: vec![0.0; k],
            beta0: vec![0.0; k],
        }
    }

    pub fn common(beta: Vec<f64>) -> Self {
        Self {
            beta1: beta.clone(),
            beta0: beta,
        }
    }
}

/// Point estimate and variance estimate on adjusted outcomes `y - beta'x`.
/// Arm 0 uses `beta1`, arm 1 uses `beta0`; `min_size` is the smallest arm
/// size accepted.
fn two_arm_adjusted(
    data: &ObservedData,
    beta1: &[f64],
    beta0: &[f64],
    min_size: usize,
) -> Result<(f64, f64)> {
    let y = data.y_scalar();
    let x = data.x();
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    let adjusted: Vec<f64> = (0..data.n_units())
        .map(|i| {
            let arm = data.assignment().labels()[i];
            let beta = if arm == 0 { beta1 } else { beta0 };
            let shift: f64 = match x {
                Some(x) if !beta.is_empty() => beta.iter().enumerate().map(|(j, b)| b * x[(i, j)]).sum(),
                _ => 0.0,
            };
            let a = y[i] - shift;
            sums[arm] += a;
            counts[arm] += 1;
            a
        })
        .collect();
    for (arm, &c) in counts.iter().enumerate() {
        if c < min_size {
            return Err(Error::ArmTooSmall {
                arm: arm + 1,
                size: c,
                required: min_size,
            });
        }
    }
    let means = [sums[0] / counts[0] as f64, sums[1] / counts[1] as f64];
    let point = means[0] - means[1];
    if min_size < 2 {
        return Ok((point, f64::NAN));
    }
    let mut ss = [0.0; 2];
    for (i, a) in adjusted.iter().enumerate() {
        let arm = data.assignment().labels()[i];
        ss[arm] += (a - means[arm]).powi(2);
    }
    let var = ss[0] / (counts[0] as f64 - 1.0) / counts[0] as f64
        + ss[1] / (counts[1] as f64 - 1.0) / counts[1] as f64;
    Ok((point, var))
}

fn check_coefs(data: &ObservedData, coefs: &AdjustmentCoefs) -> Result<()> {
    data.require_two_arm()?;
    data.require_scalar()?;
    let kx = data.x().map(|x| x.ncols()).unwrap_or(0);
    if coefs.beta1.len() != kx || coefs.beta0.len() != kx {
        return Err(Error::InvalidInput(format!(
            "coefficients have lengths ({}, {}), data has {kx} covariates",
            coefs.beta1.len(),
            coefs.beta0.len()
        )));
    }
    if coefs.beta1.iter().chain(&coefs.beta0).any(|b| !b.is_finite()) {
        return Err(Error::InvalidInput("coefficients must be finite".into()));
    }
    Ok(())
}

/// Adjusted point estimate only; needs one unit per arm.
pub fn regression_adjusted_point(data: &ObservedData, coefs: &AdjustmentCoefs) -> Result<f64> {
    check_coefs(data, coefs)?;
    Ok(two_arm_adjusted(data, &coefs.beta1, &coefs.beta0, 1)?.0)
}

/// `mean_T(Y - beta1'X) - mean_C(Y - beta0'X)` with the variance estimate
/// `s1^2(beta1)/n1 + s0^2(beta0)/n0` on the adjusted outcomes.
pub fn regression_adjusted(data: &ObservedData, coefs: &AdjustmentCoefs) -> Result<EstimateReport> {
    check_coefs(data, coefs)?;
    let (point, var) = two_arm_adjusted(data, &coefs.beta1, &coefs.beta0, 2)?;
    Ok(EstimateReport {
        point: vec![point],
        cov_estimate: vec![vec![var]],
        sizes: data.arm_sizes(),
        method: "regression_adjusted".into(),
    })
}

fn ls_coef(y: &[f64], x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = y.len();
    let kx = x.ncols();
    if n < kx + 1 {
        return Err(Error::InsufficientData(format!(
            "{n} units cannot identify {kx} coefficients"
        )));
    }
    let xm = column_means(x);
    let ym = y.iter().sum::<f64>() / n as f64;
    let mut sxx = DMatrix::zeros(kx, kx);
    let mut sxy = DVector::zeros(kx);
    for i in 0..n {
        let d = x.row(i).transpose() - &xm;
        sxx += &d * d.transpose();
        sxy += d * (y[i] - ym);
    }
    spd_solve(&sxx, &sxy)
}

/// Arm-wise sample least squares slopes of `y` on the covariates.
pub fn fit_ls_coefs(data: &ObservedData) -> Result<AdjustmentCoefs> {
    data.require_two_arm()?;
    data.require_scalar()?;
    let x = data
        .x()
        .ok_or_else(|| Error::InvalidInput("regression adjustment needs covariates".into()))?;
    let fit = |q: usize| -> Result<Vec<f64>> {
        let idx: Vec<usize> = data.assignment().units_in(q).collect();
        let y: Vec<f64> = idx.iter().map(|&i| data.y_scalar()[i]).collect();
        Ok(ls_coef(&y, &x.select_rows(idx.iter()))?.as_slice().to_vec())
    };
    Ok(AdjustmentCoefs {
        beta1: fit(0)?,
        beta0: fit(1)?,
    })
}

/// `(S^2_X)^-1 S_{X,Y}` over the whole population.
pub fn finite_pop_ls(y: &[f64], x: &DMatrix<f64>) -> Result<DVector<f64>> {
    if y.len() != x.nrows() {
        return Err(Error::InvalidInput(format!(
            "{} outcomes but {} covariate rows",
            y.len(),
            x.nrows()
        )));
    }
    ls_coef(y, x)
}

/// Cluster totals of outcomes and covariates, plus cluster sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTotals {
    pub y: Vec<f64>,
    pub x: Option<DMatrix<f64>>,
    pub sizes: Vec<usize>,
    pub assignment: Assignment,
}

/// Aggregate unit data to cluster totals; clusters are numbered `0..M`.
pub fn cluster_totals(data: &ObservedData) -> Result<ClusterTotals> {
    data.require_scalar()?;
    let clusters = data
        .clusters()
        .ok_or_else(|| Error::InvalidInput("data has no cluster column".into()))?;
    let m = clusters.iter().max().map(|c| c + 1).unwrap_or(0);
    let mut y = vec![0.0; m];
    let mut sizes = vec![0usize; m];
    let mut arm: Vec<Option<usize>> = vec![None; m];
    let kx = data.x().map(|x| x.ncols()).unwrap_or(0);
    let mut xt = DMatrix::zeros(m, kx);
    for (i, &c) in clusters.iter().enumerate() {
        y[c] += data.y_scalar()[i];
        sizes[c] += 1;
        let l = data.assignment().labels()[i];
        match arm[c] {
            None => arm[c] = Some(l),
            Some(prev) if prev != l => {
                return Err(Error::InvalidInput(format!(
                    "cluster {} mixes arms {} and {}",
                    c + 1,
                    prev + 1,
                    l + 1
                )))
            }
            _ => {}
        }
        if let Some(x) = data.x() {
            for j in 0..kx {
                xt[(c, j)] += x[(i, j)];
            }
        }
    }
    let labels = arm
        .iter()
        .enumerate()
        .map(|(c, a)| a.ok_or_else(|| Error::InvalidInput(format!("cluster {} has no units", c + 1))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterTotals {
        y,
        x: if kx > 0 { Some(center_columns(xt)) } else { None },
        sizes,
        assignment: Assignment::new(labels, data.n_arms())?,
    })
}

/// `(M/N) [mean_T(Y~ - g1'X~) - mean_C(Y~ - g0'X~)]` on cluster totals, with
/// variance estimate `(M/N)^2 (s1^2/m1 + s0^2/m0)`.
pub fn cluster_adjusted(
    totals_y: &[f64],
    totals_x: Option<&DMatrix<f64>>,
    assignment: &Assignment,
    n_units: usize,
    coefs: &AdjustmentCoefs,
) -> Result<EstimateReport> {
    let m = totals_y.len();
    if n_units == 0 {
        return Err(Error::Argument("unit count must be positive".into()));
    }
    let data = ObservedData::new(
        assignment.clone(),
        DMatrix::from_column_slice(m, 1, totals_y),
        totals_x.cloned(),
        None,
    )?;
    check_coefs(&data, coefs)?;
    let (point, var) = two_arm_adjusted(&data, &coefs.beta1, &coefs.beta0, 2)?;
    let scale = m as f64 / n_units as f64;
    Ok(EstimateReport {
        point: vec![scale * point],
        cov_estimate: vec![vec![scale * scale * var]],
        sizes: data.arm_sizes(),
        method: "cluster_adjusted".into(),
    })
}

fn check_factorial(n_arms: usize, dim: usize, spec: &FactorialSpec) -> Result<()> {
    if n_arms != spec.n_arms() {
        return Err(Error::InvalidInput(format!(
            "factorial design has {} arms, data has {n_arms}",
            spec.n_arms()
        )));
    }
    if dim != 1 {
        return Err(Error::InvalidInput("factorial effects need a scalar outcome".into()));
    }
    Ok(())
}

/// `tau_k = 2^-(K-1) sum_q g_kq Yhat(q)` for every generator column.
pub fn factorial_effects(data: &ObservedData, spec: &FactorialSpec) -> Result<DVector<f64>> {
    check_factorial(data.n_arms(), data.dim(), spec)?;
    let means = DVector::from_iterator(
        data.n_arms(),
        (0..data.n_arms())
            .map(|q| data.arm_mean(q).map(|m| m[0]))
            .collect::<Result<Vec<_>>>()?,
    );
    let scale = 0.5_f64.powi(spec.n_factors() as i32 - 1);
    Ok(spec.generators().transpose() * means * scale)
}

/// Population factorial effects of a scalar potential table.
pub fn factorial_effects_true(table: &PotentialTable, spec: &FactorialSpec) -> Result<DVector<f64>> {
    check_factorial(table.n_arms(), table.dim(), spec)?;
    let means = DVector::from_iterator(table.n_arms(), (0..table.n_arms()).map(|q| table.arm_mean(q)[0]));
    let scale = 0.5_f64.powi(spec.n_factors() as i32 - 1);
    Ok(spec.generators().transpose() * means * scale)
}

/// Null variances and correlation matrix of the factorial effect estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorialNullMoments {
    pub variances: Vec<f64>,
    pub correlations: Vec<Vec<f64>>,
}

/// Moments of the effect estimators under the sharp null with population
/// variance `v_n`.
pub fn factorial_null_moments(
    v_n: f64,
    sizes: &[usize],
    spec: &FactorialSpec,
) -> Result<FactorialNullMoments> {
    if !(v_n >= 0.0) || !v_n.is_finite() {
        return Err(Error::Argument(format!("population variance must be >= 0, got {v_n}")));
    }
    if sizes.len() != spec.n_arms() || sizes.iter().any(|&s| s == 0) {
        return Err(Error::Argument(format!(
            "need {} positive arm sizes, got {sizes:?}",
            spec.n_arms()
        )));
    }
    let inv: Vec<f64> = sizes.iter().map(|&s| 1.0 / s as f64).collect();
    let total_inv: f64 = inv.iter().sum();
    let k = spec.n_factors() as i32;
    let var = 0.25_f64.powi(k - 1) * total_inv * v_n;
    let g = spec.generators();
    let e = g.ncols();
    let correlations = (0..e)
        .map(|a| {
            (0..e)
                .map(|b| (0..g.nrows()).map(|q| inv[q] * g[(q, a)] * g[(q, b)]).sum::<f64>() / total_inv)
                .collect()
        })
        .collect();
    Ok(FactorialNullMoments {
        variances: vec![var; e],
        correlations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{enumerate_partitions, factorial_contrasts, DesignSpec};

    fn two_arm_table(y1: &[f64], y0: &[f64]) -> PotentialTable {
        PotentialTable::from_scalar_arms(&[y1.to_vec(), y0.to_vec()]).unwrap()
    }

    fn diff() -> ContrastSpec {
        ContrastSpec::scalar(&[1.0, -1.0]).unwrap()
    }

    fn data(labels: &[usize], y: &[f64]) -> ObservedData {
        let q = labels.iter().max().unwrap() + 1;
        ObservedData::scalar(Assignment::new(labels.to_vec(), q).unwrap(), y).unwrap()
    }

    #[test]
    fn tau_true_examples() {
        let t = two_arm_table(&[1.0, 3.0], &[0.0, 2.0]);
        assert_eq!(tau_true(&t, &diff()).unwrap()[0], 1.0);

        let three = PotentialTable::from_unit_rows(&[vec![1.0, 2.0, 4.0], vec![3.0, 5.0, 9.0]]).unwrap();
        let c = ContrastSpec::versus_first(3, 1).unwrap();
        let tau = tau_true(&three, &c).unwrap();
        assert_eq!(tau.as_slice(), &[2.0 - 3.5, 2.0 - 6.5]);
    }

    #[test]
    fn tau_hat_examples() {
        let d = data(&[0, 0, 1, 1], &[1.0, 3.0, 0.0, 2.0]);
        assert_eq!(tau_hat(&d, &diff()).unwrap()[0], 1.0);
        let flat = data(&[0, 1, 2, 0], &[4.0; 4]);
        let c = ContrastSpec::scalar(&[1.0, 1.0, -2.0]).unwrap();
        assert_eq!(tau_hat(&flat, &c).unwrap()[0], 0.0);
    }

    #[test]
    fn neyman_cov_matches_two_point_enumeration() {
        let t = two_arm_table(&[1.0, 3.0], &[0.0, 2.0]);
        let v = neyman_cov_true(&t, &diff(), &[1, 1]).unwrap();
        assert_eq!(v[(0, 0)], 4.0);
        let mut draws = vec![];
        for a in enumerate_partitions(&DesignSpec::new(vec![1, 1]).unwrap()).unwrap() {
            draws.push(tau_hat(&ObservedData::observe(&t, &a).unwrap(), &diff()).unwrap()[0]);
        }
        draws.sort_by(f64::total_cmp);
        assert_eq!(draws, vec![-1.0, 3.0]);
    }

    #[test]
    fn cov_estimator_examples() {
        let d = data(&[0, 0, 1, 1], &[2.0, 2.0, 5.0, 5.0]);
        assert_eq!(cov_estimator(&d, &diff()).unwrap()[(0, 0)], 0.0);
        let d = data(&[0, 0, 1, 1], &[1.0, 3.0, 0.0, 2.0]);
        assert_eq!(cov_estimator(&d, &diff()).unwrap()[(0, 0)], 2.0);
        let small = data(&[0, 1, 1], &[1.0, 2.0, 3.0]);
        assert!(matches!(
            cov_estimator(&small, &diff()),
            Err(Error::ArmTooSmall { arm: 1, size: 1, .. })
        ));
    }

    #[test]
    fn wald_interval_example() {
        let report = EstimateReport {
            point: vec![1.0],
            cov_estimate: vec![vec![4.0]],
            sizes: vec![2, 2],
            method: "neyman".into(),
        };
        let w = wald_region(&report, 0.05).unwrap();
        let (lo, hi) = w.interval().unwrap();
        assert!((lo + 2.919928).abs() < 1e-5, "{lo}");
        assert!((hi - 4.919928).abs() < 1e-5, "{hi}");
        assert!(w.contains(&[1.0]).unwrap());
        assert!(w.contains(&[4.9]).unwrap());
        assert!(!w.contains(&[4.95]).unwrap());
    }

    #[test]
    fn wald_singular_shape_errors() {
        let report = EstimateReport {
            point: vec![0.0, 0.0],
            cov_estimate: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            sizes: vec![2, 2],
            method: "neyman".into(),
        };
        let w = wald_region(&report, 0.05).unwrap();
        assert!(matches!(w.contains(&[0.0, 0.0]), Err(Error::Singular { .. })));
    }

    #[test]
    fn neyman_ci_examples() {
        let d = data(&[0, 0, 1, 1], &[1.0, 3.0, 0.0, 2.0]);
        let (lo, hi) = neyman_ci(&d, 0.05).unwrap();
        let half = 1.959963984540054 * 2.0_f64.sqrt();
        assert!((lo - (1.0 - half)).abs() < 1e-12);
        assert!((hi - (1.0 + half)).abs() < 1e-12);

        let w = wald_region(&estimate(&d, &diff()).unwrap(), 0.05).unwrap().interval().unwrap();
        assert!((w.0 - lo).abs() < 1e-8 && (w.1 - hi).abs() < 1e-8);

        let flat = data(&[0, 0, 1, 1], &[3.0, 3.0, 1.0, 1.0]);
        assert_eq!(neyman_ci(&flat, 0.05).unwrap(), (2.0, 2.0));
    }

    #[test]
    fn regression_adjustment_reduces_to_difference() {
        let x = DMatrix::from_column_slice(4, 1, &[-1.5, 0.5, -0.5, 1.5]);
        let d = data(&[0, 0, 1, 1], &[1.0, 3.0, 0.0, 2.0]).with_covariates(x).unwrap();
        let r = regression_adjusted(&d, &AdjustmentCoefs::zero(1)).unwrap();
        let plain = estimate(&d, &diff()).unwrap();
        assert_eq!(r.point, plain.point);
        assert_eq!(r.cov_estimate, plain.cov_estimate);
    }

    #[test]
    fn least_squares_examples() {
        let x = DMatrix::from_column_slice(4, 1, &[-1.0, 1.0, 3.0, -3.0]);
        let d = data(&[0, 0, 1, 1], &[0.0, 2.0, 5.0, 1.0]).with_covariates(x).unwrap();
        let c = fit_ls_coefs(&d).unwrap();
        assert!((c.beta1[0] - 1.0).abs() < 1e-12);

        let xs = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let y: Vec<f64> = xs.iter().map(|v| 2.0 * v - 1.0).collect();
        assert!((finite_pop_ls(&y, &xs).unwrap()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cluster_examples() {
        let a = Assignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let r = cluster_adjusted(&[1.0, 3.0, 0.0, 2.0], None, &a, 4, &AdjustmentCoefs::zero(0)).unwrap();
        assert_eq!(r.point, vec![1.0]);
        assert_eq!(r.cov_estimate, vec![vec![2.0]]);

        let r = cluster_adjusted(&[2.0, 6.0, 0.0, 4.0], None, &a, 8, &AdjustmentCoefs::zero(0)).unwrap();
        assert_eq!(r.point, vec![1.0]);
        assert_eq!(r.cov_estimate, vec![vec![2.0]]);
    }

    #[test]
    fn cluster_totals_aggregate() {
        let a = Assignment::new(vec![0, 0, 1, 1, 0, 0], 2).unwrap();
        let d = ObservedData::new(
            a,
            DMatrix::from_column_slice(6, 1, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            None,
            Some(vec![0, 0, 1, 1, 2, 2]),
        )
        .unwrap();
        let t = cluster_totals(&d).unwrap();
        assert_eq!(t.y, vec![3.0, 7.0, 11.0]);
        assert_eq!(t.sizes, vec![2, 2, 2]);
        assert_eq!(t.assignment.labels(), &[0, 1, 0]);
    }

    #[test]
    fn factorial_estimates() {
        let f1 = factorial_contrasts(1).unwrap();
        let d = data(&[0, 0, 1, 1], &[4.0, 6.0, 1.0, 2.0]);
        assert_eq!(factorial_effects(&d, &f1).unwrap()[0], 5.0 - 1.5);
        let f2 = factorial_contrasts(2).unwrap();
        let flat = data(&[0, 1, 2, 3, 0, 1, 2, 3], &[7.0; 8]);
        assert!(factorial_effects(&flat, &f2).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn factorial_null_moment_examples() {
        let f2 = factorial_contrasts(2).unwrap();
        let m = factorial_null_moments(1.0, &[2, 2, 2, 2], &f2).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(m.correlations[a][b], if a == b { 1.0 } else { 0.0 });
            }
        }
        let f1 = factorial_contrasts(1).unwrap();
        let m = factorial_null_moments(3.0, &[2, 4], &f1).unwrap();
        assert_eq!(m.variances[0], 3.0 * (0.5 + 0.25));
        let m = factorial_null_moments(1.0, &[1, 2, 2, 1], &f2).unwrap();
        assert!((m.correlations[0][1] - 1.0 / 3.0).abs() < 1e-15);
    }
}
