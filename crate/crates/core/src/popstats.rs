//! Finite-population moments, potential-outcome covariance structures and
//! the regularity diagnostics behind the finite-population CLTs.
//!
//! Variances use divisor `N - 1` throughout. Diagnostics return finite-N
//! values; convergence along a sequence of populations is judged by the
//! harness, never by a single call.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{column_means, max_abs_diff, row_covariance, row_cross_covariance};

/// A finite population of real values. All randomness comes from how it is
/// sampled or partitioned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    values: Vec<f64>,
}

impl Population {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("population must have at least one unit".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value {v} at unit {i}")));
        }
        Ok(Self { values })
    }

    /// The population `1, 2, ..., n`.
    pub fn ranks(n: usize) -> Self {
        Self {
            values: (1..=n).map(|v| v as f64).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Mean, variance (divisor `N - 1`) and maximum squared deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopMoments {
    pub mean: f64,
    pub variance: f64,
    pub max_sq_dev: f64,
}

pub fn pop_moments(pop: &Population) -> PopMoments {
    moments_of(pop.values())
}

pub(crate) fn moments_of(values: &[f64]) -> PopMoments {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut ss = 0.0;
    let mut max_sq_dev = 0.0_f64;
    for &v in values {
        let d = (v - mean) * (v - mean);
        ss += d;
        max_sq_dev = max_sq_dev.max(d);
    }
    let variance = if n > 1 { ss / (n as f64 - 1.0) } else { 0.0 };
    PopMoments {
        mean,
        variance,
        max_sq_dev,
    }
}

/// Mean and variance of the average of a simple random sample of size `n`.
pub fn srs_mean_var(pop: &Population, n: usize) -> Result<(f64, f64)> {
    let big_n = pop.len();
    if n == 0 || n > big_n {
        return Err(Error::Argument(format!("sample size {n} outside 1..={big_n}")));
    }
    let m = pop_moments(pop);
    Ok((m.mean, (1.0 / n as f64 - 1.0 / big_n as f64) * m.variance))
}

fn nondegenerate(pop: &Population) -> Result<PopMoments> {
    let m = pop_moments(pop);
    if !(m.variance > 0.0) {
        return Err(Error::Degenerate("population variance is zero".into()));
    }
    Ok(m)
}

/// `m_N / (min(n, N - n) v_N)`; a population sequence admits a normal limit
/// for the simple-random-sample mean when this tends to zero.
pub fn hajek_condition_stat(pop: &Population, n: usize) -> Result<f64> {
    let big_n = pop.len();
    if n == 0 || n >= big_n {
        return Err(Error::Argument(format!("sample size {n} outside 1..{big_n}")));
    }
    let m = nondegenerate(pop)?;
    let k = n.min(big_n - n) as f64;
    Ok(m.max_sq_dev / m.variance / k)
}

/// `m_N / (min_q n_q v_N)` for a random partition with the given arm sizes.
pub fn partition_condition_stat(pop: &Population, sizes: &[usize]) -> Result<f64> {
    let total: usize = sizes.iter().sum();
    if total != pop.len() {
        return Err(Error::Argument(format!(
            "arm sizes sum to {total}, population has {} units",
            pop.len()
        )));
    }
    let smallest = *sizes
        .iter()
        .min()
        .ok_or_else(|| Error::Argument("no arm sizes given".into()))?;
    if smallest == 0 {
        return Err(Error::Argument("arm sizes must be positive".into()));
    }
    let m = nondegenerate(pop)?;
    Ok(m.max_sq_dev / m.variance / smallest as f64)
}

/// Lindeberg-type diagnostic: the scaled sum of squared standardized
/// deviations whose magnitude exceeds `eps * sqrt(n (N - n) / N)`.
pub fn lindeberg_stat(pop: &Population, n: usize, eps: f64) -> Result<f64> {
    let big_n = pop.len();
    if n == 0 || n > big_n {
        return Err(Error::Argument(format!("sample size {n} outside 1..={big_n}")));
    }
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("eps must be positive, got {eps}")));
    }
    let m = nondegenerate(pop)?;
    let sd = m.variance.sqrt();
    let nf = n as f64;
    let big = big_n as f64;
    let cut = eps * (nf * (big - nf) / big).sqrt();
    let sum: f64 = pop
        .values()
        .iter()
        .map(|v| (v - m.mean) / sd)
        .filter(|d| d.abs() > cut)
        .map(|d| d * d)
        .sum();
    Ok(sum / (big - 1.0))
}

/// `N x Q` table of `p`-dimensional potential outcomes. Arm `q` holds an
/// `N x p` matrix whose row `i` is `Y_i(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    arms: Vec<DMatrix<f64>>,
}

impl PotentialTable {
    pub fn new(arms: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = arms
            .first()
            .ok_or_else(|| Error::InvalidInput("potential table needs at least one arm".into()))?;
        let (n, p) = first.shape();
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput("potential table has an empty dimension".into()));
        }
        for (q, a) in arms.iter().enumerate() {
            if a.shape() != (n, p) {
                return Err(Error::InvalidInput(format!(
                    "arm {q} has shape {:?}, expected {:?}",
                    a.shape(),
                    (n, p)
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("arm {q} has a non-finite entry")));
            }
        }
        Ok(Self { arms })
    }

    /// Scalar outcomes given one column per arm.
    pub fn from_scalar_arms(columns: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            columns
                .iter()
                .map(|c| DMatrix::from_column_slice(c.len(), 1, c))
                .collect(),
        )
    }

    /// Scalar outcomes given one row `(Y_i(1), ..., Y_i(Q))` per unit.
    pub fn from_unit_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let q = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != q) {
            return Err(Error::InvalidInput("unit rows have different lengths".into()));
        }
        let columns: Vec<Vec<f64>> = (0..q).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self::from_scalar_arms(&columns)
    }

    /// Table under the sharp null: every arm reveals the same outcomes.
    pub fn sharp_null(y: DMatrix<f64>, n_arms: usize) -> Result<Self> {
        Self::new(vec![y; n_arms])
    }

    pub fn n_units(&self) -> usize {
        self.arms[0].nrows()
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn dim(&self) -> usize {
        self.arms[0].ncols()
    }

    pub fn arm(&self, q: usize) -> &DMatrix<f64> {
        &self.arms[q]
    }

    pub fn arms(&self) -> &[DMatrix<f64>] {
        &self.arms
    }

    pub fn arm_mean(&self, q: usize) -> DVector<f64> {
        column_means(&self.arms[q])
    }

    /// Matrix whose row `i` is the individual effect `sum_q A_q Y_i(q)`.
    pub fn unit_effects(&self, contrast: &ContrastSpec) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_units(), contrast.n_effects());
        for (q, a) in contrast.matrices().iter().enumerate() {
            out += &self.arms[q] * a.transpose();
        }
        out
    }
}

/// Coefficient matrices `A_1, ..., A_Q` (each `K x p`) defining the estimand
/// `sum_q A_q Ybar(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastSpec {
    mats: Vec<DMatrix<f64>>,
}

impl ContrastSpec {
    pub fn new(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| Error::InvalidInput("contrast needs at least one arm".into()))?;
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::InvalidInput("contrast matrices must be non-empty".into()));
        }
        if mats.iter().any(|m| m.shape() != shape) {
            return Err(Error::InvalidInput("contrast matrices differ in shape".into()));
        }
        if mats.iter().all(|m| m.iter().all(|v| *v == 0.0)) {
            return Err(Error::InvalidInput("contrast matrices are all zero".into()));
        }
        Ok(Self { mats })
    }

    /// Scalar outcome, single effect `sum_q w_q Ybar(q)`.
    pub fn scalar(weights: &[f64]) -> Result<Self> {
        Self::new(weights.iter().map(|w| DMatrix::from_element(1, 1, *w)).collect())
    }

    /// `Ybar(a) - Ybar(b)` coordinatewise for `dim`-dimensional outcomes.
    pub fn difference(n_arms: usize, dim: usize, a: usize, b: usize) -> Result<Self> {
        if a >= n_arms || b >= n_arms || a == b {
            return Err(Error::Argument(format!("bad arm pair ({a}, {b}) for {n_arms} arms")));
        }
        let mut mats = vec![DMatrix::zeros(dim, dim); n_arms];
        mats[a] = DMatrix::identity(dim, dim);
        mats[b] = -DMatrix::identity(dim, dim);
        Self::new(mats)
    }

    /// Stacked contrasts `Ybar(1) - Ybar(q)` for `q = 2..Q`.
    pub fn versus_first(n_arms: usize, dim: usize) -> Result<Self> {
        if n_arms < 2 {
            return Err(Error::Argument("need at least two arms".into()));
        }
        let k = (n_arms - 1) * dim;
        let mut mats = vec![DMatrix::zeros(k, dim); n_arms];
        for q in 1..n_arms {
            for d in 0..dim {
                let row = (q - 1) * dim + d;
                mats[0][(row, d)] = 1.0;
                mats[q][(row, d)] = -1.0;
            }
        }
        Self::new(mats)
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    pub fn n_arms(&self) -> usize {
        self.mats.len()
    }

    pub fn n_effects(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn dim(&self) -> usize {
        self.mats[0].ncols()
    }

    /// `sum_q A_q m_q` for per-arm mean vectors.
    pub fn apply(&self, means: &[DVector<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_effects());
        for (a, m) in self.mats.iter().zip(means) {
            out += a * m;
        }
        out
    }

    pub(crate) fn check_table(&self, table: &PotentialTable) -> Result<()> {
        if self.n_arms() != table.n_arms() || self.dim() != table.dim() {
            return Err(Error::InvalidInput(format!(
                "contrast is for {} arms of dimension {}, table has {} arms of dimension {}",
                self.n_arms(),
                self.dim(),
                table.n_arms(),
                table.dim()
            )));
        }
        Ok(())
    }
}

/// Finite-population covariances of a potential-outcome table.
#[derive(Debug, Clone, PartialEq)]
pub struct CovStructure {
    /// `cross[q][r]` is `S_qr`; the diagonal holds `S^2_q`.
    cross: Vec<Vec<DMatrix<f64>>>,
    /// Covariance of the individual effects `tau_i(A)`.
    pub s2_tau: DMatrix<f64>,
}

impl CovStructure {
    pub fn s2_within(&self, q: usize) -> &DMatrix<f64> {
        &self.cross[q][q]
    }

    pub fn s_between(&self, q: usize, r: usize) -> &DMatrix<f64> {
        &self.cross[q][r]
    }

    /// `sum_q A_q S^2_q A_q' + sum_{q != r} A_q S_qr A_r'`.
    pub fn s2_tau_from_parts(&self, contrast: &ContrastSpec) -> DMatrix<f64> {
        let a = contrast.matrices();
        let k = contrast.n_effects();
        let mut out = DMatrix::zeros(k, k);
        for q in 0..a.len() {
            for r in 0..a.len() {
                out += &a[q] * &self.cross[q][r] * a[r].transpose();
            }
        }
        out
    }

    /// Largest entrywise gap between `S^2_tau` computed directly and from parts.
    pub fn identity_residual(&self, contrast: &ContrastSpec) -> f64 {
        max_abs_diff(&self.s2_tau, &self.s2_tau_from_parts(contrast))
    }
}

pub fn pot_cov_structure(table: &PotentialTable, contrast: &ContrastSpec) -> Result<CovStructure> {
    contrast.check_table(table)?;
    if table.n_units() < 2 {
        return Err(Error::InsufficientData("covariances need at least two units".into()));
    }
    let q = table.n_arms();
    let cross = (0..q)
        .map(|a| {
            (0..q)
                .map(|b| {
                    if a == b {
                        row_covariance(table.arm(a))
                    } else {
                        row_cross_covariance(table.arm(a), table.arm(b))
                    }
                })
                .collect()
        })
        .collect();
    let s2_tau = row_covariance(&table.unit_effects(contrast));
    Ok(CovStructure { cross, s2_tau })
}

/// The three regularity diagnostics for complete randomization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CreDiagnostics {
    /// `max_{q,k} n_q^-2 m_q(k) / (sum_r n_r^-1 v_r(k) - N^-1 v_tau(k))`.
    pub general: f64,
    /// `max_{q,k} m_q(k) / (n_q v_q(k))`, the additive-effects form.
    pub additive: f64,
    /// `max_q max_i ||Y_i(q) - Ybar(q)||^2 / N`.
    pub stable: f64,
    /// Set when some ratio had a zero denominator over a nonzero numerator;
    /// the affected statistic is then `+inf`.
    pub degenerate: bool,
}

pub fn cre_condition_stats(
    table: &PotentialTable,
    contrast: &ContrastSpec,
    sizes: &[usize],
) -> Result<CreDiagnostics> {
    contrast.check_table(table)?;
    let n = table.n_units();
    if sizes.len() != table.n_arms() || sizes.iter().sum::<usize>() != n {
        return Err(Error::Argument(format!(
            "arm sizes {sizes:?} do not match a table of {n} units in {} arms",
            table.n_arms()
        )));
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::Argument("arm sizes must be positive".into()));
    }
    let k = contrast.n_effects();
    let big = n as f64;
    let mut degenerate = false;
    let mut ratio = |num: f64, den: f64| -> f64 {
        if den > 0.0 {
            num / den
        } else if num == 0.0 {
            0.0
        } else {
            degenerate = true;
            f64::INFINITY
        }
    };

    // per-arm transformed outcomes A_q Y_i(q)
    let transformed: Vec<DMatrix<f64>> = contrast
        .matrices()
        .iter()
        .enumerate()
        .map(|(q, a)| table.arm(q) * a.transpose())
        .collect();
    let stats: Vec<Vec<PopMoments>> = transformed
        .iter()
        .map(|m| {
            (0..k)
                .map(|j| moments_of(m.column(j).as_slice()))
                .collect()
        })
        .collect();
    let effects = table.unit_effects(contrast);
    let v_tau: Vec<f64> = (0..k)
        .map(|j| moments_of(effects.column(j).as_slice()).variance)
        .collect();

    let mut general = 0.0_f64;
    let mut additive = 0.0_f64;
    for j in 0..k {
        let den: f64 = stats
            .iter()
            .zip(sizes)
            .map(|(s, &nq)| s[j].variance / nq as f64)
            .sum::<f64>()
            - v_tau[j] / big;
        // rounding can leave a tiny negative where the exact value is zero
        let den = if den.abs() <= 1e-12 * stats.iter().map(|s| s[j].variance).sum::<f64>() {
            0.0
        } else {
            den
        };
        for (s, &nq) in stats.iter().zip(sizes) {
            let nq = nq as f64;
            general = general.max(ratio(s[j].max_sq_dev / (nq * nq), den));
            additive = additive.max(ratio(s[j].max_sq_dev, nq * s[j].variance));
        }
    }

    let mut stable = 0.0_f64;
    for q in 0..table.n_arms() {
        let mean = table.arm_mean(q);
        for row in table.arm(q).row_iter() {
            let d = row.transpose() - &mean;
            stable = stable.max(d.norm_squared() / big);
        }
    }

    Ok(CreDiagnostics {
        general,
        additive,
        stable,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pop(v: &[f64]) -> Population {
        Population::new(v.to_vec()).unwrap()
    }

    #[test]
    fn moments_examples() {
        let m = pop_moments(&pop(&[0.0, 2.0]));
        assert_eq!((m.mean, m.variance, m.max_sq_dev), (1.0, 2.0, 1.0));
        let m = pop_moments(&pop(&[3.5, 3.5, 3.5]));
        assert_eq!((m.mean, m.variance, m.max_sq_dev), (3.5, 0.0, 0.0));
        let m = pop_moments(&pop(&[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.max_sq_dev, 2.25);
        assert_eq!(pop_moments(&pop(&[4.0])).variance, 0.0);
    }

    #[test]
    fn population_rejects_nan() {
        assert!(Population::new(vec![1.0, f64::NAN]).is_err());
        assert!(Population::new(vec![]).is_err());
    }

    #[test]
    fn srs_examples() {
        assert_eq!(srs_mean_var(&pop(&[0.0, 2.0]), 1).unwrap(), (1.0, 1.0));
        assert_eq!(srs_mean_var(&pop(&[0.0, 2.0]), 2).unwrap(), (1.0, 0.0));
        let (m, v) = srs_mean_var(&pop(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 12.0).abs() < 1e-15);
        assert!(srs_mean_var(&pop(&[1.0]), 0).is_err());
        assert!(srs_mean_var(&pop(&[1.0]), 2).is_err());
    }

    #[test]
    fn hajek_examples() {
        assert_eq!(hajek_condition_stat(&pop(&[0.0, 2.0]), 1).unwrap(), 0.5);
        let h = hajek_condition_stat(&pop(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert!((h - 0.675).abs() < 1e-14);
        for n in [4usize, 10, 50] {
            let nf = n as f64;
            let want = (2.0 / nf) * 3.0 * (nf - 1.0).powi(2) / (nf * (nf + 1.0));
            let got = hajek_condition_stat(&Population::ranks(n), n / 2).unwrap();
            assert!((got - want).abs() < 1e-12, "N = {n}");
        }
        assert!(matches!(
            hajek_condition_stat(&pop(&[1.0, 1.0]), 1),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn partition_examples() {
        let s = partition_condition_stat(&pop(&[0.0, 2.0, 4.0, 6.0]), &[2, 2]).unwrap();
        assert!((s - 0.675).abs() < 1e-14);
        let s = partition_condition_stat(&Population::ranks(4), &[1, 1, 2]).unwrap();
        assert!((s - 1.35).abs() < 1e-14);
        assert!(partition_condition_stat(&pop(&[1.0, 1.0]), &[1, 1]).is_err());
        assert!(partition_condition_stat(&Population::ranks(4), &[1, 1]).is_err());
    }

    #[test]
    fn lindeberg_examples() {
        assert!((lindeberg_stat(&pop(&[0.0, 2.0]), 1, 0.1).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(lindeberg_stat(&Population::ranks(10), 5, 100.0).unwrap(), 0.0);
        assert!(lindeberg_stat(&pop(&[2.0, 2.0]), 1, 0.1).is_err());
    }

    fn two_arm(y1: &[f64], y0: &[f64]) -> PotentialTable {
        PotentialTable::from_scalar_arms(&[y1.to_vec(), y0.to_vec()]).unwrap()
    }

    #[test]
    fn cov_structure_examples() {
        let diff = ContrastSpec::scalar(&[1.0, -1.0]).unwrap();
        let cs = pot_cov_structure(&two_arm(&[1.0, 3.0], &[0.0, 2.0]), &diff).unwrap();
        assert_eq!(cs.s2_within(0)[(0, 0)], 2.0);
        assert_eq!(cs.s2_within(1)[(0, 0)], 2.0);
        assert_eq!(cs.s_between(0, 1)[(0, 0)], 2.0);
        assert_eq!(cs.s2_tau[(0, 0)], 0.0);

        let cs = pot_cov_structure(&two_arm(&[4.0, 7.0, 1.0], &[4.0, 7.0, 1.0]), &diff).unwrap();
        assert_eq!(cs.s2_tau[(0, 0)], 0.0);
        assert_eq!(cs.s_between(0, 1), cs.s2_within(0));

        let cs = pot_cov_structure(&two_arm(&[0.0, 2.0], &[2.0, 0.0]), &diff).unwrap();
        assert_eq!(cs.s2_tau[(0, 0)], 8.0);
        assert!(cs.identity_residual(&diff) < 1e-12);

        let one = two_arm(&[1.0], &[2.0]);
        assert!(matches!(
            pot_cov_structure(&one, &diff),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn cre_diagnostics_examples() {
        let diff = ContrastSpec::scalar(&[1.0, -1.0]).unwrap();
        let constant = two_arm(&[5.0, 5.0, 5.0], &[5.0, 5.0, 5.0]);
        let d = cre_condition_stats(&constant, &diff, &[1, 2]).unwrap();
        assert_eq!((d.general, d.additive, d.stable, d.degenerate), (0.0, 0.0, 0.0, false));

        let t = two_arm(&[1.0, 3.0], &[0.0, 2.0]);
        let d = cre_condition_stats(&t, &diff, &[1, 1]).unwrap();
        assert_eq!(d.additive, 0.5);
        assert_eq!(d.general, 0.25);
        assert_eq!(d.stable, 0.5);

        let doubled = two_arm(&[1.0, 3.0, 1.0, 3.0], &[0.0, 2.0, 0.0, 2.0]);
        let d2 = cre_condition_stats(&doubled, &diff, &[2, 2]).unwrap();
        assert_eq!(d2.stable, d.stable / 2.0);
    }

    #[test]
    fn cre_diagnostics_flag_degeneracy() {
        // the estimator is constant over both assignments, so its variance is zero
        let diff = ContrastSpec::scalar(&[1.0, -1.0]).unwrap();
        let t = two_arm(&[0.0, 2.0], &[2.0, 0.0]);
        let d = cre_condition_stats(&t, &diff, &[1, 1]).unwrap();
        assert!(d.degenerate);
        assert!(d.general.is_infinite());
    }
}
