//! Randomization tests of the sharp null hypothesis.
//!
//! Under the sharp null every outcome is fixed, so a statistic is a function
//! of the label vector alone. Reference distributions come from exhaustive
//! enumeration, Monte Carlo redraws, or normal and chi-square limits.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Discrete, Hypergeometric};

use crate::designs::{enumerate_partitions_capped, Assignment, DesignSpec};
use crate::distlib::{chi2_sf, gamma_rho, solve_gamma_c, std_normal_cdf};
use crate::error::{Error, Result};
use crate::estimators::ObservedData;
use crate::linalg::psd_sqrt;
use crate::popstats::moments_of;
use crate::rng::replicate_rng;

/// How tied outcomes are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Ties are an error.
    #[default]
    Strict,
    /// Tied values share the average of their positions.
    Midrank,
}

/// Ascending ranks of a pooled outcome vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankVector {
    pub ranks: Vec<f64>,
    pub policy: TiePolicy,
}

pub fn rank_transform(y: &[f64], policy: TiePolicy) -> Result<RankVector> {
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("cannot rank non-finite value {v}")));
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut ranks = vec![0.0; y.len()];
    let mut tied = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && y[order[end]] == y[order[start]] {
            end += 1;
        }
        if end - start > 1 {
            tied.push(y[order[start]]);
        }
        // positions start+1 ..= end share their average
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    if policy == TiePolicy::Strict && !tied.is_empty() {
        return Err(Error::Ties(tied));
    }
    Ok(RankVector { ranks, policy })
}

/// Direction of extremeness for a p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    Greater,
    Less,
    /// Ordered by absolute value; use with statistics centred at zero.
    TwoSided,
}

impl Alternative {
    /// Whether `reference` is at least as extreme as `observed`.
    pub fn as_extreme(self, reference: f64, observed: f64) -> bool {
        let tol = 1e-12 * observed.abs().max(1.0);
        match self {
            Alternative::Greater => reference >= observed - tol,
            Alternative::Less => reference <= observed + tol,
            Alternative::TwoSided => reference.abs() >= observed.abs() - tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestMethod {
    Exact { assignments: u128 },
    MonteCarlo { reps: usize, seed: u64 },
    NormalApprox,
    Chi2Approx { df: usize },
    /// Normal functional evaluated by simulation from the limiting law.
    SimulatedNormal { reps: usize, seed: u64 },
    /// Bivariate normal critical value for a maximum of two statistics.
    JointNormal { rho: f64 },
}

/// Outcome of a randomization test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    /// Component values, e.g. the two standardized statistics of a joint test.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<f64>,
    pub p_value: f64,
    pub method: TestMethod,
    pub alternative: Alternative,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reject: Option<bool>,
}

impl TestResult {
    fn new(statistic: f64, p_value: f64, method: TestMethod, alternative: Alternative) -> Self {
        Self {
            statistic,
            components: Vec::new(),
            p_value: p_value.clamp(0.0, 1.0),
            method,
            alternative,
            null_mean: None,
            null_variance: None,
            critical_value: None,
            reject: None,
        }
    }
}

fn two_arm_scalar(data: &ObservedData) -> Result<()> {
    if data.n_arms() != 2 {
        return Err(Error::InvalidInput(format!(
            "two arms required, data has {}",
            data.n_arms()
        )));
    }
    for (q, &s) in data.arm_sizes().iter().enumerate() {
        if s == 0 {
            return Err(Error::ArmTooSmall {
                arm: q + 1,
                size: 0,
                required: 1,
            });
        }
    }
    Ok(())
}

fn arm_means(values: &[f64], labels: &[usize], n_arms: usize) -> (Vec<f64>, Vec<usize>) {
    let mut sums = vec![0.0; n_arms];
    let mut counts = vec![0usize; n_arms];
    for (v, &l) in values.iter().zip(labels) {
        sums[l] += v;
        counts[l] += 1;
    }
    let means = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    (means, counts)
}

fn difference(values: &[f64], labels: &[usize]) -> f64 {
    let (m, _) = arm_means(values, labels, 2);
    m[0] - m[1]
}

/// Treated mean minus control mean of the first outcome column.
pub fn diff_in_means_stat(data: &ObservedData) -> Result<f64> {
    two_arm_scalar(data)?;
    Ok(difference(data.y_scalar(), data.assignment().labels()))
}

/// Difference in mean pooled ranks between treatment and control.
pub fn wilcoxon_stat(data: &ObservedData, policy: TiePolicy) -> Result<f64> {
    two_arm_scalar(data)?;
    let r = rank_transform(data.y_scalar(), policy)?;
    Ok(difference(&r.ranks, data.assignment().labels()))
}

/// Whether the joint test combines two statistics of one outcome or one
/// statistic of two outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointMode {
    /// Difference in means and rank difference of the same outcome.
    SameOutcome,
    /// Differences in means of the first two outcome columns.
    MultiOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointTestSpec {
    pub alpha: f64,
    pub mode: JointMode,
    pub ties: TiePolicy,
}

fn pooled_corr(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    let ma = moments_of(a);
    let mb = moments_of(b);
    if !(ma.variance > 0.0 && mb.variance > 0.0) {
        return Err(Error::Degenerate("pooled variance is zero".into()));
    }
    let n = a.len() as f64;
    let cov: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - ma.mean) * (y - mb.mean))
        .sum::<f64>()
        / (n - 1.0);
    let rho = (cov / (ma.variance * mb.variance).sqrt()).clamp(-1.0, 1.0);
    Ok((ma.variance.sqrt(), mb.variance.sqrt(), rho))
}

/// Reject when `sqrt(n1 n0 / N) max(T1/s1, T2/s2) > c_alpha`, with `c_alpha`
/// the upper-orthant critical value at the pooled correlation.
pub fn joint_test(data: &ObservedData, spec: &JointTestSpec) -> Result<TestResult> {
    if data.n_arms() != 2 {
        return Err(Error::InvalidInput("joint test needs two arms".into()));
    }
    let labels = data.assignment().labels();
    let (a, b): (Vec<f64>, Vec<f64>) = match spec.mode {
        JointMode::SameOutcome => {
            let y = data.y_scalar().to_vec();
            let r = rank_transform(&y, spec.ties)?.ranks;
            (y, r)
        }
        JointMode::MultiOutcome => {
            if data.dim() < 2 {
                return Err(Error::InvalidInput(
                    "multi-outcome joint test needs two outcome columns".into(),
                ));
            }
            (
                data.y().column(0).iter().copied().collect(),
                data.y().column(1).iter().copied().collect(),
            )
        }
    };
    two_arm_scalar(data)?;
    let (sa, sb, rho) = pooled_corr(&a, &b)?;
    let sizes = data.arm_sizes();
    let scale = (sizes[0] as f64 * sizes[1] as f64 / data.n_units() as f64).sqrt();
    let za = scale * difference(&a, labels) / sa;
    let zb = scale * difference(&b, labels) / sb;
    let stat = za.max(zb);
    let c = solve_gamma_c(rho, spec.alpha)?;
    let mut res = TestResult::new(
        stat,
        gamma_rho(stat, rho),
        TestMethod::JointNormal { rho },
        Alternative::Greater,
    );
    res.components = vec![za, zb];
    res.critical_value = Some(c);
    res.reject = Some(stat > c);
    Ok(res)
}

fn ranks_of(data: &ObservedData, policy: TiePolicy) -> Result<Vec<f64>> {
    if data.n_arms() < 2 {
        return Err(Error::InvalidInput("rank tests need at least two arms".into()));
    }
    if let Some(q) = data.arm_sizes().iter().position(|&s| s == 0) {
        return Err(Error::ArmTooSmall {
            arm: q + 1,
            size: 0,
            required: 1,
        });
    }
    Ok(rank_transform(data.y_scalar(), policy)?.ranks)
}

/// Kruskal-Wallis `H` by both its analysis-of-variance form and its
/// standardized-rank-mean form.
pub fn kruskal_wallis_forms(ranks: &[f64], labels: &[usize], n_arms: usize) -> (f64, f64) {
    let n = ranks.len() as f64;
    let rm = moments_of(ranks);
    if !(rm.variance > 0.0) {
        return (0.0, 0.0);
    }
    let (means, counts) = arm_means(ranks, labels, n_arms);
    let total_ss: f64 = ranks.iter().map(|r| (r - rm.mean).powi(2)).sum();
    let between: f64 = means
        .iter()
        .zip(&counts)
        .map(|(m, &c)| c as f64 * (m - rm.mean).powi(2))
        .sum();
    let h1 = (n - 1.0) * between / total_ss;
    let h2 = means
        .iter()
        .zip(&counts)
        .map(|(m, &c)| {
            let nq = c as f64;
            let z = (m - rm.mean) / ((1.0 / nq - 1.0 / n) * rm.variance).sqrt();
            (n - nq) / n * z * z
        })
        .sum();
    (h1, h2)
}

/// `H` with a chi-square `Q - 1` upper-tail p-value.
pub fn kruskal_wallis(data: &ObservedData, policy: TiePolicy) -> Result<TestResult> {
    let ranks = ranks_of(data, policy)?;
    let (h1, h2) = kruskal_wallis_forms(&ranks, data.assignment().labels(), data.n_arms());
    if (h1 - h2).abs() > 1e-10 * h1.abs().max(1.0) {
        return Err(Error::Internal(format!(
            "Kruskal-Wallis forms disagree: {h1} vs {h2}"
        )));
    }
    let df = data.n_arms() - 1;
    let mut res = TestResult::new(h1, chi2_sf(df, h1), TestMethod::Chi2Approx { df }, Alternative::Greater);
    res.components = vec![h1, h2];
    Ok(res)
}

/// `sqrt(12 n_q / ((N + 1)(N - n_q))) (Rbar_q - (N + 1)/2)` for each arm.
pub fn standardized_rank_means(data: &ObservedData) -> Result<DVector<f64>> {
    let ranks = ranks_of(data, TiePolicy::Strict)?;
    Ok(standardized_rank_means_of(&ranks, data.assignment().labels(), data.n_arms()))
}

pub fn standardized_rank_means_of(ranks: &[f64], labels: &[usize], n_arms: usize) -> DVector<f64> {
    let n = ranks.len() as f64;
    let (means, counts) = arm_means(ranks, labels, n_arms);
    DVector::from_iterator(
        n_arms,
        means.iter().zip(&counts).map(|(m, &c)| {
            let nq = c as f64;
            (12.0 * nq / ((n + 1.0) * (n - nq))).sqrt() * (m - (n + 1.0) / 2.0)
        }),
    )
}

/// Null covariance of the standardized rank means: unit diagonal and
/// `-sqrt(n_q n_r / ((N - n_q)(N - n_r)))` off the diagonal.
pub fn rank_mean_null_cov(sizes: &[usize]) -> DMatrix<f64> {
    let n: usize = sizes.iter().sum();
    let q = sizes.len();
    DMatrix::from_fn(q, q, |a, b| {
        if a == b {
            1.0
        } else {
            let (na, nb) = (sizes[a] as f64, sizes[b] as f64);
            let big = n as f64;
            -(na * nb / ((big - na) * (big - nb))).sqrt()
        }
    })
}

/// `(max_q Rbar_q, max_q Rbar_q - min_q Rbar_q)`.
pub fn extreme_rank_stats(data: &ObservedData, policy: TiePolicy) -> Result<(f64, f64)> {
    let ranks = ranks_of(data, policy)?;
    Ok(extremes(&ranks, data.assignment().labels(), data.n_arms()))
}

fn extremes(ranks: &[f64], labels: &[usize], n_arms: usize) -> (f64, f64) {
    let (means, _) = arm_means(ranks, labels, n_arms);
    let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = means.iter().copied().fold(f64::INFINITY, f64::min);
    (max, max - min)
}

/// `sum_q z_q Rbar_q` for doses `z_q`.
pub fn dose_rank_stat(data: &ObservedData, doses: &[f64], policy: TiePolicy) -> Result<f64> {
    if doses.len() != data.n_arms() {
        return Err(Error::InvalidInput(format!(
            "{} doses for {} arms",
            doses.len(),
            data.n_arms()
        )));
    }
    let ranks = ranks_of(data, policy)?;
    Ok(dose_of(&ranks, data.assignment().labels(), doses))
}

fn dose_of(ranks: &[f64], labels: &[usize], doses: &[f64]) -> f64 {
    let (means, _) = arm_means(ranks, labels, doses.len());
    means.iter().zip(doses).map(|(m, d)| m * d).sum()
}

/// Test statistics available for sharp-null reference distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum StatKind {
    DiffInMeans,
    Wilcoxon,
    KruskalWallis,
    MaxRank,
    RangeRank,
    Dose { doses: Vec<f64> },
}

impl StatKind {
    /// Conventional direction: two-sided for the location differences,
    /// upper tail otherwise.
    pub fn default_alternative(&self) -> Alternative {
        match self {
            StatKind::DiffInMeans | StatKind::Wilcoxon => Alternative::TwoSided,
            _ => Alternative::Greater,
        }
    }
}

/// A statistic bound to the fixed outcomes of a dataset, evaluated on any
/// relabelling.
#[derive(Debug, Clone)]
pub struct SharpNullStat {
    kind: StatKind,
    values: Vec<f64>,
    n_arms: usize,
}

impl SharpNullStat {
    pub fn new(kind: StatKind, data: &ObservedData, policy: TiePolicy) -> Result<Self> {
        let values = match &kind {
            StatKind::DiffInMeans => {
                two_arm_scalar(data)?;
                data.y_scalar().to_vec()
            }
            StatKind::Wilcoxon => {
                two_arm_scalar(data)?;
                rank_transform(data.y_scalar(), policy)?.ranks
            }
            StatKind::Dose { doses } if doses.len() != data.n_arms() => {
                return Err(Error::InvalidInput(format!(
                    "{} doses for {} arms",
                    doses.len(),
                    data.n_arms()
                )))
            }
            _ => ranks_of(data, policy)?,
        };
        Ok(Self {
            kind,
            values,
            n_arms: data.n_arms(),
        })
    }

    pub fn kind(&self) -> &StatKind {
        &self.kind
    }

    pub fn eval(&self, labels: &[usize]) -> f64 {
        match &self.kind {
            StatKind::DiffInMeans | StatKind::Wilcoxon => difference(&self.values, labels),
            StatKind::KruskalWallis => kruskal_wallis_forms(&self.values, labels, self.n_arms).0,
            StatKind::MaxRank => extremes(&self.values, labels, self.n_arms).0,
            StatKind::RangeRank => extremes(&self.values, labels, self.n_arms).1,
            StatKind::Dose { doses } => dose_of(&self.values, labels, doses),
        }
    }
}

/// Monte Carlo p-value `(1 + #{b : S_b as extreme as S_obs}) / (B + 1)`.
/// Replicate `b` draws from its own stream, so the result does not depend
/// on the thread count.
pub fn mc_randomization_pvalue<F>(
    stat: F,
    observed: &Assignment,
    reps: usize,
    seed: u64,
    alternative: Alternative,
) -> Result<TestResult>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    if reps == 0 {
        return Err(Error::Argument("Monte Carlo needs at least one replicate".into()));
    }
    let obs = stat(observed.labels());
    let spec = observed.spec()?;
    let base = spec.sorted_labels();
    let hits: usize = (0..reps)
        .into_par_iter()
        .map_init(
            || base.clone(),
            |labels, b| {
                labels.copy_from_slice(&base);
                crate::designs::reshuffle(labels, &mut replicate_rng(seed, b as u64));
                usize::from(alternative.as_extreme(stat(labels), obs))
            },
        )
        .sum();
    Ok(TestResult::new(
        obs,
        (1 + hits) as f64 / (reps + 1) as f64,
        TestMethod::MonteCarlo { reps, seed },
        alternative,
    ))
}

/// Exact p-value: the share of all assignments, the observed one included,
/// whose statistic is as extreme as the observed value.
pub fn exact_randomization_pvalue<F>(
    stat: F,
    observed: &Assignment,
    cap: u128,
    alternative: Alternative,
) -> Result<TestResult>
where
    F: Fn(&[usize]) -> f64,
{
    let obs = stat(observed.labels());
    let spec = observed.spec()?;
    let mut it = enumerate_partitions_capped(&spec, cap)?;
    let mut total: u128 = 0;
    let mut hits: u128 = 0;
    while let Some(labels) = it.next_labels() {
        total += 1;
        if alternative.as_extreme(stat(labels), obs) {
            hits += 1;
        }
    }
    Ok(TestResult::new(
        obs,
        hits as f64 / total as f64,
        TestMethod::Exact { assignments: total },
        alternative,
    ))
}

/// Normal-limit p-value for a rank statistic. Maximum and range statistics
/// are taken on the exactly standardized rank means and referred to `reps`
/// draws from `N(0, V_R)`; the dose statistic uses its exact null mean and
/// variance.
pub fn rank_normal_pvalue(
    kind: &StatKind,
    data: &ObservedData,
    policy: TiePolicy,
    reps: usize,
    seed: u64,
    alternative: Alternative,
) -> Result<TestResult> {
    let ranks = ranks_of(data, policy)?;
    let labels = data.assignment().labels();
    let sizes = data.arm_sizes();
    let n = ranks.len() as f64;
    let rm = moments_of(&ranks);
    match kind {
        StatKind::Dose { doses } => {
            if doses.len() != sizes.len() {
                return Err(Error::InvalidInput(format!(
                    "{} doses for {} arms",
                    doses.len(),
                    sizes.len()
                )));
            }
            let stat = dose_of(&ranks, labels, doses);
            let mean = rm.mean * doses.iter().sum::<f64>();
            let mut var = 0.0;
            for (a, &na) in sizes.iter().enumerate() {
                for (b, &_nb) in sizes.iter().enumerate() {
                    let c = if a == b {
                        (1.0 / na as f64 - 1.0 / n) * rm.variance
                    } else {
                        -rm.variance / n
                    };
                    var += doses[a] * doses[b] * c;
                }
            }
            if !(var > 0.0) {
                return Err(Error::Degenerate("dose statistic has zero null variance".into()));
            }
            let z = (stat - mean) / var.sqrt();
            let p = match alternative {
                Alternative::Greater => 1.0 - std_normal_cdf(z),
                Alternative::Less => std_normal_cdf(z),
                Alternative::TwoSided => 2.0 * (1.0 - std_normal_cdf(z.abs())),
            };
            let mut res = TestResult::new(stat, p, TestMethod::NormalApprox, alternative);
            res.null_mean = Some(mean);
            res.null_variance = Some(var);
            Ok(res)
        }
        StatKind::MaxRank | StatKind::RangeRank => {
            if reps == 0 {
                return Err(Error::Argument("simulation needs at least one replicate".into()));
            }
            if !(rm.variance > 0.0) {
                return Err(Error::Degenerate("all ranks tied".into()));
            }
            let (means, _) = arm_means(&ranks, labels, sizes.len());
            let z: Vec<f64> = means
                .iter()
                .zip(&sizes)
                .map(|(m, &c)| (m - rm.mean) / ((1.0 / c as f64 - 1.0 / n) * rm.variance).sqrt())
                .collect();
            let reduce = |v: &[f64]| -> f64 {
                let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                if matches!(kind, StatKind::MaxRank) {
                    max
                } else {
                    max - min
                }
            };
            let obs = reduce(&z);
            let root = psd_sqrt(&rank_mean_null_cov(&sizes));
            let q = sizes.len();
            let hits: usize = (0..reps)
                .into_par_iter()
                .map(|b| {
                    let mut rng = replicate_rng(seed, b as u64);
                    let e = DVector::from_iterator(q, (0..q).map(|_| StandardNormal.sample(&mut rng)));
                    let draw = &root * e;
                    usize::from(Alternative::Greater.as_extreme(reduce(draw.as_slice()), obs))
                })
                .sum();
            let mut res = TestResult::new(
                obs,
                hits as f64 / reps as f64,
                TestMethod::SimulatedNormal { reps, seed },
                Alternative::Greater,
            );
            res.components = z;
            Ok(res)
        }
        StatKind::KruskalWallis => kruskal_wallis(data, policy),
        _ => Err(Error::InvalidInput(format!(
            "no rank normal limit for {kind:?}"
        ))),
    }
}

/// Reference distribution for [`hypergeom_test`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypergeomMode {
    Exact,
    Normal,
}

/// Count of ones among treated units for a binary outcome.
pub fn hypergeom_test(
    data: &ObservedData,
    mode: HypergeomMode,
    alternative: Alternative,
) -> Result<TestResult> {
    two_arm_scalar(data)?;
    let y = data.y_scalar();
    if let Some(v) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::InvalidInput(format!("binary outcome required, found {v}")));
    }
    let big = y.len() as u64;
    let ones = y.iter().filter(|v| **v == 1.0).count() as u64;
    let n = data.arm_sizes()[0] as u64;
    let obs = data
        .assignment()
        .units_in(0)
        .filter(|&i| y[i] == 1.0)
        .count() as f64;
    let (bf, of, nf) = (big as f64, ones as f64, n as f64);
    let mean = nf * of / bf;
    let var = of * (bf - of) * nf * (bf - nf) / (bf * bf * (bf - 1.0));
    let p = if var == 0.0 {
        1.0
    } else {
        match mode {
            HypergeomMode::Exact => {
                let dist = Hypergeometric::new(big, ones, n)
                    .map_err(|e| Error::Internal(format!("hypergeometric: {e}")))?;
                let lo = (n + ones).saturating_sub(big);
                let hi = n.min(ones);
                (lo..=hi)
                    .filter(|&x| {
                        let xf = x as f64;
                        match alternative {
                            Alternative::Greater => xf >= obs,
                            Alternative::Less => xf <= obs,
                            Alternative::TwoSided => {
                                (xf - mean).abs() >= (obs - mean).abs() - 1e-9
                            }
                        }
                    })
                    .map(|x| dist.pmf(x))
                    .sum::<f64>()
            }
            HypergeomMode::Normal => {
                let sd = var.sqrt();
                match alternative {
                    Alternative::Greater => 1.0 - std_normal_cdf((obs - 0.5 - mean) / sd),
                    Alternative::Less => std_normal_cdf((obs + 0.5 - mean) / sd),
                    Alternative::TwoSided => {
                        let d = ((obs - mean).abs() - 0.5).max(0.0);
                        2.0 * (1.0 - std_normal_cdf(d / sd))
                    }
                }
            }
        }
    };
    let method = match mode {
        HypergeomMode::Exact => TestMethod::Exact {
            assignments: DesignSpec::new(data.arm_sizes())?.n_assignments(),
        },
        HypergeomMode::Normal => TestMethod::NormalApprox,
    };
    let mut res = TestResult::new(obs, p, method, alternative);
    res.null_mean = Some(mean);
    res.null_variance = Some(var);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::DEFAULT_ENUM_CAP;

    fn data(labels: &[usize], y: &[f64]) -> ObservedData {
        let q = labels.iter().max().unwrap() + 1;
        ObservedData::scalar(Assignment::new(labels.to_vec(), q).unwrap(), y).unwrap()
    }

    #[test]
    fn ranks() {
        assert_eq!(rank_transform(&[10.0, 30.0, 20.0], TiePolicy::Strict).unwrap().ranks, vec![1.0, 3.0, 2.0]);
        assert!(matches!(rank_transform(&[5.0, 5.0], TiePolicy::Strict), Err(Error::Ties(v)) if v == vec![5.0]));
        assert_eq!(rank_transform(&[5.0, 5.0, 7.0], TiePolicy::Midrank).unwrap().ranks, vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn two_sample_stats() {
        let d = data(&[1, 1, 0, 0], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(diff_in_means_stat(&d).unwrap(), 2.0);
        assert_eq!(wilcoxon_stat(&d, TiePolicy::Strict).unwrap(), 2.0);
        let flat = data(&[1, 0, 0, 1], &[3.0; 4]);
        assert_eq!(diff_in_means_stat(&flat).unwrap(), 0.0);
        assert_eq!(wilcoxon_stat(&flat, TiePolicy::Midrank).unwrap(), 0.0);
    }

    #[test]
    fn kruskal_wallis_canonical() {
        let d = data(&[1, 1, 0, 0], &[1.0, 2.0, 3.0, 4.0]);
        let r = kruskal_wallis(&d, TiePolicy::Strict).unwrap();
        assert!((r.components[0] - 2.4).abs() < 1e-12);
        assert!((r.components[1] - 2.4).abs() < 1e-12);
        let even = data(&[0, 1, 1, 0], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(kruskal_wallis(&even, TiePolicy::Strict).unwrap().statistic, 0.0);
    }

    #[test]
    fn standardized_rank_mean_example() {
        let d = data(&[1, 1, 0, 0], &[1.0, 2.0, 3.0, 4.0]);
        let z = standardized_rank_means(&d).unwrap();
        assert!((z[0] - 2.4_f64.sqrt()).abs() < 1e-12);
        assert!((z[1] + 2.4_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn extreme_and_dose() {
        let d = data(&[0, 1, 0, 1], &[1.0, 4.0, 2.0, 3.0]);
        assert_eq!(dose_rank_stat(&d, &[0.0, 1.0], TiePolicy::Strict).unwrap(), 3.5);
        assert_eq!(extreme_rank_stats(&d, TiePolicy::Strict).unwrap(), (3.5, 2.0));
        let flat = data(&[0, 1, 2], &[1.0; 3]);
        assert_eq!(extreme_rank_stats(&flat, TiePolicy::Midrank).unwrap().1, 0.0);
        assert!(dose_rank_stat(&d, &[1.0], TiePolicy::Strict).is_err());
    }

    #[test]
    fn joint_test_critical_values() {
        // y equal to its ranks: both statistics coincide and rho = 1
        let d = data(&[0, 1, 0, 1, 0, 1], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let spec = JointTestSpec {
            alpha: 0.05,
            mode: JointMode::SameOutcome,
            ties: TiePolicy::Strict,
        };
        let r = joint_test(&d, &spec).unwrap();
        assert!((r.critical_value.unwrap() - 1.6448536269514722).abs() < 1e-7);
        assert!((r.components[0] - r.components[1]).abs() < 1e-12);
    }

    #[test]
    fn exact_pvalue_example() {
        let d = data(&[1, 1, 0, 0], &[1.0, 2.0, 3.0, 4.0]);
        let s = SharpNullStat::new(StatKind::DiffInMeans, &d, TiePolicy::Strict).unwrap();
        let r = exact_randomization_pvalue(|l| s.eval(l), d.assignment(), DEFAULT_ENUM_CAP, Alternative::Greater)
            .unwrap();
        assert!((r.p_value - 1.0 / 6.0).abs() < 1e-15);
        let mc = mc_randomization_pvalue(|l| s.eval(l), d.assignment(), 100_000, 3, Alternative::Greater).unwrap();
        assert!((mc.p_value - 1.0 / 6.0).abs() < 0.01);
    }

    #[test]
    fn constant_outcome_pvalue_is_one() {
        let d = data(&[1, 1, 0, 0, 1], &[2.0; 5]);
        let s = SharpNullStat::new(StatKind::DiffInMeans, &d, TiePolicy::Strict).unwrap();
        for alt in [Alternative::Greater, Alternative::Less, Alternative::TwoSided] {
            let e = exact_randomization_pvalue(|l| s.eval(l), d.assignment(), DEFAULT_ENUM_CAP, alt).unwrap();
            assert_eq!(e.p_value, 1.0);
            let m = mc_randomization_pvalue(|l| s.eval(l), d.assignment(), 50, 1, alt).unwrap();
            assert_eq!(m.p_value, 1.0);
        }
    }

    #[test]
    fn mc_is_deterministic() {
        let d = data(&[1, 1, 0, 0, 1, 0, 1, 0], &[1.0, 5.0, 3.0, 2.0, 8.0, 7.0, 6.0, 4.0]);
        let s = SharpNullStat::new(StatKind::Wilcoxon, &d, TiePolicy::Strict).unwrap();
        let a = mc_randomization_pvalue(|l| s.eval(l), d.assignment(), 999, 42, Alternative::TwoSided).unwrap();
        let b = mc_randomization_pvalue(|l| s.eval(l), d.assignment(), 999, 42, Alternative::TwoSided).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hypergeometric_examples() {
        let d = data(&[0, 0, 1, 1], &[1.0, 0.0, 1.0, 0.0]);
        let r = hypergeom_test(&d, HypergeomMode::Exact, Alternative::TwoSided).unwrap();
        assert!((r.null_variance.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.null_mean, Some(1.0));
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let hit = data(&[0, 0, 1, 1], &[1.0, 1.0, 0.0, 0.0]);
        let r = hypergeom_test(&hit, HypergeomMode::Exact, Alternative::Greater).unwrap();
        assert!((r.p_value - 1.0 / 6.0).abs() < 1e-12);
        let ones = data(&[0, 1, 1, 0], &[1.0; 4]);
        assert_eq!(hypergeom_test(&ones, HypergeomMode::Exact, Alternative::TwoSided).unwrap().p_value, 1.0);
        assert!(hypergeom_test(&data(&[0, 1], &[0.5, 1.0]), HypergeomMode::Exact, Alternative::Greater).is_err());
    }

    #[test]
    fn dose_normal_limit_matches_two_arm_rank_difference() {
        let d = data(&[0, 1, 0, 1, 0, 1, 1, 0], &[1.0, 5.0, 3.0, 2.0, 8.0, 7.0, 6.0, 4.0]);
        let r = rank_normal_pvalue(
            &StatKind::Dose { doses: vec![0.0, 1.0] },
            &d,
            TiePolicy::Strict,
            0,
            0,
            Alternative::Greater,
        )
        .unwrap();
        // Rbar_2 has variance (1/n - 1/N) N (N + 1) / 12
        assert!((r.null_variance.unwrap() - (0.25 - 0.125) * 6.0).abs() < 1e-12);
        assert_eq!(r.null_mean, Some(4.5));
    }
}
