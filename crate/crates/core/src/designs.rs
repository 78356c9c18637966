//! Assignment mechanisms and the exhaustive-enumeration oracle.
//!
//! Arms are indexed from 0 inside the library; CSV and JSON use labels
//! `1..=Q`. For two-arm designs arm 0 is treatment and arm 1 is control.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{column_means, row_covariance, sym_inv_sqrt};
use crate::rng::{seeded, StreamRng};

/// Default ceiling on the number of assignments an enumeration may visit.
pub const DEFAULT_ENUM_CAP: u128 = 10_000_000;

/// Environment variable that overrides [`DEFAULT_ENUM_CAP`].
pub const ENUM_CAP_ENV: &str = "FINPOP_ENUM_CAP";

/// The enumeration cap in force: `FINPOP_ENUM_CAP` if set and parseable.
pub fn enum_cap() -> u128 {
    std::env::var(ENUM_CAP_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_ENUM_CAP)
}

/// Fixed arm sizes `n_1, ..., n_Q` of a complete randomization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DesignSpec {
    sizes: Vec<usize>,
}

impl DesignSpec {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidInput("design needs at least one arm".into()));
        }
        if let Some(q) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidInput(format!("arm {} has size 0", q + 1)));
        }
        Ok(Self { sizes })
    }

    pub fn two_arm(n1: usize, n0: usize) -> Result<Self> {
        Self::new(vec![n1, n0])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_arms(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_units(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// `N! / (n_1! ... n_Q!)`, saturating at `u128::MAX`.
    pub fn n_assignments(&self) -> u128 {
        let mut count: u128 = 1;
        let mut placed: u128 = 0;
        for &s in &self.sizes {
            // build up product of binomials C(placed + s, s)
            for k in 1..=s as u128 {
                placed += 1;
                count = match count.checked_mul(placed) {
                    Some(v) => v / k,
                    None => return u128::MAX,
                };
            }
        }
        count
    }

    /// Arm labels in sorted order: `n_1` zeros, then `n_2` ones, ...
    pub fn sorted_labels(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .enumerate()
            .flat_map(|(q, &s)| std::iter::repeat(q).take(s))
            .collect()
    }
}

/// Arm membership of every unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    labels: Vec<usize>,
    n_arms: usize,
}

impl Assignment {
    /// Build from 0-based labels in `0..n_arms`.
    pub fn new(labels: Vec<usize>, n_arms: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_arms) {
            return Err(Error::InvalidInput(format!(
                "label {} outside 1..={n_arms}",
                bad + 1
            )));
        }
        Ok(Self { labels, n_arms })
    }

    /// Build from labels in `1..=Q`, with `Q` the largest label seen.
    pub fn from_one_based(labels: &[i64]) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l < 1) {
            return Err(Error::InvalidInput(format!("arm label {bad} is not in 1..=Q")));
        }
        let q = labels.iter().copied().max().unwrap_or(0) as usize;
        let zero: Vec<usize> = labels.iter().map(|&l| l as usize - 1).collect();
        let a = Self::new(zero, q)?;
        if let Some(empty) = a.counts().iter().position(|&c| c == 0) {
            return Err(Error::InvalidInput(format!(
                "arm labels must be contiguous 1..={q}; arm {} is empty",
                empty + 1
            )));
        }
        Ok(a)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn n_units(&self) -> usize {
        self.labels.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_arms];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    pub fn units_in(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == q)
            .map(|(i, _)| i)
    }

    pub fn spec(&self) -> Result<DesignSpec> {
        DesignSpec::new(self.counts())
    }

    pub fn matches(&self, spec: &DesignSpec) -> bool {
        self.counts() == spec.sizes()
    }
}

/// Simple random sample of `n` out of `big_n` as a 0/1 inclusion vector.
pub fn draw_srs(big_n: usize, n: usize, seed: u64) -> Result<Vec<u8>> {
    draw_srs_with(big_n, n, &mut seeded(seed))
}

pub fn draw_srs_with<R: Rng + ?Sized>(big_n: usize, n: usize, rng: &mut R) -> Result<Vec<u8>> {
    if n == 0 || n > big_n {
        return Err(Error::Argument(format!("sample size {n} outside 1..={big_n}")));
    }
    let mut v: Vec<u8> = (0..big_n).map(|i| u8::from(i < n)).collect();
    v.shuffle(rng);
    Ok(v)
}

pub fn draw_partition(spec: &DesignSpec, seed: u64) -> Assignment {
    draw_partition_with(spec, &mut seeded(seed))
}

/// Uniform random partition by a Fisher-Yates shuffle of the label multiset.
pub fn draw_partition_with<R: Rng + ?Sized>(spec: &DesignSpec, rng: &mut R) -> Assignment {
    let mut labels = spec.sorted_labels();
    labels.shuffle(rng);
    Assignment {
        labels,
        n_arms: spec.n_arms(),
    }
}

/// Reshuffle `labels` in place; the allocation-free form of
/// [`draw_partition_with`] for Monte Carlo loops.
pub fn reshuffle<R: Rng + ?Sized>(labels: &mut [usize], rng: &mut R) {
    labels.shuffle(rng);
}

/// All assignments of a design in lexicographic order of the label vector.
#[derive(Debug, Clone)]
pub struct PartitionIter {
    current: Vec<usize>,
    n_arms: usize,
    started: bool,
    done: bool,
}

impl PartitionIter {
    /// Label vector of the next assignment without allocating an
    /// [`Assignment`].
    pub fn next_labels(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.current);
        }
        if next_permutation(&mut self.current) {
            Some(&self.current)
        } else {
            self.done = true;
            None
        }
    }
}

impl Iterator for PartitionIter {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        let n_arms = self.n_arms;
        self.next_labels().map(|l| Assignment {
            labels: l.to_vec(),
            n_arms,
        })
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Every assignment of `spec`, refused when the count exceeds [`enum_cap`].
pub fn enumerate_partitions(spec: &DesignSpec) -> Result<PartitionIter> {
    enumerate_partitions_capped(spec, enum_cap())
}

pub fn enumerate_partitions_capped(spec: &DesignSpec, cap: u128) -> Result<PartitionIter> {
    let count = spec.n_assignments();
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    Ok(PartitionIter {
        current: spec.sorted_labels(),
        n_arms: spec.n_arms(),
        started: false,
        done: false,
    })
}

/// `Cov(1{L_i = q}, 1{L_j = r})` under complete randomization.
pub fn indicator_cov(spec: &DesignSpec, i: usize, j: usize, q: usize, r: usize) -> Result<f64> {
    let n = spec.n_units();
    if i >= n || j >= n {
        return Err(Error::Argument(format!("unit ids ({i}, {j}) outside 0..{n}")));
    }
    let arms = spec.n_arms();
    if q >= arms || r >= arms {
        return Err(Error::Argument(format!("arm ids ({q}, {r}) outside 0..{arms}")));
    }
    let big = n as f64;
    let nq = spec.sizes()[q] as f64;
    let nr = spec.sizes()[r] as f64;
    let v = match (i == j, q == r) {
        (true, true) => nq * (big - nq) / (big * big),
        (true, false) => -nq * nr / (big * big),
        (false, true) => {
            if n < 2 {
                0.0
            } else {
                -nq * (big - nq) / (big * big * (big - 1.0))
            }
        }
        (false, false) => nq * nr / (big * big * (big - 1.0)),
    };
    Ok(v)
}

/// Treatment combinations and ±1 effect generators of a `2^K` design.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorialSpec {
    k: usize,
    /// `Q x K`; row `q` holds the levels `z(q)`.
    levels: DMatrix<f64>,
    /// `Q x (Q - 1)`; column `k` is `g_k`.
    generators: DMatrix<f64>,
    /// Factors (0-based) participating in each generator column.
    subsets: Vec<Vec<usize>>,
}

impl FactorialSpec {
    pub fn n_factors(&self) -> usize {
        self.k
    }

    pub fn n_arms(&self) -> usize {
        self.levels.nrows()
    }

    pub fn levels(&self) -> &DMatrix<f64> {
        &self.levels
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// Human-readable effect names such as `F1`, `F1:F3`.
    pub fn effect_names(&self) -> Vec<String> {
        self.subsets
            .iter()
            .map(|s| s.iter().map(|f| format!("F{}", f + 1)).join(":"))
            .collect()
    }
}

pub const MAX_FACTORS: usize = 12;

/// Levels in lexicographic order with factor 1 varying slowest and `+1`
/// first; interactions ordered by size, then lexicographically.
pub fn factorial_contrasts(k: usize) -> Result<FactorialSpec> {
    if k == 0 || k > MAX_FACTORS {
        return Err(Error::Argument(format!("factor count {k} outside 1..={MAX_FACTORS}")));
    }
    let q = 1usize << k;
    let levels = DMatrix::from_fn(q, k, |row, f| {
        if (row >> (k - 1 - f)) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    });
    let subsets: Vec<Vec<usize>> = (1..=k).flat_map(|size| (0..k).combinations(size)).collect();
    let generators = DMatrix::from_fn(q, q - 1, |row, col| {
        subsets[col].iter().map(|&f| levels[(row, f)]).product()
    });
    Ok(FactorialSpec {
        k,
        levels,
        generators,
        subsets,
    })
}

/// Covariates and acceptance threshold for rerandomization.
#[derive(Debug, Clone)]
pub struct RerandSpec {
    covariates: DMatrix<f64>,
    threshold: f64,
    s2x_inv_sqrt: DMatrix<f64>,
}

impl RerandSpec {
    /// `x` is `N x K`; it is centered here if its column means are not zero.
    pub fn new(x: DMatrix<f64>, threshold: f64) -> Result<Self> {
        if x.nrows() < 2 || x.ncols() == 0 {
            return Err(Error::InvalidInput("covariates need N >= 2 rows and K >= 1 columns".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("covariates must be finite".into()));
        }
        if threshold.is_nan() || threshold < 0.0 {
            return Err(Error::Argument(format!("threshold must be >= 0, got {threshold}")));
        }
        let covariates = center_columns(x);
        let s2x_inv_sqrt = sym_inv_sqrt(&row_covariance(&covariates))?;
        Ok(Self {
            covariates,
            threshold,
            s2x_inv_sqrt,
        })
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.ncols()
    }

    /// `delta' delta` for a two-arm label vector (arm 0 treated).
    pub fn distance(&self, labels: &[usize]) -> Result<f64> {
        Ok(self.delta_labels(labels)?.norm_squared())
    }

    fn delta_labels(&self, labels: &[usize]) -> Result<DVector<f64>> {
        let n = self.covariates.nrows();
        if labels.len() != n {
            return Err(Error::InvalidInput(format!(
                "assignment has {} units, covariates have {n}",
                labels.len()
            )));
        }
        let k = self.covariates.ncols();
        let mut sum1 = DVector::zeros(k);
        let mut sum0 = DVector::zeros(k);
        let mut n1 = 0usize;
        for (i, &l) in labels.iter().enumerate() {
            let row = self.covariates.row(i).transpose();
            match l {
                0 => {
                    sum1 += row;
                    n1 += 1;
                }
                1 => sum0 += row,
                _ => return Err(Error::InvalidInput("rerandomization needs two arms".into())),
            }
        }
        let n0 = n - n1;
        if n1 == 0 || n0 == 0 {
            return Err(Error::InvalidInput("both arms must be nonempty".into()));
        }
        let tau_x = sum1 / n1 as f64 - sum0 / n0 as f64;
        let scale = (n1 as f64 * n0 as f64 / n as f64).sqrt();
        Ok(&self.s2x_inv_sqrt * tau_x * scale)
    }
}

pub(crate) fn center_columns(mut x: DMatrix<f64>) -> DMatrix<f64> {
    let means = column_means(&x);
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if means.iter().any(|m| m.abs() > 1e-12 * scale) {
        log::info!("centering covariates at their population means");
        for (j, m) in means.iter().enumerate() {
            x.column_mut(j).add_scalar_mut(-m);
        }
    }
    x
}

/// `(N / (n_1 n_0) S^2_X)^{-1/2} tau_hat_X` for a two-arm assignment.
pub fn compute_delta(assign: &Assignment, rerand: &RerandSpec) -> Result<DVector<f64>> {
    if assign.n_arms() != 2 {
        return Err(Error::InvalidInput("rerandomization needs two arms".into()));
    }
    rerand.delta_labels(assign.labels())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerandDraw {
    pub assignment: Assignment,
    pub tries: usize,
    pub distance: f64,
}

pub fn draw_rerandomized(
    spec: &DesignSpec,
    rerand: &RerandSpec,
    seed: u64,
    max_tries: usize,
) -> Result<RerandDraw> {
    draw_rerandomized_with(spec, rerand, &mut seeded(seed), max_tries)
}

/// Rejection sampling of complete randomization until `delta' delta <= a`.
pub fn draw_rerandomized_with(
    spec: &DesignSpec,
    rerand: &RerandSpec,
    rng: &mut StreamRng,
    max_tries: usize,
) -> Result<RerandDraw> {
    if spec.n_arms() != 2 {
        return Err(Error::InvalidInput("rerandomization needs two arms".into()));
    }
    if spec.n_units() != rerand.covariates.nrows() {
        return Err(Error::InvalidInput(format!(
            "design has {} units, covariates have {}",
            spec.n_units(),
            rerand.covariates.nrows()
        )));
    }
    let mut labels = spec.sorted_labels();
    for tries in 1..=max_tries {
        labels.shuffle(rng);
        let distance = rerand.distance(&labels)?;
        if distance <= rerand.threshold {
            return Ok(RerandDraw {
                assignment: Assignment { labels, n_arms: 2 },
                tries,
                distance,
            });
        }
    }
    Err(Error::MaxTries {
        tries: max_tries,
        rate: 0.0,
    })
}

/// Unit-level assignment where unit `i` inherits the arm of cluster
/// `membership[i]`.
pub fn cluster_expand(cluster_assign: &Assignment, membership: &[usize]) -> Result<Assignment> {
    let m = cluster_assign.n_units();
    let labels = membership
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            cluster_assign.labels().get(c).copied().ok_or_else(|| {
                Error::InvalidInput(format!("unit {i} maps to cluster {c}, only {m} clusters"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Assignment::new(labels, cluster_assign.n_arms())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn spec(s: &[usize]) -> DesignSpec {
        DesignSpec::new(s.to_vec()).unwrap()
    }

    #[test]
    fn srs_examples() {
        assert_eq!(draw_srs(3, 3, 1).unwrap(), vec![1, 1, 1]);
        assert!(draw_srs(3, 0, 1).is_err());
        let mut rng = seeded(11);
        let mut freq = [0usize; 3];
        for _ in 0..30000 {
            let v = draw_srs_with(3, 1, &mut rng).unwrap();
            freq[v.iter().position(|&x| x == 1).unwrap()] += 1;
        }
        for f in freq {
            assert!((f as f64 / 30000.0 - 1.0 / 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn partition_uniform_and_exact() {
        let s = spec(&[2, 2]);
        let mut rng = seeded(5);
        let mut freq: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..60000 {
            let a = draw_partition_with(&s, &mut rng);
            assert_eq!(a.counts(), vec![2, 2]);
            *freq.entry(a.labels().to_vec()).or_default() += 1;
        }
        assert_eq!(freq.len(), 6);
        for f in freq.values() {
            assert!((*f as f64 / 60000.0 - 1.0 / 6.0).abs() < 0.02);
        }
        assert_eq!(draw_partition(&s, 9), draw_partition(&s, 9));
        assert_eq!(draw_partition(&spec(&[5]), 1).labels(), &[0; 5]);
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_partitions(&spec(&[2, 2])).unwrap().count(), 6);
        assert_eq!(enumerate_partitions(&spec(&[1, 1, 2])).unwrap().count(), 12);
        assert_eq!(enumerate_partitions(&spec(&[3])).unwrap().count(), 1);
        assert_eq!(spec(&[2, 2, 2]).n_assignments(), 90);
        assert_eq!(spec(&[10, 10]).n_assignments(), 184756);
    }

    #[test]
    fn enumeration_is_lexicographic_and_distinct() {
        let all: Vec<Vec<usize>> = enumerate_partitions(&spec(&[2, 1, 2]))
            .unwrap()
            .map(|a| a.labels().to_vec())
            .collect();
        assert_eq!(all.len(), 30);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn enumeration_cap_refuses() {
        match enumerate_partitions_capped(&spec(&[10, 10]), 1000) {
            Err(Error::CapExceeded { count, cap }) => {
                assert_eq!(count, 184756);
                assert_eq!(cap, 1000);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn indicator_cov_cases() {
        let s = spec(&[2, 2]);
        assert_eq!(indicator_cov(&s, 0, 0, 0, 0).unwrap(), 0.25);
        assert!((indicator_cov(&s, 0, 1, 0, 0).unwrap() + 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(indicator_cov(&s, 0, 0, 0, 1).unwrap(), -0.25);
        assert!((indicator_cov(&s, 0, 1, 0, 1).unwrap() - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn factorial_examples() {
        let f = factorial_contrasts(1).unwrap();
        assert_eq!(f.generators().as_slice(), &[1.0, -1.0]);
        let f = factorial_contrasts(2).unwrap();
        let g = f.generators();
        assert_eq!(g.column(0).as_slice(), &[1.0, 1.0, -1.0, -1.0]);
        assert_eq!(g.column(1).as_slice(), &[1.0, -1.0, 1.0, -1.0]);
        assert_eq!(g.column(2).as_slice(), &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(f.effect_names(), vec!["F1", "F2", "F1:F2"]);
        for k in 1..=5 {
            let f = factorial_contrasts(k).unwrap();
            let g = f.generators();
            let q = g.nrows() as f64;
            let gram = g.transpose() * g;
            assert_eq!(gram, DMatrix::identity(g.ncols(), g.ncols()) * q);
            assert!(g.row_sum().iter().all(|v| *v == 0.0));
            assert_eq!(g.columns(0, k), *f.levels());
        }
        assert!(factorial_contrasts(0).is_err());
        assert!(factorial_contrasts(13).is_err());
    }

    #[test]
    fn delta_examples() {
        // antisymmetric covariate, balanced assignment splitting mirror pairs
        let x = DMatrix::from_column_slice(4, 1, &[1.0, -1.0, 2.0, -2.0]);
        let r = RerandSpec::new(x, 1.0).unwrap();
        let a = Assignment::new(vec![0, 0, 1, 1], 2).unwrap();
        assert_eq!(compute_delta(&a, &r).unwrap()[0], 0.0);

        // unit variance covariate: delta = tau_x / sqrt(4 / N)
        let vals = [1.0, -1.0, 1.0, -1.0];
        let s2: f64 = vals.iter().map(|v| v * v).sum::<f64>() / 3.0;
        let x = DMatrix::from_column_slice(4, 1, &vals.map(|v| v / s2.sqrt()));
        let r = RerandSpec::new(x.clone(), 1.0).unwrap();
        let a = Assignment::new(vec![0, 1, 0, 1], 2).unwrap();
        let tau_x = (x[0] + x[2]) / 2.0 - (x[1] + x[3]) / 2.0;
        let d = compute_delta(&a, &r).unwrap()[0];
        assert!((d - tau_x / (4.0_f64 / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn delta_singular_covariates() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, -2.0, 0.0, 0.0]);
        assert!(matches!(RerandSpec::new(x, 1.0), Err(Error::Singular { .. })));
    }

    #[test]
    fn rerandomization_limits() {
        let x = DMatrix::from_fn(20, 2, |i, j| (1.3 * i as f64 + j as f64).sin());
        let s = spec(&[10, 10]);
        let r = RerandSpec::new(x.clone(), f64::INFINITY).unwrap();
        assert_eq!(draw_rerandomized(&s, &r, 3, 10).unwrap().tries, 1);
        let r = RerandSpec::new(x, 0.0).unwrap();
        assert!(matches!(
            draw_rerandomized(&s, &r, 3, 50),
            Err(Error::MaxTries { tries: 50, .. })
        ));
    }

    #[test]
    fn cluster_expansion() {
        let c = Assignment::new(vec![0, 1], 2).unwrap();
        let u = cluster_expand(&c, &[0, 0, 1, 1]).unwrap();
        assert_eq!(u.one_based(), vec![1, 1, 2, 2]);
        let same = cluster_expand(&c, &[0, 1]).unwrap();
        assert_eq!(same, c);
        assert!(cluster_expand(&c, &[0, 2]).is_err());
    }

    #[test]
    fn one_based_labels_validated() {
        assert!(Assignment::from_one_based(&[0, 1]).is_err());
        assert!(Assignment::from_one_based(&[1, 3]).is_err());
        assert_eq!(Assignment::from_one_based(&[2, 1, 2]).unwrap().counts(), vec![1, 2]);
    }
}
