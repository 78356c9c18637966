//! Deterministic synthetic populations and potential-outcome tables.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distlib::std_normal_quantile;
use crate::error::{Error, Result};
use crate::popstats::{Population, PotentialTable};
use crate::rng::seeded;

/// Where a population of size `N` comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum PopulationSource {
    /// `1, 2, ..., N`.
    Ranks,
    /// `(i - 1/2) / N` for `i = 1..N`.
    UniformGrid,
    /// `exp(sigma z_i)` at normal scores `z_i`: a right-skewed heavy tail.
    Lognormal {
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    /// A fraction `p` of ones, the rest zeros.
    TwoPoint {
        #[serde(default = "default_p")]
        p: f64,
    },
    /// Fixed values; the ladder is ignored.
    Inline { values: Vec<f64> },
    /// One numeric column of a CSV file; the ladder is ignored.
    File {
        path: PathBuf,
        #[serde(default = "default_column")]
        column: String,
    },
}

fn default_column() -> String {
    "y".into()
}

fn default_sigma() -> f64 {
    1.0
}

fn default_p() -> f64 {
    0.3
}

impl PopulationSource {
    pub fn is_fixed(&self) -> bool {
        matches!(self, PopulationSource::Inline { .. } | PopulationSource::File { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if let PopulationSource::File { path, .. } = self {
            if !path.is_file() {
                return Err(Error::Argument(format!("population file {} not found", path.display())));
            }
        }
        Ok(())
    }

    pub fn generate(&self, n: usize) -> Result<Population> {
        if n == 0 {
            return Err(Error::Argument("population size must be positive".into()));
        }
        let nf = n as f64;
        let values = match self {
            PopulationSource::Ranks => (1..=n).map(|i| i as f64).collect(),
            PopulationSource::UniformGrid => (0..n).map(|i| (i as f64 + 0.5) / nf).collect(),
            PopulationSource::Lognormal { sigma } => (0..n)
                .map(|i| Ok((sigma * std_normal_quantile((i as f64 + 0.5) / nf)?).exp()))
                .collect::<Result<Vec<_>>>()?,
            PopulationSource::TwoPoint { p } => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::Argument(format!("two-point share must lie in (0, 1), got {p}")));
                }
                let ones = (p * nf).round() as usize;
                (0..n).map(|i| if i < ones { 1.0 } else { 0.0 }).collect()
            }
            PopulationSource::Inline { values } => values.clone(),
            PopulationSource::File { path, column } => read_column(path, column)?,
        };
        Population::new(values)
    }
}

fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let idx = reader
        .headers()?
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| Error::MissingColumn(column.into()))?;
    reader
        .records()
        .enumerate()
        .map(|(row, rec)| {
            let rec = rec?;
            let cell = rec.get(idx).unwrap_or("").trim();
            cell.parse::<f64>().map_err(|_| Error::NonNumeric {
                row: row + 1,
                column: column.into(),
                value: cell.into(),
            })
        })
        .collect()
}

/// Two-arm tables for coverage experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effects", rename_all = "snake_case")]
pub enum TableSource {
    /// `Y(0)` a uniform grid on `[0, 1)`, `Y(1) = Y(0) + tau`.
    Additive {
        #[serde(default = "default_tau")]
        tau: f64,
    },
    /// `Y(0)` a uniform grid, `Y(1) = slope Y(0) + shift`.
    Heterogeneous {
        #[serde(default = "default_slope")]
        slope: f64,
        #[serde(default = "default_tau")]
        shift: f64,
    },
}

fn default_tau() -> f64 {
    1.0
}

fn default_slope() -> f64 {
    3.0
}

impl TableSource {
    pub fn is_additive(&self) -> bool {
        matches!(self, TableSource::Additive { .. })
    }

    /// Arm 0 is treatment, arm 1 control.
    pub fn generate(&self, n: usize) -> Result<PotentialTable> {
        let y0: Vec<f64> = PopulationSource::UniformGrid.generate(n)?.values().to_vec();
        let y1: Vec<f64> = match *self {
            TableSource::Additive { tau } => y0.iter().map(|v| v + tau).collect(),
            TableSource::Heterogeneous { slope, shift } => y0.iter().map(|v| slope * v + shift).collect(),
        };
        PotentialTable::from_scalar_arms(&[y1, y0])
    }
}

/// `N x K` standard normal covariates, centered.
pub fn normal_covariates(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded(seed);
    let mut x: DMatrix<f64> = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
    for mut col in x.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    x
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
/// Sorts `sample` in place.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
    sample.sort_by(f64::total_cmp);
    let b = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i as f64 + 1.0) / b - f).max(f - i as f64 / b)
        })
        .fold(0.0, f64::max)
}
