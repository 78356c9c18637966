//! Monte Carlo convergence of standardized statistics to their limits.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::synth::{ks_distance, normal_covariates};
use super::{replicate_map, Experiment, ExperimentConfig, Metric, Report, Rule, Series};
use crate::designs::{factorial_contrasts, DesignSpec, RerandSpec};
use crate::distlib::{chi2_cdf, chi2_quantile, std_normal_cdf};
use crate::error::{Error, Result};
use crate::estimators::{factorial_null_moments, neyman_cov_true, tau_true};
use crate::popstats::{
    cre_condition_stats, hajek_condition_stat, partition_condition_stat, pop_moments, ContrastSpec,
    Population, PotentialTable,
};
use crate::randtests::{kruskal_wallis_forms, rank_transform, TiePolicy};
use crate::rng::replicate_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CltStatistic {
    /// Standardized mean of a simple random sample; target N(0, 1).
    SampleMean,
    /// Kruskal-Wallis H over equal-as-possible arms; target chi-square(Q - 1).
    KruskalWallis,
    /// Standardized difference in means for `Y(1) = 2 Y(0) + 1`; target N(0, 1).
    Neyman,
    /// Covariate balance `delta' delta`; target chi-square(K).
    Rerandomization,
    /// First standardized factorial effect under the sharp null; target N(0, 1).
    FactorialNull,
}

/// One rung of the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct Rung {
    pub n: usize,
    pub ks: f64,
    pub diagnostic: f64,
    /// Share of draws at or below the 0.2 chi-square quantile
    /// (rerandomization only).
    pub acceptance: Option<f64>,
}

fn sizes_for(n: usize, arms: usize) -> Vec<usize> {
    (0..arms).map(|q| n / arms + usize::from(q < n % arms)).collect()
}

fn two_arm_split(n: usize, fraction: f64) -> (usize, usize) {
    let n1 = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    (n1, n - n1)
}

fn labels_for(sizes: &[usize]) -> Vec<usize> {
    sizes.iter().enumerate().flat_map(|(q, &s)| std::iter::repeat(q).take(s)).collect()
}

/// Simulate the statistic at population size `n`. Replicate `b` of rung
/// `rung` draws from stream `(rung << 32) | b`.
pub fn simulate_rung(config: &ExperimentConfig, rung: usize, n: usize) -> Result<Rung> {
    let Experiment::Clt {
        statistic,
        population,
        fraction,
        arms,
        covariates,
        factors,
        ..
    } = &config.experiment
    else {
        return Err(Error::Argument("not a CLT experiment".into()));
    };
    let pop = population.generate(n)?;
    let n = pop.len();
    let seed = config.seed;
    let stream = |b: u64| replicate_rng(seed, ((rung as u64) << 32) | b);
    let reps = config.reps;
    let par = config.parallel;

    let (mut draws, diagnostic, acceptance) = match statistic {
        CltStatistic::SampleMean => {
            let (n1, _) = two_arm_split(n, *fraction);
            let diagnostic = hajek_condition_stat(&pop, n1)?;
            let m = pop_moments(&pop);
            let sd = ((1.0 / n1 as f64 - 1.0 / n as f64) * m.variance).sqrt();
            let values = pop.values();
            let draws = replicate_map(reps, par, |b| {
                let mut rng = stream(b);
                let mut idx: Vec<usize> = (0..n).collect();
                let mut sum = 0.0;
                for i in 0..n1 {
                    let j = rng.gen_range(i..n);
                    idx.swap(i, j);
                    sum += values[idx[i]];
                }
                (sum / n1 as f64 - m.mean) / sd
            });
            (draws, diagnostic, None)
        }
        CltStatistic::KruskalWallis => {
            let sizes = sizes_for(n, *arms);
            if sizes.iter().any(|&s| s == 0) {
                return Err(Error::Argument(format!("{n} units cannot fill {arms} arms")));
            }
            let ranks = rank_transform(pop.values(), TiePolicy::Midrank)?.ranks;
            let diagnostic = partition_condition_stat(&Population::new(ranks.clone())?, &sizes)?;
            let base = labels_for(&sizes);
            let q = *arms;
            let draws = replicate_map(reps, par, |b| {
                let mut labels = base.clone();
                labels.shuffle(&mut stream(b));
                kruskal_wallis_forms(&ranks, &labels, q).0
            });
            (draws, diagnostic, None)
        }
        CltStatistic::Neyman => {
            let (n1, n0) = two_arm_split(n, *fraction);
            let y0 = pop.values().to_vec();
            let y1: Vec<f64> = y0.iter().map(|v| 2.0 * v + 1.0).collect();
            let table = PotentialTable::from_scalar_arms(&[y1.clone(), y0.clone()])?;
            let contrast = ContrastSpec::scalar(&[1.0, -1.0])?;
            let diag = cre_condition_stats(&table, &contrast, &[n1, n0])?;
            if diag.degenerate {
                return Err(Error::Degenerate("treatment-effect estimator has zero variance".into()));
            }
            let tau = tau_true(&table, &contrast)?[0];
            let var = neyman_cov_true(&table, &contrast, &[n1, n0])?[(0, 0)];
            if !(var > 0.0) {
                return Err(Error::Degenerate("treatment-effect estimator has zero variance".into()));
            }
            let sd = var.sqrt();
            let draws = replicate_map(reps, par, |b| {
                let mut rng = stream(b);
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut rng);
                let t: f64 = idx[..n1].iter().map(|&i| y1[i]).sum::<f64>() / n1 as f64;
                let c: f64 = idx[n1..].iter().map(|&i| y0[i]).sum::<f64>() / n0 as f64;
                (t - c - tau) / sd
            });
            (draws, diag.general, None)
        }
        CltStatistic::Rerandomization => {
            let (n1, n0) = two_arm_split(n, *fraction);
            let x = normal_covariates(n, *covariates, seed);
            let diagnostic = (0..*covariates)
                .map(|j| {
                    let col = Population::new(x.column(j).iter().copied().collect())?;
                    hajek_condition_stat(&col, n1)
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let rerand = RerandSpec::new(x, f64::INFINITY)?;
            let base = DesignSpec::two_arm(n1, n0)?.sorted_labels();
            let draws = replicate_map(reps, par, |b| {
                let mut labels = base.clone();
                labels.shuffle(&mut stream(b));
                rerand.distance(&labels)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let a = chi2_quantile(*covariates, 0.2)?;
            let accepted = draws.iter().filter(|&&d| d <= a).count();
            (draws, diagnostic, Some(accepted as f64 / reps as f64))
        }
        CltStatistic::FactorialNull => {
            let spec = factorial_contrasts(*factors)?;
            let sizes = sizes_for(n, spec.n_arms());
            if sizes.iter().any(|&s| s == 0) {
                return Err(Error::Argument(format!(
                    "{n} units cannot fill {} arms",
                    spec.n_arms()
                )));
            }
            let diagnostic = partition_condition_stat(&pop, &sizes)?;
            let v_n = pop_moments(&pop).variance;
            let sd = factorial_null_moments(v_n, &sizes, &spec)?.variances[0].sqrt();
            let g: Vec<f64> = spec.generators().column(0).iter().copied().collect();
            let scale = 0.5_f64.powi(*factors as i32 - 1);
            let values = pop.values();
            let base = labels_for(&sizes);
            let draws = replicate_map(reps, par, |b| {
                let mut labels = base.clone();
                labels.shuffle(&mut stream(b));
                let mut sums = vec![0.0; sizes.len()];
                for (i, &l) in labels.iter().enumerate() {
                    sums[l] += values[i];
                }
                let effect: f64 = (0..sizes.len()).map(|q| g[q] * sums[q] / sizes[q] as f64).sum();
                effect * scale / sd
            });
            (draws, diagnostic, None)
        }
    };

    let ks = match statistic {
        CltStatistic::KruskalWallis => {
            let df = *arms - 1;
            ks_distance(&mut draws, |x| chi2_cdf(df, x))
        }
        CltStatistic::Rerandomization => {
            let df = *covariates;
            ks_distance(&mut draws, |x| chi2_cdf(df, x))
        }
        _ => ks_distance(&mut draws, std_normal_cdf),
    };
    Ok(Rung {
        n,
        ks,
        diagnostic,
        acceptance,
    })
}

pub fn run_clt_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let started = Instant::now();
    let Experiment::Clt {
        statistic,
        population,
        ladder,
        ..
    } = &config.experiment
    else {
        return Err(Error::Argument("not a CLT experiment".into()));
    };
    population.validate()?;
    let sizes: Vec<usize> = if population.is_fixed() {
        vec![ladder[0]]
    } else {
        ladder.clone()
    };
    let rungs = sizes
        .iter()
        .enumerate()
        .map(|(r, &n)| simulate_rung(config, r, n))
        .collect::<Result<Vec<_>>>()?;

    let tol = &config.tolerances;
    let anchor = match statistic {
        CltStatistic::SampleMean => "sampling-clt",
        CltStatistic::KruskalWallis => "partition-clt",
        CltStatistic::Neyman => "treatment-effect-clt",
        CltStatistic::Rerandomization => "balance-chi-square-limit",
        CltStatistic::FactorialNull => "factorial-null-clt",
    };
    let mut metrics = Vec::new();
    if rungs.len() > 1 {
        let worst_step = rungs
            .windows(2)
            .map(|w| w[1].ks - w[0].ks)
            .fold(f64::NEG_INFINITY, f64::max);
        metrics.push(Metric::new(
            "ks_increase_max",
            anchor,
            worst_step,
            tol.ks_slack,
            Rule::Below,
        ));
    }
    let last = rungs.last().expect("ladder is nonempty");
    metrics.push(Metric::new(
        &format!("ks/N={}", last.n),
        anchor,
        last.ks,
        tol.ks_max,
        Rule::Below,
    ));
    if let Some(rate) = last.acceptance {
        metrics.push(Metric::new(
            &format!("acceptance_rate/N={}", last.n),
            "balance-chi-square-limit",
            rate,
            tol.acceptance_slack,
            Rule::Near { target: 0.2 },
        ));
    }
    let xs: Vec<f64> = rungs.iter().map(|r| r.n as f64).collect();
    let series = vec![
        Series {
            name: "ks".into(),
            x_label: "N".into(),
            x: xs.clone(),
            y: rungs.iter().map(|r| r.ks).collect(),
        },
        Series {
            name: "condition_diagnostic".into(),
            x_label: "N".into(),
            x: xs,
            y: rungs.iter().map(|r| r.diagnostic).collect(),
        },
    ];
    Ok(Report::finish(config, metrics, series, started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::PopulationSource;

    fn cfg(statistic: CltStatistic, population: PopulationSource, ladder: Vec<usize>, reps: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            Experiment::Clt {
                statistic,
                population,
                ladder,
                fraction: 0.5,
                arms: 3,
                covariates: 2,
                factors: 2,
            },
            11,
        );
        c.reps = reps;
        c
    }

    #[test]
    fn constant_population_is_degenerate() {
        let c = cfg(
            CltStatistic::SampleMean,
            PopulationSource::Inline { values: vec![2.0; 10] },
            vec![10],
            50,
        );
        assert!(matches!(run_clt_experiment(&c), Err(Error::Degenerate(_))));
    }

    #[test]
    fn serial_and_parallel_agree() {
        for stat in [
            CltStatistic::SampleMean,
            CltStatistic::KruskalWallis,
            CltStatistic::Neyman,
            CltStatistic::Rerandomization,
            CltStatistic::FactorialNull,
        ] {
            let mut a = cfg(stat, PopulationSource::Lognormal { sigma: 1.0 }, vec![16, 32], 300);
            let ra = run_clt_experiment(&a).unwrap();
            a.parallel = false;
            let rb = run_clt_experiment(&a).unwrap();
            assert_eq!(ra.metrics, rb.metrics, "{stat:?}");
            assert_eq!(ra.series, rb.series);
        }
    }

    #[test]
    fn two_unit_sample_mean_is_plus_minus_one() {
        // n = 1 of {0, 1}: the standardized mean is -1 or +1
        let c = cfg(CltStatistic::SampleMean, PopulationSource::UniformGrid, vec![2], 2000);
        let r = run_clt_experiment(&c).unwrap();
        let ks = r.series("ks").unwrap().y[0];
        // the best a two-point law can do against N(0, 1) is about 0.34
        assert!(ks > 0.3 && ks < 0.4, "{ks}");
    }

    #[test]
    fn labels_and_sizes() {
        assert_eq!(sizes_for(10, 3), vec![4, 3, 3]);
        assert_eq!(labels_for(&[2, 1]), vec![0, 0, 1]);
        assert_eq!(two_arm_split(3, 0.01), (1, 2));
    }
}
