//! Coverage of Neyman intervals and Wald regions over random assignments.

use std::time::Instant;

use super::{replicate_map, Experiment, ExperimentConfig, Metric, Report, Rule, Series};
use crate::designs::DesignSpec;
use crate::distlib::std_normal_quantile;
use crate::error::{Error, Result};
use crate::estimators::{estimate, neyman_ci, tau_true, wald_region, ObservedData};
use crate::popstats::ContrastSpec;
use crate::rng::replicate_rng;

struct Draw {
    point: f64,
    se: f64,
    neyman: bool,
    wald: bool,
}

pub fn run_coverage_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let started = Instant::now();
    let Experiment::Coverage {
        table,
        n,
        fraction,
        alpha_ladder,
    } = &config.experiment
    else {
        return Err(Error::Argument("not a coverage experiment".into()));
    };
    let n = *n;
    let n1 = ((fraction * n as f64).round() as usize).clamp(2, n - 2);
    let pot = table.generate(n)?;
    let contrast = ContrastSpec::scalar(&[1.0, -1.0])?;
    let tau = tau_true(&pot, &contrast)?[0];
    let base = DesignSpec::two_arm(n1, n - n1)?;
    let alpha = config.alpha;
    let seed = config.seed;

    let draws = replicate_map(config.reps, config.parallel, |b| -> Result<Draw> {
        let mut rng = replicate_rng(seed, b);
        let assignment = crate::designs::draw_partition_with(&base, &mut rng);
        let data = ObservedData::observe(&pot, &assignment)?;
        let (lo, hi) = neyman_ci(&data, alpha)?;
        let report = estimate(&data, &contrast)?;
        let wald = wald_region(&report, alpha)?.contains(&[tau])?;
        Ok(Draw {
            point: report.point[0],
            se: report.std_errors()[0],
            neyman: lo <= tau && tau <= hi,
            wald,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let reps = draws.len() as f64;
    let neyman = draws.iter().filter(|d| d.neyman).count() as f64 / reps;
    let wald = draws.iter().filter(|d| d.wald).count() as f64 / reps;
    let target = 1.0 - alpha;
    let slack = config.tolerances.coverage_slack;
    let anchor = "neyman-interval-coverage";
    let mut metrics = vec![
        Metric::new("neyman_coverage", anchor, neyman, slack, Rule::AtLeast { target }),
        Metric::new("wald_coverage", "wald-region-coverage", wald, slack, Rule::AtLeast { target }),
    ];
    if table.is_additive() {
        metrics.push(Metric::new(
            "neyman_coverage_additive",
            anchor,
            neyman,
            slack,
            Rule::Near { target },
        ));
    }

    let mut ladder = alpha_ladder.clone();
    ladder.sort_by(f64::total_cmp);
    let rates = ladder
        .iter()
        .map(|&a| {
            let z = std_normal_quantile(1.0 - a / 2.0)?;
            Ok(draws.iter().filter(|d| (d.point - tau).abs() <= z * d.se).count() as f64 / reps)
        })
        .collect::<Result<Vec<f64>>>()?;
    metrics.push(Metric::holds(
        "coverage_monotone_in_alpha",
        "region-nesting",
        rates.windows(2).all(|w| w[1] <= w[0]),
    ));
    let series = vec![Series {
        name: "coverage".into(),
        x_label: "alpha".into(),
        x: ladder,
        y: rates,
    }];
    Ok(Report::finish(config, metrics, series, started))
}
