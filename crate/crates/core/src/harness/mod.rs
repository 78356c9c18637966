//! Verification campaigns.
//!
//! An [`ExperimentConfig`] names one campaign (exhaustive-enumeration oracle,
//! CLT convergence, or coverage) and a seed. Running it yields a [`Report`]
//! whose metrics each carry a tolerance and a verdict. Reports are
//! deterministic in the config except for `wall_clock_seconds`, and serial
//! and parallel runs agree exactly.

pub mod clt;
pub mod coverage;
pub mod ingest;
pub mod oracle;
pub mod synth;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clt::{run_clt_experiment, CltStatistic};
pub use coverage::run_coverage_experiment;
pub use ingest::{export_csv, ingest_csv, Ingested, Schema};
pub use oracle::run_oracle_suite;
pub use synth::{ks_distance, PopulationSource, TableSource};

pub const SCHEMA_VERSION: u32 = 1;

/// A campaign plus the knobs shared by all campaigns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
    /// Enumeration cap; the environment default applies when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_reps() -> usize {
    20_000
}

fn default_alpha() -> f64 {
    0.05
}

fn default_parallel() -> bool {
    true
}

fn default_ladder() -> Vec<usize> {
    vec![16, 64, 256, 1024]
}

fn default_fraction() -> f64 {
    0.5
}

fn default_arms() -> usize {
    3
}

fn default_covariates() -> usize {
    2
}

fn default_factors() -> usize {
    2
}

fn default_coverage_n() -> usize {
    200
}

fn default_alpha_ladder() -> Vec<f64> {
    vec![0.01, 0.05, 0.1, 0.2, 0.5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    /// Bundled exhaustive-enumeration instances.
    Oracle,
    Clt {
        statistic: CltStatistic,
        #[serde(default = "ranks_source")]
        population: PopulationSource,
        #[serde(default = "default_ladder")]
        ladder: Vec<usize>,
        /// Share of units in the first arm for two-arm statistics.
        #[serde(default = "default_fraction")]
        fraction: f64,
        /// Arm count for Kruskal-Wallis.
        #[serde(default = "default_arms")]
        arms: usize,
        /// Covariate count for rerandomization.
        #[serde(default = "default_covariates")]
        covariates: usize,
        /// Factor count for the factorial statistic.
        #[serde(default = "default_factors")]
        factors: usize,
    },
    Coverage {
        table: TableSource,
        #[serde(default = "default_coverage_n")]
        n: usize,
        #[serde(default = "default_fraction")]
        fraction: f64,
        #[serde(default = "default_alpha_ladder")]
        alpha_ladder: Vec<f64>,
    },
}

fn ranks_source() -> PopulationSource {
    PopulationSource::Ranks
}

/// Declared tolerances with their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Enumerated moments against closed forms.
    pub oracle: f64,
    /// Indicator covariances against the four-case formula.
    pub indicator: f64,
    /// Upper bound on the KS distance at the last ladder rung.
    pub ks_max: f64,
    /// Allowed increase of the KS distance between consecutive rungs.
    pub ks_slack: f64,
    /// Coverage shortfall allowed below `1 - alpha`.
    pub coverage_slack: f64,
    /// Rerandomization acceptance rate against its target.
    pub acceptance_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            oracle: 1e-10,
            indicator: 1e-12,
            ks_max: 0.02,
            ks_slack: 0.0,
            coverage_slack: 0.01,
            acceptance_slack: 0.02,
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        Self {
            experiment,
            seed,
            reps: default_reps(),
            alpha: default_alpha(),
            tolerances: Tolerances::default(),
            parallel: true,
            cap: None,
            output: None,
        }
    }

    /// Preset campaigns addressed by name.
    pub fn suite(name: &str, seed: u64) -> Result<Self> {
        let clt = |statistic, ladder: Vec<usize>| Experiment::Clt {
            statistic,
            population: PopulationSource::Ranks,
            ladder,
            fraction: default_fraction(),
            arms: default_arms(),
            covariates: default_covariates(),
            factors: default_factors(),
        };
        let experiment = match name {
            "oracle" => Experiment::Oracle,
            "clt" => clt(CltStatistic::SampleMean, default_ladder()),
            "kruskal_wallis" => clt(CltStatistic::KruskalWallis, default_ladder()),
            "neyman" => clt(CltStatistic::Neyman, default_ladder()),
            "rerandomization" => clt(CltStatistic::Rerandomization, vec![256]),
            "factorial" => clt(CltStatistic::FactorialNull, vec![16, 64, 256, 1024]),
            "coverage" => Experiment::Coverage {
                table: TableSource::Additive { tau: 1.0 },
                n: default_coverage_n(),
                fraction: default_fraction(),
                alpha_ladder: default_alpha_ladder(),
            },
            "coverage_heterogeneous" => Experiment::Coverage {
                table: TableSource::Heterogeneous { slope: 3.0, shift: 1.0 },
                n: default_coverage_n(),
                fraction: default_fraction(),
                alpha_ladder: default_alpha_ladder(),
            },
            other => {
                return Err(Error::Argument(format!(
                    "unknown suite `{other}`; expected one of {}",
                    SUITES.join(", ")
                )))
            }
        };
        let mut cfg = Self::new(experiment, seed);
        match name {
            "coverage" | "coverage_heterogeneous" => cfg.reps = 10_000,
            "kruskal_wallis" | "neyman" | "factorial" => cfg.tolerances.ks_slack = 0.01,
            _ => {}
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Argument("reps must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Argument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        match &self.experiment {
            Experiment::Oracle => {}
            Experiment::Clt {
                population,
                ladder,
                fraction,
                arms,
                covariates,
                factors,
                ..
            } => {
                if ladder.is_empty() || ladder.iter().any(|&n| n < 2) {
                    return Err(Error::Argument("ladder sizes must be at least 2".into()));
                }
                population.validate()?;
                check_fraction(*fraction)?;
                if *arms < 2 || *covariates == 0 || *factors == 0 {
                    return Err(Error::Argument(
                        "need at least 2 arms, 1 covariate and 1 factor".into(),
                    ));
                }
            }
            Experiment::Coverage {
                n,
                fraction,
                alpha_ladder,
                ..
            } => {
                if *n < 4 {
                    return Err(Error::Argument("coverage tables need at least 4 units".into()));
                }
                check_fraction(*fraction)?;
                if alpha_ladder.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
                    return Err(Error::Argument("alpha ladder entries must lie in (0, 1)".into()));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn enum_cap(&self) -> u128 {
        self.cap.map(u128::from).unwrap_or_else(crate::designs::enum_cap)
    }
}

pub const SUITES: [&str; 8] = [
    "oracle",
    "clt",
    "kruskal_wallis",
    "neyman",
    "rerandomization",
    "factorial",
    "coverage",
    "coverage_heterogeneous",
];

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("fraction must lie in (0, 1), got {f}")))
    }
}

/// How a metric value is judged against its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    /// `value <= tolerance`.
    AtMost,
    /// `value < tolerance`.
    Below,
    /// `value >= target - tolerance`.
    AtLeast { target: f64 },
    /// `|value - target| <= tolerance`.
    Near { target: f64 },
    /// A boolean property; `value` is 1 or 0.
    Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    /// Slug of the result this metric checks.
    pub anchor: String,
    pub value: f64,
    pub tolerance: f64,
    #[serde(flatten)]
    pub rule: Rule,
    pub pass: bool,
}

impl Metric {
    pub fn new(name: &str, anchor: &str, value: f64, tolerance: f64, rule: Rule) -> Self {
        let pass = match rule {
            Rule::AtMost => value <= tolerance,
            Rule::Below => value < tolerance,
            Rule::AtLeast { target } => value >= target - tolerance,
            Rule::Near { target } => (value - target).abs() <= tolerance,
            Rule::Holds => value == 1.0,
        };
        Self {
            name: name.into(),
            anchor: anchor.into(),
            value,
            tolerance,
            rule,
            pass,
        }
    }

    /// Maximum absolute discrepancy judged against `tolerance`.
    pub fn discrepancy(name: &str, anchor: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, anchor, value, tolerance, Rule::AtMost)
    }

    pub fn holds(name: &str, anchor: &str, ok: bool) -> Self {
        Self::new(name, anchor, if ok { 1.0 } else { 0.0 }, 0.0, Rule::Holds)
    }
}

/// Arrays for external plotting, e.g. KS distance against `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub metrics: Vec<Metric>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<Series>,
    pub pass: bool,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub(crate) fn finish(
        config: &ExperimentConfig,
        metrics: Vec<Metric>,
        series: Vec<Series>,
        started: Instant,
    ) -> Self {
        let pass = !metrics.is_empty() && metrics.iter().all(|m| m.pass);
        Self {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            metrics,
            series,
            pass,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Run whichever campaign `config` names.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    match config.experiment {
        Experiment::Oracle => run_oracle_suite(config),
        Experiment::Clt { .. } => run_clt_experiment(config),
        Experiment::Coverage { .. } => run_coverage_experiment(config),
    }
}

/// `f(0..reps)` in replicate order, on the rayon pool when `parallel`.
pub(crate) fn replicate_map<T, F>(reps: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    if parallel {
        (0..reps as u64).into_par_iter().map(f).collect()
    } else {
        (0..reps as u64).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_rules() {
        assert!(Metric::discrepancy("d", "a", 1e-11, 1e-10).pass);
        assert!(!Metric::discrepancy("d", "a", f64::NAN, 1e-10).pass);
        assert!(!Metric::new("k", "a", 0.02, 0.02, Rule::Below).pass);
        assert!(Metric::new("c", "a", 0.945, 0.01, Rule::AtLeast { target: 0.95 }).pass);
        assert!(!Metric::new("c", "a", 0.93, 0.01, Rule::Near { target: 0.95 }).pass);
        assert!(!Metric::holds("h", "a", false).pass);
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"kind":"clt","statistic":"sample_mean","seed":3}"#).unwrap();
        assert_eq!(cfg.reps, 20_000);
        assert_eq!(cfg.tolerances, Tolerances::default());
        match &cfg.experiment {
            Experiment::Clt { ladder, population, .. } => {
                assert_eq!(ladder, &vec![16, 64, 256, 1024]);
                assert_eq!(population, &PopulationSource::Ranks);
            }
            _ => panic!("wrong kind"),
        }
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"kind":"oracle"}"#).is_err());
    }

    #[test]
    fn suites_resolve_and_validate() {
        for s in SUITES {
            ExperimentConfig::suite(s, 1).unwrap().validate().unwrap();
        }
        assert!(ExperimentConfig::suite("nope", 1).is_err());
        let mut cfg = ExperimentConfig::suite("clt", 1).unwrap();
        cfg.reps = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn replicate_map_orders() {
        let a = replicate_map(100, true, |b| b * b);
        let b = replicate_map(100, false, |b| b * b);
        assert_eq!(a, b);
    }
}
