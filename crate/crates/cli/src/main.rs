//! `finpop`: estimates, randomization tests, instrument confidence sets and
//! verification campaigns from the command line.
//!
//! Exit status is 0 on success, 1 on invalid input or usage, and 2 when a
//! verification campaign fails one of its declared tolerances.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use finpop_core::designs::{draw_partition_with, factorial_contrasts, DesignSpec};
use finpop_core::estimators::{
    cluster_adjusted, cluster_totals, estimate, factorial_effects, factorial_null_moments,
    fit_ls_coefs, regression_adjusted, wald_region,
};
use finpop_core::harness::{self, ingest_csv, ExperimentConfig, Report, Schema, SUITES};
use finpop_core::ivconf::iv_confidence;
use finpop_core::popstats::{pop_moments, ContrastSpec, Population};
use finpop_core::randtests::{
    exact_randomization_pvalue, hypergeom_test, joint_test, kruskal_wallis, mc_randomization_pvalue,
    rank_normal_pvalue, HypergeomMode, JointMode, JointTestSpec, SharpNullStat, StatKind,
};
use finpop_core::rng::seeded;
use finpop_core::{AdjustmentCoefs, Alternative, Error, ObservedData, TiePolicy};

#[derive(Parser)]
#[command(name = "finpop", version, about = "Design-based randomization inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Point estimates, covariance estimate and Wald region from arm data.
    Estimate(EstimateArgs),
    /// Randomization test of the sharp null.
    Test(TestArgs),
    /// Confidence set for the ratio of effects from `z,d,y` data.
    IvCi(IvArgs),
    /// Factorial effects from data with arms `1..2^K`.
    Factorial(FactorialArgs),
    /// Draw assignments, or run an experiment config.
    Simulate(SimulateArgs),
    /// Run a verification suite; exit 2 when any metric fails.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateMethod {
    Neyman,
    Regression,
    Cluster,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "neyman")]
    method: EstimateMethod,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stat {
    DiffInMeans,
    Wilcoxon,
    KruskalWallis,
    MaxRank,
    RangeRank,
    Dose,
    Joint,
    Hypergeom,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestMethodArg {
    Exact,
    MonteCarlo,
    Normal,
}

#[derive(Clone, Copy, ValueEnum)]
enum AltArg {
    Greater,
    Less,
    TwoSided,
}

#[derive(Clone, Copy, ValueEnum)]
enum TiesArg {
    Strict,
    Midrank,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "diff-in-means")]
    stat: Stat,
    #[arg(long, value_enum, default_value = "monte-carlo")]
    method: TestMethodArg,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    alternative: Option<AltArg>,
    #[arg(long, value_enum, default_value = "strict")]
    ties: TiesArg,
    /// Comma-separated doses, one per arm, for `--stat dose`.
    #[arg(long, value_delimiter = ',')]
    doses: Vec<f64>,
    /// Use the first two outcome columns for `--stat joint`.
    #[arg(long)]
    multi_outcome: bool,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Enumeration cap for `--method exact`.
    #[arg(long)]
    cap: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct IvArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct FactorialArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config (JSON).
    #[arg(long, conflicts_with = "design")]
    config: Option<PathBuf>,
    /// Comma-separated arm sizes to draw complete randomizations from.
    #[arg(long, value_delimiter = ',')]
    design: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name, or `all`.
    #[arg(long, default_value = "oracle")]
    suite: String,
    /// Experiment config (JSON) used instead of a named suite.
    #[arg(long, conflicts_with = "suite")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    cap: Option<u64>,
    #[command(flatten)]
    common: Common,
}

enum Failure {
    Usage(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn emit(value: &impl serde::Serialize, out: Option<&Path>) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)? + "\n";
    match out {
        Some(path) => std::fs::write(path, text).map_err(Error::from)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn observed(path: &Path) -> Result<ObservedData, Failure> {
    Ok(ingest_csv(path, Schema::Arms)?.into_observed()?)
}

fn alternative(arg: Option<AltArg>, default: Alternative) -> Alternative {
    match arg {
        Some(AltArg::Greater) => Alternative::Greater,
        Some(AltArg::Less) => Alternative::Less,
        Some(AltArg::TwoSided) => Alternative::TwoSided,
        None => default,
    }
}

fn run_estimate(args: EstimateArgs) -> CliResult {
    let data = observed(&args.data)?;
    let report = match args.method {
        EstimateMethod::Neyman => {
            let contrast = ContrastSpec::versus_first(data.n_arms(), data.dim())?;
            estimate(&data, &contrast)?
        }
        EstimateMethod::Regression => {
            let coefs = if data.x().is_some() {
                fit_ls_coefs(&data)?
            } else {
                AdjustmentCoefs::zero(0)
            };
            regression_adjusted(&data, &coefs)?
        }
        EstimateMethod::Cluster => {
            let totals = cluster_totals(&data)?;
            let coefs = match &totals.x {
                Some(x) => {
                    let t = ObservedData::scalar(totals.assignment.clone(), &totals.y)?
                        .with_covariates(x.clone())?;
                    fit_ls_coefs(&t)?
                }
                None => AdjustmentCoefs::zero(0),
            };
            cluster_adjusted(&totals.y, totals.x.as_ref(), &totals.assignment, data.n_units(), &coefs)?
        }
    };
    let region = match wald_region(&report, args.alpha) {
        Ok(r) => json!(r),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let interval = wald_region(&report, args.alpha)
        .ok()
        .and_then(|r| r.interval())
        .map(|(lo, hi)| json!([lo, hi]));
    emit(
        &json!({
            "estimate": report,
            "standard_errors": report.std_errors(),
            "wald_region": region,
            "interval": interval,
        }),
        args.common.out.as_deref(),
    )
}

fn run_test(args: TestArgs) -> CliResult {
    let data = observed(&args.data)?;
    let ties = match args.ties {
        TiesArg::Strict => TiePolicy::Strict,
        TiesArg::Midrank => TiePolicy::Midrank,
    };
    let kind = match args.stat {
        Stat::DiffInMeans => StatKind::DiffInMeans,
        Stat::Wilcoxon => StatKind::Wilcoxon,
        Stat::KruskalWallis => StatKind::KruskalWallis,
        Stat::MaxRank => StatKind::MaxRank,
        Stat::RangeRank => StatKind::RangeRank,
        Stat::Dose => StatKind::Dose { doses: args.doses.clone() },
        Stat::Joint => {
            let spec = JointTestSpec {
                alpha: args.alpha,
                mode: if args.multi_outcome {
                    JointMode::MultiOutcome
                } else {
                    JointMode::SameOutcome
                },
                ties,
            };
            return emit(&joint_test(&data, &spec)?, args.common.out.as_deref());
        }
        Stat::Hypergeom => {
            let mode = match args.method {
                TestMethodArg::Normal => HypergeomMode::Normal,
                _ => HypergeomMode::Exact,
            };
            let alt = alternative(args.alternative, Alternative::Greater);
            return emit(&hypergeom_test(&data, mode, alt)?, args.common.out.as_deref());
        }
    };
    let alt = alternative(args.alternative, kind.default_alternative());
    let result = match args.method {
        TestMethodArg::Normal => match kind {
            StatKind::KruskalWallis => kruskal_wallis(&data, ties)?,
            StatKind::DiffInMeans => {
                return Err(Failure::Usage(
                    "normal approximation is available for rank statistics; use exact or monte-carlo".into(),
                ))
            }
            _ => rank_normal_pvalue(&kind, &data, ties, args.reps, args.seed, alt)?,
        },
        TestMethodArg::Exact => {
            let stat = SharpNullStat::new(kind, &data, ties)?;
            let cap = args.cap.map(u128::from).unwrap_or_else(finpop_core::designs::enum_cap);
            exact_randomization_pvalue(|l| stat.eval(l), data.assignment(), cap, alt)?
        }
        TestMethodArg::MonteCarlo => {
            let stat = SharpNullStat::new(kind, &data, ties)?;
            mc_randomization_pvalue(|l| stat.eval(l), data.assignment(), args.reps, args.seed, alt)?
        }
    };
    emit(&result, args.common.out.as_deref())
}

fn run_iv(args: IvArgs) -> CliResult {
    let data = ingest_csv(&args.data, Schema::Instrument)?.into_instrument()?;
    let (set, summary) = iv_confidence(&data, args.alpha)?;
    emit(
        &json!({
            "kind": set.kind(),
            "endpoints": set.endpoints(),
            "eta": summary.eta,
            "summary": summary,
        }),
        args.common.out.as_deref(),
    )
}

fn run_factorial(args: FactorialArgs) -> CliResult {
    let data = observed(&args.data)?;
    let q = data.n_arms();
    if !q.is_power_of_two() || q < 2 {
        return Err(Failure::Usage(format!("{q} arms is not a 2^K design")));
    }
    let spec = factorial_contrasts(q.trailing_zeros() as usize)?;
    let effects = factorial_effects(&data, &spec)?;
    let v_n = pop_moments(&Population::new(data.y_scalar().to_vec())?).variance;
    let null = factorial_null_moments(v_n, &data.arm_sizes(), &spec)?;
    let z: Vec<f64> = effects
        .iter()
        .zip(&null.variances)
        .map(|(e, v)| e / v.sqrt())
        .collect();
    emit(
        &json!({
            "effect_names": spec.effect_names(),
            "effects": effects.as_slice(),
            "sizes": data.arm_sizes(),
            "null_moments": null,
            "null_z": z,
        }),
        args.common.out.as_deref(),
    )
}

fn read_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(Error::from)?;
    cfg.validate()?;
    Ok(cfg)
}

fn report_result(report: &Report, out: Option<&Path>) -> CliResult {
    emit(report, out)?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Verification(failed_metrics(report)))
    }
}

fn failed_metrics(report: &Report) -> String {
    report
        .metrics
        .iter()
        .filter(|m| !m.pass)
        .map(|m| format!("{} = {} (tolerance {})", m.name, m.value, m.tolerance))
        .collect::<Vec<_>>()
        .join("; ")
}

fn run_simulate(args: SimulateArgs) -> CliResult {
    if let Some(path) = &args.config {
        let cfg = read_config(path)?;
        let report = harness::run(&cfg)?;
        let out = args.common.out.as_deref().or(cfg.output.as_deref());
        return report_result(&report, out);
    }
    if args.design.is_empty() {
        return Err(Failure::Usage("simulate needs --config or --design".into()));
    }
    let spec = DesignSpec::new(args.design.clone())?;
    let mut rng = seeded(args.seed);
    let draws: Vec<Vec<usize>> = (0..args.reps)
        .map(|_| draw_partition_with(&spec, &mut rng).one_based())
        .collect();
    emit(
        &json!({ "sizes": spec.sizes(), "seed": args.seed, "assignments": draws }),
        args.common.out.as_deref(),
    )
}

fn configure(mut cfg: ExperimentConfig, args: &VerifyArgs) -> ExperimentConfig {
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.reps = reps;
    }
    if let Some(alpha) = args.alpha {
        cfg.alpha = alpha;
    }
    if args.cap.is_some() {
        cfg.cap = args.cap;
    }
    cfg
}

fn run_verify(args: VerifyArgs) -> CliResult {
    let out = args.common.out.as_deref();
    if let Some(path) = &args.config {
        let cfg = configure(read_config(path)?, &args);
        cfg.validate()?;
        return report_result(&harness::run(&cfg)?, out.or(cfg.output.as_deref()));
    }
    let seed = args
        .seed
        .ok_or_else(|| Failure::Usage("verify needs --seed (or --config)".into()))?;
    let names: Vec<&str> = if args.suite == "all" {
        SUITES.to_vec()
    } else {
        vec![args.suite.as_str()]
    };
    let mut reports = Vec::new();
    for name in names {
        let cfg = configure(ExperimentConfig::suite(name, seed)?, &args);
        cfg.validate()?;
        reports.push(harness::run(&cfg)?);
    }
    if reports.len() == 1 {
        return report_result(&reports[0], out);
    }
    let pass = reports.iter().all(|r| r.pass);
    emit(
        &json!({
            "schema_version": harness::SCHEMA_VERSION,
            "reports": reports,
            "pass": pass,
        }),
        out,
    )?;
    if pass {
        Ok(())
    } else {
        let failed: Vec<String> = reports.iter().filter(|r| !r.pass).map(failed_metrics).collect();
        Err(Failure::Verification(failed.join("; ")))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => run_estimate(a),
        Command::Test(a) => run_test(a),
        Command::IvCi(a) => run_iv(a),
        Command::Factorial(a) => run_factorial(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Verify(a) => run_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(2)
        }
    }
}
