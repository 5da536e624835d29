//! Command-line front end: `simulate`, `tradeoff`, `verify-info` and
//! `directsum`.
//!
//! Every subcommand reads a JSON spec, runs deterministically from the spec's
//! seed and writes its artifacts under `--out`. Exit codes: 0 success, 2 spec
//! error, 3 protocol error, 4 inequality violation.

mod specs;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::codec::CodecChoice;
use crate::error::Error;
use crate::harness::{
    directsum_audit, grid_point_seed, run_trials, tradeoff_sweep_sparse, validate_grid, DirectSumReport, GridPoint,
    MinimaxReport, RiskOptions, StatsSummary, TradeoffPoint, TrialFailure, TrialRecord, TrialRun,
    MAX_FAILURE_FRACTION, MIN_TRIALS,
};
use crate::info::{run_info_suite, InfoSuiteOptions, InfoSuiteReport};
use crate::model::{ExperimentConfig, PriorSpec};
use crate::protocols::{sparse_machine_count, Protocol, ProtocolSpec};

pub use specs::{DirectSumSpec, SimulateSpec, TradeoffSpec, VerifyInfoSpec};

/// Version stamped on every artifact and required of every spec.
pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SPEC: i32 = 2;
pub const EXIT_PROTOCOL: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;

pub const TRIALS_CSV: &str = "trials.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const TRADEOFF_CSV: &str = "tradeoff.csv";
pub const INFO_JSON: &str = "info_report.json";
pub const DIRECTSUM_JSON: &str = "directsum.json";

#[derive(Debug, Parser)]
#[command(name = "distmean", version, about = "Distributed Gaussian mean estimation under communication limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo risk of one protocol: trials.csv and summary.json.
    Simulate(CommonArgs),
    /// Risk and bits of the thresholding protocol across α: tradeoff.csv and summary.json.
    Tradeoff(CommonArgs),
    /// Chain rule, superadditivity and SDPI checks: info_report.json.
    VerifyInfo(CommonArgs),
    /// Direct-sum loss decomposition: directsum.json.
    Directsum(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run specification.
    #[arg(long, value_name = "PATH")]
    spec: PathBuf,
    /// Output directory; overrides the spec's `out`, defaults to the working directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed; overrides the spec's `seed`.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Trial count; overrides the spec's `trials` (random-joint counts for verify-info).
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, value_name = "N", default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
}

/// A failed command: the exit code and the message printed to stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn spec(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_SPEC,
            message: message.into(),
        }
    }

    pub fn protocol(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_PROTOCOL,
            message: message.into(),
        }
    }

    fn from_spec(e: Error) -> Self {
        CliError::spec(e.to_string())
    }

    fn from_run(e: Error) -> Self {
        CliError::protocol(e.to_string())
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::protocol(format!("cannot write {}: {e}", path.display()))
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SPEC } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Tradeoff(a) => tradeoff(a),
        Command::VerifyInfo(a) => verify_info(a),
        Command::Directsum(a) => directsum(a),
    };
    match result {
        Ok(message) => {
            println!("{message}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn output_dir(args: &CommonArgs, spec_out: Option<&PathBuf>) -> Result<PathBuf, CliError> {
    let dir = args
        .out
        .clone()
        .or_else(|| spec_out.cloned())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::spec(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::protocol(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn trials_arg(args: &CommonArgs, spec: Option<usize>) -> Result<usize, CliError> {
    let trials = specs::required(args.trials, spec, "trials")?;
    if trials < MIN_TRIALS {
        return Err(CliError::spec(format!("trials must be at least {MIN_TRIALS}, got {trials}")));
    }
    Ok(trials)
}

fn options(args: &CommonArgs) -> RiskOptions {
    RiskOptions::with_jobs(args.jobs as usize)
}

#[derive(Serialize)]
struct TrialRow<'a> {
    trial: usize,
    seed: u64,
    protocol: &'a str,
    d: usize,
    m: usize,
    n: usize,
    sigma2: f64,
    squared_error: f64,
    bits_used: u64,
    machines_used: usize,
}

fn write_trials_csv<'a>(
    path: &Path,
    config: &ExperimentConfig,
    records: impl Iterator<Item = &'a TrialRecord>,
) -> Result<usize, CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::protocol(e.to_string()))?;
    let mut rows = 0;
    for r in records {
        writer
            .serialize(TrialRow {
                trial: r.trial,
                seed: r.seed,
                protocol: &r.protocol,
                d: config.d,
                m: config.m,
                n: config.n,
                sigma2: config.sigma2,
                squared_error: r.squared_error,
                bits_used: r.bits_used,
                machines_used: r.machines_used,
            })
            .map_err(|e| CliError::protocol(e.to_string()))?;
        rows += 1;
    }
    if rows == 0 {
        // Header only, so downstream readers still see the schema.
        writer
            .write_record([
                "trial",
                "seed",
                "protocol",
                "d",
                "m",
                "n",
                "sigma2",
                "squared_error",
                "bits_used",
                "machines_used",
            ])
            .map_err(|e| CliError::protocol(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))?;
    Ok(rows)
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    schema_version: u32,
    command: &'static str,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    protocol: String,
    protocol_spec: &'a ProtocolSpec,
    config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    prior: Option<&'a PriorSpec>,
    seed: u64,
    trials_requested: usize,
    trials_completed: usize,
    failed_trials: usize,
    failure_fraction: f64,
    bit_budget: u64,
    pool_machines: usize,
    noise_sigma2: f64,
    centralized_risk: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mse: Option<StatsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bits: Option<StatsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    machines: Option<StatsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    minimax: Option<MinimaxReport>,
    failures: Vec<&'a TrialFailure>,
}

fn column(records: &[TrialRecord], f: impl Fn(&TrialRecord) -> f64) -> StatsSummary {
    StatsSummary::from_values(&records.iter().map(f).collect::<Vec<_>>())
}

fn simulate(args: &CommonArgs) -> Result<String, CliError> {
    let spec: SimulateSpec = specs::load(&args.spec)?;
    specs::check_schema(spec.schema_version)?;
    let seed = specs::required(args.seed, spec.seed, "seed")?;
    let trials = trials_arg(args, spec.trials)?;
    specs::validate_config(&spec.config)?;
    let dir = output_dir(args, spec.out.as_ref())?;
    let protocol = spec.protocol.build();
    execute_simulation(&protocol, &spec, seed, trials, &options(args), &dir)
}

/// Runs a validated simulate spec with `protocol` and writes its artifacts.
fn execute_simulation(
    protocol: &dyn Protocol,
    spec: &SimulateSpec,
    seed: u64,
    trials: usize,
    base_options: &RiskOptions,
    dir: &Path,
) -> Result<String, CliError> {
    let config = spec.config;
    let budget = protocol.bit_budget(&config).map_err(CliError::from_spec)?;
    let pool = match spec.pool_machines {
        Some(p) => p,
        None => protocol.machines_required(&config).map_err(CliError::from_spec)?,
    };
    let options = RiskOptions {
        noise_sigma2: spec.noise_sigma2,
        pool_machines: spec.pool_machines,
        ..base_options.clone()
    };

    // One (prior, seed) arm per grid point, or a single arm for the prior.
    let arms: Vec<(PriorSpec, u64)> = match (&spec.prior, &spec.theta_grid) {
        (Some(_), Some(_)) => return Err(CliError::spec("give either `prior` or `theta_grid`, not both")),
        (None, None) => return Err(CliError::spec("missing required field `prior` (or `theta_grid`)")),
        (Some(prior), None) => {
            prior.validate(config.d).map_err(CliError::from_spec)?;
            vec![(prior.clone(), seed)]
        }
        (None, Some(grid)) => {
            validate_grid(grid, &config).map_err(CliError::from_spec)?;
            grid.iter()
                .enumerate()
                .map(|(k, theta)| (PriorSpec::PointMass { theta: theta.clone() }, grid_point_seed(seed, k)))
                .collect()
        }
    };

    let mut runs: Vec<TrialRun> = Vec::with_capacity(arms.len());
    let mut fatal = None;
    for (prior, arm_seed) in &arms {
        let run = run_trials(protocol, prior, &config, trials, *arm_seed, &options).map_err(CliError::from_spec)?;
        let stop = run.fatal.clone();
        runs.push(run);
        if let Some((trial, e)) = stop {
            fatal = Some(format!("trial {trial}: {e}"));
            break;
        }
    }

    let csv_path = dir.join(TRIALS_CSV);
    let rows = write_trials_csv(&csv_path, &config, runs.iter().flat_map(|r| r.records.iter()))?;
    let records: Vec<TrialRecord> = runs.iter().flat_map(|r| r.records.iter().cloned()).collect();
    let failures: Vec<&TrialFailure> = runs.iter().flat_map(|r| r.failures.iter()).collect();
    let attempted = records.len() + failures.len();
    let failure_fraction = if attempted == 0 {
        0.0
    } else {
        failures.len() as f64 / attempted as f64
    };
    let error = fatal.or_else(|| {
        (failure_fraction >= MAX_FAILURE_FRACTION)
            .then(|| format!("{} of {attempted} trials ran out of machines", failures.len()))
    });

    let grid_mode = spec.theta_grid.is_some();
    let minimax = match (&spec.theta_grid, &error) {
        (Some(grid), None) => {
            let points: Vec<GridPoint> = grid
                .iter()
                .zip(&runs)
                .map(|(theta, run)| GridPoint {
                    theta: theta.clone(),
                    mse: column(&run.records, |r| r.squared_error),
                })
                .collect();
            let worst_index = (0..points.len())
                .max_by(|a, b| points[*a].mse.mean.total_cmp(&points[*b].mse.mean))
                .unwrap_or(0);
            Some(MinimaxReport {
                worst: points[worst_index].mse,
                worst_index,
                points,
            })
        }
        _ => None,
    };
    let summary = SimulateSummary {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        status: if error.is_some() { "protocol_error" } else { "ok" },
        error: error.clone(),
        protocol: protocol.name(),
        protocol_spec: &spec.protocol,
        config: &config,
        prior: spec.prior.as_ref(),
        seed,
        trials_requested: trials * arms.len(),
        trials_completed: records.len(),
        failed_trials: failures.len(),
        failure_fraction,
        bit_budget: budget,
        pool_machines: pool,
        noise_sigma2: spec.noise_sigma2.unwrap_or(config.sigma2),
        centralized_risk: config.centralized_risk(),
        mse: (!grid_mode).then(|| column(&records, |r| r.squared_error)),
        bits: (!grid_mode).then(|| column(&records, |r| r.bits_used as f64)),
        machines: (!grid_mode).then(|| column(&records, |r| r.machines_used as f64)),
        minimax,
        failures,
    };
    let summary_path = dir.join(SUMMARY_JSON);
    write_json(&summary_path, &summary)?;
    match error {
        Some(e) => Err(CliError::protocol(format!(
            "{e}; kept {rows} completed trials in {}",
            csv_path.display()
        ))),
        None => Ok(format!(
            "wrote {rows} trials to {} and {}",
            csv_path.display(),
            summary_path.display()
        )),
    }
}

#[derive(Serialize)]
struct TradeoffRow {
    alpha: f64,
    machines: usize,
    bits: u64,
    mse: f64,
    mse_stderr: f64,
    mse_ci_low: f64,
    mse_ci_high: f64,
    bits_times_mse: f64,
}

#[derive(Serialize)]
struct TradeoffSummary<'a> {
    schema_version: u32,
    command: &'static str,
    config: &'a ExperimentConfig,
    s: usize,
    l_const: f64,
    codec: CodecChoice,
    seed: u64,
    trials: usize,
    points: &'a [TradeoffPoint],
}

fn tradeoff(args: &CommonArgs) -> Result<String, CliError> {
    let spec: TradeoffSpec = specs::load(&args.spec)?;
    specs::check_schema(spec.schema_version)?;
    let seed = specs::required(args.seed, spec.seed, "seed")?;
    let trials = trials_arg(args, spec.trials)?;
    specs::validate_config(&spec.config)?;
    if spec.alphas.is_empty() {
        return Err(CliError::spec("`alphas` must list at least one value"));
    }
    for alpha in &spec.alphas {
        sparse_machine_count(&spec.config, spec.s, *alpha, spec.l_const).map_err(CliError::from_spec)?;
    }
    spec.codec.resolve(&spec.config).map_err(CliError::from_spec)?;

    let dir = output_dir(args, spec.out.as_ref())?;
    let points = tradeoff_sweep_sparse(
        &spec.config,
        spec.s,
        &spec.alphas,
        spec.l_const,
        spec.codec,
        trials,
        seed,
        &options(args),
    )
    .map_err(CliError::from_run)?;

    let csv_path = dir.join(TRADEOFF_CSV);
    let mut writer = csv::Writer::from_path(&csv_path).map_err(|e| CliError::protocol(e.to_string()))?;
    for p in &points {
        writer
            .serialize(TradeoffRow {
                alpha: p.alpha,
                machines: p.machines,
                bits: p.bits,
                mse: p.mse.mean,
                mse_stderr: p.mse.stderr,
                mse_ci_low: p.mse.ci95.0,
                mse_ci_high: p.mse.ci95.1,
                bits_times_mse: p.product,
            })
            .map_err(|e| CliError::protocol(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::io(&csv_path, e))?;
    let summary_path = dir.join(SUMMARY_JSON);
    write_json(
        &summary_path,
        &TradeoffSummary {
            schema_version: SCHEMA_VERSION,
            command: "tradeoff",
            config: &spec.config,
            s: spec.s,
            l_const: spec.l_const,
            codec: spec.codec,
            seed,
            trials,
            points: &points,
        },
    )?;
    Ok(format!(
        "wrote {} points to {} and {}",
        points.len(),
        csv_path.display(),
        summary_path.display()
    ))
}

#[derive(Serialize)]
struct InfoArtifact<'a> {
    schema_version: u32,
    command: &'static str,
    status: &'static str,
    violations: &'a [String],
    #[serde(flatten)]
    report: &'a InfoSuiteReport,
}

fn verify_info(args: &CommonArgs) -> Result<String, CliError> {
    let spec: VerifyInfoSpec = specs::load(&args.spec)?;
    specs::check_schema(spec.schema_version)?;
    let seed = specs::required(args.seed, spec.seed, "seed")?;
    let options = InfoSuiteOptions {
        seed,
        chain_rule_instances: args.trials.unwrap_or(spec.chain_rule_instances),
        superadditivity_instances: args.trials.unwrap_or(spec.superadditivity_instances),
        quantizers_per_setting: spec.quantizers_per_setting,
        settings: spec.settings,
        sigma2: spec.sigma2,
        joints: spec.joints,
    };
    let dir = output_dir(args, spec.out.as_ref())?;
    // Every error the suite raises is about its inputs: tables, grids, settings.
    let report = run_info_suite(&options).map_err(CliError::from_spec)?;
    let violations = report.violations();
    let path = dir.join(INFO_JSON);
    write_json(
        &path,
        &InfoArtifact {
            schema_version: SCHEMA_VERSION,
            command: "verify-info",
            status: if violations.is_empty() { "ok" } else { "violation" },
            violations: &violations,
            report: &report,
        },
    )?;
    if violations.is_empty() {
        Ok(format!("all information checks hold; report in {}", path.display()))
    } else {
        Err(CliError {
            code: EXIT_VIOLATION,
            message: format!("{} violations: {}", violations.len(), violations.join("; ")),
        })
    }
}

#[derive(Serialize)]
struct DirectSumArtifact<'a> {
    schema_version: u32,
    command: &'static str,
    inner_spec: &'a ProtocolSpec,
    prior: &'a PriorSpec,
    seed: u64,
    #[serde(flatten)]
    report: &'a DirectSumReport,
}

fn directsum(args: &CommonArgs) -> Result<String, CliError> {
    let spec: DirectSumSpec = specs::load(&args.spec)?;
    specs::check_schema(spec.schema_version)?;
    let seed = specs::required(args.seed, spec.seed, "seed")?;
    let trials = trials_arg(args, spec.trials)?;
    specs::validate_config(&spec.config)?;
    spec.prior.validate(spec.config.d).map_err(CliError::from_spec)?;
    if !spec.prior.is_product() {
        return Err(CliError::spec("directsum needs a product prior"));
    }
    let inner = spec.inner.build();
    inner.bit_budget(&spec.config).map_err(CliError::from_spec)?;
    inner.machines_required(&spec.config).map_err(CliError::from_spec)?;

    let dir = output_dir(args, spec.out.as_ref())?;
    let report =
        directsum_audit(inner, &spec.prior, &spec.config, trials, seed, &options(args)).map_err(CliError::from_run)?;
    let path = dir.join(DIRECTSUM_JSON);
    write_json(
        &path,
        &DirectSumArtifact {
            schema_version: SCHEMA_VERSION,
            command: "directsum",
            inner_spec: &spec.inner,
            prior: &spec.prior,
            seed,
            report: &report,
        },
    )?;
    Ok(format!(
        "ratio {:.4}, best coordinate {}; report in {}",
        report.ratio,
        report.best_coordinate,
        path.display()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParameterVector, SampleSet};
    use crate::protocols::{ProtocolResult, SimultaneousMean};
    use crate::rng::RandomnessModel;
    use crate::transcript::Transcript;
    use crate::Result;

    /// Averaging that breaks down on a machine mean above 1.5.
    struct Brittle(SimultaneousMean);

    impl Protocol for Brittle {
        fn name(&self) -> String {
            "brittle".into()
        }
        fn machines_required(&self, config: &ExperimentConfig) -> Result<usize> {
            self.0.machines_required(config)
        }
        fn bit_budget(&self, config: &ExperimentConfig) -> Result<u64> {
            self.0.bit_budget(config)
        }
        fn run(&self, config: &ExperimentConfig, data: &SampleSet, rng: &RandomnessModel) -> Result<ProtocolResult> {
            if data.coordinate_mean(0, 0) > 1.5 {
                return Err(Error::Transcript("injected failure".into()));
            }
            self.0.run(config, data, rng)
        }
        fn estimate_from_transcript(&self, config: &ExperimentConfig, transcript: &Transcript) -> Result<ParameterVector> {
            self.0.estimate_from_transcript(config, transcript)
        }
    }

    fn spec() -> SimulateSpec {
        serde_json::from_str(
            r#"{"schema_version":1,"protocol":{"kind":"averaging"},"config":{"d":1,"m":4,"n":1,"sigma2":1.0},
                "prior":{"kind":"uniform_interval","lo":-1.0,"hi":1.0},"trials":100,"seed":1}"#,
        )
        .unwrap()
    }

    #[test]
    fn protocol_error_keeps_completed_trials() {
        let dir = tempfile::tempdir().unwrap();
        let protocol = Brittle(SimultaneousMean::new(CodecChoice::Default));
        let err = execute_simulation(&protocol, &spec(), 1, 100, &RiskOptions::default(), dir.path()).unwrap_err();
        assert_eq!(err.code, EXIT_PROTOCOL);
        let csv = fs::read_to_string(dir.path().join(TRIALS_CSV)).unwrap();
        let rows = csv.lines().count() - 1;
        assert!(rows > 0 && rows < 100, "{rows} rows kept");
        // Rows are the trials before the failing one, in order.
        for (k, line) in csv.lines().skip(1).enumerate() {
            assert!(line.starts_with(&format!("{k},")));
        }
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_JSON)).unwrap()).unwrap();
        assert_eq!(summary["status"], "protocol_error");
        assert_eq!(summary["trials_completed"], rows);
        assert!(err.message.contains(&format!("trial {rows}:")), "{}", err.message);
    }

    #[test]
    fn healthy_protocol_writes_every_trial() {
        let dir = tempfile::tempdir().unwrap();
        let protocol = SimultaneousMean::new(CodecChoice::Default);
        execute_simulation(&protocol, &spec(), 1, 100, &RiskOptions::default(), dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join(TRIALS_CSV)).unwrap();
        assert_eq!(csv.lines().count(), 101);
    }
}
