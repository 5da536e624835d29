//! Monte Carlo measurement of risk and communication, and the audits built
//! on top of it.
//!
//! Trial `t` of a run with master seed `s` uses the randomness model keyed by
//! `derive_key(s, Trial, t)`: the nature stream draws θ, the private streams
//! draw the data. Trials can therefore run on any number of threads while
//! every reduction walks them in index order.

mod audits;
mod stats;

use rayon::prelude::*;
use serde::Serialize;

pub use audits::{
    clopper_pearson_upper, directsum_audit, expected_bisection_rounds, failure_rate_bisection, grid_point_seed,
    validate_grid, minimax_risk_over_grid, tradeoff_sweep_sparse,
    DirectSumReport, FailureRateReport, GridPoint, MinimaxReport, RoundFailure, TradeoffPoint, MIN_CONDITIONING,
};
pub use stats::StatsSummary;

use crate::error::{Error, Result};
use crate::model::{draw_parameter, ExperimentConfig, ParameterVector, PriorSpec, SampleSet};
use crate::protocols::{Protocol, RoundTrace};
use crate::rng::{derive_key, Domain, RandomnessModel};

pub const MIN_TRIALS: usize = 100;
/// Largest fraction of failed trials an experiment may report.
pub const MAX_FAILURE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct RiskOptions {
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
    /// Overrides the data noise variance while the protocol keeps using
    /// `config.sigma2`.
    pub noise_sigma2: Option<f64>,
    /// Overrides the number of machines that receive data.
    pub pool_machines: Option<usize>,
    /// Keep per-round bisection traces in the records.
    pub keep_rounds: bool,
}

impl Default for RiskOptions {
    fn default() -> Self {
        RiskOptions {
            jobs: 1,
            noise_sigma2: None,
            pool_machines: None,
            keep_rounds: false,
        }
    }
}

impl RiskOptions {
    pub fn with_jobs(jobs: usize) -> Self {
        RiskOptions {
            jobs,
            ..RiskOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub theta: ParameterVector,
    pub protocol: String,
    pub squared_error: f64,
    pub bits_used: u64,
    pub machines_used: usize,
    pub rounds: Vec<RoundTrace>,
}

/// A trial excluded from the means because the pool ran dry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub error: String,
}

/// Raw outcome of a run. `fatal` holds the first error that is not a pool
/// exhaustion; `records` and `failures` then stop just before that trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub protocol: String,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub requested_trials: usize,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    pub fatal: Option<(usize, Error)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskEstimate {
    pub protocol: String,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub mse: StatsSummary,
    pub bits: StatsSummary,
    pub machines: StatsSummary,
    pub failed_trials: usize,
    pub failure_fraction: f64,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
    #[serde(skip)]
    pub failures: Vec<TrialFailure>,
}

pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    derive_key(master_seed, Domain::Trial, trial as u64)
}

/// Runs `f(t)` for `t in 0..trials` on `jobs` threads and returns the results
/// in trial order.
pub(crate) fn ordered_trials<T, F>(trials: usize, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(|| (0..trials).into_par_iter().map(f).collect()))
}

enum Outcome {
    Done(TrialRecord),
    Exhausted(TrialFailure),
    Fatal(Error),
}

fn run_one(
    protocol: &dyn Protocol,
    name: &str,
    prior: &PriorSpec,
    config: &ExperimentConfig,
    master_seed: u64,
    options: &RiskOptions,
    budget: u64,
    pool: usize,
    trial: usize,
) -> Outcome {
    let seed = trial_seed(master_seed, trial);
    let rng = RandomnessModel::new(seed);
    let attempt = || -> Result<TrialRecord> {
        let theta = draw_parameter(prior, config.d, &mut rng.nature())?;
        let noise = options.noise_sigma2.unwrap_or(config.sigma2);
        let data = SampleSet::generated(&theta, pool, config.n, noise, &rng)?;
        let result = protocol.run(config, &data, &rng)?;
        let bits = result.transcript.total_bits();
        if bits != budget {
            return Err(Error::BudgetMismatch(format!(
                "{name} wrote {bits} bits in trial {trial}, budget is {budget}"
            )));
        }
        let replay = protocol.estimate_from_transcript(config, &result.transcript)?;
        if replay != result.estimate {
            return Err(Error::Transcript(format!(
                "{name}: estimate in trial {trial} does not follow from the transcript"
            )));
        }
        Ok(TrialRecord {
            trial,
            seed,
            squared_error: result.estimate.squared_distance(&theta),
            theta,
            protocol: name.to_string(),
            bits_used: bits,
            machines_used: result.machines_used,
            rounds: if options.keep_rounds { result.rounds } else { Vec::new() },
        })
    };
    match attempt() {
        Ok(record) => Outcome::Done(record),
        Err(e @ Error::InsufficientMachines { .. }) => Outcome::Exhausted(TrialFailure {
            trial,
            seed,
            error: e.to_string(),
        }),
        Err(e) => Outcome::Fatal(e),
    }
}

/// Runs the trials without summarizing; see [`TrialRun`].
pub fn run_trials(
    protocol: &dyn Protocol,
    prior: &PriorSpec,
    config: &ExperimentConfig,
    trials: usize,
    master_seed: u64,
    options: &RiskOptions,
) -> Result<TrialRun> {
    config.validate()?;
    prior.validate(config.d)?;
    if let Some(noise) = options.noise_sigma2 {
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::InvalidConfig(format!("noise variance must be nonnegative, got {noise}")));
        }
    }
    if protocol.requires_bounded_parameter() && !prior.is_bounded() {
        return Err(Error::InvalidPrior(format!(
            "{} needs means in [-1, 1] but the prior is unbounded",
            protocol.name()
        )));
    }
    let name = protocol.name();
    let budget = protocol.bit_budget(config)?;
    let pool = match options.pool_machines {
        Some(0) => return Err(Error::InvalidConfig("pool_machines must be positive".into())),
        Some(p) => p,
        None => protocol.machines_required(config)?,
    };
    let outcomes = ordered_trials(trials, options.jobs, |t| {
        run_one(protocol, &name, prior, config, master_seed, options, budget, pool, t)
    })?;

    let mut run = TrialRun {
        protocol: name,
        config: *config,
        master_seed,
        requested_trials: trials,
        records: Vec::with_capacity(trials),
        failures: Vec::new(),
        fatal: None,
    };
    for (t, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Outcome::Done(r) => run.records.push(r),
            Outcome::Exhausted(f) => run.failures.push(f),
            Outcome::Fatal(e) => {
                run.fatal = Some((t, e));
                break;
            }
        }
    }
    Ok(run)
}

impl TrialRun {
    /// Summaries over the successful trials.
    pub fn summarize(self) -> Result<RiskEstimate> {
        if let Some((_, e)) = self.fatal {
            return Err(e);
        }
        let done = self.records.len();
        let failed = self.failures.len();
        if done == 0 {
            return Err(Error::Precondition(format!("all {failed} trials of {} failed", self.protocol)));
        }
        let column = |f: &dyn Fn(&TrialRecord) -> f64| self.records.iter().map(f).collect::<Vec<f64>>();
        Ok(RiskEstimate {
            mse: StatsSummary::from_values(&column(&|r| r.squared_error)),
            bits: StatsSummary::from_values(&column(&|r| r.bits_used as f64)),
            machines: StatsSummary::from_values(&column(&|r| r.machines_used as f64)),
            failed_trials: failed,
            failure_fraction: failed as f64 / (done + failed) as f64,
            protocol: self.protocol,
            config: self.config,
            master_seed: self.master_seed,
            records: self.records,
            failures: self.failures,
        })
    }
}

/// Bayes risk of `protocol` under `prior`, with the exact bit count checked
/// and the estimate re-derived from the transcript in every trial.
pub fn estimate_risk(
    protocol: &dyn Protocol,
    prior: &PriorSpec,
    config: &ExperimentConfig,
    trials: usize,
    master_seed: u64,
    options: &RiskOptions,
) -> Result<RiskEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::Precondition(format!(
            "at least {MIN_TRIALS} trials are needed, got {trials}"
        )));
    }
    run_trials(protocol, prior, config, trials, master_seed, options)?.summarize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::CodecChoice;
    use crate::protocols::{InteractiveBisection, SimultaneousMean};

    #[test]
    fn noiseless_point_mass_has_zero_risk() {
        let config = ExperimentConfig::new(3, 8, 2, 1.0).unwrap();
        let prior = PriorSpec::PointMass {
            theta: ParameterVector(vec![0.2, -0.7, 0.0]),
        };
        let options = RiskOptions {
            noise_sigma2: Some(0.0),
            ..RiskOptions::default()
        };
        let est = estimate_risk(&SimultaneousMean::new(CodecChoice::Exact), &prior, &config, 100, 5, &options).unwrap();
        assert_eq!(est.mse.mean, 0.0);
        assert_eq!(est.bits.mean, (8 * 3 * 64) as f64);
    }

    #[test]
    fn unquantized_averaging_matches_centralized_risk() {
        let config = ExperimentConfig::new(1, 16, 4, 1.0).unwrap();
        let prior = PriorSpec::UniformInterval { lo: -1.0, hi: 1.0 };
        let est = estimate_risk(
            &SimultaneousMean::new(CodecChoice::Exact),
            &prior,
            &config,
            10_000,
            77,
            &RiskOptions::default(),
        )
        .unwrap();
        let (lo, hi) = est.mse.ci95;
        assert!(lo <= 0.015625 && 0.015625 <= hi, "{:?}", est.mse);
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let config = ExperimentConfig::new(1, 64, 1, 1.0).unwrap();
        let prior = PriorSpec::UniformInterval { lo: -1.0, hi: 1.0 };
        let one = run_trials(&InteractiveBisection, &prior, &config, 150, 9, &RiskOptions::with_jobs(1)).unwrap();
        let four = run_trials(&InteractiveBisection, &prior, &config, 150, 9, &RiskOptions::with_jobs(4)).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn short_pool_trials_are_recorded_as_failures() {
        let config = ExperimentConfig::new(1, 16, 1, 1.0).unwrap();
        let prior = PriorSpec::PointMass {
            theta: ParameterVector(vec![0.0]),
        };
        let options = RiskOptions {
            pool_machines: Some(8),
            ..RiskOptions::default()
        };
        let run = run_trials(&SimultaneousMean::new(CodecChoice::Default), &prior, &config, 100, 1, &options).unwrap();
        assert_eq!(run.failures.len(), 100);
        assert!(run.records.is_empty() && run.fatal.is_none());
        assert!(run.summarize().is_err());
    }

    #[test]
    fn too_few_trials_and_unbounded_prior_rejected() {
        let config = ExperimentConfig::new(1, 16, 1, 1.0).unwrap();
        let bounded = PriorSpec::UniformInterval { lo: -1.0, hi: 1.0 };
        let opts = RiskOptions::default();
        assert!(estimate_risk(&InteractiveBisection, &bounded, &config, 99, 1, &opts).is_err());
        let gaussian = PriorSpec::Gaussian { delta2: 1.0 };
        assert!(matches!(
            estimate_risk(&InteractiveBisection, &gaussian, &config, 100, 1, &opts),
            Err(Error::InvalidPrior(_))
        ));
    }

    #[test]
    fn bisection_bits_per_machine_are_a_frozen_constant() {
        // Bits per unit of m at m = 1024, measured once from the schedule.
        let config = ExperimentConfig::new(1, 1024, 1, 1.0).unwrap();
        let prior = PriorSpec::UniformInterval { lo: -1.0, hi: 1.0 };
        let est = estimate_risk(&InteractiveBisection, &prior, &config, 100, 3, &RiskOptions::default()).unwrap();
        assert!(est.bits.mean <= C_BITS_BISECTION * 1024.0);
        assert_eq!(est.bits.stderr, 0.0);
    }

    // 217547 bits at m = 1024, rounded up.
    const C_BITS_BISECTION: f64 = 213.0;
}
