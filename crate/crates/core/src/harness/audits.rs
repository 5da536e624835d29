use std::sync::Arc;

use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::codec::CodecChoice;
use crate::error::{Error, Result};
use crate::model::{draw_parameter, ExperimentConfig, ParameterVector, PriorSpec, SampleSet};
use crate::protocols::{
    bisection_schedule, run_interactive_bisection_1d, worst_case_round_failure, DirectSumEmbedding, Protocol,
    SparseThreshold,
};
use crate::rng::{derive_key, Domain, RandomnessModel};

use super::{estimate_risk, ordered_trials, run_trials, trial_seed, RiskOptions, StatsSummary};

/// Rounds conditioned on fewer trials are reported as inconclusive.
pub const MIN_CONDITIONING: usize = 1000;
const CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub theta: ParameterVector,
    pub mse: StatsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxReport {
    pub points: Vec<GridPoint>,
    pub worst_index: usize,
    pub worst: StatsSummary,
}

/// Master seed of grid point `k`.
pub fn grid_point_seed(master_seed: u64, k: usize) -> u64 {
    derive_key(master_seed, Domain::Arm, k as u64)
}

/// A grid must be nonempty, in dimension `d` and inside `[-1, 1]^d`.
pub fn validate_grid(grid: &[ParameterVector], config: &ExperimentConfig) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Precondition("theta grid is empty".into()));
    }
    for (k, theta) in grid.iter().enumerate() {
        if theta.dim() != config.d {
            return Err(Error::DimensionMismatch {
                expected: config.d,
                actual: theta.dim(),
            });
        }
        if !theta.in_unit_box() {
            return Err(Error::Precondition(format!("grid point {k} lies outside [-1, 1]^d")));
        }
    }
    Ok(())
}

/// Risk at each grid point under a point-mass prior; grid point `k` uses the
/// master seed [`grid_point_seed`]`(seed, k)`.
pub fn minimax_risk_over_grid(
    protocol: &dyn Protocol,
    grid: &[ParameterVector],
    config: &ExperimentConfig,
    trials: usize,
    master_seed: u64,
    options: &RiskOptions,
) -> Result<MinimaxReport> {
    validate_grid(grid, config)?;
    let mut points = Vec::with_capacity(grid.len());
    for (k, theta) in grid.iter().enumerate() {
        let prior = PriorSpec::PointMass { theta: theta.clone() };
        let seed = grid_point_seed(master_seed, k);
        let est = estimate_risk(protocol, &prior, config, trials, seed, options)?;
        points.push(GridPoint {
            theta: theta.clone(),
            mse: est.mse,
        });
    }
    let worst_index = (0..points.len())
        .max_by(|a, b| points[*a].mse.mean.total_cmp(&points[*b].mse.mean))
        .unwrap_or(0);
    Ok(MinimaxReport {
        worst: points[worst_index].mse,
        worst_index,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub alpha: f64,
    pub machines: usize,
    pub bits: u64,
    pub mse: StatsSummary,
    /// bits × mean squared error.
    pub product: f64,
}

/// The thresholding protocol at each α under an s-sparse ±1 prior. Every α
/// reuses the same master seed, so θ and each machine's data are shared.
#[allow(clippy::too_many_arguments)]
pub fn tradeoff_sweep_sparse(
    config: &ExperimentConfig,
    s: usize,
    alphas: &[f64],
    l_const: f64,
    codec: CodecChoice,
    trials: usize,
    master_seed: u64,
    options: &RiskOptions,
) -> Result<Vec<TradeoffPoint>> {
    if alphas.is_empty() {
        return Err(Error::Precondition("alpha list is empty".into()));
    }
    let prior = PriorSpec::SparseSigns { s, magnitude: 1.0 };
    let protocols: Vec<SparseThreshold> = alphas
        .iter()
        .map(|alpha| SparseThreshold {
            s,
            alpha: *alpha,
            l_const,
            codec,
        })
        .collect();
    // Validate every α before spending time on any of them.
    for p in &protocols {
        p.machines_required(config)?;
    }
    protocols
        .iter()
        .map(|p| {
            let est = estimate_risk(p, &prior, config, trials, master_seed, options)?;
            let bits = p.bit_budget(config)?;
            Ok(TradeoffPoint {
                alpha: p.alpha,
                machines: p.machines_required(config)?,
                bits,
                product: bits as f64 * est.mse.mean,
                mse: est.mse,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectSumReport {
    pub inner: String,
    pub d: usize,
    pub trials: usize,
    /// MSE(Π) on the product prior.
    pub full: StatsSummary,
    /// MSE(Π_i) for each coordinate.
    pub coordinates: Vec<StatsSummary>,
    pub coordinate_sum: f64,
    /// Σ_i MSE(Π_i) / MSE(Π).
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub ratio_ci95: (f64, f64),
    pub best_coordinate: usize,
    pub best_mse: f64,
    /// (4/d)·MSE(Π).
    pub markov_bound: f64,
    pub markov_holds: bool,
}

/// Loss decomposition of `inner` against its one-dimensional embeddings.
///
/// Π and every Π_i use the same master seed, so the per-trial ratio terms are
/// paired and the interval uses their sample covariance.
pub fn directsum_audit(
    inner: Arc<dyn Protocol>,
    prior: &PriorSpec,
    config: &ExperimentConfig,
    trials: usize,
    master_seed: u64,
    options: &RiskOptions,
) -> Result<DirectSumReport> {
    if !prior.is_product() {
        return Err(Error::InvalidPrior("direct-sum audit needs a product prior".into()));
    }
    let d = config.d;
    let full_run = run_trials(inner.as_ref(), prior, config, trials, master_seed, options)?;
    let full = full_run.summarize()?;
    let one = config.with_dimension(1);
    let mut coordinates = Vec::with_capacity(d);
    let mut per_trial_sum = vec![0.0; trials];
    for i in 0..d {
        let embedded = DirectSumEmbedding {
            inner: inner.clone(),
            d,
            coordinate: i,
            prior: prior.clone(),
        };
        let est = estimate_risk(&embedded, &prior.marginal(i)?, &one, trials, master_seed, options)?;
        if est.failed_trials > 0 || full.failed_trials > 0 {
            return Err(Error::Precondition("direct-sum audit needs every trial to complete".into()));
        }
        for (acc, r) in per_trial_sum.iter_mut().zip(&est.records) {
            *acc += r.squared_error;
        }
        coordinates.push(est.mse);
    }
    let denominators: Vec<f64> = full.records.iter().map(|r| r.squared_error).collect();
    let num = StatsSummary::from_values(&per_trial_sum);
    let den = StatsSummary::from_values(&denominators);
    let ratio = num.mean / den.mean;
    // Delta method for a ratio of paired means.
    let tn = trials as f64;
    let cov = per_trial_sum
        .iter()
        .zip(&denominators)
        .map(|(a, b)| (a - num.mean) * (b - den.mean))
        .sum::<f64>()
        / (tn - 1.0)
        / tn;
    let rel_var = (num.stderr / num.mean).powi(2) + (den.stderr / den.mean).powi(2) - 2.0 * cov / (num.mean * den.mean);
    let ratio_stderr = ratio * rel_var.max(0.0).sqrt();
    let best_coordinate = (0..d)
        .min_by(|a, b| coordinates[*a].mean.total_cmp(&coordinates[*b].mean))
        .unwrap_or(0);
    let best_mse = coordinates[best_coordinate].mean;
    let markov_bound = 4.0 / d as f64 * full.mse.mean;
    Ok(DirectSumReport {
        inner: inner.name(),
        d,
        trials,
        full: full.mse,
        coordinate_sum: num.mean,
        coordinates,
        ratio,
        ratio_stderr,
        ratio_ci95: (
            ratio - StatsSummary::Z95 * ratio_stderr,
            ratio + StatsSummary::Z95 * ratio_stderr,
        ),
        best_coordinate,
        best_mse,
        markov_bound,
        markov_holds: best_mse <= markov_bound,
    })
}

/// One-sided Clopper–Pearson upper bound on a binomial rate.
pub fn clopper_pearson_upper(failures: usize, trials: usize, confidence: f64) -> f64 {
    if trials == 0 || failures >= trials {
        return 1.0;
    }
    // The bound is the `confidence` quantile of Beta(x + 1, k − x); bisect on
    // the regularized incomplete beta function.
    let (a, b) = (failures as f64 + 1.0, (trials - failures) as f64);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < confidence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundFailure {
    pub round: usize,
    pub width: f64,
    /// p_s.
    pub failure_budget: f64,
    pub machines: usize,
    /// Trials whose interval still held θ before this round.
    pub conditioning: usize,
    pub failures: usize,
    pub rate: f64,
    pub ucb95: f64,
    /// Exact failure probability for θ at the worst position in the interval.
    pub worst_case: f64,
    pub conclusive: bool,
    pub within_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRateReport {
    pub m: usize,
    pub n: usize,
    pub sigma2: f64,
    pub trials: usize,
    pub round_count: usize,
    pub expected_round_count: usize,
    /// max_s |p_{s+1}/p_s − (4/3)³|.
    pub budget_growth_error: f64,
    pub rounds: Vec<RoundFailure>,
    /// Every conclusive round is within budget.
    pub holds: bool,
}

/// ceil(log_{4/3}(2√m)).
pub fn expected_bisection_rounds(m: usize) -> usize {
    ((2.0 * (m as f64).sqrt()).ln() / (4.0f64 / 3.0).ln()).ceil() as usize
}

/// Per-round conditional failure frequencies of the bisection protocol with
/// θ uniform on [−1, 1].
pub fn failure_rate_bisection(
    config: &ExperimentConfig,
    trials: usize,
    master_seed: u64,
    options: &RiskOptions,
) -> Result<FailureRateReport> {
    config.validate()?;
    if config.d != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: config.d,
        });
    }
    let schedule = bisection_schedule(config.m, config.n, config.sigma2)?;
    let rounds = schedule.len();
    if rounds > 64 {
        return Err(Error::Precondition(format!("{rounds} rounds exceed the 64-round tracking limit")));
    }
    let prior = PriorSpec::UniformInterval { lo: -1.0, hi: 1.0 };
    let noise = options.noise_sigma2.unwrap_or(config.sigma2);
    let pool = schedule.total_machines();

    // Bit s of `before` / `after`: θ inside the interval before / after round s.
    let masks = ordered_trials(trials, options.jobs, |t| -> Result<(u64, u64)> {
        let rng = RandomnessModel::new(trial_seed(master_seed, t));
        let theta = draw_parameter(&prior, 1, &mut rng.nature())?;
        let data = SampleSet::generated(&theta, pool, config.n, noise, &rng)?;
        let result = run_interactive_bisection_1d(config, &data, &schedule)?;
        let x = theta.0[0];
        let (mut before, mut after) = (0u64, 0u64);
        for r in &result.rounds {
            before |= u64::from(r.lower_before <= x && x <= r.upper_before) << r.round;
            after |= u64::from(r.lower_after <= x && x <= r.upper_after) << r.round;
        }
        Ok((before, after))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(rounds);
    for round in &schedule.rounds {
        let bit = 1u64 << round.index;
        let conditioning = masks.iter().filter(|(b, _)| b & bit != 0).count();
        let failures = masks.iter().filter(|(b, a)| b & bit != 0 && a & bit == 0).count();
        let ucb95 = clopper_pearson_upper(failures, conditioning, CONFIDENCE);
        let conclusive = conditioning >= MIN_CONDITIONING;
        out.push(RoundFailure {
            round: round.index,
            width: round.width,
            failure_budget: round.failure_budget,
            machines: round.machines,
            conditioning,
            failures,
            rate: if conditioning > 0 {
                failures as f64 / conditioning as f64
            } else {
                0.0
            },
            ucb95,
            worst_case: worst_case_round_failure(round, config.n, config.sigma2),
            conclusive,
            within_budget: ucb95 <= round.failure_budget,
        });
    }
    let growth = 64.0 / 27.0;
    let budget_growth_error = schedule
        .rounds
        .windows(2)
        .map(|w| (w[1].failure_budget / w[0].failure_budget - growth).abs())
        .fold(0.0, f64::max);
    let holds = out.iter().all(|r| !r.conclusive || r.within_budget);
    Ok(FailureRateReport {
        m: config.m,
        n: config.n,
        sigma2: config.sigma2,
        trials,
        round_count: rounds,
        expected_round_count: expected_bisection_rounds(config.m),
        budget_growth_error,
        rounds: out,
        holds,
    })
}
