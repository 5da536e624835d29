use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::model::{ExperimentConfig, ParameterVector, SampleSet};
use crate::normal::normal_cdf;
use crate::rng::RandomnessModel;
use crate::transcript::Transcript;

use super::{check_dimension, Protocol, ProtocolResult, RoundTrace};

/// Chernoff constant in the per-round machine count.
const ROUND_CONSTANT: f64 = 50.0;
/// Initial failure budget is `FIRST_BUDGET · m^{-3/2}`.
const FIRST_BUDGET: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BisectionRound {
    pub index: usize,
    /// Interval width `t_s = 2·(3/4)^s` at the start of the round.
    pub width: f64,
    /// Failure budget `p_s = 0.1·m^{-3/2}·(4/3)^{3s}`.
    pub failure_budget: f64,
    /// Fresh machines polled in the round (always odd).
    pub machines: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionSchedule {
    pub m: usize,
    pub rounds: Vec<BisectionRound>,
}

impl BisectionSchedule {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn total_machines(&self) -> usize {
        self.rounds.iter().map(|r| r.machines).sum()
    }

    /// Interval width after the last round.
    pub fn final_width(&self) -> f64 {
        2.0 * 0.75f64.powi(self.rounds.len() as i32)
    }
}

/// Round schedule of the interactive bisection protocol for budget `m`.
///
/// Rounds continue while `t_s ≥ 1/√m`; round `s` polls
/// `ceil(50·ln(2/p_s)·(σ²/n)/t_s²)` machines, bumped to the next odd count.
pub fn bisection_schedule(m: usize, n: usize, sigma2: f64) -> Result<BisectionSchedule> {
    if m < 2 {
        return Err(Error::InvalidConfig(format!("bisection needs m >= 2, got {m}")));
    }
    if n == 0 || !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::InvalidConfig("bisection needs n >= 1 and sigma2 > 0".into()));
    }
    let stop = 1.0 / (m as f64).sqrt();
    let first_budget = FIRST_BUDGET * (m as f64).powf(-1.5);
    let noise = sigma2 / n as f64;
    let mut rounds = Vec::new();
    let mut s = 0usize;
    loop {
        let width = 2.0 * 0.75f64.powi(s as i32);
        if width < stop {
            break;
        }
        let failure_budget = first_budget * (4.0f64 / 3.0).powi(3 * s as i32);
        let raw = (ROUND_CONSTANT * (2.0 / failure_budget).ln() * noise / (width * width)).ceil();
        let mut machines = raw.max(1.0) as usize;
        if machines % 2 == 0 {
            machines += 1;
        }
        rounds.push(BisectionRound {
            index: s,
            width,
            failure_budget,
            machines,
        });
        s += 1;
    }
    Ok(BisectionSchedule { m, rounds })
}

/// Exact probability that round `round` loses θ when θ sits at the worst
/// position (just inside an outer quarter of the interval).
pub fn worst_case_round_failure(round: &BisectionRound, n: usize, sigma2: f64) -> f64 {
    let sd = (sigma2 / n as f64).sqrt();
    // Each machine reports "≥ a" with probability q; the majority errs when
    // at least (k+1)/2 of them do.
    let q = normal_cdf(-(round.width / 4.0) / sd);
    let k = round.machines as f64;
    let h = ((round.machines + 1) / 2) as f64;
    beta_reg(h, k - h + 1.0, q)
}

/// Interactive bisection with one-bit messages, run independently on every
/// coordinate. Within a coordinate each round polls fresh machines; the same
/// pool is reused across coordinates. The output is the final lower end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InteractiveBisection;

impl InteractiveBisection {
    pub fn schedule(&self, config: &ExperimentConfig) -> Result<BisectionSchedule> {
        bisection_schedule(config.m, config.n, config.sigma2)
    }

    /// One coordinate of the protocol. Round ids start at `round_base`.
    pub fn run_coordinate(
        &self,
        data: &SampleSet,
        coordinate: usize,
        schedule: &BisectionSchedule,
        round_base: usize,
        transcript: &mut Transcript,
        trace: &mut Vec<RoundTrace>,
    ) -> Result<f64> {
        let (mut lower, mut upper) = (-1.0f64, 1.0f64);
        let mut next = 0usize;
        for round in &schedule.rounds {
            let k = round.machines;
            if next + k > data.machines() {
                return Err(Error::InsufficientMachines {
                    needed: next + k,
                    available: data.machines(),
                });
            }
            let a = 0.5 * (lower + upper);
            let round_id = round_base + round.index;
            let ones = match data.scalar_view() {
                Some(view) => transcript.push_bit_run(next, round_id, k, |j| view.value(j) >= a),
                None => transcript.push_bit_run(next, round_id, k, |j| data.coordinate_mean(j, coordinate) >= a),
            };
            let (lower_before, upper_before) = (lower, upper);
            if 2 * ones > k {
                lower = 0.5 * (lower + a);
            } else {
                upper = 0.5 * (upper + a);
            }
            trace.push(RoundTrace {
                coordinate,
                round: round.index,
                lower_before,
                upper_before,
                machines: k,
                ones,
                lower_after: lower,
                upper_after: upper,
            });
            next += k;
        }
        Ok(lower)
    }
}

/// Protocol-level convenience for the one-dimensional case.
pub fn run_interactive_bisection_1d(
    config: &ExperimentConfig,
    pool: &SampleSet,
    schedule: &BisectionSchedule,
) -> Result<ProtocolResult> {
    if config.d != 1 {
        return Err(Error::DimensionMismatch { expected: 1, actual: config.d });
    }
    check_dimension(config, pool)?;
    let mut transcript = Transcript::new();
    let mut rounds = Vec::with_capacity(schedule.len());
    let estimate = InteractiveBisection.run_coordinate(pool, 0, schedule, 0, &mut transcript, &mut rounds)?;
    Ok(ProtocolResult {
        transcript,
        estimate: ParameterVector(vec![estimate]),
        machines_used: schedule.total_machines(),
        rounds,
    })
}

impl Protocol for InteractiveBisection {
    fn name(&self) -> String {
        "bisection".into()
    }

    fn machines_required(&self, config: &ExperimentConfig) -> Result<usize> {
        Ok(self.schedule(config)?.total_machines())
    }

    fn bit_budget(&self, config: &ExperimentConfig) -> Result<u64> {
        Ok((self.schedule(config)?.total_machines() * config.d) as u64)
    }

    fn requires_bounded_parameter(&self) -> bool {
        true
    }

    fn run(
        &self,
        config: &ExperimentConfig,
        data: &SampleSet,
        _rng: &RandomnessModel,
    ) -> Result<ProtocolResult> {
        check_dimension(config, data)?;
        let schedule = self.schedule(config)?;
        let mut transcript = Transcript::new();
        let mut rounds = Vec::with_capacity(schedule.len() * config.d);
        let mut estimate = Vec::with_capacity(config.d);
        for c in 0..config.d {
            estimate.push(self.run_coordinate(
                data,
                c,
                &schedule,
                c * schedule.len(),
                &mut transcript,
                &mut rounds,
            )?);
        }
        Ok(ProtocolResult {
            transcript,
            estimate: ParameterVector(estimate),
            machines_used: schedule.total_machines(),
            rounds,
        })
    }

    fn estimate_from_transcript(
        &self,
        config: &ExperimentConfig,
        transcript: &Transcript,
    ) -> Result<ParameterVector> {
        let schedule = self.schedule(config)?;
        let mut runs = transcript.runs().iter();
        let mut estimate = Vec::with_capacity(config.d);
        for c in 0..config.d {
            let (mut lower, mut upper) = (-1.0f64, 1.0f64);
            let mut next = 0usize;
            for round in &schedule.rounds {
                let round_id = c * schedule.len() + round.index;
                let k = round.machines;
                let (mut seen, mut ones) = (0usize, 0u64);
                while seen < k {
                    let run = runs.next().ok_or_else(|| {
                        Error::Transcript(format!("transcript ends inside round {round_id}"))
                    })?;
                    if run.round != round_id
                        || run.bits_per_message != 1
                        || run.first_machine != next + seen
                        || seen + run.count > k
                    {
                        return Err(Error::Transcript(format!(
                            "unexpected messages in round {round_id}: {run:?}"
                        )));
                    }
                    ones += transcript.count_ones(run.bit_offset, run.count as u64);
                    seen += run.count;
                }
                let a = 0.5 * (lower + upper);
                if 2 * ones as usize > k {
                    lower = 0.5 * (lower + a);
                } else {
                    upper = 0.5 * (upper + a);
                }
                next += k;
            }
            estimate.push(lower);
        }
        if runs.next().is_some() {
            return Err(Error::Transcript("trailing messages after the last round".into()));
        }
        Ok(ParameterVector(estimate))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_data;

    #[test]
    fn schedule_constants() {
        let s = bisection_schedule(100, 1, 1.0).unwrap();
        assert!((s.rounds[0].failure_budget - 1e-4).abs() < 1e-18);
        assert_eq!(s.len(), 11);
        assert_eq!(s.rounds[0].width, 2.0);
        assert_eq!(s.rounds[1].width, 1.5);
        assert_eq!(s.rounds[2].width, 1.125);
        for w in s.rounds.windows(2) {
            let ratio = w[1].failure_budget / w[0].failure_budget;
            assert!((ratio - (4.0f64 / 3.0).powi(3)).abs() < 1e-12);
        }
        // Round 0: ceil(50 ln(2e4) / 4) = ceil(123.79) = 124, bumped to 125.
        assert_eq!(s.rounds[0].machines, 125);
        assert!(s.rounds.iter().all(|r| r.machines % 2 == 1));
    }

    #[test]
    fn round_count_formula() {
        for m in [2usize, 3, 10, 100, 256, 1000, 1024, 4096, 10_000] {
            let expected = ((2.0 * (m as f64).sqrt()).ln() / (4.0f64 / 3.0).ln()).ceil() as usize;
            let s = bisection_schedule(m, 1, 1.0).unwrap();
            assert_eq!(s.len(), expected, "m = {m}");
            assert!(s.final_width() < 1.0 / (m as f64).sqrt());
        }
        assert!(bisection_schedule(1, 1, 1.0).is_err());
    }

    #[test]
    fn noise_scale_shrinks_rounds() {
        let base = bisection_schedule(256, 1, 1.0).unwrap();
        let averaged = bisection_schedule(256, 4, 1.0).unwrap();
        assert_eq!(base.len(), averaged.len());
        assert!(averaged.total_machines() * 3 < base.total_machines());
        let tiny = bisection_schedule(256, 1, 1e-12).unwrap();
        assert!(tiny.rounds.iter().all(|r| r.machines == 1));
    }

    #[test]
    fn noiseless_bisection_converges() {
        let config = ExperimentConfig::new(1, 64, 1, 1.0).unwrap();
        let schedule = bisection_schedule(64, 1, 1.0).unwrap();
        let rng = RandomnessModel::new(1);
        let pool = sample_data(&ParameterVector(vec![0.7]), schedule.total_machines(), 1, 0.0, &rng).unwrap();
        let result = run_interactive_bisection_1d(&config, &pool, &schedule).unwrap();
        let l = result.estimate.0[0];
        assert!(l <= 0.7 && 0.7 - l <= 1.0 / 8.0);
        for r in &result.rounds {
            assert!(r.lower_after <= 0.7 && 0.7 <= r.upper_after);
            // Noiseless: every vote is unanimous.
            assert!(r.ones == 0 || r.ones == r.machines);
        }
        assert_eq!(result.transcript.total_bits(), schedule.total_machines() as u64);
    }

    #[test]
    fn interval_width_is_data_independent() {
        let config = ExperimentConfig::new(1, 256, 1, 1.0).unwrap();
        let p = InteractiveBisection;
        for seed in 0..5 {
            let rng = RandomnessModel::new(seed);
            let pool = sample_data(&ParameterVector(vec![-0.3]), p.machines_required(&config).unwrap(), 1, 1.0, &rng).unwrap();
            let result = p.run(&config, &pool, &rng).unwrap();
            for r in &result.rounds {
                let before = 2.0 * 0.75f64.powi(r.round as i32);
                let after = 2.0 * 0.75f64.powi(r.round as i32 + 1);
                assert!((r.upper_before - r.lower_before - before).abs() < 1e-12);
                assert!((r.upper_after - r.lower_after - after).abs() < 1e-12);
            }
            assert_eq!(p.estimate_from_transcript(&config, &result.transcript).unwrap(), result.estimate);
        }
    }

    #[test]
    fn pool_exhaustion_is_an_error() {
        let config = ExperimentConfig::new(1, 16, 1, 1.0).unwrap();
        let needed = InteractiveBisection.machines_required(&config).unwrap();
        let rng = RandomnessModel::new(2);
        let pool = sample_data(&ParameterVector(vec![0.0]), needed - 1, 1, 1.0, &rng).unwrap();
        assert!(matches!(
            InteractiveBisection.run(&config, &pool, &rng),
            Err(Error::InsufficientMachines { .. })
        ));
    }

    #[test]
    fn coordinates_are_independent_runs() {
        let config = ExperimentConfig::new(2, 32, 1, 1.0).unwrap();
        let p = InteractiveBisection;
        let needed = p.machines_required(&config).unwrap();
        // Identical data in both coordinates.
        let rng = RandomnessModel::new(3);
        let one = sample_data(&ParameterVector(vec![0.4]), needed, 1, 1.0, &rng).unwrap();
        let twin: Vec<f64> = one.values().iter().flat_map(|x| [*x, *x]).collect();
        let pool = SampleSet::from_vec(needed, 1, 2, twin).unwrap();
        let result = p.run(&config, &pool, &rng).unwrap();
        assert_eq!(result.estimate.0[0], result.estimate.0[1]);
        let one_d = run_interactive_bisection_1d(&config.with_dimension(1), &one, &p.schedule(&config).unwrap()).unwrap();
        assert_eq!(result.transcript.total_bits(), 2 * one_d.transcript.total_bits());
        assert_eq!(result.estimate.0[0], one_d.estimate.0[0]);
        assert_eq!(p.estimate_from_transcript(&config, &result.transcript).unwrap(), result.estimate);
    }

    #[test]
    fn worst_case_failure_within_budget() {
        for m in [64usize, 256, 1024] {
            let s = bisection_schedule(m, 1, 1.0).unwrap();
            for r in &s.rounds {
                let f = worst_case_round_failure(r, 1, 1.0);
                assert!(f <= r.failure_budget, "m = {m} round {}: {f} > {}", r.index, r.failure_budget);
            }
        }
    }

    #[test]
    fn worst_case_failure_matches_brute_force_binomial() {
        let round = BisectionRound { index: 0, width: 0.8, failure_budget: 0.1, machines: 21 };
        let q = normal_cdf(-0.2);
        let mut brute = 0.0;
        for ones in 11..=21u32 {
            let mut c = 1.0;
            for i in 0..ones {
                c *= (21 - i) as f64 / (i + 1) as f64;
            }
            brute += c * q.powi(ones as i32) * (1.0 - q).powi(21 - ones as i32);
        }
        assert!((worst_case_round_failure(&round, 1, 1.0) - brute).abs() < 1e-12);
    }
}
