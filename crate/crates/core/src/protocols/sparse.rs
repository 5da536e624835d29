use crate::codec::CodecChoice;
use crate::error::{Error, Result};
use crate::model::{ExperimentConfig, ParameterVector, SampleSet};
use crate::rng::RandomnessModel;
use crate::transcript::Transcript;

use super::averaging::{average_from_transcript, broadcast_sample_means};
use super::{check_dimension, Protocol, ProtocolResult};

pub(crate) const DEFAULT_L_CONST: f64 = 4.0;

/// Averaging over an enlarged pool followed by hard thresholding at
/// `α σ² / (m n)` on the squared coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseThreshold {
    /// Promised sparsity.
    pub s: usize,
    /// Tradeoff knob in `[1, d/s]`.
    pub alpha: f64,
    /// Pool-size constant.
    pub l_const: f64,
    pub codec: CodecChoice,
}

impl SparseThreshold {
    pub fn new(s: usize, alpha: f64) -> Self {
        SparseThreshold {
            s,
            alpha,
            l_const: DEFAULT_L_CONST,
            codec: CodecChoice::Default,
        }
    }

    pub fn threshold(&self, config: &ExperimentConfig) -> f64 {
        self.alpha * config.sigma2 / (config.m * config.n) as f64
    }

    fn apply_threshold(&self, config: &ExperimentConfig, mean: Vec<f64>) -> ParameterVector {
        let tau = self.threshold(config);
        ParameterVector(
            mean.into_iter()
                .map(|x| if x * x >= tau { x } else { 0.0 })
                .collect(),
        )
    }
}

/// Pool size for the thresholding protocol.
///
/// The pool at the sparse endpoint `α = d/s` is `u = ceil(L·m·ln(d)·s/d)`
/// machines and every other α uses `ceil(u·(d/s)/α)`, so the pool is never
/// smaller than `L·m·ln(d)/α` and bit counts scale exactly as `1/α` whenever
/// α divides d/s. `ln d` is floored at 1 so tiny dimensions still get `L·m`.
pub fn sparse_machine_count(config: &ExperimentConfig, s: usize, alpha: f64, l_const: f64) -> Result<usize> {
    if s == 0 || s > config.d {
        return Err(Error::Precondition(format!(
            "sparsity must be in 1..={}, got {s}",
            config.d
        )));
    }
    let max_alpha = config.d as f64 / s as f64;
    if !(alpha.is_finite() && (1.0..=max_alpha).contains(&alpha)) {
        return Err(Error::Precondition(format!(
            "alpha must be in [1, d/s] = [1, {max_alpha}], got {alpha}"
        )));
    }
    if !(l_const.is_finite() && l_const > 0.0) {
        return Err(Error::Precondition(format!("L constant must be positive, got {l_const}")));
    }
    let log_factor = (config.d as f64).ln().max(1.0);
    let unit = (l_const * config.m as f64 * log_factor / max_alpha).ceil();
    let pool = (unit * max_alpha / alpha - 1e-9).ceil();
    Ok(pool.max(1.0) as usize)
}

impl Protocol for SparseThreshold {
    fn name(&self) -> String {
        "sparse".into()
    }

    fn machines_required(&self, config: &ExperimentConfig) -> Result<usize> {
        sparse_machine_count(config, self.s, self.alpha, self.l_const)
    }

    fn bit_budget(&self, config: &ExperimentConfig) -> Result<u64> {
        let codec = self.codec.resolve(config)?;
        Ok((self.machines_required(config)? * config.d) as u64 * codec.bits_per_value() as u64)
    }

    fn run(
        &self,
        config: &ExperimentConfig,
        data: &SampleSet,
        _rng: &RandomnessModel,
    ) -> Result<ProtocolResult> {
        check_dimension(config, data)?;
        let pool = self.machines_required(config)?;
        if data.machines() < pool {
            return Err(Error::InsufficientMachines {
                needed: pool,
                available: data.machines(),
            });
        }
        let codec = self.codec.resolve(config)?;
        let mut transcript = Transcript::new();
        let mean = broadcast_sample_means(&mut transcript, data, pool, &codec)?;
        Ok(ProtocolResult {
            transcript,
            estimate: self.apply_threshold(config, mean),
            machines_used: pool,
            rounds: Vec::new(),
        })
    }

    fn estimate_from_transcript(
        &self,
        config: &ExperimentConfig,
        transcript: &Transcript,
    ) -> Result<ParameterVector> {
        let codec = self.codec.resolve(config)?;
        let pool = self.machines_required(config)?;
        let mean = average_from_transcript(transcript, pool, config.d, &codec)?;
        Ok(self.apply_threshold(config, mean))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_data;

    #[test]
    fn pool_sizes_scale_inversely_with_alpha() {
        let config = ExperimentConfig::new(64, 32, 8, 1.0).unwrap();
        let pools: Vec<usize> = [1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|a| sparse_machine_count(&config, 4, *a, 4.0).unwrap())
            .collect();
        // u = ceil(4 · 32 · ln 64 / 16) = ceil(33.27) = 34.
        assert_eq!(pools, vec![544, 272, 136, 68, 34]);
        for (alpha, pool) in [1.0, 2.0, 4.0, 8.0, 16.0].iter().zip(&pools) {
            assert!(*pool as f64 >= 4.0 * 32.0 * 64f64.ln() / alpha);
        }
        assert_eq!(sparse_machine_count(&config, 4, 3.0, 4.0).unwrap(), 182);
    }

    #[test]
    fn alpha_outside_range_rejected() {
        let config = ExperimentConfig::new(64, 32, 8, 1.0).unwrap();
        assert!(sparse_machine_count(&config, 4, 0.5, 4.0).is_err());
        assert!(sparse_machine_count(&config, 4, 16.5, 4.0).is_err());
        assert!(sparse_machine_count(&config, 0, 1.0, 4.0).is_err());
        assert!(sparse_machine_count(&config, 65, 1.0, 4.0).is_err());
        assert!(sparse_machine_count(&config, 4, 1.0, 0.0).is_err());
    }

    #[test]
    fn threshold_rule() {
        let config = ExperimentConfig::new(2, 25, 4, 1.0).unwrap();
        let p = SparseThreshold::new(1, 1.0);
        assert!((p.threshold(&config) - 0.01).abs() < 1e-15);
        let est = p.apply_threshold(&config, vec![0.15, 0.09]);
        assert_eq!(est.0, vec![0.15, 0.0]);
    }

    #[test]
    fn zero_mean_far_below_threshold_gives_zero() {
        let config = ExperimentConfig::new(8, 4, 1, 1.0).unwrap();
        let p = SparseThreshold {
            codec: CodecChoice::Exact,
            ..SparseThreshold::new(2, 1.0)
        };
        let rng = RandomnessModel::new(9);
        let pool = p.machines_required(&config).unwrap();
        let data = sample_data(&ParameterVector::zeros(8), pool, 1, 0.0, &rng).unwrap();
        let result = p.run(&config, &data, &rng).unwrap();
        assert_eq!(result.estimate, ParameterVector::zeros(8));
        assert_eq!(p.estimate_from_transcript(&config, &result.transcript).unwrap(), result.estimate);
    }

    #[test]
    fn exact_budget_and_insufficient_pool() {
        let config = ExperimentConfig::new(16, 8, 2, 1.0).unwrap();
        let p = SparseThreshold::new(2, 4.0);
        let rng = RandomnessModel::new(10);
        let pool = p.machines_required(&config).unwrap();
        let mut theta = vec![0.0; 16];
        theta[3] = 1.0;
        theta[11] = -1.0;
        let data = sample_data(&ParameterVector(theta), pool + 3, 2, 1.0, &rng).unwrap();
        let result = p.run(&config, &data, &rng).unwrap();
        assert_eq!(result.transcript.total_bits(), p.bit_budget(&config).unwrap());
        assert_eq!(result.machines_used, pool);
        assert_eq!(p.estimate_from_transcript(&config, &result.transcript).unwrap(), result.estimate);
        let short = sample_data(&ParameterVector::zeros(16), pool - 1, 2, 1.0, &rng).unwrap();
        assert_eq!(
            p.run(&config, &short, &rng),
            Err(Error::InsufficientMachines { needed: pool, available: pool - 1 })
        );
    }
}
