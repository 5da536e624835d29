use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{ExperimentConfig, ParameterVector, PriorSpec, SampleSet};
use crate::rng::RandomnessModel;
use crate::transcript::Transcript;

use super::{Protocol, ProtocolResult};

/// Runs a `d`-dimensional protocol on one-dimensional data by hiding the real
/// data in coordinate `coordinate`.
///
/// The other means are drawn from the product prior with public randomness;
/// each machine fills the other coordinates of its samples with private
/// Gaussian noise around those means. The returned estimate is the inner
/// estimate's `coordinate` entry; the transcript is the inner transcript.
pub fn embed_direct_sum(
    inner: &dyn Protocol,
    d: usize,
    coordinate: usize,
    config: &ExperimentConfig,
    one_dim_data: &SampleSet,
    prior: &PriorSpec,
    rng: &RandomnessModel,
) -> Result<ProtocolResult> {
    let inner_config = check_embedding(inner, d, coordinate, config, prior)?;
    if one_dim_data.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: one_dim_data.dim(),
        });
    }
    let composed = compose_data(d, coordinate, config.sigma2, one_dim_data, prior, rng)?;
    let mut result = inner.run(&inner_config, &composed, rng)?;
    result.estimate = ParameterVector(vec![result.estimate.0[coordinate]]);
    Ok(result)
}

fn check_embedding(
    inner: &dyn Protocol,
    d: usize,
    coordinate: usize,
    config: &ExperimentConfig,
    prior: &PriorSpec,
) -> Result<ExperimentConfig> {
    if config.d != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: config.d,
        });
    }
    if coordinate >= d {
        return Err(Error::Precondition(format!(
            "coordinate {coordinate} outside dimension {d}"
        )));
    }
    if !prior.is_product() {
        return Err(Error::InvalidPrior(
            "direct-sum embedding needs a product prior".into(),
        ));
    }
    if inner.requires_bounded_parameter() && !prior.is_bounded() {
        return Err(Error::InvalidPrior(format!(
            "{} needs means in [-1, 1] but the prior is unbounded",
            inner.name()
        )));
    }
    Ok(config.with_dimension(d))
}

/// The fabricated `d`-dimensional data set.
pub(crate) fn compose_data(
    d: usize,
    coordinate: usize,
    sigma2: f64,
    one_dim_data: &SampleSet,
    prior: &PriorSpec,
    rng: &RandomnessModel,
) -> Result<SampleSet> {
    let mut public = rng.public();
    let mut others = vec![0.0; d];
    for (c, slot) in others.iter_mut().enumerate() {
        if c != coordinate {
            *slot = prior.draw_coordinate(c, &mut public)?;
        }
    }
    let machines = one_dim_data.machines();
    let n = one_dim_data.samples_per_machine();
    let sigma = sigma2.sqrt();
    let mut data = Vec::with_capacity(machines * n * d);
    for j in 0..machines {
        let mut private = rng.private_embedding(j);
        let own = one_dim_data.machine(j)?;
        for x in own.iter() {
            for (c, mean) in others.iter().enumerate() {
                if c == coordinate {
                    data.push(*x);
                } else {
                    data.push(mean + sigma * private.standard_normal());
                }
            }
        }
    }
    SampleSet::from_vec(machines, n, d, data)
}

/// The one-dimensional protocol Π_i obtained from a `d`-dimensional one.
#[derive(Clone)]
pub struct DirectSumEmbedding {
    pub inner: Arc<dyn Protocol>,
    pub d: usize,
    pub coordinate: usize,
    pub prior: PriorSpec,
}

impl Protocol for DirectSumEmbedding {
    fn name(&self) -> String {
        format!("embed[{}:{}/{}]", self.inner.name(), self.coordinate, self.d)
    }

    fn machines_required(&self, config: &ExperimentConfig) -> Result<usize> {
        self.inner.machines_required(&config.with_dimension(self.d))
    }

    fn bit_budget(&self, config: &ExperimentConfig) -> Result<u64> {
        self.inner.bit_budget(&config.with_dimension(self.d))
    }

    fn requires_bounded_parameter(&self) -> bool {
        self.inner.requires_bounded_parameter()
    }

    fn run(
        &self,
        config: &ExperimentConfig,
        data: &SampleSet,
        rng: &RandomnessModel,
    ) -> Result<ProtocolResult> {
        embed_direct_sum(self.inner.as_ref(), self.d, self.coordinate, config, data, &self.prior, rng)
    }

    fn estimate_from_transcript(
        &self,
        config: &ExperimentConfig,
        transcript: &Transcript,
    ) -> Result<ParameterVector> {
        let full = self
            .inner
            .estimate_from_transcript(&config.with_dimension(self.d), transcript)?;
        Ok(ParameterVector(vec![full.0[self.coordinate]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::CodecChoice;
    use crate::model::sample_data;
    use crate::protocols::{InteractiveBisection, SimultaneousMean};

    #[test]
    fn one_dimensional_embedding_is_identity() {
        let config = ExperimentConfig::new(1, 8, 2, 1.0).unwrap();
        let inner = SimultaneousMean::new(CodecChoice::Default);
        let rng = RandomnessModel::new(1);
        let data = sample_data(&ParameterVector(vec![0.3]), 8, 2, 1.0, &rng).unwrap();
        let prior = PriorSpec::UniformPlusMinus { delta: 0.5 };
        let direct = inner.run(&config, &data, &rng).unwrap();
        let embedded = embed_direct_sum(&inner, 1, 0, &config, &data, &prior, &rng).unwrap();
        assert_eq!(direct, embedded);
    }

    #[test]
    fn composed_data_keeps_real_coordinate_and_has_right_moments() {
        let d = 4;
        let coordinate = 2;
        let rng = RandomnessModel::new(2);
        let theta = 0.6;
        let one = sample_data(&ParameterVector(vec![theta]), 2000, 3, 1.0, &rng).unwrap();
        let prior = PriorSpec::UniformPlusMinus { delta: 0.5 };
        let composed = compose_data(d, coordinate, 1.0, &one, &prior, &rng).unwrap();
        // Publicly drawn means for the other coordinates.
        let mut public = rng.public();
        let mut means = vec![0.0; d];
        for c in 0..d {
            if c != coordinate {
                means[c] = prior.draw_coordinate(c, &mut public).unwrap();
            }
        }
        means[coordinate] = theta;
        let count = 6000.0;
        for c in 0..d {
            let mut xs = Vec::new();
            for j in 0..2000 {
                for k in 0..3 {
                    xs.push(composed.get(j, k, c));
                    if c == coordinate {
                        assert_eq!(composed.get(j, k, c), one.get(j, k, 0));
                    }
                }
            }
            let mean = xs.iter().sum::<f64>() / count;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1.0);
            assert!((mean - means[c]).abs() <= 4.0 / count.sqrt(), "coordinate {c}");
            assert!((var - 1.0).abs() <= 4.0 * (2.0 / count).sqrt(), "coordinate {c}");
        }
    }

    #[test]
    fn incompatible_priors_rejected() {
        let config = ExperimentConfig::new(1, 8, 1, 1.0).unwrap();
        let rng = RandomnessModel::new(3);
        let data = sample_data(&ParameterVector(vec![0.0]), 8, 1, 1.0, &rng).unwrap();
        let inner = SimultaneousMean::new(CodecChoice::Default);
        let sparse = PriorSpec::SparseSigns { s: 1, magnitude: 1.0 };
        assert!(embed_direct_sum(&inner, 3, 0, &config, &data, &sparse, &rng).is_err());
        let gaussian = PriorSpec::Gaussian { delta2: 1.0 };
        assert!(embed_direct_sum(&InteractiveBisection, 3, 0, &config, &data, &gaussian, &rng).is_err());
        let ok = PriorSpec::UniformPlusMinus { delta: 0.5 };
        assert!(embed_direct_sum(&inner, 3, 3, &config, &data, &ok, &rng).is_err());
    }

    #[test]
    fn embedded_estimate_rederives_from_transcript() {
        let config = ExperimentConfig::new(1, 8, 1, 1.0).unwrap();
        let prior = PriorSpec::UniformPlusMinus { delta: 0.25 };
        let p = DirectSumEmbedding {
            inner: Arc::new(SimultaneousMean::new(CodecChoice::Default)),
            d: 5,
            coordinate: 1,
            prior,
        };
        let rng = RandomnessModel::new(4);
        let data = sample_data(&ParameterVector(vec![-0.25]), 8, 1, 1.0, &rng).unwrap();
        let result = p.run(&config, &data, &rng).unwrap();
        assert_eq!(result.estimate.dim(), 1);
        assert_eq!(result.transcript.total_bits(), p.bit_budget(&config).unwrap());
        assert_eq!(p.estimate_from_transcript(&config, &result.transcript).unwrap(), result.estimate);
    }
}
