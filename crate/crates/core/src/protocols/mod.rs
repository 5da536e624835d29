//! Distributed protocols: pure procedures from (configuration, data,
//! randomness) to a transcript and an estimate computed from it.

mod averaging;
mod bisection;
mod direct_sum;
mod sparse;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use averaging::SimultaneousMean;
pub use bisection::{
    bisection_schedule, run_interactive_bisection_1d, worst_case_round_failure, BisectionRound,
    BisectionSchedule, InteractiveBisection,
};
pub use direct_sum::{embed_direct_sum, DirectSumEmbedding};
pub use sparse::{sparse_machine_count, SparseThreshold};

use crate::codec::CodecChoice;
use crate::error::Result;
use crate::model::{ExperimentConfig, ParameterVector, SampleSet};
use crate::rng::RandomnessModel;
use crate::transcript::Transcript;

/// Interval state of one bisection round on one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundTrace {
    pub coordinate: usize,
    pub round: usize,
    pub lower_before: f64,
    pub upper_before: f64,
    pub machines: usize,
    pub ones: usize,
    pub lower_after: f64,
    pub upper_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub transcript: Transcript,
    /// θ̂(Y).
    pub estimate: ParameterVector,
    pub machines_used: usize,
    /// Per-round bisection diagnostics; empty for non-interactive protocols.
    pub rounds: Vec<RoundTrace>,
}

/// A protocol together with its estimator.
pub trait Protocol: Send + Sync {
    fn name(&self) -> String;

    /// Size of the machine pool the protocol consumes for `config`.
    fn machines_required(&self, config: &ExperimentConfig) -> Result<usize>;

    /// Closed-form communication cost in bits.
    fn bit_budget(&self, config: &ExperimentConfig) -> Result<u64>;

    /// Whether the protocol assumes θ ∈ [−1, 1]^d.
    fn requires_bounded_parameter(&self) -> bool {
        false
    }

    fn run(
        &self,
        config: &ExperimentConfig,
        data: &SampleSet,
        rng: &RandomnessModel,
    ) -> Result<ProtocolResult>;

    /// Recomputes the estimate from the blackboard alone.
    fn estimate_from_transcript(
        &self,
        config: &ExperimentConfig,
        transcript: &Transcript,
    ) -> Result<ParameterVector>;
}

impl<P: Protocol + ?Sized> Protocol for Arc<P> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn machines_required(&self, config: &ExperimentConfig) -> Result<usize> {
        (**self).machines_required(config)
    }
    fn bit_budget(&self, config: &ExperimentConfig) -> Result<u64> {
        (**self).bit_budget(config)
    }
    fn requires_bounded_parameter(&self) -> bool {
        (**self).requires_bounded_parameter()
    }
    fn run(
        &self,
        config: &ExperimentConfig,
        data: &SampleSet,
        rng: &RandomnessModel,
    ) -> Result<ProtocolResult> {
        (**self).run(config, data, rng)
    }
    fn estimate_from_transcript(
        &self,
        config: &ExperimentConfig,
        transcript: &Transcript,
    ) -> Result<ParameterVector> {
        (**self).estimate_from_transcript(config, transcript)
    }
}

/// Serializable description of a protocol, used by run specs and the C API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolSpec {
    Averaging {
        #[serde(default = "default_codec")]
        codec: CodecChoice,
    },
    Sparse {
        s: usize,
        alpha: f64,
        #[serde(default = "default_l_const")]
        l_const: f64,
        #[serde(default = "default_codec")]
        codec: CodecChoice,
    },
    Bisection,
}

fn default_codec() -> CodecChoice {
    CodecChoice::Default
}

pub fn default_l_const() -> f64 {
    sparse::DEFAULT_L_CONST
}

impl ProtocolSpec {
    pub fn build(&self) -> Arc<dyn Protocol> {
        match self {
            ProtocolSpec::Averaging { codec } => Arc::new(SimultaneousMean::new(*codec)),
            ProtocolSpec::Sparse {
                s,
                alpha,
                l_const,
                codec,
            } => Arc::new(SparseThreshold {
                s: *s,
                alpha: *alpha,
                l_const: *l_const,
                codec: *codec,
            }),
            ProtocolSpec::Bisection => Arc::new(InteractiveBisection),
        }
    }
}

pub(crate) fn check_dimension(config: &ExperimentConfig, data: &SampleSet) -> Result<()> {
    use crate::error::Error;
    if data.dim() != config.d {
        return Err(Error::DimensionMismatch {
            expected: config.d,
            actual: data.dim(),
        });
    }
    if data.samples_per_machine() != config.n {
        return Err(Error::Precondition(format!(
            "data has {} samples per machine, configuration says n = {}",
            data.samples_per_machine(),
            config.n
        )));
    }
    Ok(())
}
