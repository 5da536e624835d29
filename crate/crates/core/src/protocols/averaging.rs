use crate::codec::{CodecChoice, MessageCodec};
use crate::error::{Error, Result};
use crate::model::{ExperimentConfig, ParameterVector, SampleSet};
use crate::rng::RandomnessModel;
use crate::transcript::Transcript;

use super::{check_dimension, Protocol, ProtocolResult};

/// Every machine writes its quantized sample mean once; the estimate is the
/// mean of the decoded sample means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimultaneousMean {
    pub codec: CodecChoice,
}

impl SimultaneousMean {
    pub fn new(codec: CodecChoice) -> Self {
        SimultaneousMean { codec }
    }
}

/// Running average `x₀ + Σ (x_j − x₀) / k`; exact when all inputs agree.
#[derive(Debug, Clone)]
pub(crate) struct ShiftedMean {
    origin: Vec<f64>,
    offsets: Vec<f64>,
    count: usize,
}

impl ShiftedMean {
    pub(crate) fn new(d: usize) -> Self {
        ShiftedMean {
            origin: vec![0.0; d],
            offsets: vec![0.0; d],
            count: 0,
        }
    }

    pub(crate) fn push(&mut self, i: usize, x: f64) {
        if self.count == 0 {
            self.origin[i] = x;
        } else {
            self.offsets[i] += x - self.origin[i];
        }
    }

    pub(crate) fn next_row(&mut self) {
        self.count += 1;
    }

    pub(crate) fn finish(self) -> Vec<f64> {
        let k = self.count.max(1) as f64;
        self.origin
            .into_iter()
            .zip(self.offsets)
            .map(|(o, s)| o + s / k)
            .collect()
    }
}

/// Each of the first `machines` machines writes its `d` quantized sample-mean
/// coordinates as one message. Returns the average of the decoded messages,
/// accumulated in board order.
pub(crate) fn broadcast_sample_means(
    transcript: &mut Transcript,
    data: &SampleSet,
    machines: usize,
    codec: &MessageCodec,
) -> Result<Vec<f64>> {
    let d = data.dim();
    let width = codec.bits_per_value();
    let mut avg = ShiftedMean::new(d);
    let mut codes = vec![0u64; d];
    for j in 0..machines {
        let mean = data.sample_mean(j)?;
        for (code, x) in codes.iter_mut().zip(&mean) {
            *code = codec.encode(*x)?;
        }
        transcript.push_message(j, 0, |w| {
            for code in &codes {
                w.put(*code, width);
            }
            Ok(())
        })?;
        for (i, code) in codes.iter().enumerate() {
            avg.push(i, codec.decode(*code)?);
        }
        avg.next_row();
    }
    Ok(avg.finish())
}

/// Decodes `machines` messages of `d` values each and averages them.
pub(crate) fn average_from_transcript(
    transcript: &Transcript,
    machines: usize,
    d: usize,
    codec: &MessageCodec,
) -> Result<Vec<f64>> {
    let width = codec.bits_per_value();
    if transcript.message_count() != machines {
        return Err(Error::Transcript(format!(
            "expected {machines} messages, found {}",
            transcript.message_count()
        )));
    }
    let mut avg = ShiftedMean::new(d);
    for (j, msg) in transcript.messages().enumerate() {
        if msg.machine_id != j || msg.bit_len() != d as u32 * width {
            return Err(Error::Transcript(format!(
                "message {j} from machine {} has {} bits, expected {}",
                msg.machine_id,
                msg.bit_len(),
                d as u32 * width
            )));
        }
        for i in 0..d {
            avg.push(i, codec.decode(msg.read(i as u32 * width, width))?);
        }
        avg.next_row();
    }
    Ok(avg.finish())
}

impl Protocol for SimultaneousMean {
    fn name(&self) -> String {
        match self.codec {
            CodecChoice::Exact => "averaging-exact".into(),
            _ => "averaging".into(),
        }
    }

    fn machines_required(&self, config: &ExperimentConfig) -> Result<usize> {
        Ok(config.m)
    }

    fn bit_budget(&self, config: &ExperimentConfig) -> Result<u64> {
        let codec = self.codec.resolve(config)?;
        Ok((config.m * config.d) as u64 * codec.bits_per_value() as u64)
    }

    fn run(
        &self,
        config: &ExperimentConfig,
        data: &SampleSet,
        _rng: &RandomnessModel,
    ) -> Result<ProtocolResult> {
        check_dimension(config, data)?;
        if data.machines() < config.m {
            return Err(Error::InsufficientMachines {
                needed: config.m,
                available: data.machines(),
            });
        }
        let codec = self.codec.resolve(config)?;
        let mut transcript = Transcript::new();
        let estimate = broadcast_sample_means(&mut transcript, data, config.m, &codec)?;
        Ok(ProtocolResult {
            transcript,
            estimate: ParameterVector(estimate),
            machines_used: config.m,
            rounds: Vec::new(),
        })
    }

    fn estimate_from_transcript(
        &self,
        config: &ExperimentConfig,
        transcript: &Transcript,
    ) -> Result<ParameterVector> {
        let codec = self.codec.resolve(config)?;
        average_from_transcript(transcript, config.m, config.d, &codec).map(ParameterVector)
    }
}
