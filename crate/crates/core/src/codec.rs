//! Fixed-point quantization of real-valued messages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ExperimentConfig;

/// Largest supported width; codes stay exactly representable in an `f64`.
pub const MAX_CODEC_BITS: u32 = 52;

/// Uniform quantizer of `[lo, hi]` into `2^bits` cells, decoded at cell midpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointCodec {
    lo: f64,
    hi: f64,
    bits: u32,
}

impl FixedPointCodec {
    pub fn new(lo: f64, hi: f64, bits: u32) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidCodec(format!("need finite lo < hi, got [{lo}, {hi}]")));
        }
        if bits == 0 || bits > MAX_CODEC_BITS {
            return Err(Error::InvalidCodec(format!(
                "bits must be in 1..={MAX_CODEC_BITS}, got {bits}"
            )));
        }
        let codec = FixedPointCodec { lo, hi, bits };
        if !(codec.cell_width() > 0.0) {
            return Err(Error::InvalidCodec("cell width underflows".into()));
        }
        Ok(codec)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    fn levels(&self) -> f64 {
        (1u64 << self.bits) as f64
    }

    pub fn max_code(&self) -> u64 {
        (1u64 << self.bits) - 1
    }

    /// Cell width `(hi − lo) / 2^bits`.
    pub fn cell_width(&self) -> f64 {
        (self.hi - self.lo) / self.levels()
    }

    /// `clamp(floor((x − lo)/w), 0, 2^bits − 1)`; out-of-range inputs saturate.
    pub fn encode(&self, x: f64) -> Result<u64> {
        if !x.is_finite() {
            return Err(Error::NonFiniteValue(x));
        }
        let scaled = ((x - self.lo) / (self.hi - self.lo) * self.levels()).floor();
        if scaled <= 0.0 {
            Ok(0)
        } else if scaled >= self.max_code() as f64 {
            Ok(self.max_code())
        } else {
            Ok(scaled as u64)
        }
    }

    /// Midpoint of cell `code`.
    pub fn decode(&self, code: u64) -> Result<f64> {
        if code > self.max_code() {
            return Err(Error::CodeOutOfRange {
                code,
                bits: self.bits,
            });
        }
        Ok(self.lo + (code as f64 + 0.5) * self.cell_width())
    }
}

/// Codec sized for sample means: range `±(1 + 6σ/√n)` and
/// `ceil(log2((hi − lo)·√(mn)/σ)) + 2` bits.
pub fn default_mean_codec(config: &ExperimentConfig) -> FixedPointCodec {
    let sigma = config.sigma();
    let guard = 6.0 * sigma / (config.n as f64).sqrt();
    let lo = -1.0 - guard;
    let hi = 1.0 + guard;
    let resolution = (hi - lo) * ((config.m * config.n) as f64).sqrt() / sigma;
    let bits = (resolution.log2().ceil().max(0.0) as u32 + 2).clamp(1, MAX_CODEC_BITS);
    FixedPointCodec { lo, hi, bits }
}

/// How a protocol writes real numbers to the blackboard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CodecChoice {
    /// [`default_mean_codec`] for the run's configuration.
    Default,
    /// An explicit quantizer.
    Fixed { lo: f64, hi: f64, bits: u32 },
    /// Unquantized debug mode: raw IEEE-754 doubles, 64 bits each.
    Exact,
}

impl CodecChoice {
    pub fn resolve(&self, config: &ExperimentConfig) -> Result<MessageCodec> {
        Ok(match *self {
            CodecChoice::Default => MessageCodec::Fixed(default_mean_codec(config)),
            CodecChoice::Fixed { lo, hi, bits } => {
                MessageCodec::Fixed(FixedPointCodec::new(lo, hi, bits)?)
            }
            CodecChoice::Exact => MessageCodec::Exact,
        })
    }
}

/// A resolved per-value message codec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MessageCodec {
    Fixed(FixedPointCodec),
    Exact,
}

impl MessageCodec {
    pub fn bits_per_value(&self) -> u32 {
        match self {
            MessageCodec::Fixed(c) => c.bits(),
            MessageCodec::Exact => 64,
        }
    }

    pub fn encode(&self, x: f64) -> Result<u64> {
        match self {
            MessageCodec::Fixed(c) => c.encode(x),
            MessageCodec::Exact if x.is_finite() => Ok(x.to_bits()),
            MessageCodec::Exact => Err(Error::NonFiniteValue(x)),
        }
    }

    pub fn decode(&self, code: u64) -> Result<f64> {
        match self {
            MessageCodec::Fixed(c) => c.decode(code),
            MessageCodec::Exact => Ok(f64::from_bits(code)),
        }
    }
}
