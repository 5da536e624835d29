use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::{normal_cdf, normal_pdf, normal_quantile};
use crate::rng::Stream;

use super::joint::{entropy, Axis, DiscreteJoint};

/// Slack on every discretized SDPI comparison, in bits.
pub const SDPI_TOLERANCE: f64 = 0.02;
/// Largest tolerated loss of probability mass on the grids.
pub const DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianPosterior {
    pub mean: f64,
    pub variance: f64,
}

/// Posterior of V ~ N(0, δ²) after observing the sum of `n` draws from
/// N(V, σ²).
pub fn gaussian_posterior(delta2: f64, sigma2: f64, n: usize, xbar_sum: f64) -> Result<GaussianPosterior> {
    if !(delta2.is_finite() && delta2 > 0.0 && sigma2.is_finite() && sigma2 > 0.0) || n == 0 {
        return Err(Error::InvalidConfig(format!(
            "posterior needs positive variances and n >= 1, got delta2 = {delta2}, sigma2 = {sigma2}, n = {n}"
        )));
    }
    let denom = sigma2 + n as f64 * delta2;
    Ok(GaussianPosterior {
        mean: xbar_sum * delta2 / denom,
        variance: delta2 * sigma2 / denom,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianChainSpec {
    pub delta2: f64,
    pub sigma2: f64,
    pub n: usize,
    #[serde(default = "default_cells")]
    pub v_cells: usize,
    #[serde(default = "default_cells")]
    pub s_cells: usize,
    /// Half-width of both grids in standard deviations.
    #[serde(default = "default_span")]
    pub span_sd: f64,
}

fn default_cells() -> usize {
    512
}

fn default_span() -> f64 {
    6.0
}

impl GaussianChainSpec {
    pub fn new(delta2: f64, sigma2: f64, n: usize) -> Self {
        GaussianChainSpec {
            delta2,
            sigma2,
            n,
            v_cells: default_cells(),
            s_cells: default_cells(),
            span_sd: default_span(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.delta2) || !positive(self.sigma2) {
            return Err(Error::InvalidConfig("chain variances must be positive".into()));
        }
        if self.n == 0 || self.v_cells < 2 || self.s_cells < 2 {
            return Err(Error::InvalidConfig("chain needs n >= 1 and at least 2 cells per grid".into()));
        }
        if !positive(self.span_sd) {
            return Err(Error::InvalidConfig("grid span must be positive".into()));
        }
        Ok(())
    }

    /// Squared correlation between V and the sum statistic.
    pub fn rho2(&self) -> f64 {
        let signal = self.n as f64 * self.delta2;
        signal / (self.sigma2 + signal)
    }

    /// ½·log₂(1 + nδ²/σ²), the mutual information between V and the sum.
    pub fn closed_form_information(&self) -> f64 {
        0.5 * (1.0 + self.n as f64 * self.delta2 / self.sigma2).log2()
    }

    fn sum_sd(&self) -> f64 {
        let n = self.n as f64;
        (n * n * self.delta2 + n * self.sigma2).sqrt()
    }
}

/// P(a < Z < b) for a standard normal, using the tail that avoids cancellation.
fn interval_prob(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        normal_cdf(-a) - normal_cdf(-b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

/// Standardized edges of `cells` equal-probability cells on `[−span, span]`.
fn equal_probability_edges(cells: usize, span: f64) -> Vec<f64> {
    let lo = normal_cdf(-span);
    let width = (normal_cdf(span) - lo) / cells as f64;
    let mut edges: Vec<f64> = (0..=cells).map(|k| normal_quantile(lo + k as f64 * width)).collect();
    edges[0] = -span;
    edges[cells] = span;
    edges
}

/// Maps the standardized sum statistic to a message symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantizer {
    Constant,
    Sign,
    /// Symbol = number of cuts at or below the statistic; cuts in standard
    /// deviations of the sum.
    Thresholds { cuts: Vec<f64> },
}

impl Quantizer {
    pub fn validate(&self) -> Result<()> {
        if let Quantizer::Thresholds { cuts } = self {
            if cuts.is_empty() || cuts.iter().any(|c| !c.is_finite()) || cuts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(
                    "threshold cuts must be finite, nonempty and strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn alphabet_size(&self) -> usize {
        match self {
            Quantizer::Constant => 1,
            Quantizer::Sign => 2,
            Quantizer::Thresholds { cuts } => cuts.len() + 1,
        }
    }

    pub fn apply(&self, z: f64) -> usize {
        match self {
            Quantizer::Constant => 0,
            Quantizer::Sign => usize::from(z >= 0.0),
            Quantizer::Thresholds { cuts } => cuts.iter().filter(|c| **c <= z).count(),
        }
    }

    /// One to four cuts uniform on [−2, 2].
    pub fn random_thresholds(rng: &mut Stream) -> Self {
        let count = 1 + (rng.next_word() % 4) as usize;
        let mut cuts: Vec<f64> = (0..count).map(|_| 4.0 * rng.uniform() - 2.0).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        Quantizer::Thresholds { cuts }
    }
}

/// Discretized Markov chain V → S = Σ X^i.
#[derive(Debug, Clone)]
pub struct GaussianChain {
    spec: GaussianChainSpec,
    /// Standardized medians of the S cells.
    s_medians: Vec<f64>,
    /// p(v, s), v-major.
    table: Vec<f64>,
    drift: f64,
}

impl GaussianChain {
    pub fn build(spec: &GaussianChainSpec) -> Result<Self> {
        spec.validate()?;
        let delta = spec.delta2.sqrt();
        let n = spec.n as f64;
        let noise_sd = (n * spec.sigma2).sqrt();
        let sd_s = spec.sum_sd();

        let v_edges = equal_probability_edges(spec.v_cells, spec.span_sd);
        // Conditional mean of V within each cell.
        let v_reps: Vec<f64> = v_edges
            .windows(2)
            .map(|w| delta * (normal_pdf(w[0]) - normal_pdf(w[1])) / interval_prob(w[0], w[1]))
            .collect();

        let s_edges: Vec<f64> = equal_probability_edges(spec.s_cells, spec.span_sd)
            .into_iter()
            .map(|e| e * sd_s)
            .collect();
        let lo = normal_cdf(-spec.span_sd);
        let width = (normal_cdf(spec.span_sd) - lo) / spec.s_cells as f64;
        let s_medians = (0..spec.s_cells)
            .map(|k| normal_quantile(lo + (k as f64 + 0.5) * width))
            .collect();

        let pv = 1.0 / spec.v_cells as f64;
        let mut table = Vec::with_capacity(spec.v_cells * spec.s_cells);
        for v in &v_reps {
            let centre = n * v;
            let mut upper = (s_edges[0] - centre) / noise_sd;
            for edge in &s_edges[1..] {
                let lower = upper;
                upper = (edge - centre) / noise_sd;
                table.push(pv * interval_prob(lower, upper));
            }
        }
        let total: f64 = table.iter().sum();
        // Mass of the transitions that falls outside the S grid.
        let drift = (total - 1.0).abs();
        if drift > DRIFT_LIMIT {
            return Err(Error::GridTooCoarse {
                drift,
                limit: DRIFT_LIMIT,
            });
        }
        table.iter_mut().for_each(|p| *p /= total);
        Ok(GaussianChain {
            spec: *spec,
            s_medians,
            table,
            drift,
        })
    }

    pub fn spec(&self) -> &GaussianChainSpec {
        &self.spec
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Joint of (V, S) on the grids.
    pub fn sum_joint(&self) -> Result<DiscreteJoint> {
        DiscreteJoint::new(
            vec![
                Axis::new("v", self.spec.v_cells),
                Axis::new("s", self.spec.s_cells),
            ],
            self.table.clone(),
        )
    }

    /// Joint of (Y, S) and of (Y, V) for a message Y = q(S).
    fn message_joints(&self, quantizer: &Quantizer) -> Result<(DiscreteJoint, DiscreteJoint)> {
        quantizer.validate()?;
        let k = quantizer.alphabet_size();
        let cells = self.spec.s_cells;
        let symbols: Vec<usize> = self.s_medians.iter().map(|z| quantizer.apply(*z)).collect();
        let mut ys = vec![0.0; k * cells];
        let mut yv = vec![0.0; k * self.spec.v_cells];
        for (v, row) in self.table.chunks_exact(cells).enumerate() {
            for (s, p) in row.iter().enumerate() {
                ys[symbols[s] * cells + s] += p;
                yv[symbols[s] * self.spec.v_cells + v] += p;
            }
        }
        let ys = DiscreteJoint::from_weights(vec![Axis::new("y", k), Axis::new("s", cells)], ys)?;
        let yv = DiscreteJoint::from_weights(
            vec![Axis::new("y", k), Axis::new("v", self.spec.v_cells)],
            yv,
        )?;
        Ok((ys, yv))
    }

    pub fn sdpi_check(&self, quantizer: &Quantizer) -> Result<SdpiReport> {
        let (ys, yv) = self.message_joints(quantizer)?;
        let i_yx = ys.mutual_information_between(&[0], &[1])?;
        let i_yv = yv.mutual_information_between(&[0], &[1])?;
        // Y is a function of the data, so I(Y;X|V) = H(Y|V).
        let i_yx_given_v = (yv.entropy_of(&[])? - entropy(&yv.marginal(&[1])?)).max(0.0);
        let rho2 = self.spec.rho2();
        let snr = self.spec.n as f64 * self.spec.delta2 / self.spec.sigma2;
        let bound = rho2 * i_yx;
        let conditional_bound = snr * i_yx_given_v;
        Ok(SdpiReport {
            delta2: self.spec.delta2,
            sigma2: self.spec.sigma2,
            n: self.spec.n,
            quantizer: quantizer.clone(),
            i_yv,
            i_yx,
            rho2,
            bound,
            holds: i_yv <= bound + SDPI_TOLERANCE,
            i_yx_given_v,
            conditional_bound,
            conditional_holds: i_yv <= conditional_bound + SDPI_TOLERANCE,
        })
    }

    pub fn calibration(&self) -> Result<CalibrationReport> {
        let discrete = self.sum_joint()?.mutual_information_between(&[0], &[1])?;
        let closed_form = self.spec.closed_form_information();
        let error = (discrete - closed_form).abs();
        Ok(CalibrationReport {
            delta2: self.spec.delta2,
            sigma2: self.spec.sigma2,
            n: self.spec.n,
            discrete_mi: discrete,
            closed_form_mi: closed_form,
            error,
            within_tolerance: error <= SDPI_TOLERANCE,
            drift: self.drift,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdpiReport {
    pub delta2: f64,
    pub sigma2: f64,
    pub n: usize,
    pub quantizer: Quantizer,
    #[serde(rename = "I_YV")]
    pub i_yv: f64,
    #[serde(rename = "I_YX")]
    pub i_yx: f64,
    pub rho2: f64,
    /// ρ²·I(Y;X).
    pub bound: f64,
    pub holds: bool,
    #[serde(rename = "I_YX_given_V")]
    pub i_yx_given_v: f64,
    /// (nδ²/σ²)·I(Y;X|V).
    pub conditional_bound: f64,
    pub conditional_holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub delta2: f64,
    pub sigma2: f64,
    pub n: usize,
    pub discrete_mi: f64,
    pub closed_form_mi: f64,
    pub error: f64,
    pub within_tolerance: bool,
    pub drift: f64,
}

pub fn sdpi_check(spec: &GaussianChainSpec, quantizer: &Quantizer) -> Result<SdpiReport> {
    GaussianChain::build(spec)?.sdpi_check(quantizer)
}

/// (δ², n) settings of the default sweep, all with σ² = 1.
pub const SWEEP_SETTINGS: [(f64, usize); 3] = [(1.0, 1), (0.5, 4), (0.1, 16)];
