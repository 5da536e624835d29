//! Problem setup: configuration, the unknown mean, priors and Gaussian data.

use std::borrow::Cow;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::{ziggurat_table, ziggurat_with, Ziggurat};
use crate::rng::{RandomnessModel, Stream};

/// Task parameters: dimension `d`, machine budget `m`, samples per machine
/// `n` and the known noise variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub sigma2: f64,
}

impl ExperimentConfig {
    pub fn new(d: usize, m: usize, n: usize, sigma2: f64) -> Result<Self> {
        let config = ExperimentConfig { d, m, n, sigma2 };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 || self.n == 0 {
            return Err(Error::InvalidConfig(format!(
                "d, m and n must be positive (d={}, m={}, n={})",
                self.d, self.m, self.n
            )));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma2 must be finite and positive, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Same task in a different dimension.
    pub fn with_dimension(&self, d: usize) -> Self {
        ExperimentConfig { d, ..*self }
    }

    /// The centralized minimax rate dσ²/(mn).
    pub fn centralized_risk(&self) -> f64 {
        self.d as f64 * self.sigma2 / (self.m * self.n) as f64
    }
}

/// The mean vector θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(d: usize) -> Self {
        ParameterVector(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn in_unit_box(&self) -> bool {
        self.0.iter().all(|x| (-1.0..=1.0).contains(x))
    }

    pub fn squared_distance(&self, other: &ParameterVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).powi(2))
            .sum()
    }

    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|x| **x != 0.0).count()
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        ParameterVector(v)
    }
}

/// Distribution of θ.
///
/// All variants except [`PriorSpec::SparseSigns`] are product priors V^d with
/// independent coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Deterministic θ.
    PointMass { theta: ParameterVector },
    /// Each coordinate uniform on {−δ, +δ}.
    UniformPlusMinus { delta: f64 },
    /// Each coordinate N(0, δ²); unbounded.
    Gaussian { delta2: f64 },
    /// Each coordinate uniform on `[lo, hi]`.
    UniformInterval { lo: f64, hi: f64 },
    /// Uniformly random support of size `s`, nonzero entries ±`magnitude`.
    SparseSigns { s: usize, magnitude: f64 },
}

impl PriorSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            PriorSpec::PointMass { theta } => {
                if theta.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        actual: theta.dim(),
                    });
                }
                if theta.0.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidPrior("point mass has non-finite entries".into()));
                }
            }
            PriorSpec::UniformPlusMinus { delta } => {
                if !(delta.is_finite() && *delta > 0.0) {
                    return Err(Error::InvalidPrior(format!("delta must be positive, got {delta}")));
                }
            }
            PriorSpec::Gaussian { delta2 } => {
                if !(delta2.is_finite() && *delta2 > 0.0) {
                    return Err(Error::InvalidPrior(format!("delta2 must be positive, got {delta2}")));
                }
            }
            PriorSpec::UniformInterval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidPrior(format!("need lo < hi, got [{lo}, {hi}]")));
                }
            }
            PriorSpec::SparseSigns { s, magnitude } => {
                if *s > d {
                    return Err(Error::InvalidPrior(format!("support size {s} exceeds d = {d}")));
                }
                if !(magnitude.is_finite() && *magnitude > 0.0) {
                    return Err(Error::InvalidPrior(format!(
                        "magnitude must be positive, got {magnitude}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_product(&self) -> bool {
        !matches!(self, PriorSpec::SparseSigns { .. })
    }

    /// Whether every draw lies in `[-1, 1]^d`.
    pub fn is_bounded(&self) -> bool {
        match self {
            PriorSpec::PointMass { theta } => theta.in_unit_box(),
            PriorSpec::UniformPlusMinus { delta } => *delta <= 1.0,
            PriorSpec::Gaussian { .. } => false,
            PriorSpec::UniformInterval { lo, hi } => *lo >= -1.0 && *hi <= 1.0,
            PriorSpec::SparseSigns { magnitude, .. } => *magnitude <= 1.0,
        }
    }

    /// One draw of coordinate `i` of a product prior.
    pub fn draw_coordinate(&self, i: usize, rng: &mut Stream) -> Result<f64> {
        Ok(match self {
            PriorSpec::PointMass { theta } => *theta.0.get(i).ok_or(Error::DimensionMismatch {
                expected: i + 1,
                actual: theta.dim(),
            })?,
            PriorSpec::UniformPlusMinus { delta } => {
                if rng.coin() {
                    *delta
                } else {
                    -*delta
                }
            }
            PriorSpec::Gaussian { delta2 } => delta2.sqrt() * rng.standard_normal(),
            PriorSpec::UniformInterval { lo, hi } => lo + (hi - lo) * rng.uniform(),
            PriorSpec::SparseSigns { .. } => {
                return Err(Error::InvalidPrior(
                    "sparse-signs prior has dependent coordinates".into(),
                ))
            }
        })
    }

    /// The one-dimensional marginal of coordinate `i` of a product prior.
    pub fn marginal(&self, i: usize) -> Result<PriorSpec> {
        match self {
            PriorSpec::PointMass { theta } => {
                let value = *theta.0.get(i).ok_or(Error::DimensionMismatch {
                    expected: i + 1,
                    actual: theta.dim(),
                })?;
                Ok(PriorSpec::PointMass {
                    theta: ParameterVector(vec![value]),
                })
            }
            PriorSpec::SparseSigns { .. } => Err(Error::InvalidPrior(
                "sparse-signs prior is not a product prior".into(),
            )),
            other => Ok(other.clone()),
        }
    }
}

/// Draws θ from `prior` in dimension `d`.
pub fn draw_parameter(prior: &PriorSpec, d: usize, rng: &mut Stream) -> Result<ParameterVector> {
    if d == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    prior.validate(d)?;
    match prior {
        PriorSpec::PointMass { theta } => Ok(theta.clone()),
        PriorSpec::SparseSigns { s, magnitude } => {
            let mut theta = vec![0.0; d];
            for i in index::sample(rng, d, *s).into_iter() {
                theta[i] = if rng.coin() { *magnitude } else { -*magnitude };
            }
            Ok(ParameterVector(theta))
        }
        _ => (0..d)
            .map(|i| prior.draw_coordinate(i, rng))
            .collect::<Result<Vec<_>>>()
            .map(ParameterVector),
    }
}

/// Largest `n · d` a machine may draw; keeps each machine well inside its
/// own data substream.
pub const MAX_VALUES_PER_MACHINE: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    /// Entries are regenerated from the machine's data stream when read.
    Generated { theta: Vec<f64>, sigma: f64, key: u64 },
}

/// Draws of one machine's data stream.
struct MachineDraws {
    stream: Stream,
    table: &'static Ziggurat,
}

impl MachineDraws {
    #[inline(always)]
    fn new(key: u64, machine: usize) -> Self {
        MachineDraws {
            stream: Stream::substream(key, machine as u64),
            table: ziggurat_table(),
        }
    }

    #[inline(always)]
    fn next(&mut self) -> f64 {
        ziggurat_with(&mut self.stream, self.table)
    }
}

/// Samples held by a pool of machines: entry `(j, k, i)` is coordinate `i`
/// of sample `k` on machine `j`.
///
/// Machine `j` draws its samples in sample, coordinate order from its own
/// data stream, so machine `j` sees the same data whatever the pool size.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    machines: usize,
    n: usize,
    d: usize,
    storage: Storage,
}

impl SampleSet {
    pub fn from_vec(machines: usize, n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if machines == 0 || n == 0 || d == 0 {
            return Err(Error::InvalidConfig("sample set shape must be positive".into()));
        }
        if data.len() != machines * n * d {
            return Err(Error::DimensionMismatch {
                expected: machines * n * d,
                actual: data.len(),
            });
        }
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue(*x));
        }
        Ok(SampleSet {
            machines,
            n,
            d,
            storage: Storage::Dense(data),
        })
    }

    /// `machine_count × n` samples from N(θ, σ²I), generated on read.
    ///
    /// Reads agree bit for bit with [`sample_data`] on the same arguments.
    /// `sigma2 = 0` yields noiseless data.
    pub fn generated(
        theta: &ParameterVector,
        machine_count: usize,
        n: usize,
        sigma2: f64,
        rngs: &RandomnessModel,
    ) -> Result<Self> {
        let d = theta.dim();
        if machine_count == 0 || n == 0 || d == 0 {
            return Err(Error::InvalidConfig("sample set shape must be positive".into()));
        }
        if n.saturating_mul(d) > MAX_VALUES_PER_MACHINE || machine_count as u64 > u32::MAX as u64 {
            return Err(Error::InvalidConfig(format!(
                "sample set too large: {machine_count} machines of {n} x {d} values"
            )));
        }
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(Error::InvalidConfig(format!("sigma2 must be nonnegative, got {sigma2}")));
        }
        if let Some(x) = theta.0.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue(*x));
        }
        Ok(SampleSet {
            machines: machine_count,
            n,
            d,
            storage: Storage::Generated {
                theta: theta.0.clone(),
                sigma: sigma2.sqrt(),
                key: rngs.data_key(),
            },
        })
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    pub fn samples_per_machine(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Whether every entry is held in memory.
    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    /// The same samples with every entry held in memory.
    pub fn to_dense(&self) -> SampleSet {
        let data = match &self.storage {
            Storage::Dense(v) => v.clone(),
            Storage::Generated { .. } => {
                let mut data = Vec::with_capacity(self.machines * self.n * self.d);
                for j in 0..self.machines {
                    self.extend_generated(j, &mut data);
                }
                data
            }
        };
        SampleSet {
            storage: Storage::Dense(data),
            ..*self
        }
    }

    /// All entries in machine, sample, coordinate order.
    pub fn values(&self) -> Cow<'_, [f64]> {
        match &self.storage {
            Storage::Dense(v) => Cow::Borrowed(v),
            Storage::Generated { .. } => match self.to_dense().storage {
                Storage::Dense(v) => Cow::Owned(v),
                Storage::Generated { .. } => unreachable!(),
            },
        }
    }

    #[inline]
    pub fn get(&self, machine: usize, sample: usize, coordinate: usize) -> f64 {
        match &self.storage {
            Storage::Dense(v) => v[(machine * self.n + sample) * self.d + coordinate],
            Storage::Generated { theta, sigma, key } => {
                assert!(machine < self.machines && sample < self.n, "sample index out of range");
                let mut draws = MachineDraws::new(*key, machine);
                for _ in 0..sample * self.d + coordinate {
                    draws.next();
                }
                theta[coordinate] + sigma * draws.next()
            }
        }
    }

    /// All `n × d` values of one machine, sample-major.
    pub fn machine(&self, machine: usize) -> Result<Cow<'_, [f64]>> {
        self.check_machine(machine)?;
        match &self.storage {
            Storage::Dense(v) => {
                let width = self.n * self.d;
                Ok(Cow::Borrowed(&v[machine * width..(machine + 1) * width]))
            }
            Storage::Generated { .. } => {
                let mut block = Vec::with_capacity(self.n * self.d);
                self.extend_generated(machine, &mut block);
                Ok(Cow::Owned(block))
            }
        }
    }

    pub fn sample_mean(&self, machine: usize) -> Result<Vec<f64>> {
        let block = self.machine(machine)?;
        let (first, rest) = block.split_at(self.d);
        let mut offsets = vec![0.0; self.d];
        for sample in rest.chunks_exact(self.d) {
            for ((acc, x), x0) in offsets.iter_mut().zip(sample).zip(first) {
                *acc += x - x0;
            }
        }
        let n = self.n as f64;
        Ok(first.iter().zip(offsets).map(|(x0, s)| x0 + s / n).collect())
    }

    /// Direct access to generated one-sample, one-coordinate data.
    pub fn scalar_view(&self) -> Option<ScalarView> {
        match &self.storage {
            Storage::Generated { theta, sigma, key } if self.n == 1 && self.d == 1 => Some(ScalarView {
                theta: theta[0],
                sigma: *sigma,
                key: *key,
                machines: self.machines,
                table: ziggurat_table(),
            }),
            _ => None,
        }
    }

    /// Sample mean of one coordinate on one machine.
    #[inline(always)]
    pub fn coordinate_mean(&self, machine: usize, coordinate: usize) -> f64 {
        if let Storage::Generated { theta, sigma, key } = &self.storage {
            if self.n == 1 && self.d == 1 {
                assert!(machine < self.machines, "machine index out of range");
                return theta[0] + sigma * MachineDraws::new(*key, machine).next();
            }
        }
        self.general_coordinate_mean(machine, coordinate)
    }

    #[inline(never)]
    fn general_coordinate_mean(&self, machine: usize, coordinate: usize) -> f64 {
        let (theta, sigma, key) = match &self.storage {
            Storage::Dense(_) => return self.dense_coordinate_mean(machine, coordinate),
            Storage::Generated { theta, sigma, key } => (theta, *sigma, *key),
        };
        assert!(machine < self.machines && coordinate < self.d, "sample index out of range");
        let mut draws = MachineDraws::new(key, machine);
        let mut draw = |skip: usize| {
            for _ in 0..skip {
                draws.next();
            }
            theta[coordinate] + sigma * draws.next()
        };
        let x0 = draw(coordinate);
        if self.n == 1 {
            return x0;
        }
        let gap = self.d - 1;
        let mut acc = 0.0;
        for _ in 1..self.n {
            acc += draw(gap) - x0;
        }
        x0 + acc / self.n as f64
    }

    fn dense_coordinate_mean(&self, machine: usize, coordinate: usize) -> f64 {
        if self.n == 1 {
            return self.get(machine, 0, coordinate);
        }
        // Shifted by the first sample so identical samples average exactly.
        let x0 = self.get(machine, 0, coordinate);
        let mut acc = 0.0;
        for k in 1..self.n {
            acc += self.get(machine, k, coordinate) - x0;
        }
        x0 + acc / self.n as f64
    }

    fn extend_generated(&self, machine: usize, out: &mut Vec<f64>) {
        if let Storage::Generated { theta, sigma, key } = &self.storage {
            let mut draws = MachineDraws::new(*key, machine);
            for _ in 0..self.n {
                out.extend(theta.iter().map(|mean| mean + sigma * draws.next()));
            }
        }
    }

    fn check_machine(&self, machine: usize) -> Result<()> {
        if machine >= self.machines {
            return Err(Error::MachineOutOfRange {
                index: machine,
                machines: self.machines,
            });
        }
        Ok(())
    }
}

/// The single value per machine of a generated set with `n = d = 1`; reads
/// equal [`SampleSet::coordinate_mean`] bit for bit.
#[derive(Clone, Copy)]
pub struct ScalarView {
    theta: f64,
    sigma: f64,
    key: u64,
    machines: usize,
    table: &'static Ziggurat,
}

impl ScalarView {
    pub fn machines(&self) -> usize {
        self.machines
    }

    /// Value of machine `machine`; the caller keeps `machine < machines()`.
    #[inline(always)]
    pub fn value(&self, machine: usize) -> f64 {
        debug_assert!(machine < self.machines);
        let mut stream = Stream::substream(self.key, machine as u64);
        self.theta + self.sigma * ziggurat_with(&mut stream, self.table)
    }
}

/// Draws `machine_count × n` samples from N(θ, σ²I) and holds them in memory.
pub fn sample_data(
    theta: &ParameterVector,
    machine_count: usize,
    n: usize,
    sigma2: f64,
    rngs: &RandomnessModel,
) -> Result<SampleSet> {
    Ok(SampleSet::generated(theta, machine_count, n, sigma2, rngs)?.to_dense())
}

/// Coordinate-wise average of machine `machine`'s samples.
pub fn sample_mean(data: &SampleSet, machine: usize) -> Result<Vec<f64>> {
    data.sample_mean(machine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::new(1, 1, 1, 1.0).is_ok());
        assert!(ExperimentConfig::new(0, 1, 1, 1.0).is_err());
        assert!(ExperimentConfig::new(1, 0, 1, 1.0).is_err());
        assert!(ExperimentConfig::new(1, 1, 0, 1.0).is_err());
        assert!(ExperimentConfig::new(1, 1, 1, 0.0).is_err());
        assert!(ExperimentConfig::new(1, 1, 1, f64::INFINITY).is_err());
    }

    #[test]
    fn point_mass_is_returned_unchanged() {
        let theta = ParameterVector(vec![0.3, -0.5]);
        let prior = PriorSpec::PointMass { theta: theta.clone() };
        let mut rng = Stream::from_key(1);
        assert_eq!(draw_parameter(&prior, 2, &mut rng).unwrap(), theta);
        assert!(draw_parameter(&prior, 3, &mut rng).is_err());
    }

    #[test]
    fn plus_minus_prior_frequencies() {
        let prior = PriorSpec::UniformPlusMinus { delta: 0.2 };
        let mut rng = Stream::from_key(2);
        let mut plus = 0usize;
        for _ in 0..10_000 {
            let v = draw_parameter(&prior, 1, &mut rng).unwrap().0[0];
            assert!(v == 0.2 || v == -0.2);
            plus += (v > 0.0) as usize;
        }
        assert!((plus as f64 / 10_000.0 - 0.5).abs() <= 0.02);
    }

    #[test]
    fn gaussian_prior_moments() {
        let prior = PriorSpec::Gaussian { delta2: 0.01 };
        let mut rng = Stream::from_key(3);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| draw_parameter(&prior, 1, &mut rng).unwrap().0[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / 1e4;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 9_999.0;
        assert!(mean.abs() <= 3.0 * 0.1 / 100.0);
        assert!((var - 0.01).abs() <= 0.001);
        assert!(!prior.is_bounded());
    }

    #[test]
    fn sparse_signs_prior_has_exact_support() {
        let prior = PriorSpec::SparseSigns { s: 4, magnitude: 1.0 };
        let mut rng = Stream::from_key(4);
        let mut hits = [0usize; 16];
        for _ in 0..4000 {
            let theta = draw_parameter(&prior, 16, &mut rng).unwrap();
            assert_eq!(theta.support_size(), 4);
            assert!(theta.0.iter().all(|x| *x == 0.0 || x.abs() == 1.0));
            for (h, x) in hits.iter_mut().zip(&theta.0) {
                *h += (*x != 0.0) as usize;
            }
        }
        // Each coordinate is in the support with probability 1/4.
        for h in hits {
            assert!((h as f64 / 4000.0 - 0.25).abs() < 0.035);
        }
        assert!(!prior.is_product());
        assert!(prior.marginal(0).is_err());
    }

    #[test]
    fn noiseless_samples_equal_theta() {
        let theta = ParameterVector(vec![0.25, -0.75, 1.0]);
        let data = sample_data(&theta, 3, 2, 0.0, &RandomnessModel::new(5)).unwrap();
        for j in 0..3 {
            for k in 0..2 {
                for i in 0..3 {
                    assert_eq!(data.get(j, k, i), theta.0[i]);
                }
            }
            assert_eq!(sample_mean(&data, j).unwrap(), theta.0);
        }
    }

    #[test]
    fn grand_mean_and_machine_mean_variance() {
        let theta = ParameterVector::zeros(1);
        let data = sample_data(&theta, 100, 10, 1.0, &RandomnessModel::new(6)).unwrap();
        let grand = data.values().iter().sum::<f64>() / 1000.0;
        assert!(grand.abs() <= 3.0 / 1000f64.sqrt());

        let data = sample_data(&theta, 1000, 10, 1.0, &RandomnessModel::new(7)).unwrap();
        let means: Vec<f64> = (0..1000).map(|j| data.coordinate_mean(j, 0)).collect();
        let mu = means.iter().sum::<f64>() / 1000.0;
        let var = means.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / 999.0;
        // Four standard errors of a sample variance from 1000 normal draws.
        let tol = 4.0 * 0.1 * (2.0f64 / 999.0).sqrt();
        assert!((var - 0.1).abs() <= tol, "variance {var}");
    }

    #[test]
    fn per_coordinate_moments_within_four_standard_errors() {
        let theta = ParameterVector(vec![0.5, -0.2]);
        let sigma2 = 2.0;
        let data = sample_data(&theta, 500, 4, sigma2, &RandomnessModel::new(8)).unwrap();
        let count = 2000.0;
        for i in 0..2 {
            let xs: Vec<f64> = (0..500)
                .flat_map(|j| (0..4).map(move |k| (j, k)))
                .map(|(j, k)| data.get(j, k, i))
                .collect();
            let mean = xs.iter().sum::<f64>() / count;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1.0);
            assert!((mean - theta.0[i]).abs() <= 4.0 * (sigma2 / count).sqrt());
            assert!((var - sigma2).abs() <= 4.0 * sigma2 * (2.0 / (count - 1.0)).sqrt());
        }
    }

    #[test]
    fn sample_mean_edge_cases() {
        let data = SampleSet::from_vec(1, 2, 1, vec![1.0, 3.0]).unwrap();
        assert_eq!(sample_mean(&data, 0).unwrap(), vec![2.0]);
        let single = SampleSet::from_vec(2, 1, 2, vec![1.5, -2.0, 0.0, 4.0]).unwrap();
        assert_eq!(sample_mean(&single, 1).unwrap(), vec![0.0, 4.0]);
        assert_eq!(
            sample_mean(&single, 2),
            Err(Error::MachineOutOfRange { index: 2, machines: 2 })
        );
        assert!(SampleSet::from_vec(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(SampleSet::from_vec(1, 1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn same_seed_same_samples() {
        let theta = ParameterVector(vec![0.1, 0.2]);
        let a = sample_data(&theta, 7, 3, 1.0, &RandomnessModel::new(11)).unwrap();
        let b = sample_data(&theta, 7, 3, 1.0, &RandomnessModel::new(11)).unwrap();
        assert_eq!(a, b);
        // Growing the pool keeps the existing machines' data.
        let c = sample_data(&theta, 9, 3, 1.0, &RandomnessModel::new(11)).unwrap();
        assert_eq!(a.values(), &c.values()[..a.values().len()]);
    }

    #[test]
    fn generated_reads_match_dense_storage() {
        let rngs = RandomnessModel::new(12);
        for (theta, n) in [(vec![0.4], 1), (vec![0.4], 5), (vec![0.1, -0.3, 0.7], 1), (vec![0.1, -0.3, 0.7], 4)] {
            let theta = ParameterVector(theta);
            let lazy = SampleSet::generated(&theta, 6, n, 1.5, &rngs).unwrap();
            let dense = sample_data(&theta, 6, n, 1.5, &rngs).unwrap();
            assert!(!lazy.is_dense() && dense.is_dense());
            assert_eq!(lazy.to_dense(), dense);
            for j in 0..6 {
                assert_eq!(lazy.machine(j).unwrap(), dense.machine(j).unwrap());
                assert_eq!(lazy.sample_mean(j).unwrap(), dense.sample_mean(j).unwrap());
                for i in 0..theta.dim() {
                    assert_eq!(lazy.coordinate_mean(j, i).to_bits(), dense.coordinate_mean(j, i).to_bits());
                    for k in 0..n {
                        assert_eq!(lazy.get(j, k, i).to_bits(), dense.get(j, k, i).to_bits());
                    }
                }
            }
            if let Some(view) = lazy.scalar_view() {
                for j in 0..6 {
                    assert_eq!(view.value(j).to_bits(), dense.coordinate_mean(j, 0).to_bits());
                }
            }
            assert_eq!(lazy.scalar_view().is_some(), n == 1 && theta.dim() == 1);
            assert!(lazy.machine(6).is_err());
        }
    }
}
