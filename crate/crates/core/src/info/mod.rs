//! Exact information measures on finite tables and numeric checks of the
//! inequalities used in the lower-bound arguments.

mod gaussian;
mod joint;
mod superadditivity;

use serde::{Deserialize, Serialize};

pub use gaussian::{
    gaussian_posterior, sdpi_check, CalibrationReport, GaussianChain, GaussianChainSpec, GaussianPosterior,
    Quantizer, SdpiReport, DRIFT_LIMIT, SDPI_TOLERANCE, SWEEP_SETTINGS,
};
pub use joint::{
    conditional_mutual_information, entropy, mutual_information, Axis, DiscreteJoint, NORMALIZATION_TOLERANCE,
};
pub use superadditivity::{
    check_superadditivity, random_conditionally_independent_joint, random_instance_shape, InstanceShape,
    SuperadditivityReport, FACTORIZATION_TOLERANCE, SUPERADDITIVITY_SLACK,
};

use crate::error::Result;
use crate::rng::{derive_key, Domain, Stream};

/// Normalized weights with a flat Dirichlet law.
pub(crate) fn random_weights(len: usize, rng: &mut Stream) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len).map(|_| rng.exponential()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Random joint with the given alphabet sizes and axes named `v0, v1, …`.
pub fn random_joint(shape: &[usize], rng: &mut Stream) -> Result<DiscreteJoint> {
    let axes = shape
        .iter()
        .enumerate()
        .map(|(i, s)| Axis::new(format!("v{i}"), *s))
        .collect();
    let cells = shape.iter().product();
    DiscreteJoint::from_weights(axes, random_weights(cells, rng))
}

pub const CHAIN_RULE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainRuleSummary {
    pub instances: usize,
    pub max_abs_error: f64,
    pub holds: bool,
}

/// I(A;B,C) against I(A;C) + I(A;B|C) on random joints with alphabets of
/// size 2 or 3.
pub fn chain_rule_sweep(instances: usize, rng: &mut Stream) -> Result<ChainRuleSummary> {
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let shape: Vec<usize> = (0..3).map(|_| 2 + (rng.next_word() % 2) as usize).collect();
        let j = random_joint(&shape, rng)?;
        let joint_side = j.mutual_information_between(&[0], &[1, 2])?;
        let split = j.mutual_information_between(&[0], &[2])? + j.conditional_mutual_information_between(&[0], &[1], &[2])?;
        worst = worst.max((joint_side - split).abs());
    }
    Ok(ChainRuleSummary {
        instances,
        max_abs_error: worst,
        holds: worst <= CHAIN_RULE_TOLERANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuperadditivitySummary {
    pub instances: usize,
    pub violations: usize,
    /// Smallest rhs − lhs seen.
    pub min_gap: f64,
    pub holds: bool,
}

pub fn superadditivity_sweep(instances: usize, rng: &mut Stream) -> Result<SuperadditivitySummary> {
    let mut violations = 0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..instances {
        let shape = random_instance_shape(rng);
        let joint = random_conditionally_independent_joint(&shape, rng)?;
        let k = shape.x_sizes.len();
        let x: Vec<usize> = (0..k).collect();
        let report = check_superadditivity(&joint, &x, &[k], &[k + 1])?;
        min_gap = min_gap.min(report.rhs - report.lhs);
        violations += usize::from(!report.holds);
    }
    Ok(SuperadditivitySummary {
        instances,
        violations,
        min_gap,
        holds: violations == 0,
    })
}

/// A user-supplied table to run through the superadditivity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointInstance {
    pub name: String,
    pub axes: Vec<Axis>,
    pub table: Vec<f64>,
    pub x_axes: Vec<usize>,
    pub y_axes: Vec<usize>,
    pub theta_axes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoSuiteOptions {
    pub seed: u64,
    #[serde(default = "default_instances")]
    pub chain_rule_instances: usize,
    #[serde(default = "default_instances")]
    pub superadditivity_instances: usize,
    #[serde(default = "default_quantizers")]
    pub quantizers_per_setting: usize,
    /// (δ², n) pairs with σ² = `sigma2`.
    #[serde(default = "default_settings")]
    pub settings: Vec<(f64, usize)>,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub joints: Vec<JointInstance>,
}

fn default_instances() -> usize {
    1000
}

fn default_quantizers() -> usize {
    8
}

fn default_settings() -> Vec<(f64, usize)> {
    SWEEP_SETTINGS.to_vec()
}

fn default_sigma2() -> f64 {
    1.0
}

impl InfoSuiteOptions {
    pub fn new(seed: u64) -> Self {
        InfoSuiteOptions {
            seed,
            chain_rule_instances: default_instances(),
            superadditivity_instances: default_instances(),
            quantizers_per_setting: default_quantizers(),
            settings: default_settings(),
            sigma2: default_sigma2(),
            joints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedSuperadditivity {
    pub name: String,
    #[serde(flatten)]
    pub report: SuperadditivityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoSuiteReport {
    pub seed: u64,
    pub chain_rule: ChainRuleSummary,
    pub superadditivity: SuperadditivitySummary,
    pub joints: Vec<NamedSuperadditivity>,
    pub calibration: Vec<CalibrationReport>,
    /// Random threshold quantizers per setting, plus a constant and a sign
    /// quantizer for each setting.
    pub sdpi: Vec<SdpiReport>,
    pub sdpi_random_instances: usize,
    pub all_hold: bool,
}

impl InfoSuiteReport {
    /// Names of the checks that failed.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.chain_rule.holds {
            out.push(format!("chain rule: max error {:e}", self.chain_rule.max_abs_error));
        }
        if !self.superadditivity.holds {
            out.push(format!("superadditivity: {} random violations", self.superadditivity.violations));
        }
        for j in self.joints.iter().filter(|j| !j.report.holds) {
            out.push(format!("superadditivity: joint {}", j.name));
        }
        for c in self.calibration.iter().filter(|c| !c.within_tolerance) {
            out.push(format!("calibration: delta2 = {}, n = {}", c.delta2, c.n));
        }
        for r in self.sdpi.iter().filter(|r| !(r.holds && r.conditional_holds)) {
            out.push(format!("sdpi: delta2 = {}, n = {}, quantizer {:?}", r.delta2, r.n, r.quantizer));
        }
        out
    }
}

pub fn run_info_suite(options: &InfoSuiteOptions) -> Result<InfoSuiteReport> {
    let stream = |index: u64| Stream::from_key(derive_key(options.seed, Domain::Arm, index));
    let chain_rule = chain_rule_sweep(options.chain_rule_instances, &mut stream(0))?;
    let superadditivity = superadditivity_sweep(options.superadditivity_instances, &mut stream(1))?;

    let joints = options
        .joints
        .iter()
        .map(|j| {
            let joint = DiscreteJoint::new(j.axes.clone(), j.table.clone())?;
            Ok(NamedSuperadditivity {
                name: j.name.clone(),
                report: check_superadditivity(&joint, &j.x_axes, &j.y_axes, &j.theta_axes)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut quantizer_rng = stream(2);
    let mut calibration = Vec::new();
    let mut sdpi = Vec::new();
    for &(delta2, n) in &options.settings {
        let chain = GaussianChain::build(&GaussianChainSpec::new(delta2, options.sigma2, n))?;
        calibration.push(chain.calibration()?);
        sdpi.push(chain.sdpi_check(&Quantizer::Constant)?);
        sdpi.push(chain.sdpi_check(&Quantizer::Sign)?);
        for _ in 0..options.quantizers_per_setting {
            sdpi.push(chain.sdpi_check(&Quantizer::random_thresholds(&mut quantizer_rng))?);
        }
    }

    let mut report = InfoSuiteReport {
        seed: options.seed,
        chain_rule,
        superadditivity,
        joints,
        calibration,
        sdpi,
        sdpi_random_instances: options.settings.len() * options.quantizers_per_setting,
        all_hold: false,
    };
    report.all_hold = report.violations().is_empty();
    Ok(report)
}
