use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::Stream;

use super::joint::{Axis, DiscreteJoint};
use super::random_weights;

/// Largest tolerated deviation from `p(x, θ) = p(θ) ∏ p(x_i | θ)`.
pub const FACTORIZATION_TOLERANCE: f64 = 1e-10;
pub const SUPERADDITIVITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuperadditivityReport {
    /// Σ_i I(X_i; Y | Θ).
    pub lhs: f64,
    /// I(X_1 … X_k; Y | Θ).
    pub rhs: f64,
    pub holds: bool,
    pub factorization_residual: f64,
}

fn factorization_residual(joint: &DiscreteJoint, x_axes: &[usize], theta_axes: &[usize]) -> Result<f64> {
    let mut keep: Vec<usize> = x_axes.to_vec();
    keep.extend_from_slice(theta_axes);
    let full = joint.marginal(&keep)?;
    let theta = joint.marginal(theta_axes)?;
    let pairs: Vec<DiscreteJoint> = x_axes
        .iter()
        .map(|x| {
            let mut axes = vec![*x];
            axes.extend_from_slice(theta_axes);
            joint.marginal(&axes)
        })
        .collect::<Result<_>>()?;
    let x_sizes: Vec<usize> = x_axes.iter().map(|a| joint.axes()[*a].size).collect();
    let theta_cells = theta.table().len();
    let x_cells: usize = x_sizes.iter().product();
    let mut worst: f64 = 0.0;
    for xi in 0..x_cells {
        // Decode the row-major X index into per-variable symbols.
        let mut rem = xi;
        let mut symbols = vec![0; x_sizes.len()];
        for (slot, size) in symbols.iter_mut().zip(&x_sizes).rev() {
            *slot = rem % size;
            rem /= size;
        }
        for t in 0..theta_cells {
            let pt = theta.table()[t];
            let actual = full.table()[xi * theta_cells + t];
            let factored = if pt > 0.0 {
                symbols
                    .iter()
                    .zip(&pairs)
                    .map(|(s, pair)| pair.table()[s * theta_cells + t] / pt)
                    .product::<f64>()
                    * pt
            } else {
                0.0
            };
            worst = worst.max((actual - factored).abs());
        }
    }
    Ok(worst)
}

/// Compares Σ_i I(X_i;Y|Θ) with I(X;Y|Θ) after checking that the X_i are
/// conditionally independent given Θ.
pub fn check_superadditivity(
    joint: &DiscreteJoint,
    x_axes: &[usize],
    y_axes: &[usize],
    theta_axes: &[usize],
) -> Result<SuperadditivityReport> {
    if x_axes.is_empty() || y_axes.is_empty() || theta_axes.is_empty() {
        return Err(Error::InvalidDistribution("X, Y and Θ groups must be nonempty".into()));
    }
    let residual = factorization_residual(joint, x_axes, theta_axes)?;
    if residual > FACTORIZATION_TOLERANCE {
        return Err(Error::NotConditionallyIndependent { residual });
    }
    let lhs = x_axes
        .iter()
        .map(|x| joint.conditional_mutual_information_between(&[*x], y_axes, theta_axes))
        .sum::<Result<f64>>()?;
    let rhs = joint.conditional_mutual_information_between(x_axes, y_axes, theta_axes)?;
    Ok(SuperadditivityReport {
        lhs,
        rhs,
        holds: lhs <= rhs + SUPERADDITIVITY_SLACK,
        factorization_residual: residual,
    })
}

/// Alphabet sizes of a generated instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceShape {
    pub x_sizes: Vec<usize>,
    pub y_size: usize,
    pub theta_size: usize,
}

/// A random joint over (X_1, …, X_k, Y, Θ) in which the X_i are independent
/// given Θ and Y is an arbitrary random channel from (X, Θ).
pub fn random_conditionally_independent_joint(shape: &InstanceShape, rng: &mut Stream) -> Result<DiscreteJoint> {
    let k = shape.x_sizes.len();
    let p_theta = random_weights(shape.theta_size, rng);
    let p_x: Vec<Vec<Vec<f64>>> = shape
        .x_sizes
        .iter()
        .map(|size| (0..shape.theta_size).map(|_| random_weights(*size, rng)).collect())
        .collect();
    let x_cells: usize = shape.x_sizes.iter().product();
    let channel: Vec<Vec<f64>> = (0..x_cells * shape.theta_size)
        .map(|_| random_weights(shape.y_size, rng))
        .collect();

    let mut axes: Vec<Axis> = shape
        .x_sizes
        .iter()
        .enumerate()
        .map(|(i, s)| Axis::new(format!("x{}", i + 1), *s))
        .collect();
    axes.push(Axis::new("y", shape.y_size));
    axes.push(Axis::new("theta", shape.theta_size));

    let mut table = Vec::with_capacity(x_cells * shape.y_size * shape.theta_size);
    let mut symbols = vec![0usize; k];
    for xi in 0..x_cells {
        let mut rem = xi;
        for (slot, size) in symbols.iter_mut().zip(&shape.x_sizes).rev() {
            *slot = rem % size;
            rem /= size;
        }
        for y in 0..shape.y_size {
            for t in 0..shape.theta_size {
                let px: f64 = symbols.iter().enumerate().map(|(i, s)| p_x[i][t][*s]).product();
                table.push(p_theta[t] * px * channel[xi * shape.theta_size + t][y]);
            }
        }
    }
    DiscreteJoint::from_weights(axes, table)
}

/// Random shape with `k ∈ {2, 3}` and every alphabet of size 2 or 3.
pub fn random_instance_shape(rng: &mut Stream) -> InstanceShape {
    let mut pick = |lo: usize, hi: usize| lo + (rng.next_word() % (hi - lo + 1) as u64) as usize;
    let k = pick(2, 3);
    InstanceShape {
        x_sizes: (0..k).map(|_| pick(2, 3)).collect(),
        y_size: pick(2, 3),
        theta_size: pick(2, 3),
    }
}
