use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of the total mass from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub size: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Axis {
            name: name.into(),
            size,
        }
    }
}

/// A probability table over the product of finite alphabets, row-major with
/// the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    axes: Vec<Axis>,
    table: Vec<f64>,
}

fn plogp_bits(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

impl DiscreteJoint {
    /// Validates shape, non-negativity and normalization.
    pub fn new(axes: Vec<Axis>, table: Vec<f64>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.size == 0) {
            return Err(Error::InvalidDistribution("every axis needs a nonempty alphabet".into()));
        }
        let cells: usize = axes.iter().map(|a| a.size).product();
        if table.len() != cells {
            return Err(Error::DimensionMismatch {
                expected: cells,
                actual: table.len(),
            });
        }
        if let Some(p) = table.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("invalid probability {p}")));
        }
        let total: f64 = table.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Unnormalized { total });
        }
        Ok(DiscreteJoint { axes, table })
    }

    /// Normalizes nonnegative weights before validating.
    pub fn from_weights(axes: Vec<Axis>, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Unnormalized { total });
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(axes, weights)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.size).collect()
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.name == name)
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.axes.len()];
        for i in (0..self.axes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.axes[i + 1].size;
        }
        strides
    }

    fn check_axes(&self, axes: &[usize]) -> Result<()> {
        for (k, a) in axes.iter().enumerate() {
            if *a >= self.rank() {
                return Err(Error::InvalidDistribution(format!("axis {a} out of range")));
            }
            if axes[..k].contains(a) {
                return Err(Error::InvalidDistribution(format!("axis {a} repeated")));
            }
        }
        Ok(())
    }

    /// Flat index into the marginal over `keep` for every cell of the table.
    fn projection(&self, keep: &[usize]) -> (Vec<usize>, usize) {
        let shape = self.shape();
        let strides = self.strides();
        let mut out_strides = vec![0usize; self.rank()];
        let mut acc = 1;
        for &a in keep.iter().rev() {
            out_strides[a] = acc;
            acc *= shape[a];
        }
        let index = (0..self.table.len())
            .map(|flat| {
                (0..self.rank())
                    .map(|a| (flat / strides[a]) % shape[a] * out_strides[a])
                    .sum()
            })
            .collect();
        (index, acc)
    }

    fn marginal_table(&self, keep: &[usize]) -> Vec<f64> {
        let (index, cells) = self.projection(keep);
        let mut out = vec![0.0; cells];
        for (p, idx) in self.table.iter().zip(index) {
            out[idx] += p;
        }
        out
    }

    /// Marginal distribution of `keep`, in the given order.
    pub fn marginal(&self, keep: &[usize]) -> Result<DiscreteJoint> {
        self.check_axes(keep)?;
        if keep.is_empty() {
            return Err(Error::InvalidDistribution("marginal over no axes".into()));
        }
        let axes = keep.iter().map(|a| self.axes[*a].clone()).collect();
        DiscreteJoint::from_weights(axes, self.marginal_table(keep))
    }

    /// Joint entropy in bits of the variables in `axes` (all axes if empty).
    pub fn entropy_of(&self, axes: &[usize]) -> Result<f64> {
        self.check_axes(axes)?;
        if axes.is_empty() {
            return Ok(self.table.iter().map(|p| plogp_bits(*p)).sum());
        }
        Ok(self.marginal_table(axes).into_iter().map(plogp_bits).sum())
    }

    /// I(A;B) = H(A) + H(B) − H(A,B), in bits.
    pub fn mutual_information_between(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidDistribution("mutual information needs two nonempty groups".into()));
        }
        let ab: Vec<usize> = a.iter().chain(b).copied().collect();
        self.check_axes(&ab)?;
        let mi = self.entropy_of(a)? + self.entropy_of(b)? - self.entropy_of(&ab)?;
        Ok(mi.max(0.0))
    }

    /// I(A;B|C) = Σ_c p(c)·I(A;B | C = c), in bits.
    pub fn conditional_mutual_information_between(
        &self,
        a: &[usize],
        b: &[usize],
        c: &[usize],
    ) -> Result<f64> {
        if c.is_empty() {
            return self.mutual_information_between(a, b);
        }
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidDistribution("mutual information needs two nonempty groups".into()));
        }
        let all: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
        self.check_axes(&all)?;
        let (c_index, c_cells) = self.projection(c);
        let (a_index, a_cells) = self.projection(a);
        let (b_index, b_cells) = self.projection(b);
        // Slice the table by the value of C and accumulate p(a, b | c).
        let mut slices = vec![vec![0.0; a_cells * b_cells]; c_cells];
        let mut pc = vec![0.0; c_cells];
        for (flat, p) in self.table.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            pc[c_index[flat]] += p;
            slices[c_index[flat]][a_index[flat] * b_cells + b_index[flat]] += p;
        }
        let mut total = 0.0;
        for (slice, weight) in slices.iter().zip(&pc) {
            if *weight <= 0.0 {
                continue;
            }
            let mut pa = vec![0.0; a_cells];
            let mut pb = vec![0.0; b_cells];
            let mut h_ab = 0.0;
            for ia in 0..a_cells {
                for ib in 0..b_cells {
                    let p = slice[ia * b_cells + ib] / weight;
                    pa[ia] += p;
                    pb[ib] += p;
                    h_ab += plogp_bits(p);
                }
            }
            let h_a: f64 = pa.into_iter().map(plogp_bits).sum();
            let h_b: f64 = pb.into_iter().map(plogp_bits).sum();
            total += weight * (h_a + h_b - h_ab);
        }
        Ok(total.max(0.0))
    }
}

/// Shannon entropy in bits of the whole table.
pub fn entropy(dist: &DiscreteJoint) -> f64 {
    dist.table.iter().map(|p| plogp_bits(*p)).sum()
}

/// I(A;B) of a two-axis joint.
pub fn mutual_information(joint: &DiscreteJoint) -> Result<f64> {
    if joint.rank() != 2 {
        return Err(Error::InvalidDistribution(format!(
            "mutual_information needs a 2-axis joint, got {}",
            joint.rank()
        )));
    }
    joint.mutual_information_between(&[0], &[1])
}

/// I(A;B|C) of a three-axis joint ordered (A, B, C).
pub fn conditional_mutual_information(joint: &DiscreteJoint) -> Result<f64> {
    if joint.rank() != 3 {
        return Err(Error::InvalidDistribution(format!(
            "conditional_mutual_information needs a 3-axis joint, got {}",
            joint.rank()
        )));
    }
    joint.conditional_mutual_information_between(&[0], &[1], &[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn two(name_a: &str, name_b: &str, table: Vec<f64>) -> DiscreteJoint {
        DiscreteJoint::new(vec![Axis::new(name_a, 2), Axis::new(name_b, 2)], table).unwrap()
    }

    fn random_joint(rng: &mut Stream, shape: &[usize]) -> DiscreteJoint {
        let axes = shape.iter().enumerate().map(|(i, s)| Axis::new(format!("v{i}"), *s)).collect();
        let cells: usize = shape.iter().product();
        DiscreteJoint::from_weights(axes, (0..cells).map(|_| rng.exponential()).collect()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let uniform = DiscreteJoint::new(vec![Axis::new("a", 2)], vec![0.5, 0.5]).unwrap();
        assert_eq!(entropy(&uniform), 1.0);
        let point = DiscreteJoint::new(vec![Axis::new("a", 3)], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(entropy(&point), 0.0);
        let bern = DiscreteJoint::new(vec![Axis::new("a", 2)], vec![0.25, 0.75]).unwrap();
        let by_hand = -0.25 * 0.25f64.log2() - 0.75 * 0.75f64.log2();
        assert!((entropy(&bern) - 0.8113).abs() < 1e-4);
        assert!((entropy(&bern) - by_hand).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(matches!(
            DiscreteJoint::new(vec![Axis::new("a", 2)], vec![0.5, 0.6]),
            Err(Error::Unnormalized { .. })
        ));
        assert!(DiscreteJoint::new(vec![Axis::new("a", 2)], vec![1.5, -0.5]).is_err());
        assert!(DiscreteJoint::new(vec![Axis::new("a", 2)], vec![1.0]).is_err());
        assert!(DiscreteJoint::new(vec![Axis::new("a", 0)], vec![]).is_err());
        let j = two("a", "b", vec![0.25; 4]);
        assert!(j.entropy_of(&[2]).is_err());
        assert!(j.mutual_information_between(&[0], &[0]).is_err());
    }

    #[test]
    fn mutual_information_examples() {
        assert!(mutual_information(&two("a", "b", vec![0.25; 4])).unwrap().abs() < 1e-15);
        assert!((mutual_information(&two("a", "b", vec![0.5, 0.0, 0.0, 0.5])).unwrap() - 1.0).abs() < 1e-15);
        // Binary symmetric channel with crossover 1/4 and uniform input.
        let bsc = two("x", "y", vec![0.375, 0.125, 0.125, 0.375]);
        let capacity = 1.0 + 0.25 * 0.25f64.log2() + 0.75 * 0.75f64.log2();
        let mi = mutual_information(&bsc).unwrap();
        assert!((mi - 0.1887).abs() < 1e-4);
        assert!((mi - capacity).abs() < 1e-14);
    }

    #[test]
    fn conditional_examples() {
        // A, B independent given C.
        let mut table = Vec::new();
        let pc = [0.3, 0.7];
        let pa = [[0.2, 0.8], [0.6, 0.4]];
        let pb = [[0.5, 0.5], [0.1, 0.9]];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    table.push(pc[c] * pa[c][a] * pb[c][b]);
                }
            }
        }
        let j = DiscreteJoint::new(vec![Axis::new("a", 2), Axis::new("b", 2), Axis::new("c", 2)], table).unwrap();
        assert!(conditional_mutual_information(&j).unwrap() < 1e-14);
        assert!(j.mutual_information_between(&[0], &[1]).unwrap() > 1e-3);

        // Constant C reduces to the unconditional quantity.
        let bsc = [0.375, 0.125, 0.125, 0.375];
        let constant = DiscreteJoint::new(
            vec![Axis::new("a", 2), Axis::new("b", 2), Axis::new("c", 1)],
            bsc.to_vec(),
        )
        .unwrap();
        let mi = mutual_information(&two("a", "b", bsc.to_vec())).unwrap();
        assert!((conditional_mutual_information(&constant).unwrap() - mi).abs() < 1e-15);
        assert!(mutual_information(&constant).is_err());
    }

    #[test]
    fn chain_rule_and_bounds_on_random_joints() {
        let mut rng = Stream::from_key(77);
        for _ in 0..200 {
            let shape = [2 + rng.next_word() as usize % 2, 2, 2 + rng.next_word() as usize % 2];
            let j = random_joint(&mut rng, &shape);
            let lhs = j.mutual_information_between(&[0], &[1, 2]).unwrap();
            let rhs = j.mutual_information_between(&[0], &[2]).unwrap()
                + j.conditional_mutual_information_between(&[0], &[1], &[2]).unwrap();
            assert!((lhs - rhs).abs() < 1e-10);
            let ab = j.mutual_information_between(&[0], &[1]).unwrap();
            assert!(ab >= 0.0);
            assert!(ab <= j.entropy_of(&[0]).unwrap().min(j.entropy_of(&[1]).unwrap()) + 1e-12);
        }
    }

    #[test]
    fn marginal_keeps_requested_order() {
        let mut rng = Stream::from_key(5);
        let j = random_joint(&mut rng, &[2, 3, 4]);
        let m = j.marginal(&[2, 0]).unwrap();
        assert_eq!(m.shape(), vec![4, 2]);
        // Brute-force p(c, a).
        for c in 0..4 {
            for a in 0..2 {
                let direct: f64 = (0..3).map(|b| j.table()[a * 12 + b * 4 + c]).sum();
                assert!((m.table()[c * 2 + a] - direct).abs() < 1e-15);
            }
        }
    }
}
