use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatsSummary {
    pub mean: f64,
    /// Sample standard deviation over √trials.
    pub stderr: f64,
    pub trials: usize,
    /// mean ± 1.96·stderr.
    pub ci95: (f64, f64),
}

impl StatsSummary {
    pub const Z95: f64 = 1.96;

    /// Two-pass mean and sample variance, summed in slice order.
    pub fn from_values(values: &[f64]) -> Self {
        let trials = values.len();
        if trials == 0 {
            return StatsSummary {
                mean: f64::NAN,
                stderr: f64::NAN,
                trials,
                ci95: (f64::NAN, f64::NAN),
            };
        }
        let mean = values.iter().sum::<f64>() / trials as f64;
        let stderr = if trials > 1 {
            let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (trials - 1) as f64).sqrt() / (trials as f64).sqrt()
        } else {
            0.0
        };
        StatsSummary {
            mean,
            stderr,
            trials,
            ci95: (mean - Self::Z95 * stderr, mean + Self::Z95 * stderr),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci95.0 <= value && value <= self.ci95.1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_summary() {
        let s = StatsSummary::from_values(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        // Sample variance 5/3, stderr √(5/3)/2.
        assert!((s.stderr - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert!((s.ci95.1 - s.mean - 1.96 * s.stderr).abs() < 1e-15);
        assert!(s.contains(2.5) && !s.contains(10.0));
        let single = StatsSummary::from_values(&[7.0]);
        assert_eq!((single.mean, single.stderr), (7.0, 0.0));
        assert!(StatsSummary::from_values(&[]).mean.is_nan());
    }
}
