use serde::{Deserialize, Serialize};

/// The three delays of one provisioning run, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub deployment_delay: f64,
    pub orchestration_delay: f64,
    pub provisioning_delay: f64,
}

impl LatencySample {
    /// Boundaries nest, so provisioning must cover the other two.
    pub fn is_nested(&self) -> bool {
        self.deployment_delay >= 0.0
            && self.orchestration_delay >= 0.0
            && self.provisioning_delay >= self.deployment_delay + self.orchestration_delay
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub mean: f64,
    pub stddev: f64,
}

impl DelayStats {
    /// Mean and sample standard deviation (n - 1 denominator; 0 for n < 2).
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return DelayStats {
                mean: 0.0,
                stddev: 0.0,
            };
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let stddev = if samples.len() < 2 {
            0.0
        } else {
            let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        };
        DelayStats { mean, stddev }
    }
}

/// Per-run samples plus their aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub samples: Vec<LatencySample>,
    pub deployment_delay: DelayStats,
    pub orchestration_delay: DelayStats,
    pub provisioning_delay: DelayStats,
}

impl LatencyReport {
    pub fn from_samples(samples: Vec<LatencySample>) -> Self {
        let col = |f: fn(&LatencySample) -> f64| -> Vec<f64> { samples.iter().map(f).collect() };
        LatencyReport {
            deployment_delay: DelayStats::from_samples(&col(|s| s.deployment_delay)),
            orchestration_delay: DelayStats::from_samples(&col(|s| s.orchestration_delay)),
            provisioning_delay: DelayStats::from_samples(&col(|s| s.provisioning_delay)),
            samples,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_known_values() {
        let s = DelayStats::from_samples(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert!((s.mean - 5.0).abs() < 1e-12);
        // sum of squared deviations is 32, n - 1 = 7
        assert!((s.stddev - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(DelayStats::from_samples(&[3.0]).stddev, 0.0);
        assert_eq!(DelayStats::from_samples(&[]).mean, 0.0);
    }

    #[test]
    fn nesting() {
        let ok = LatencySample {
            deployment_delay: 1.0,
            orchestration_delay: 2.0,
            provisioning_delay: 3.5,
        };
        assert!(ok.is_nested());
        let bad = LatencySample {
            provisioning_delay: 2.9,
            ..ok
        };
        assert!(!bad.is_nested());
    }
}
