use serde::{Deserialize, Serialize};

pub const VALUE_CLIP: f64 = 3.0;
pub const STATS_EPS: f64 = 1e-8;

/// Running mean and population variance (Welford).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardStats {
    pub count: u64,
    pub mean: f64,
    /// Sum of squared deviations from the running mean.
    pub m2: f64,
}

impl RewardStats {
    pub fn update(&mut self, z: f64) {
        self.count += 1;
        let delta = z - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (z - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// `clip((z - mean) / (std + eps), -3, 3)`.
    pub fn normalize(&self, z: f64) -> f64 {
        ((z - self.mean) / (self.std() + STATS_EPS)).clamp(-VALUE_CLIP, VALUE_CLIP)
    }

    /// Divides by the running standard deviation only.
    pub fn scale(&self, z: f64) -> f64 {
        z / (self.std() + STATS_EPS)
    }
}

/// Updates `stats` with `z`, then normalizes it.
pub fn normalize_value(z: f64, stats: &mut RewardStats) -> f64 {
    stats.update(z);
    stats.normalize(z)
}

/// Visit-count temperature by training progress.
pub fn temperature(progress: f64) -> f64 {
    if progress < 0.3 {
        1.0
    } else if progress < 0.6 {
        0.7
    } else {
        0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn matches_two_pass_reference() {
        let mut rng = crate::seed::rng(5);
        let xs: Vec<f64> = (0..2000).map(|_| rng.random_range(-50.0..150.0)).collect();
        let mut s = RewardStats::default();
        for (i, &x) in xs.iter().enumerate() {
            s.update(x);
            let part = &xs[..=i];
            let mean = part.iter().sum::<f64>() / part.len() as f64;
            let var = part.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / part.len() as f64;
            assert!((s.mean - mean).abs() <= 1e-9);
            assert!((s.variance() - var).abs() <= 1e-9 * var.max(1.0));
        }
    }

    #[test]
    fn normalization_examples() {
        let mut s = RewardStats::default();
        assert_eq!(normalize_value(42.0, &mut s), 0.0);
        for z in [1.0, 2.0, 3.0, 4.0] {
            s.update(z);
        }
        assert_eq!(s.normalize(s.mean), 0.0);
        assert_eq!(s.normalize(s.mean + 10.0 * s.std()), VALUE_CLIP);
        assert_eq!(s.normalize(s.mean - 10.0 * s.std()), -VALUE_CLIP);
    }

    #[test]
    fn temperature_schedule() {
        assert_eq!(temperature(0.1), 1.0);
        assert_eq!(temperature(0.4), 0.7);
        assert_eq!(temperature(0.95), 0.5);
        assert_eq!(temperature(0.3), 0.7);
        assert_eq!(temperature(0.6), 0.5);
    }
}
