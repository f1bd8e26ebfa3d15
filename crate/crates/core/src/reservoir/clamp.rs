use serde::{Deserialize, Serialize};

use super::ReservoirError;

/// Bounds `[epsilon, max_val]` for the positive-orthant projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClampConfig {
    pub epsilon: f64,
    pub max_val: f64,
}

impl Default for ClampConfig {
    fn default() -> Self {
        ClampConfig { epsilon: 1e-6, max_val: 1e3 }
    }
}

impl ClampConfig {
    pub fn new(epsilon: f64, max_val: f64) -> Result<Self, ReservoirError> {
        let cfg = ClampConfig { epsilon, max_val };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ReservoirError> {
        if self.epsilon > 0.0 && self.epsilon < self.max_val && self.max_val.is_finite() {
            Ok(())
        } else {
            Err(ReservoirError::InvalidClamp { epsilon: self.epsilon, max_val: self.max_val })
        }
    }

    #[inline]
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.epsilon, self.max_val)
    }
}

/// Straight-through projection: the forward value is clamped, the backward
/// pass is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct SteProjection {
    pub forward: Vec<f64>,
}

impl SteProjection {
    /// Upstream gradients pass through unchanged, clamped or not.
    pub fn backward(&self, upstream: &[f64]) -> Vec<f64> {
        upstream.to_vec()
    }
}

pub fn ste_project(x: &[f64], cfg: &ClampConfig) -> SteProjection {
    SteProjection { forward: x.iter().map(|&v| cfg.clamp(v)).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> ClampConfig {
        ClampConfig::new(1e-6, 10.0).unwrap()
    }

    #[test]
    fn interior_and_boundaries() {
        let p = ste_project(&[0.5, -2.0, 100.0], &cfg());
        assert_eq!(p.forward, vec![0.5, 1e-6, 10.0]);
        assert_eq!(p.backward(&[1.0, 1.0, 1.0]), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(ClampConfig::new(0.0, 1.0).is_err());
        assert!(ClampConfig::new(2.0, 1.0).is_err());
        assert!(ClampConfig::new(1e-6, f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn forward_in_bounds_and_identity_inside(xs in proptest::collection::vec(-50.0f64..50.0, 1..16)) {
            let c = cfg();
            let p = ste_project(&xs, &c);
            for (x, y) in xs.iter().zip(&p.forward) {
                prop_assert!(*y >= c.epsilon && *y <= c.max_val);
                if *x >= c.epsilon && *x <= c.max_val {
                    prop_assert_eq!(x, y);
                }
            }
        }

        #[test]
        fn gradient_passes_through(xs in proptest::collection::vec(-50.0f64..50.0, 1..16),
                                   g in proptest::collection::vec(-5.0f64..5.0, 16)) {
            let p = ste_project(&xs, &cfg());
            let up = &g[..xs.len()];
            prop_assert_eq!(p.backward(up), up.to_vec());
        }
    }
}
