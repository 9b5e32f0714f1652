use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tuning knobs for coarse-to-fine template matching.
///
/// Distances are in meters except `delta_f`, which is in descriptor units
/// (scale-free in `[0, 2]` for unit-normalized features). `beta` is per
/// meter: `beta = 10` trades 1 cm of structural error for 0.1 of feature
/// distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchParams {
    pub beta: f64,
    pub delta_f: f64,
    pub delta_p: f64,
    pub ransac_iterations: usize,
    pub ransac_inlier_radius: f64,
    pub candidate_cap: usize,
    pub scale_bounds: (f64, f64),
    pub rng_seed: u64,
    /// Keep the descriptor gate `dis ≤ delta_f` active during fine
    /// refinement, so occluded keypoints are inferred rather than snapped
    /// onto dissimilar neighbours.
    pub fine_feature_gate: bool,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            beta: 10.0,
            delta_f: 0.6,
            delta_p: 0.05,
            ransac_iterations: 512,
            ransac_inlier_radius: 0.02,
            candidate_cap: 50,
            scale_bounds: (0.5, 2.0),
            rng_seed: 0,
            fine_feature_gate: true,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid(format!(
                "beta must be nonnegative, got {}",
                self.beta
            )));
        }
        positive("delta_f", self.delta_f)?;
        positive("delta_p", self.delta_p)?;
        positive("ransac_inlier_radius", self.ransac_inlier_radius)?;
        let (lo, hi) = self.scale_bounds;
        positive("scale_bounds.0", lo)?;
        positive("scale_bounds.1", hi)?;
        if lo > hi {
            return Err(Error::invalid(format!(
                "scale_bounds ({lo}, {hi}) are inverted"
            )));
        }
        if self.ransac_iterations == 0 {
            return Err(Error::invalid("ransac_iterations must be positive"));
        }
        if self.candidate_cap == 0 {
            return Err(Error::invalid("candidate_cap must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_bracket_unit_scale() {
        let p = MatchParams::default();
        p.validate().unwrap();
        assert!(p.scale_bounds.0 <= 1.0 && 1.0 <= p.scale_bounds.1);
    }

    #[test]
    fn rejects_bad_thresholds() {
        for bad in [
            MatchParams {
                delta_f: 0.0,
                ..Default::default()
            },
            MatchParams {
                delta_p: -1.0,
                ..Default::default()
            },
            MatchParams {
                beta: f64::NAN,
                ..Default::default()
            },
            MatchParams {
                scale_bounds: (2.0, 1.0),
                ..Default::default()
            },
            MatchParams {
                ransac_iterations: 0,
                ..Default::default()
            },
            MatchParams {
                candidate_cap: 0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
