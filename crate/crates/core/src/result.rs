use nalgebra::Vector3;

use crate::transform::SimilarityTransform;

/// How a keypoint's position was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchStatus {
    /// Matched to the scene point with this index.
    Matched(usize),
    /// No acceptable scene point; position is the transformed template keypoint.
    Inferred,
}

impl MatchStatus {
    pub fn index(&self) -> Option<usize> {
        match *self {
            MatchStatus::Matched(i) => Some(i),
            MatchStatus::Inferred => None,
        }
    }

    pub fn is_matched(&self) -> bool {
        matches!(self, MatchStatus::Matched(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointMatch {
    pub status: MatchStatus,
    pub position: Vector3<f64>,
    /// Descriptor distance to the template keypoint (0 when inferred).
    pub feature_residual: f64,
    /// Distance from `position` to the transformed template keypoint.
    pub structure_residual: f64,
}

/// Outcome of matching a template against a scene, one entry per keypoint
/// in template order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub keypoints: Vec<KeypointMatch>,
    pub transform: SimilarityTransform,
    pub inlier_count: usize,
    pub objective_value: f64,
    /// The structure term of `objective_value` used `transform` because too
    /// few keypoints were matched to re-solve it.
    pub objective_fallback: bool,
}

impl MatchResult {
    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.keypoints.iter().map(|k| k.position).collect()
    }

    pub fn matched_count(&self) -> usize {
        self.keypoints
            .iter()
            .filter(|k| k.status.is_matched())
            .count()
    }

    /// Keypoint observation vector in base coordinates: `3 × K` values,
    /// keypoint-major (`x0, y0, z0, x1, ...`).
    pub fn observation_vector(&self) -> Vec<f64> {
        self.keypoints
            .iter()
            .flat_map(|k| [k.position.x, k.position.y, k.position.z])
            .collect()
    }
}
