use serde::{Deserialize, Serialize};

use crate::matcher::MatchVariant;
use crate::params::MatchParams;
use crate::result::MatchResult;

use super::scene::SceneInstance;

/// Per-scene metrics for one variant. Pure function of the scene and the
/// match result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantMetrics {
    pub keypoint_errors: Vec<f64>,
    pub average_error: f64,
    pub matched_rate: f64,
    pub visible_average_error: Option<f64>,
    pub occluded_average_error: Option<f64>,
    /// Absent for top-1, which estimates no transform.
    pub transform_rotation_error: Option<f64>,
    pub transform_translation_error: Option<f64>,
    pub transform_scale_error: Option<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantOutcome {
    pub variant: MatchVariant,
    /// `Err` holds the failure message; failures are data, not crashes.
    pub metrics: Result<VariantMetrics, String>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn compute_metrics(
    instance: &SceneInstance,
    variant: MatchVariant,
    result: &MatchResult,
    matched_threshold: f64,
) -> VariantMetrics {
    let errors: Vec<f64> = result
        .keypoints
        .iter()
        .zip(&instance.ground_truth)
        .map(|(m, g)| (m.position - g.position).norm())
        .collect();
    let k = errors.len().max(1) as f64;
    let matched = errors.iter().filter(|e| **e < matched_threshold).count();
    let pick = |visible: bool| {
        mean(
            errors
                .iter()
                .zip(&instance.ground_truth)
                .filter(|(_, g)| g.visible == visible)
                .map(|(e, _)| *e),
        )
    };
    let has_transform = variant != MatchVariant::Top1;
    let truth = &instance.true_transform;
    VariantMetrics {
        average_error: errors.iter().sum::<f64>() / k,
        matched_rate: matched as f64 / k,
        visible_average_error: pick(true),
        occluded_average_error: pick(false),
        transform_rotation_error: has_transform.then(|| result.transform.rotation_angle_to(truth)),
        transform_translation_error: has_transform
            .then(|| (result.transform.translation() - truth.translation()).norm()),
        transform_scale_error: has_transform
            .then(|| (result.transform.scale() - truth.scale()).abs()),
        objective: result.objective_value,
        keypoint_errors: errors,
    }
}

/// Runs every variant on the scene and scores it against ground truth.
pub fn evaluate(
    instance: &SceneInstance,
    variants: &[MatchVariant],
    params: &MatchParams,
    matched_threshold: f64,
) -> Vec<VariantOutcome> {
    variants
        .iter()
        .map(|&variant| VariantOutcome {
            variant,
            metrics: variant
                .run(&instance.template, &instance.cloud, params)
                .map(|r| compute_metrics(instance, variant, &r, matched_threshold))
                .map_err(|e| e.to_string()),
        })
        .collect()
}
