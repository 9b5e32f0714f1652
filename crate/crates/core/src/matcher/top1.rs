use crate::cloud::SemanticPointCloud;
use crate::error::{Error, Result};
use crate::feature::distance_unchecked;
use crate::result::{KeypointMatch, MatchResult, MatchStatus};
use crate::template::KnowledgeTemplate;
use crate::transform::SimilarityTransform;

use super::candidates::check_dims;
use super::objective::evaluate_objective;

/// Baseline: every keypoint independently takes its nearest scene point in
/// descriptor space. Several keypoints may collapse onto one point.
///
/// The transform is identity, so `structure_residual` is the distance to the
/// untransformed template position. `objective_value` is evaluated with `beta`.
pub fn top1_match(
    template: &KnowledgeTemplate,
    cloud: &SemanticPointCloud,
    beta: f64,
) -> Result<MatchResult> {
    check_dims(template, cloud)?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let keypoints = template
        .keypoints()
        .iter()
        .map(|kp| {
            let (best, dist) = (0..cloud.len())
                .map(|i| (i, distance_unchecked(cloud.feature(i), &kp.feature)))
                .fold(
                    (0, f64::INFINITY),
                    |acc, cur| if cur.1 < acc.1 { cur } else { acc },
                );
            let position = *cloud.position(best);
            KeypointMatch {
                status: MatchStatus::Matched(best),
                position,
                feature_residual: dist,
                structure_residual: (position - kp.position).norm(),
            }
        })
        .collect();
    let mut result = MatchResult {
        keypoints,
        transform: SimilarityTransform::identity(),
        inlier_count: 0,
        objective_value: 0.0,
        objective_fallback: false,
    };
    let eval = evaluate_objective(template, &result, beta)?;
    result.objective_value = eval.value;
    result.objective_fallback = eval.fallback;
    Ok(result)
}
