use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::result::MatchResult;
use crate::template::KnowledgeTemplate;
use crate::transform::SimilarityTransform;

use super::umeyama::umeyama;

/// Value of the combined matching objective for a result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    pub feature_term: f64,
    pub structure_term: f64,
    /// Transform that achieved `structure_term`.
    pub transform: SimilarityTransform,
    /// Fewer than three matched keypoints: the stored transform was used.
    pub fallback: bool,
}

fn structure_sum(
    t: &SimilarityTransform,
    template: &[Vector3<f64>],
    matched: &[Vector3<f64>],
) -> f64 {
    template
        .iter()
        .zip(matched)
        .map(|(p, m)| (m - t.apply(p)).norm())
        .sum()
}

/// `Σ_k dis(f_k, f̂_k) + β · min_{R,t,s} Σ_k ‖m_k − (s·R·p̂_k + t)‖`.
///
/// Inferred keypoints add nothing to the feature term and contribute their
/// reported position to the structure term. The inner minimum is
/// approximated by the better of the result's own transform and a least
/// squares refit on the matched keypoints.
pub fn evaluate_objective(
    template: &KnowledgeTemplate,
    result: &MatchResult,
    beta: f64,
) -> Result<ObjectiveValue> {
    if result.keypoints.len() != template.len() {
        return Err(Error::Dimension {
            context: "match result vs template keypoints",
            left: result.keypoints.len(),
            right: template.len(),
        });
    }
    let feature_term: f64 = result.keypoints.iter().map(|k| k.feature_residual).sum();
    let tpl = template.positions();
    let matched_pos = result.positions();

    let stored = structure_sum(&result.transform, &tpl, &matched_pos);
    let mut best = (stored, result.transform);
    let (src, dst): (Vec<_>, Vec<_>) = result
        .keypoints
        .iter()
        .zip(&tpl)
        .filter(|(k, _)| k.status.is_matched())
        .map(|(k, p)| (*p, k.position))
        .unzip();
    let fallback = src.len() < 3;
    if !fallback {
        if let Ok(fit) = umeyama(&src, &dst, true) {
            let s = structure_sum(&fit, &tpl, &matched_pos);
            if s < best.0 {
                best = (s, fit);
            }
        }
    }
    Ok(ObjectiveValue {
        value: feature_term + beta * best.0,
        feature_term,
        structure_term: best.0,
        transform: best.1,
        fallback,
    })
}
