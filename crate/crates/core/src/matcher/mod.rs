//! Template matching: the top-1 baseline, the Umeyama solver, RANSAC coarse
//! registration, fine per-keypoint refinement and the combined objective.

mod candidates;
mod coarse;
mod fine;
mod objective;
mod top1;
mod umeyama;

use std::fmt;
use std::str::FromStr;

pub use candidates::{build_candidates, Candidate, CandidateTable};
pub use coarse::{coarse_match, coarse_match_detailed, CoarseOutcome, CorrespondenceSet};
pub use fine::{fine_match, VoxelGrid};
pub use objective::{evaluate_objective, ObjectiveValue};
pub use top1::top1_match;
pub use umeyama::{squared_residual, umeyama};

use crate::cloud::SemanticPointCloud;
use crate::error::{Error, Result};
use crate::feature::distance_unchecked;
use crate::params::MatchParams;
use crate::result::{KeypointMatch, MatchResult, MatchStatus};
use crate::template::KnowledgeTemplate;

/// Coarse registration followed by fine refinement.
pub fn match_template(
    template: &KnowledgeTemplate,
    cloud: &SemanticPointCloud,
    params: &MatchParams,
) -> Result<MatchResult> {
    let (transform, correspondences) = coarse_match(template, cloud, params)?;
    let mut result = fine_match(template, cloud, &transform, &correspondences, params)?;
    finish(template, &mut result, params.beta)?;
    Ok(result)
}

fn finish(template: &KnowledgeTemplate, result: &mut MatchResult, beta: f64) -> Result<()> {
    let eval = evaluate_objective(template, result, beta)?;
    result.objective_value = eval.value;
    result.objective_fallback = eval.fallback;
    Ok(())
}

/// Coarse stage only: every keypoint is reported at its transformed
/// template position.
pub fn coarse_only(
    template: &KnowledgeTemplate,
    cloud: &SemanticPointCloud,
    params: &MatchParams,
) -> Result<MatchResult> {
    let (transform, correspondences) = coarse_match(template, cloud, params)?;
    let keypoints = template
        .keypoints()
        .iter()
        .map(|kp| KeypointMatch {
            status: MatchStatus::Inferred,
            position: transform.apply(&kp.position),
            feature_residual: 0.0,
            structure_residual: 0.0,
        })
        .collect();
    let mut result = MatchResult {
        keypoints,
        transform,
        inlier_count: correspondences.len(),
        objective_value: 0.0,
        objective_fallback: false,
    };
    finish(template, &mut result, params.beta)?;
    Ok(result)
}

/// The coarse outcome read as a match: each keypoint takes its best
/// descriptor candidate, or is inferred at its anchor when it has none.
pub fn coarse_top_pick_result(
    template: &KnowledgeTemplate,
    cloud: &SemanticPointCloud,
    outcome: &CoarseOutcome,
    beta: f64,
) -> Result<MatchResult> {
    let keypoints = template
        .keypoints()
        .iter()
        .enumerate()
        .map(|(k, kp)| {
            let anchor = outcome.transform.apply(&kp.position);
            match outcome.candidates.for_keypoint(k).first() {
                Some(c) => KeypointMatch {
                    status: MatchStatus::Matched(c.index),
                    position: *cloud.position(c.index),
                    feature_residual: distance_unchecked(cloud.feature(c.index), &kp.feature),
                    structure_residual: (cloud.position(c.index) - anchor).norm(),
                },
                None => KeypointMatch {
                    status: MatchStatus::Inferred,
                    position: anchor,
                    feature_residual: 0.0,
                    structure_residual: 0.0,
                },
            }
        })
        .collect();
    let mut result = MatchResult {
        keypoints,
        transform: outcome.transform,
        inlier_count: outcome.correspondences.len(),
        objective_value: 0.0,
        objective_fallback: false,
    };
    finish(template, &mut result, beta)?;
    Ok(result)
}

/// Matching pipelines compared by the benchmark and exposed by the CLI.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum MatchVariant {
    Top1,
    Coarse,
    Full,
}

impl MatchVariant {
    pub const ALL: [MatchVariant; 3] =
        [MatchVariant::Top1, MatchVariant::Coarse, MatchVariant::Full];

    pub fn name(self) -> &'static str {
        match self {
            MatchVariant::Top1 => "top1",
            MatchVariant::Coarse => "coarse",
            MatchVariant::Full => "full",
        }
    }

    pub fn run(
        self,
        template: &KnowledgeTemplate,
        cloud: &SemanticPointCloud,
        params: &MatchParams,
    ) -> Result<MatchResult> {
        match self {
            MatchVariant::Top1 => top1_match(template, cloud, params.beta),
            MatchVariant::Coarse => coarse_only(template, cloud, params),
            MatchVariant::Full => match_template(template, cloud, params),
        }
    }
}

impl fmt::Display for MatchVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MatchVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top1" => Ok(MatchVariant::Top1),
            "coarse" => Ok(MatchVariant::Coarse),
            "full" => Ok(MatchVariant::Full),
            other => Err(Error::invalid(format!(
                "unknown variant {other:?} (expected top1, coarse or full)"
            ))),
        }
    }
}
