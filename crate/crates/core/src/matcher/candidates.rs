use crate::cloud::SemanticPointCloud;
use crate::error::{Error, Result};
use crate::feature::distance_unchecked;
use crate::params::MatchParams;
use crate::template::KnowledgeTemplate;

/// A scene point admitted for a keypoint by the descriptor gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub index: usize,
    pub feature_distance: f64,
}

/// Per keypoint, up to `candidate_cap` scene points with descriptor distance
/// at most `delta_f`, nearest first (ties by lowest index).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTable {
    lists: Vec<Vec<Candidate>>,
}

impl CandidateTable {
    pub fn for_keypoint(&self, k: usize) -> &[Candidate] {
        &self.lists[k]
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    /// Keypoints with at least one candidate.
    pub fn active_keypoints(&self) -> Vec<usize> {
        (0..self.lists.len())
            .filter(|&k| !self.lists[k].is_empty())
            .collect()
    }

    pub fn lists(&self) -> &[Vec<Candidate>] {
        &self.lists
    }
}

pub(crate) fn check_dims(template: &KnowledgeTemplate, cloud: &SemanticPointCloud) -> Result<()> {
    if template.feature_dim() != cloud.feature_dim() {
        return Err(Error::Dimension {
            context: "template vs cloud feature_dim",
            left: template.feature_dim(),
            right: cloud.feature_dim(),
        });
    }
    Ok(())
}

/// Exact linear scan in descriptor space. Gate and cap come from `params`;
/// no other field is consulted and the params are not validated here.
pub fn build_candidates(
    template: &KnowledgeTemplate,
    cloud: &SemanticPointCloud,
    params: &MatchParams,
) -> Result<CandidateTable> {
    check_dims(template, cloud)?;
    let lists = template
        .keypoints()
        .iter()
        .map(|kp| {
            let mut list: Vec<Candidate> = (0..cloud.len())
                .filter_map(|i| {
                    let d = distance_unchecked(cloud.feature(i), &kp.feature);
                    (d <= params.delta_f).then_some(Candidate {
                        index: i,
                        feature_distance: d,
                    })
                })
                .collect();
            list.sort_by(|a, b| {
                a.feature_distance
                    .total_cmp(&b.feature_distance)
                    .then(a.index.cmp(&b.index))
            });
            list.truncate(params.candidate_cap);
            list
        })
        .collect();
    Ok(CandidateTable { lists })
}
