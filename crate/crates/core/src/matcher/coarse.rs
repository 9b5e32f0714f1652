//! Coarse template matching: one global similarity transform from
//! descriptor-gated correspondences, made robust to occlusion and repeated
//! features with RANSAC.

use nalgebra::Vector3;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cloud::SemanticPointCloud;
use crate::error::{Error, Result};
use crate::params::MatchParams;
use crate::template::{KnowledgeTemplate, MAX_COARSE_KEYPOINTS};
use crate::transform::SimilarityTransform;

use super::candidates::{build_candidates, check_dims, CandidateTable};
use super::umeyama::umeyama;

/// Keypoint-to-scene correspondences, sorted by template index; each
/// template keypoint appears at most once.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorrespondenceSet {
    pairs: Vec<(usize, usize)>,
}

impl CorrespondenceSet {
    pub fn new(mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        pairs.sort_unstable();
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid(
                "template index repeated in correspondence set",
            ));
        }
        Ok(Self { pairs })
    }

    /// `(template_index, cloud_index)` pairs.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn cloud_index_of(&self, template_index: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&template_index, |p| p.0)
            .ok()
            .map(|i| self.pairs[i].1)
    }
}

/// Everything the coarse stage produced.
#[derive(Debug, Clone)]
pub struct CoarseOutcome {
    pub transform: SimilarityTransform,
    pub correspondences: CorrespondenceSet,
    pub candidates: CandidateTable,
}

#[derive(Debug, Clone)]
struct Hypothesis {
    iteration: usize,
    transform: SimilarityTransform,
    inliers: Vec<(usize, usize)>,
    residual_sum: f64,
}

impl Hypothesis {
    /// More inliers, then smaller residual, then earlier iteration.
    fn better_than(&self, other: &Hypothesis) -> bool {
        self.inliers
            .len()
            .cmp(&other.inliers.len())
            .then(other.residual_sum.total_cmp(&self.residual_sum))
            .then(other.iteration.cmp(&self.iteration))
            .is_gt()
    }
}

/// For every active keypoint, the candidate nearest the transformed template
/// position; keypoints whose nearest candidate lies within `radius` are inliers.
fn score(
    transform: &SimilarityTransform,
    template_positions: &[Vector3<f64>],
    table: &CandidateTable,
    cloud: &SemanticPointCloud,
    radius: f64,
) -> (Vec<(usize, usize)>, f64) {
    let mut inliers = Vec::new();
    let mut residual_sum = 0.0;
    for (k, list) in table.lists().iter().enumerate() {
        if list.is_empty() {
            continue;
        }
        let anchor = transform.apply(&template_positions[k]);
        let mut best: Option<(f64, usize)> = None;
        for c in list {
            let d = (cloud.position(c.index) - anchor).norm();
            if best.is_none_or(|(bd, bi)| d < bd || (d == bd && c.index < bi)) {
                best = Some((d, c.index));
            }
        }
        if let Some((d, i)) = best {
            if d <= radius {
                inliers.push((k, i));
                residual_sum += d;
            }
        }
    }
    (inliers, residual_sum)
}

/// Estimates the template-to-scene similarity transform.
///
/// Each RANSAC iteration draws three distinct keypoints that have
/// candidates, one candidate each (weighted by `exp(−dis/δ_f)`), and solves
/// for a scaled transform. Iteration `i` uses its own RNG stream derived
/// from `params.rng_seed`, so the result does not depend on thread count.
/// One extra hypothesis fits every keypoint to its nearest-descriptor
/// candidate. The winning hypothesis is refit on all of its inliers.
pub fn coarse_match(
    template: &KnowledgeTemplate,
    cloud: &SemanticPointCloud,
    params: &MatchParams,
) -> Result<(SimilarityTransform, CorrespondenceSet)> {
    coarse_match_detailed(template, cloud, params).map(|o| (o.transform, o.correspondences))
}

pub fn coarse_match_detailed(
    template: &KnowledgeTemplate,
    cloud: &SemanticPointCloud,
    params: &MatchParams,
) -> Result<CoarseOutcome> {
    params.validate()?;
    check_dims(template, cloud)?;
    let k = template.len();
    if k < 3 {
        return Err(Error::DegenerateTemplate {
            k,
            reason: "coarse matching needs at least 3 keypoints",
        });
    }
    if k > MAX_COARSE_KEYPOINTS {
        return Err(Error::DegenerateTemplate {
            k,
            reason: "coarse matching supports at most 64 keypoints",
        });
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }

    let table = build_candidates(template, cloud, params)?;
    let active = table.active_keypoints();
    if active.len() < 3 {
        return Err(Error::InsufficientCandidates {
            available: active.len(),
        });
    }
    let template_positions = template.positions();
    let samplers: Vec<Option<WeightedIndex<f64>>> = table
        .lists()
        .iter()
        .map(|list| {
            if list.is_empty() {
                None
            } else {
                let w = list
                    .iter()
                    .map(|c| (-c.feature_distance / params.delta_f).exp());
                Some(WeightedIndex::new(w).expect("weights are positive"))
            }
        })
        .collect();
    let (s_min, s_max) = params.scale_bounds;

    let hypothesis = |iteration: usize| -> Option<Hypothesis> {
        let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
        rng.set_stream(iteration as u64);
        let picks = rand::seq::index::sample(&mut rng, active.len(), 3);
        let mut src = [Vector3::zeros(); 3];
        let mut dst = [Vector3::zeros(); 3];
        let mut used = [usize::MAX; 3];
        for (slot, pick) in picks.iter().enumerate() {
            let kp = active[pick];
            let list = table.for_keypoint(kp);
            let c = list[samplers[kp].as_ref().expect("active").sample(&mut rng)];
            if used.contains(&c.index) {
                return None;
            }
            used[slot] = c.index;
            src[slot] = template_positions[kp];
            dst[slot] = *cloud.position(c.index);
        }
        let transform = umeyama(&src, &dst, true).ok()?;
        if !(s_min..=s_max).contains(&transform.scale()) {
            return None;
        }
        let (inliers, residual_sum) = score(
            &transform,
            &template_positions,
            &table,
            cloud,
            params.ransac_inlier_radius,
        );
        Some(Hypothesis {
            iteration,
            transform,
            inliers,
            residual_sum,
        })
    };

    // every keypoint paired with its nearest-descriptor candidate; ranked
    // after all sampled iterations on exact ties
    let nearest = || -> Option<Hypothesis> {
        let src: Vec<_> = active.iter().map(|&k| template_positions[k]).collect();
        let dst: Vec<_> = active
            .iter()
            .map(|&k| *cloud.position(table.for_keypoint(k)[0].index))
            .collect();
        let transform = umeyama(&src, &dst, true).ok()?;
        if !(s_min..=s_max).contains(&transform.scale()) {
            return None;
        }
        let (inliers, residual_sum) = score(
            &transform,
            &template_positions,
            &table,
            cloud,
            params.ransac_inlier_radius,
        );
        Some(Hypothesis {
            iteration: params.ransac_iterations,
            transform,
            inliers,
            residual_sum,
        })
    };

    let best = (0..params.ransac_iterations)
        .into_par_iter()
        .filter_map(hypothesis)
        .chain(rayon::iter::once(()).filter_map(|_| nearest()))
        .reduce_with(|a, b| if b.better_than(&a) { b } else { a });

    let best = match best {
        Some(h) if h.inliers.len() >= 3 => h,
        _ => {
            return Err(Error::NoConsensus {
                iterations: params.ransac_iterations,
            })
        }
    };

    let src: Vec<_> = best
        .inliers
        .iter()
        .map(|&(k, _)| template_positions[k])
        .collect();
    let dst: Vec<_> = best
        .inliers
        .iter()
        .map(|&(_, i)| *cloud.position(i))
        .collect();
    let transform = match umeyama(&src, &dst, true) {
        Ok(t) if (s_min..=s_max).contains(&t.scale()) => t,
        _ => best.transform,
    };
    Ok(CoarseOutcome {
        transform,
        correspondences: CorrespondenceSet::new(best.inliers)?,
        candidates: table,
    })
}
