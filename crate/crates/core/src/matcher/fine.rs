//! Fine template matching: per-keypoint relocation around the coarse
//! prediction.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::cloud::SemanticPointCloud;
use crate::error::Result;
use crate::feature::distance_unchecked;
use crate::params::MatchParams;
use crate::result::{KeypointMatch, MatchResult, MatchStatus};
use crate::template::KnowledgeTemplate;
use crate::transform::SimilarityTransform;

use super::candidates::check_dims;
use super::coarse::CorrespondenceSet;

/// Uniform hash grid over cloud positions for fixed-radius queries.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl VoxelGrid {
    /// `cell` should equal the query radius so a query touches 27 cells.
    pub fn new(positions: &[Vector3<f64>], cell: f64) -> Self {
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in positions.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, cells }
    }

    fn key(p: &Vector3<f64>, cell: f64) -> [i64; 3] {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    }

    /// Indices of all points within `radius ≤ cell` of `center`, ascending.
    pub fn within(
        &self,
        positions: &[Vector3<f64>],
        center: &Vector3<f64>,
        radius: f64,
    ) -> Vec<usize> {
        debug_assert!(radius <= self.cell);
        let c = Self::key(center, self.cell);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        out.extend(
                            ids.iter()
                                .copied()
                                .filter(|&i| (positions[i] - center).norm() <= radius),
                        );
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Relocates every keypoint to the scene point minimizing
/// `dis(f_i, f̂_k) + β·‖p_i − a_k‖` inside the `δ_p` ball around its anchor
/// `a_k = s·R·p̂_k + t`. With `params.fine_feature_gate`, points with
/// descriptor distance above `δ_f` are excluded as well. Keypoints with no
/// admissible point are reported as inferred at the anchor.
///
/// `correspondences` is accepted for interface symmetry with the coarse
/// stage; the search is over the whole ball regardless.
pub fn fine_match(
    template: &KnowledgeTemplate,
    cloud: &SemanticPointCloud,
    coarse: &SimilarityTransform,
    correspondences: &CorrespondenceSet,
    params: &MatchParams,
) -> Result<MatchResult> {
    params.validate()?;
    check_dims(template, cloud)?;
    let grid = VoxelGrid::new(cloud.positions(), params.delta_p);
    let keypoints = template
        .keypoints()
        .iter()
        .map(|kp| {
            let anchor = coarse.apply(&kp.position);
            let mut best: Option<(f64, usize, f64, f64)> = None;
            for i in grid.within(cloud.positions(), &anchor, params.delta_p) {
                let fd = distance_unchecked(cloud.feature(i), &kp.feature);
                if params.fine_feature_gate && fd > params.delta_f {
                    continue;
                }
                let pd = (cloud.position(i) - anchor).norm();
                let cost = fd + params.beta * pd;
                // indices arrive ascending, so strict < keeps the lowest on ties
                if best.is_none_or(|b| cost < b.0) {
                    best = Some((cost, i, fd, pd));
                }
            }
            match best {
                Some((_, i, fd, pd)) => KeypointMatch {
                    status: MatchStatus::Matched(i),
                    position: *cloud.position(i),
                    feature_residual: fd,
                    structure_residual: pd,
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
    Ok(MatchResult {
        keypoints,
        transform: *coarse,
        inlier_count: correspondences.len(),
        objective_value: 0.0,
        objective_fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_query_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<_> = (0..2000)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(0.0..0.4),
                )
            })
            .collect();
        let grid = VoxelGrid::new(&pts, 0.05);
        for _ in 0..100 {
            let c = Vector3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(0.0..0.4),
            );
            let want: Vec<usize> = (0..pts.len())
                .filter(|&i| (pts[i] - c).norm() <= 0.05)
                .collect();
            assert_eq!(grid.within(&pts, &c, 0.05), want);
        }
    }
}
