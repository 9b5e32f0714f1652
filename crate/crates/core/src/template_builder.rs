//! Building knowledge templates from a single object observation.

use std::collections::HashMap;

use serde_json::json;

use crate::cloud::SemanticPointCloud;
use crate::error::{Error, Result};
use crate::feature::{distance_unchecked, normalize_in_place};
use crate::geometry::{centroid, planarity_ratio};
use crate::projection::ProjectedCloud;
use crate::template::{Keypoint, KnowledgeTemplate, SourceMeta};

/// Recommended keypoint count range for a template.
pub const RECOMMENDED_KEYPOINTS: std::ops::RangeInclusive<usize> = 3..=20;
/// Pairwise descriptor distance (after normalization) below which two
/// keypoints are reported as near-duplicates.
pub const DUPLICATE_FEATURE_DISTANCE: f64 = 0.05;
/// Second-to-first principal variance ratio below which a layout is reported
/// as near-collinear.
pub const NEAR_COLLINEAR_RATIO: f64 = 1e-4;

/// Channel weights of the joint sampling metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpsWeights {
    pub position: f64,
    pub color: f64,
    pub feature: f64,
}

impl Default for FpsWeights {
    fn default() -> Self {
        Self {
            position: 1.0,
            color: 1.0,
            feature: 1.0,
        }
    }
}

impl FpsWeights {
    pub fn positional() -> Self {
        Self {
            position: 1.0,
            color: 0.0,
            feature: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.position, self.color, self.feature];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("FPS weights must be nonnegative"));
        }
        if all.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("at least one FPS weight must be positive"));
        }
        Ok(())
    }
}

/// Length of the diagonal of the cloud's axis-aligned bounding box, or 1 when
/// the cloud has no extent.
pub fn bounding_box_diagonal(cloud: &SemanticPointCloud) -> f64 {
    let mut lo = nalgebra::Vector3::repeat(f64::INFINITY);
    let mut hi = nalgebra::Vector3::repeat(f64::NEG_INFINITY);
    for p in cloud.positions() {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let diag = (hi - lo).norm();
    if diag > 0.0 && diag.is_finite() {
        diag
    } else {
        1.0
    }
}

/// Squared joint distance between points `a` and `b`. Positions are divided
/// by `diag` so the three channels have comparable magnitude.
fn joint_sq(cloud: &SemanticPointCloud, w: &FpsWeights, diag: f64, a: usize, b: usize) -> f64 {
    let dp = (cloud.position(a) - cloud.position(b)) / diag;
    let (ca, cb) = (cloud.color(a), cloud.color(b));
    let dc: f64 = (0..3).map(|i| (ca[i] - cb[i]) * (ca[i] - cb[i])).sum();
    let fa = cloud.feature(a);
    let fb = cloud.feature(b);
    let df: f64 = fa.iter().zip(fb).map(|(x, y)| (x - y) * (x - y)).sum();
    w.position * dp.norm_squared() + w.color * dc + w.feature * df
}

/// Index of the point nearest the position centroid (lowest index on ties).
pub fn centroid_nearest(cloud: &SemanticPointCloud) -> Option<usize> {
    if cloud.is_empty() {
        return None;
    }
    let c = centroid(cloud.positions());
    let mut best = (f64::INFINITY, 0);
    for (i, p) in cloud.positions().iter().enumerate() {
        let d = (p - c).norm_squared();
        if d < best.0 {
            best = (d, i);
        }
    }
    Some(best.1)
}

/// Greedy farthest point sampling under the joint position/color/feature
/// metric. Returns selected cloud indices in selection order.
///
/// Each step picks the unselected point whose minimum joint distance to the
/// selected set is largest; ties go to the lowest index.
pub fn fps_indices(
    cloud: &SemanticPointCloud,
    k: usize,
    weights: &FpsWeights,
    seed_index: Option<usize>,
) -> Result<Vec<usize>> {
    weights.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if k == 0 || k > cloud.len() {
        return Err(Error::InsufficientPoints {
            requested: k,
            available: cloud.len(),
        });
    }
    let first = match seed_index {
        Some(i) if i < cloud.len() => i,
        Some(i) => {
            return Err(Error::Index {
                position: 0,
                annotation: format!("seed index {i}"),
            })
        }
        None => centroid_nearest(cloud).expect("nonempty"),
    };
    let diag = bounding_box_diagonal(cloud);

    let n = cloud.len();
    let mut selected = vec![first];
    let mut taken = vec![false; n];
    taken[first] = true;
    let mut min_sq: Vec<f64> = (0..n)
        .map(|i| joint_sq(cloud, weights, diag, first, i))
        .collect();
    while selected.len() < k {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            if best.is_none_or(|(d, _)| min_sq[i] > d) {
                best = Some((min_sq[i], i));
            }
        }
        let (_, next) = best.expect("k ≤ n leaves an unselected point");
        taken[next] = true;
        selected.push(next);
        for i in 0..n {
            if !taken[i] {
                let d = joint_sq(cloud, weights, diag, next, i);
                if d < min_sq[i] {
                    min_sq[i] = d;
                }
            }
        }
    }
    Ok(selected)
}

/// Samples a `k`-keypoint template with [`fps_indices`].
pub fn fps_sample(
    cloud: &SemanticPointCloud,
    k: usize,
    weights: &FpsWeights,
    seed_index: Option<usize>,
    category_label: &str,
) -> Result<KnowledgeTemplate> {
    let indices = fps_indices(cloud, k, weights, seed_index)?;
    let mut meta = SourceMeta::new();
    meta.insert("method".into(), json!("fps"));
    meta.insert(
        "weights".into(),
        json!({"position": weights.position, "color": weights.color, "feature": weights.feature}),
    );
    meta.insert("seed_index".into(), json!(indices[0]));
    meta.insert("indices".into(), json!(indices));
    template_from_indices(cloud, &indices, category_label, meta)
}

fn template_from_indices(
    cloud: &SemanticPointCloud,
    indices: &[usize],
    category_label: &str,
    meta: SourceMeta,
) -> Result<KnowledgeTemplate> {
    let keypoints = indices
        .iter()
        .map(|&i| Keypoint {
            feature: cloud.feature(i).to_vec(),
            position: *cloud.position(i),
        })
        .collect();
    KnowledgeTemplate::new(keypoints, cloud.feature_dim(), category_label, meta)
}

/// A manual keypoint annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Annotation {
    /// Direct index into the cloud.
    Index(usize),
    /// Source pixel `(u, v)`; needs the projection's pixel map to resolve.
    Pixel(u32, u32),
}

impl std::fmt::Display for Annotation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Annotation::Index(i) => write!(f, "index {i}"),
            Annotation::Pixel(u, v) => write!(f, "pixel ({u}, {v})"),
        }
    }
}

/// Builds a template from annotated cloud points, in annotation order.
///
/// `pixel_map` lists the source pixel of every cloud point (as returned by
/// [`crate::projection::project_with_pixels`]) and is only needed for pixel
/// annotations.
pub fn build_from_annotations(
    cloud: &SemanticPointCloud,
    annotations: &[Annotation],
    pixel_map: Option<&[(u32, u32)]>,
    category_label: &str,
) -> Result<KnowledgeTemplate> {
    if annotations.is_empty() {
        return Err(Error::invalid("no annotations given"));
    }
    let pixel_lookup: Option<HashMap<(u32, u32), usize>> = pixel_map.map(|pixels| {
        let mut m = HashMap::with_capacity(pixels.len());
        for (i, &px) in pixels.iter().enumerate() {
            m.entry(px).or_insert(i);
        }
        m
    });

    let mut indices = Vec::with_capacity(annotations.len());
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for (pos, ann) in annotations.iter().enumerate() {
        let resolved = match *ann {
            Annotation::Index(i) => (i < cloud.len()).then_some(i),
            Annotation::Pixel(u, v) => pixel_lookup.as_ref().and_then(|m| m.get(&(u, v)).copied()),
        };
        let index = resolved.ok_or_else(|| Error::Index {
            position: pos,
            annotation: ann.to_string(),
        })?;
        if let Some(&first) = seen.get(&index) {
            return Err(Error::DuplicateAnnotation {
                first,
                second: pos,
                index,
            });
        }
        seen.insert(index, pos);
        indices.push(index);
    }
    let mut meta = SourceMeta::new();
    meta.insert("method".into(), json!("annotation"));
    meta.insert("indices".into(), json!(indices));
    template_from_indices(cloud, &indices, category_label, meta)
}

/// Same as [`build_from_annotations`] using a projection's own pixel map.
pub fn build_from_projected(
    projected: &ProjectedCloud,
    annotations: &[Annotation],
    category_label: &str,
) -> Result<KnowledgeTemplate> {
    build_from_annotations(
        &projected.cloud,
        annotations,
        Some(&projected.pixels),
        category_label,
    )
}

/// A non-fatal issue found by [`validate_template`].
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    KeypointCount { k: usize },
    NearCollinear { ratio: f64 },
    NearDuplicateFeatures { a: usize, b: usize, distance: f64 },
    ZeroFeature { keypoint: usize },
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diagnostic::KeypointCount { k } => write!(
                f,
                "{k} keypoints is outside the recommended range {}-{}",
                RECOMMENDED_KEYPOINTS.start(),
                RECOMMENDED_KEYPOINTS.end()
            ),
            Diagnostic::NearCollinear { ratio } => {
                write!(
                    f,
                    "keypoint layout is nearly collinear (variance ratio {ratio:.2e})"
                )
            }
            Diagnostic::NearDuplicateFeatures { a, b, distance } => write!(
                f,
                "keypoints {a} and {b} have near-duplicate features (distance {distance:.4})"
            ),
            Diagnostic::ZeroFeature { keypoint } => {
                write!(f, "keypoint {keypoint} has a zero feature vector")
            }
        }
    }
}

/// Reports template properties that tend to hurt matching.
pub fn validate_template(t: &KnowledgeTemplate) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if !RECOMMENDED_KEYPOINTS.contains(&t.len()) {
        out.push(Diagnostic::KeypointCount { k: t.len() });
    }
    if t.len() >= 3 {
        let ratio = planarity_ratio(&t.positions());
        if ratio < NEAR_COLLINEAR_RATIO {
            out.push(Diagnostic::NearCollinear { ratio });
        }
    }
    let mut normalized: Vec<Option<Vec<f64>>> = Vec::with_capacity(t.len());
    for (k, kp) in t.keypoints().iter().enumerate() {
        let mut f = kp.feature.clone();
        if normalize_in_place(&mut f) {
            normalized.push(Some(f));
        } else {
            out.push(Diagnostic::ZeroFeature { keypoint: k });
            normalized.push(None);
        }
    }
    for a in 0..normalized.len() {
        for b in a + 1..normalized.len() {
            if let (Some(fa), Some(fb)) = (&normalized[a], &normalized[b]) {
                let distance = distance_unchecked(fa, fb);
                if distance < DUPLICATE_FEATURE_DISTANCE {
                    out.push(Diagnostic::NearDuplicateFeatures { a, b, distance });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::SemanticPoint;
    use nalgebra::Vector3;

    fn cloud_from(points: &[(f64, f64, f64)], dim: usize) -> SemanticPointCloud {
        SemanticPointCloud::from_points(
            points
                .iter()
                .enumerate()
                .map(|(i, &(x, y, z))| {
                    let mut feature = vec![0.0; dim];
                    feature[i % dim] = 1.0;
                    SemanticPoint {
                        position: Vector3::new(x, y, z),
                        color: [0.2; 3],
                        feature,
                    }
                })
                .collect(),
            dim,
            true,
        )
        .unwrap()
    }

    #[test]
    fn square_picks_opposite_corner() {
        let cloud = cloud_from(
            &[
                (0.0, 0.0, 0.0),
                (1.0, 0.0, 0.0),
                (1.0, 1.0, 0.0),
                (0.0, 1.0, 0.0),
            ],
            4,
        );
        let idx = fps_indices(&cloud, 2, &FpsWeights::positional(), Some(0)).unwrap();
        assert_eq!(idx, vec![0, 2]);
    }

    #[test]
    fn exhaustive_selection_is_a_permutation() {
        let pts: Vec<_> = (0..12)
            .map(|i| ((i * 7 % 5) as f64, (i * 3 % 4) as f64, (i % 3) as f64))
            .collect();
        let cloud = cloud_from(&pts, 6);
        let mut idx = fps_indices(&cloud, cloud.len(), &FpsWeights::default(), None).unwrap();
        idx.sort();
        assert_eq!(idx, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn duplicates_never_reselect() {
        let cloud = cloud_from(&[(0.0, 0.0, 0.0); 5], 1);
        let idx = fps_indices(&cloud, 5, &FpsWeights::positional(), None).unwrap();
        assert_eq!(idx, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn too_many_points_requested() {
        let cloud = cloud_from(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)], 2);
        assert!(matches!(
            fps_indices(&cloud, 3, &FpsWeights::default(), None),
            Err(Error::InsufficientPoints {
                requested: 3,
                available: 2
            })
        ));
    }

    #[test]
    fn annotation_zero_copies_point_zero() {
        let cloud = cloud_from(&[(0.1, 0.2, 0.3), (1.0, 0.0, 0.0)], 2);
        let t = build_from_annotations(&cloud, &[Annotation::Index(0)], None, "cup").unwrap();
        assert_eq!(t.keypoint(0).position, *cloud.position(0));
        assert_eq!(t.keypoint(0).feature, cloud.feature(0));
        assert_eq!(t.category_label(), "cup");
    }

    #[test]
    fn duplicate_and_out_of_range_annotations() {
        let cloud = cloud_from(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)], 3);
        match build_from_annotations(
            &cloud,
            &[
                Annotation::Index(1),
                Annotation::Index(2),
                Annotation::Index(1),
            ],
            None,
            "x",
        ) {
            Err(Error::DuplicateAnnotation {
                first: 0,
                second: 2,
                index: 1,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match build_from_annotations(
            &cloud,
            &[Annotation::Index(0), Annotation::Index(9)],
            None,
            "x",
        ) {
            Err(Error::Index { position: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        // a pixel annotation cannot resolve without a pixel map
        assert!(matches!(
            build_from_annotations(&cloud, &[Annotation::Pixel(0, 0)], None, "x"),
            Err(Error::Index { position: 0, .. })
        ));
    }

    #[test]
    fn pixel_annotations_resolve_through_map() {
        let cloud = cloud_from(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)], 3);
        let map = [(4, 4), (8, 4), (4, 8)];
        let t = build_from_annotations(
            &cloud,
            &[
                Annotation::Pixel(4, 8),
                Annotation::Index(1),
                Annotation::Pixel(4, 4),
            ],
            Some(&map),
            "x",
        )
        .unwrap();
        assert_eq!(
            t.positions(),
            vec![*cloud.position(2), *cloud.position(1), *cloud.position(0)]
        );
    }

    fn spread_template(k: usize) -> KnowledgeTemplate {
        let corners = [
            (0.0, 0.0, 0.0),
            (0.1, 0.0, 0.0),
            (0.0, 0.1, 0.0),
            (0.0, 0.0, 0.1),
            (0.1, 0.1, 0.0),
            (0.1, 0.0, 0.1),
            (0.0, 0.1, 0.1),
            (0.1, 0.1, 0.1),
        ];
        let kps = (0..k)
            .map(|i| {
                let mut feature = vec![0.0; 8];
                feature[i] = 1.0;
                let (x, y, z) = corners[i];
                Keypoint {
                    feature,
                    position: Vector3::new(x, y, z),
                }
            })
            .collect();
        KnowledgeTemplate::new(kps, 8, "cube", SourceMeta::new()).unwrap()
    }

    #[test]
    fn well_spread_template_is_clean() {
        assert!(validate_template(&spread_template(8)).is_empty());
    }

    #[test]
    fn near_collinear_and_duplicates_warn() {
        let kps = vec![
            Keypoint {
                feature: vec![1.0, 0.0],
                position: Vector3::new(0.0, 0.0, 0.0),
            },
            Keypoint {
                feature: vec![0.0, 1.0],
                position: Vector3::new(0.1, 0.0, 0.0),
            },
            Keypoint {
                feature: vec![1.0, 0.0],
                position: Vector3::new(0.2, 1e-4, 0.0),
            },
        ];
        let t = KnowledgeTemplate::new(kps, 2, "line", SourceMeta::new()).unwrap();
        let diags = validate_template(&t);
        assert!(diags
            .iter()
            .any(|d| matches!(d, Diagnostic::NearCollinear { .. })));
        assert!(diags
            .iter()
            .any(|d| matches!(d, Diagnostic::NearDuplicateFeatures { a: 0, b: 2, .. })));
    }

    #[test]
    fn count_outside_recommended_range() {
        let diags = validate_template(&spread_template(2));
        assert_eq!(diags, vec![Diagnostic::KeypointCount { k: 2 }]);
    }
}
