//! Synthetic scenes with controlled failure modes: clutter, repeated
//! features, occlusion, descriptor noise and per-keypoint deformation.

use nalgebra::Vector3;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cloud::SemanticPointCloud;
use crate::error::{Error, Result};
use crate::feature::{distance_unchecked, normalize_in_place};
use crate::geometry::is_collinear;
use crate::projection::Workspace;
use crate::template::{Keypoint, KnowledgeTemplate, SourceMeta};
use crate::transform::SimilarityTransform;

/// Ground-truth similarity transform of a scene.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformSpec {
    Fixed(SimilarityTransform),
    /// Uniform random axis, angle uniform in `[0, max_rotation]` radians,
    /// translation uniform in the box, scale uniform in the range.
    Random {
        max_rotation: f64,
        translation_min: Vector3<f64>,
        translation_max: Vector3<f64>,
        scale_range: (f64, f64),
    },
}

/// Per-keypoint displacement applied after the similarity transform.
#[derive(Debug, Clone, PartialEq)]
pub enum DeformationSpec {
    None,
    Explicit(Vec<Vector3<f64>>),
    /// Uniform random direction, magnitude uniform in `[0, max_displacement]`.
    Random {
        max_displacement: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub template_k: usize,
    pub distractor_count: usize,
    pub feature_dim: usize,
    pub transform: TransformSpec,
    /// Per-axis standard deviation of scene point jitter, meters.
    pub position_noise_sigma: f64,
    /// Expected norm of the descriptor perturbation before renormalization.
    pub feature_noise_sigma: f64,
    pub occlusion_fraction: f64,
    /// Keypoint index sets whose members share one descriptor.
    pub ambiguity_groups: Vec<Vec<usize>>,
    pub deformation: DeformationSpec,
    pub rng_seed: u64,
    /// Template keypoints are drawn in `[-extent, extent]³`, meters.
    pub template_extent: f64,
    pub min_keypoint_separation: f64,
    /// Distractors are drawn uniformly inside this box.
    pub workspace: Workspace,
    /// Distractor descriptors are redrawn until at least this far from every
    /// keypoint descriptor (0 disables the check).
    pub distractor_feature_margin: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            template_k: 10,
            distractor_count: 500,
            feature_dim: 32,
            transform: TransformSpec::Random {
                max_rotation: std::f64::consts::PI,
                translation_min: Vector3::new(-0.2, -0.2, 0.1),
                translation_max: Vector3::new(0.2, 0.2, 0.3),
                scale_range: (0.8, 1.25),
            },
            position_noise_sigma: 0.0,
            feature_noise_sigma: 0.0,
            occlusion_fraction: 0.0,
            ambiguity_groups: Vec::new(),
            deformation: DeformationSpec::None,
            rng_seed: 0,
            template_extent: 0.1,
            min_keypoint_separation: 0.03,
            workspace: Workspace::new(Vector3::new(-0.5, -0.5, 0.0), Vector3::new(0.5, 0.5, 0.5))
                .expect("valid default workspace"),
            distractor_feature_margin: 0.6,
        }
    }
}

/// Where a template keypoint truly is in the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointTruth {
    /// Transformed (and deformed) position, before position noise.
    pub position: Vector3<f64>,
    pub visible: bool,
    /// Index of the keypoint's own point in the scene cloud when visible.
    pub cloud_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneInstance {
    pub template: KnowledgeTemplate,
    pub cloud: SemanticPointCloud,
    pub ground_truth: Vec<KeypointTruth>,
    pub true_transform: SimilarityTransform,
}

impl SceneInstance {
    pub fn occluded_count(&self) -> usize {
        self.ground_truth.iter().filter(|g| !g.visible).count()
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if normalize_in_place(&mut v) {
            return v;
        }
    }
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: &Vector3<f64>, hi: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(lo.x..=hi.x),
        rng.random_range(lo.y..=hi.y),
        rng.random_range(lo.z..=hi.z),
    )
}

fn random_direction(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let v = random_unit(rng, 3);
    Vector3::new(v[0], v[1], v[2])
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random(), rng.random(), rng.random()]
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.template_k < 3 {
            return Err(Error::Spec("template_k must be at least 3".into()));
        }
        if self.feature_dim == 0 {
            return Err(Error::Spec("feature_dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.occlusion_fraction) {
            return Err(Error::Spec("occlusion_fraction must lie in [0, 1)".into()));
        }
        if self.template_k - self.occluded_count() < 3 {
            return Err(Error::Spec(
                "occlusion leaves fewer than 3 visible keypoints".into(),
            ));
        }
        let sigmas = [self.position_noise_sigma, self.feature_noise_sigma];
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Spec("noise sigmas must be nonnegative".into()));
        }
        if !(self.template_extent.is_finite() && self.template_extent > 0.0)
            || self.min_keypoint_separation < 0.0
        {
            return Err(Error::Spec("template extent must be positive".into()));
        }
        let mut seen = vec![false; self.template_k];
        for g in &self.ambiguity_groups {
            if g.len() < 2 {
                return Err(Error::Spec(
                    "ambiguity groups need at least two members".into(),
                ));
            }
            for &k in g {
                if k >= self.template_k {
                    return Err(Error::Spec(format!(
                        "ambiguity group member {k} out of range"
                    )));
                }
                if seen[k] {
                    return Err(Error::Spec(format!(
                        "keypoint {k} is in more than one ambiguity group"
                    )));
                }
                seen[k] = true;
            }
        }
        match &self.deformation {
            DeformationSpec::Explicit(d) if d.len() != self.template_k => {
                return Err(Error::Spec(
                    "explicit deformation needs one vector per keypoint".into(),
                ))
            }
            DeformationSpec::Random { max_displacement }
                if !(max_displacement.is_finite() && *max_displacement >= 0.0) =>
            {
                return Err(Error::Spec("max_displacement must be nonnegative".into()))
            }
            _ => {}
        }
        if let TransformSpec::Random {
            scale_range: (lo, hi),
            translation_min,
            translation_max,
            ..
        } = &self.transform
        {
            if !(*lo > 0.0 && lo <= hi) {
                return Err(Error::Spec(
                    "scale range must be positive and ordered".into(),
                ));
            }
            if (0..3).any(|i| translation_min[i] > translation_max[i]) {
                return Err(Error::Spec("translation range is inverted".into()));
            }
        }
        Ok(())
    }

    /// Number of keypoints removed from the scene.
    pub fn occluded_count(&self) -> usize {
        (self.occlusion_fraction * self.template_k as f64).round() as usize
    }
}

/// Generates a scene; fully determined by `spec`, including its seed.
pub fn generate_scene(spec: &SceneSpec) -> Result<SceneInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let k = spec.template_k;
    let dim = spec.feature_dim;

    // template layout: rejection-sample for separation and non-collinearity
    let extent = Vector3::repeat(spec.template_extent);
    let mut positions: Vec<Vector3<f64>> = Vec::with_capacity(k);
    let mut attempts = 0;
    while positions.len() < k {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::Spec(
                "cannot place keypoints with the requested separation".into(),
            ));
        }
        let p = uniform_in(&mut rng, &(-extent), &extent);
        if positions
            .iter()
            .all(|q| (p - q).norm() >= spec.min_keypoint_separation)
        {
            positions.push(p);
        }
    }
    if is_collinear(&positions) {
        return Err(Error::Spec("template keypoints came out collinear".into()));
    }

    let mut features: Vec<Vec<f64>> = (0..k).map(|_| random_unit(&mut rng, dim)).collect();
    for group in &spec.ambiguity_groups {
        let shared = random_unit(&mut rng, dim);
        for &m in group {
            features[m] = shared.clone();
        }
    }
    let keypoints: Vec<Keypoint> = positions
        .iter()
        .zip(&features)
        .map(|(p, f)| Keypoint {
            feature: f.clone(),
            position: *p,
        })
        .collect();
    let mut meta = SourceMeta::new();
    meta.insert("method".into(), serde_json::json!("synthetic"));
    meta.insert("rng_seed".into(), serde_json::json!(spec.rng_seed));
    let template = KnowledgeTemplate::new(keypoints, dim, "synthetic", meta)?;

    let true_transform = match &spec.transform {
        TransformSpec::Fixed(t) => *t,
        TransformSpec::Random {
            max_rotation,
            translation_min,
            translation_max,
            scale_range,
        } => {
            let axis = random_direction(&mut rng);
            let angle = rng.random_range(0.0..=*max_rotation);
            let translation = uniform_in(&mut rng, translation_min, translation_max);
            let scale = rng.random_range(scale_range.0..=scale_range.1);
            SimilarityTransform::from_axis_angle(&axis, angle, translation, scale)?
        }
    };

    let displacements: Vec<Vector3<f64>> = match &spec.deformation {
        DeformationSpec::None => vec![Vector3::zeros(); k],
        DeformationSpec::Explicit(d) => d.clone(),
        DeformationSpec::Random { max_displacement } => (0..k)
            .map(|_| {
                let dir = random_direction(&mut rng);
                dir * rng.random_range(0.0..=*max_displacement)
            })
            .collect(),
    };

    let mut occluded = vec![false; k];
    for i in index::sample(&mut rng, k, spec.occluded_count()) {
        occluded[i] = true;
    }

    let mut cloud = SemanticPointCloud::empty(dim, true)?;
    cloud.reserve(k + spec.distractor_count);
    let mut ground_truth = Vec::with_capacity(k);
    for kp in 0..k {
        let truth = true_transform.apply(&positions[kp]) + displacements[kp];
        let mut cloud_index = None;
        if !occluded[kp] {
            let mut p = truth;
            if spec.position_noise_sigma > 0.0 {
                for axis in 0..3 {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    p[axis] += spec.position_noise_sigma * n;
                }
            }
            let mut f = features[kp].clone();
            if spec.feature_noise_sigma > 0.0 {
                let per_axis = spec.feature_noise_sigma / (dim as f64).sqrt();
                for x in f.iter_mut() {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    *x += per_axis * n;
                }
                if !normalize_in_place(&mut f) {
                    f = features[kp].clone();
                }
            }
            cloud.push(p, random_color(&mut rng), &f)?;
            cloud_index = Some(cloud.len() - 1);
        }
        ground_truth.push(KeypointTruth {
            position: truth,
            visible: !occluded[kp],
            cloud_index,
        });
    }

    for _ in 0..spec.distractor_count {
        let p = uniform_in(&mut rng, spec.workspace.min(), spec.workspace.max());
        let mut f = random_unit(&mut rng, dim);
        let mut tries = 0;
        while spec.distractor_feature_margin > 0.0
            && features
                .iter()
                .any(|kf| distance_unchecked(kf, &f) < spec.distractor_feature_margin)
        {
            tries += 1;
            if tries > 10_000 {
                return Err(Error::Spec(
                    "cannot draw distractor features outside the requested margin".into(),
                ));
            }
            f = random_unit(&mut rng, dim);
        }
        cloud.push(p, random_color(&mut rng), &f)?;
    }

    Ok(SceneInstance {
        template,
        cloud,
        ground_truth,
        true_transform,
    })
}
