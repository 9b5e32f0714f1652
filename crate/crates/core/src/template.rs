//! Category-level knowledge templates.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::is_collinear;

/// Largest template accepted by coarse matching.
pub const MAX_COARSE_KEYPOINTS: usize = 64;

/// A semantic keypoint: descriptor plus position in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub feature: Vec<f64>,
    pub position: Vector3<f64>,
}

/// Free-form provenance (capture id, sampling method, selected indices, ...).
pub type SourceMeta = BTreeMap<String, serde_json::Value>;

/// Ordered set of `K` semantic keypoints treated as one rigid graph.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeTemplate {
    keypoints: Vec<Keypoint>,
    feature_dim: usize,
    category_label: String,
    source_meta: SourceMeta,
}

impl KnowledgeTemplate {
    /// Validates and builds a template.
    ///
    /// Templates with fewer than three keypoints are accepted (see
    /// [`KnowledgeTemplate::is_degenerate`]); with three or more, exactly
    /// collinear layouts are rejected.
    pub fn new(
        keypoints: Vec<Keypoint>,
        feature_dim: usize,
        category_label: impl Into<String>,
        source_meta: SourceMeta,
    ) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be positive"));
        }
        if keypoints.is_empty() {
            return Err(Error::invalid("template needs at least one keypoint"));
        }
        for (k, kp) in keypoints.iter().enumerate() {
            if kp.feature.len() != feature_dim {
                return Err(Error::Dimension {
                    context: "keypoint feature vs template feature_dim",
                    left: kp.feature.len(),
                    right: feature_dim,
                });
            }
            if !kp
                .position
                .iter()
                .chain(kp.feature.iter())
                .all(|x| x.is_finite())
            {
                return Err(Error::invalid(format!(
                    "keypoint {k} has non-finite values"
                )));
            }
        }
        if keypoints.len() >= 3 {
            let positions: Vec<_> = keypoints.iter().map(|k| k.position).collect();
            if is_collinear(&positions) {
                return Err(Error::DegenerateGeometry(
                    "template keypoints are collinear",
                ));
            }
        }
        Ok(Self {
            keypoints,
            feature_dim,
            category_label: category_label.into(),
            source_meta,
        })
    }

    pub fn keypoints(&self) -> &[Keypoint] {
        &self.keypoints
    }

    pub fn keypoint(&self, k: usize) -> &Keypoint {
        &self.keypoints[k]
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn category_label(&self) -> &str {
        &self.category_label
    }

    pub fn source_meta(&self) -> &SourceMeta {
        &self.source_meta
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.keypoints.iter().map(|k| k.position).collect()
    }

    /// Fewer than three keypoints: usable for top-1 matching only.
    pub fn is_degenerate(&self) -> bool {
        self.keypoints.len() < 3
    }

    pub fn with_category(mut self, label: impl Into<String>) -> Self {
        self.category_label = label.into();
        self
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: serde_json::Value) -> Self {
        self.source_meta.insert(key.into(), value);
        self
    }
}
