//! The semantic point cloud: positions, colors and per-point descriptors.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::feature::{norm, normalize_in_place};

/// Allowed deviation from unit norm for clouds flagged as normalized.
pub const NORMALIZED_TOLERANCE: f64 = 1e-6;

/// One point with its position (meters), RGB color in `[0, 1]` and descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticPoint {
    pub position: Vector3<f64>,
    pub color: [f64; 3],
    pub feature: Vec<f64>,
}

/// Borrowed view of a point inside a [`SemanticPointCloud`].
#[derive(Debug, Clone, Copy)]
pub struct PointRef<'a> {
    pub position: &'a Vector3<f64>,
    pub color: &'a [f64; 3],
    pub feature: &'a [f64],
}

impl PointRef<'_> {
    pub fn to_owned(&self) -> SemanticPoint {
        SemanticPoint {
            position: *self.position,
            color: *self.color,
            feature: self.feature.to_vec(),
        }
    }
}

/// Ordered set of semantic points sharing one descriptor width.
///
/// Point order is stable: indices are used as correspondence identities.
/// Features are stored contiguously (`len × feature_dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticPointCloud {
    positions: Vec<Vector3<f64>>,
    colors: Vec<[f64; 3]>,
    features: Vec<f64>,
    feature_dim: usize,
    features_normalized: bool,
}

impl SemanticPointCloud {
    /// Empty cloud with the given descriptor width.
    pub fn empty(feature_dim: usize, features_normalized: bool) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be positive"));
        }
        Ok(Self {
            positions: Vec::new(),
            colors: Vec::new(),
            features: Vec::new(),
            feature_dim,
            features_normalized,
        })
    }

    pub fn from_points(
        points: Vec<SemanticPoint>,
        feature_dim: usize,
        features_normalized: bool,
    ) -> Result<Self> {
        let mut cloud = Self::empty(feature_dim, features_normalized)?;
        cloud.reserve(points.len());
        for p in points {
            cloud.push(p.position, p.color, &p.feature)?;
        }
        Ok(cloud)
    }

    /// Builds from parallel buffers; `features` is row-major `len × feature_dim`.
    pub fn from_parts(
        positions: Vec<Vector3<f64>>,
        colors: Vec<[f64; 3]>,
        features: Vec<f64>,
        feature_dim: usize,
        features_normalized: bool,
    ) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be positive"));
        }
        if colors.len() != positions.len() {
            return Err(Error::Dimension {
                context: "cloud colors vs positions",
                left: colors.len(),
                right: positions.len(),
            });
        }
        if features.len() != positions.len() * feature_dim {
            return Err(Error::Dimension {
                context: "cloud feature buffer vs len × feature_dim",
                left: features.len(),
                right: positions.len() * feature_dim,
            });
        }
        let cloud = Self {
            positions,
            colors,
            features,
            feature_dim,
            features_normalized,
        };
        for i in 0..cloud.len() {
            cloud.check_point(i)?;
        }
        Ok(cloud)
    }

    pub fn reserve(&mut self, additional: usize) {
        self.positions.reserve(additional);
        self.colors.reserve(additional);
        self.features.reserve(additional * self.feature_dim);
    }

    /// Appends a point after validating it against the cloud invariants.
    pub fn push(&mut self, position: Vector3<f64>, color: [f64; 3], feature: &[f64]) -> Result<()> {
        if feature.len() != self.feature_dim {
            return Err(Error::Dimension {
                context: "point feature vs cloud feature_dim",
                left: feature.len(),
                right: self.feature_dim,
            });
        }
        self.positions.push(position);
        self.colors.push(color);
        self.features.extend_from_slice(feature);
        if let Err(e) = self.check_point(self.len() - 1) {
            self.positions.pop();
            self.colors.pop();
            self.features
                .truncate(self.positions.len() * self.feature_dim);
            return Err(e);
        }
        Ok(())
    }

    fn check_point(&self, i: usize) -> Result<()> {
        if !self.positions[i].iter().all(|x| x.is_finite()) {
            return Err(Error::invalid(format!("point {i}: non-finite position")));
        }
        if !self.colors[i].iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(Error::invalid(format!("point {i}: color outside [0, 1]")));
        }
        let f = self.feature(i);
        if !f.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid(format!("point {i}: non-finite feature")));
        }
        if self.features_normalized {
            let n = norm(f);
            if (n - 1.0).abs() > NORMALIZED_TOLERANCE {
                return Err(Error::invalid(format!(
                    "point {i}: feature norm {n} in a cloud flagged as normalized"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn features_normalized(&self) -> bool {
        self.features_normalized
    }

    pub fn position(&self, i: usize) -> &Vector3<f64> {
        &self.positions[i]
    }

    pub fn color(&self, i: usize) -> &[f64; 3] {
        &self.colors[i]
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn point(&self, i: usize) -> PointRef<'_> {
        PointRef {
            position: &self.positions[i],
            color: &self.colors[i],
            feature: self.feature(i),
        }
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn colors(&self) -> &[[f64; 3]] {
        &self.colors
    }

    /// Row-major feature buffer.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = PointRef<'_>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Appends every point of `other`; both clouds must agree on descriptor
    /// width and normalization.
    pub fn extend_from(&mut self, other: &SemanticPointCloud) -> Result<()> {
        if other.feature_dim != self.feature_dim {
            return Err(Error::Dimension {
                context: "merge feature_dim",
                left: self.feature_dim,
                right: other.feature_dim,
            });
        }
        if other.features_normalized != self.features_normalized {
            return Err(Error::invalid(
                "cannot merge normalized and raw feature clouds",
            ));
        }
        self.positions.extend_from_slice(&other.positions);
        self.colors.extend_from_slice(&other.colors);
        self.features.extend_from_slice(&other.features);
        Ok(())
    }
}

/// Returns a copy with every descriptor scaled to unit L2 norm.
pub fn normalize_features(cloud: &SemanticPointCloud) -> Result<SemanticPointCloud> {
    let mut features = cloud.features.clone();
    for (i, chunk) in features.chunks_mut(cloud.feature_dim).enumerate() {
        if !normalize_in_place(chunk) {
            return Err(Error::ZeroFeature { index: i });
        }
    }
    Ok(SemanticPointCloud {
        positions: cloud.positions.clone(),
        colors: cloud.colors.clone(),
        features,
        feature_dim: cloud.feature_dim,
        features_normalized: true,
    })
}
