//! Similarity transforms `p ↦ s·R·p + t`.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};

/// Tolerance for orthonormality and determinant checks on stored rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Rotation, translation and positive uniform scale.
///
/// Construction validates the rotation, so every value of this type is a
/// proper similarity transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    scale: f64,
}

impl SimilarityTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, scale: f64) -> Result<Self> {
        check_rotation(&rotation)?;
        if !translation.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("translation must be finite"));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Ok(Self {
            rotation,
            translation,
            scale,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    /// Rigid transform (scale fixed at 1).
    pub fn rigid(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        Self::new(rotation, translation, 1.0)
    }

    /// Builds a transform from a rotation about `axis` by `angle` radians.
    pub fn from_axis_angle(
        axis: &Vector3<f64>,
        angle: f64,
        translation: Vector3<f64>,
        scale: f64,
    ) -> Result<Self> {
        let axis = Unit::try_new(*axis, 1e-12)
            .ok_or_else(|| Error::invalid("rotation axis has zero length"))?;
        let rotation = Rotation3::from_axis_angle(&axis, angle).into_inner();
        Self::new(rotation, translation, scale)
    }

    /// Rebuilds a transform from its row-major storage layout.
    pub fn from_row_major(rotation: &[f64; 9], translation: [f64; 3], scale: f64) -> Result<Self> {
        Self::new(
            Matrix3::from_row_slice(rotation),
            Vector3::from(translation),
            scale,
        )
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    /// `s·R·p + t`.
    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        (self.rotation * p) * self.scale + self.translation
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            rotation: self.rotation * first.rotation,
            translation: (self.rotation * first.translation) * self.scale + self.translation,
            scale: self.scale * first.scale,
        }
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let rt = self.rotation.transpose();
        let inv_scale = 1.0 / self.scale;
        SimilarityTransform {
            rotation: rt,
            translation: -(rt * self.translation) * inv_scale,
            scale: inv_scale,
        }
    }

    /// Angle in radians of the relative rotation between `self` and `other`.
    pub fn rotation_angle_to(&self, other: &SimilarityTransform) -> f64 {
        rotation_angle_between(&self.rotation, &other.rotation)
    }
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

/// Composition free function matching the `compose(T2, T1)` convention:
/// the result applies `t1` first.
pub fn compose(t2: &SimilarityTransform, t1: &SimilarityTransform) -> SimilarityTransform {
    t2.compose(t1)
}

pub fn apply_transform(t: &SimilarityTransform, p: &Vector3<f64>) -> Vector3<f64> {
    t.apply(p)
}

/// Relative rotation angle, computed from the chordal distance so that it
/// stays accurate for angles near zero (unlike `acos` of the trace).
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let chord = (a - b).norm();
    let half = (chord / (2.0 * std::f64::consts::SQRT_2)).min(1.0);
    2.0 * half.asin()
}

pub(crate) fn check_rotation(rotation: &Matrix3<f64>) -> Result<()> {
    if !rotation.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("rotation contains non-finite entries"));
    }
    let gram = rotation.transpose() * rotation;
    let off = (gram - Matrix3::identity()).abs().max();
    if off > ROTATION_TOLERANCE {
        return Err(Error::invalid(format!(
            "rotation is not orthonormal (max |RᵀR − I| = {off:e})"
        )));
    }
    let det = rotation.determinant();
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(Error::invalid(format!(
            "rotation determinant is {det}, expected +1"
        )));
    }
    Ok(())
}
