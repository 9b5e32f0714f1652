use nalgebra::{Matrix3, Vector3};

/// Relative threshold below which the second principal variance counts as zero.
pub const COLLINEAR_TOLERANCE: f64 = 1e-9;

pub fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    let sum: Vector3<f64> = points.iter().sum();
    sum / points.len() as f64
}

/// Principal variances of a point set, largest first.
pub fn principal_variances(points: &[Vector3<f64>]) -> [f64; 3] {
    if points.is_empty() {
        return [0.0; 3];
    }
    let mu = centroid(points);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mu;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;
    let mut sv: Vec<f64> = cov.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    [sv[0], sv[1], sv[2]]
}

/// True when the points span less than a plane's worth of directions:
/// the two smallest principal variances vanish relative to the largest.
pub fn is_collinear(points: &[Vector3<f64>]) -> bool {
    let [l1, l2, _] = principal_variances(points);
    l2 <= COLLINEAR_TOLERANCE * l1
}

/// Ratio of the second to the first principal variance (0 for a line).
pub fn planarity_ratio(points: &[Vector3<f64>]) -> f64 {
    let [l1, l2, _] = principal_variances(points);
    if l1 == 0.0 {
        0.0
    } else {
        l2 / l1
    }
}
