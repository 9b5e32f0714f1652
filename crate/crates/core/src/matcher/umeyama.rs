//! Closed-form least-squares similarity between corresponded point sets.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{centroid, is_collinear};
use crate::transform::SimilarityTransform;

/// Finds `(R, t, s)` minimizing `Σ ‖target_i − (s·R·source_i + t)‖²`.
///
/// `R` is always a proper rotation: when the optimal orthogonal matrix would
/// be a reflection, the smallest singular direction is flipped. With
/// `with_scale = false`, `s` is fixed at 1.
pub fn umeyama(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    with_scale: bool,
) -> Result<SimilarityTransform> {
    if source.len() != target.len() {
        return Err(Error::Dimension {
            context: "umeyama source vs target",
            left: source.len(),
            right: target.len(),
        });
    }
    if source.len() < 3 {
        return Err(Error::DegenerateGeometry(
            "umeyama needs at least 3 point pairs",
        ));
    }
    if is_collinear(source) {
        return Err(Error::DegenerateGeometry(
            "umeyama source points are collinear",
        ));
    }

    let n = source.len() as f64;
    let mu_src = centroid(source);
    let mu_dst = centroid(target);
    let mut cov = Matrix3::zeros();
    let mut var_src = 0.0;
    for (s, d) in source.iter().zip(target) {
        let ds = s - mu_src;
        let dd = d - mu_dst;
        cov += dd * ds.transpose();
        var_src += ds.norm_squared();
    }
    cov /= n;
    var_src /= n;

    let svd = cov.svd(true, true);
    let u = svd
        .u
        .ok_or(Error::DegenerateGeometry("SVD did not converge"))?;
    let v_t = svd
        .v_t
        .ok_or(Error::DegenerateGeometry("SVD did not converge"))?;
    let sigma = svd.singular_values;

    // nalgebra does not sort singular values; the sign correction belongs
    // on the smallest one.
    let smallest = (0..3)
        .min_by(|&a, &b| sigma[a].total_cmp(&sigma[b]))
        .expect("three singular values");
    let mut signs = Vector3::repeat(1.0);
    if (u * v_t).determinant() < 0.0 {
        signs[smallest] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&signs) * v_t;

    let scale = if with_scale {
        sigma.component_mul(&signs).sum() / var_src
    } else {
        1.0
    };
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::DegenerateGeometry(
            "umeyama produced a non-positive scale",
        ));
    }
    let translation = mu_dst - (rotation * mu_src) * scale;
    SimilarityTransform::new(rotation, translation, scale)
}

/// Sum of squared residuals of `t` on the pairs.
pub fn squared_residual(
    t: &SimilarityTransform,
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
) -> f64 {
    source
        .iter()
        .zip(target)
        .map(|(s, d)| (d - t.apply(s)).norm_squared())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn identical_sets_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 10);
        let t = umeyama(&pts, &pts, true).unwrap();
        assert!(t.rotation_angle_to(&SimilarityTransform::identity()) < 1e-12);
        assert!(t.translation().norm() < 1e-12);
        assert!((t.scale() - 1.0).abs() < 1e-12);
        assert!(squared_residual(&t, &pts, &pts) < 1e-24);
    }

    #[test]
    fn recovers_known_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let truth = SimilarityTransform::from_axis_angle(
            &Vector3::z(),
            30f64.to_radians(),
            Vector3::new(0.1, 0.2, 0.3),
            1.2,
        )
        .unwrap();
        let src = random_points(&mut rng, 10);
        let dst: Vec<_> = src.iter().map(|p| truth.apply(p)).collect();
        let t = umeyama(&src, &dst, true).unwrap();
        assert!(t.rotation_angle_to(&truth) < 1e-9);
        assert!((t.translation() - truth.translation()).norm() < 1e-9);
        assert!((t.scale() - truth.scale()).abs() < 1e-9);
    }

    #[test]
    fn rigid_mode_fixes_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = random_points(&mut rng, 8);
        let dst: Vec<_> = src.iter().map(|p| p * 2.0).collect();
        assert_eq!(umeyama(&src, &dst, false).unwrap().scale(), 1.0);
    }

    /// Best proper-rotation fit by enumerating every sign pattern on the
    /// singular directions and keeping the lowest-residual proper one.
    fn sign_enumeration_oracle(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> f64 {
        let n = src.len() as f64;
        let ms: Vector3<f64> = src.iter().sum::<Vector3<f64>>() / n;
        let md: Vector3<f64> = dst.iter().sum::<Vector3<f64>>() / n;
        let mut h = Matrix3::zeros();
        for (s, d) in src.iter().zip(dst) {
            h += (d - md) * (s - ms).transpose();
        }
        let svd = h.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut best = f64::INFINITY;
        for mask in 0..8u32 {
            let d = Vector3::new(
                if mask & 1 == 0 { 1.0 } else { -1.0 },
                if mask & 2 == 0 { 1.0 } else { -1.0 },
                if mask & 4 == 0 { 1.0 } else { -1.0 },
            );
            let r = u * Matrix3::from_diagonal(&d) * vt;
            if r.determinant() < 0.0 {
                continue;
            }
            // optimal scale and translation for a fixed rotation
            let num: f64 = src
                .iter()
                .zip(dst)
                .map(|(s, t)| (t - md).dot(&(r * (s - ms))))
                .sum();
            let den: f64 = src.iter().map(|s| (s - ms).norm_squared()).sum();
            let scale = (num / den).max(0.0);
            let res: f64 = src
                .iter()
                .zip(dst)
                .map(|(s, t)| ((t - md) - r * (s - ms) * scale).norm_squared())
                .sum();
            best = best.min(res);
        }
        best
    }

    #[test]
    fn mirrored_target_stays_proper() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let src = random_points(&mut rng, 12);
            let dst: Vec<_> = src.iter().map(|p| Vector3::new(-p.x, p.y, p.z)).collect();
            let t = umeyama(&src, &dst, true).unwrap();
            assert!((t.rotation().determinant() - 1.0).abs() < 1e-12);
            let got = squared_residual(&t, &src, &dst);
            let want = sign_enumeration_oracle(&src, &dst);
            assert!((got - want).abs() < 1e-9 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn degenerate_inputs() {
        let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(
            umeyama(&line, &line, true),
            Err(Error::DegenerateGeometry(_))
        ));
        let tri = vec![Vector3::zeros(), Vector3::x(), Vector3::y()];
        assert!(matches!(
            umeyama(&tri, &tri[..2], true),
            Err(Error::Dimension { .. })
        ));
        // all targets coincide: zero scale is not a similarity
        let collapsed = vec![Vector3::new(1.0, 1.0, 1.0); 3];
        assert!(umeyama(&tri, &collapsed, true).is_err());
    }
}
