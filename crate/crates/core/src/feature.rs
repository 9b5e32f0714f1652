//! The semantic feature metric.

use crate::error::{Error, Result};

/// Euclidean distance between two descriptors.
pub fn feature_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            context: "feature_distance",
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(distance_unchecked(a, b))
}

/// Same as [`feature_distance`] for callers that already validated lengths.
#[inline]
pub(crate) fn distance_unchecked(a: &[f64], b: &[f64]) -> f64 {
    squared_distance_unchecked(a, b).sqrt()
}

#[inline]
pub(crate) fn squared_distance_unchecked(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `v` to unit length in place. Returns false for a zero vector,
/// which is left untouched.
pub(crate) fn normalize_in_place(v: &mut [f64]) -> bool {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    // an already-unit vector is kept bit-for-bit
    if n == 1.0 {
        return true;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_is_zero() {
        assert_eq!(feature_distance(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn orthonormal_pair() {
        let d = feature_distance(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!((d - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn mismatch_names_both_lengths() {
        let err = feature_distance(&[1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap_err();
        match err {
            Error::Dimension { left, right, .. } => assert_eq!((left, right), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains('2') && err.to_string().contains('3'));
    }

    #[test]
    fn matches_brute_force_in_384_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a: Vec<f64> = (0..384).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..384).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut sum = 0.0;
            for i in 0..384 {
                sum += (a[i] - b[i]) * (a[i] - b[i]);
            }
            let expected = sum.sqrt();
            let got = feature_distance(&a, &b).unwrap();
            assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
            assert_eq!(got, feature_distance(&b, &a).unwrap());
        }
    }

    #[test]
    fn zero_vector_is_not_normalized() {
        let mut v = [0.0, 0.0];
        assert!(!normalize_in_place(&mut v));
    }
}
