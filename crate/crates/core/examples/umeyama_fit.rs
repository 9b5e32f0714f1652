//! Recover a known similarity transform from exact correspondences.

use kptmatch::{umeyama, SimilarityTransform};
use nalgebra::Vector3;

fn main() -> kptmatch::Result<()> {
    let truth = SimilarityTransform::from_axis_angle(
        &Vector3::new(0.0, 0.0, 1.0),
        30f64.to_radians(),
        Vector3::new(0.1, 0.2, 0.3),
        1.2,
    )?;
    let source = [
        Vector3::new(0.0, 0.0, 0.0),
        Vector3::new(0.1, 0.0, 0.0),
        Vector3::new(0.0, 0.08, 0.0),
        Vector3::new(0.0, 0.0, 0.05),
        Vector3::new(0.07, 0.03, -0.02),
    ];
    let target: Vec<_> = source.iter().map(|p| truth.apply(p)).collect();

    let fit = umeyama(&source, &target, true)?;
    println!("scale        {:.12}", fit.scale());
    println!("translation  {:.12?}", fit.translation().as_slice());
    println!("rotation err {:.3e} rad", fit.rotation_angle_to(&truth));

    // mirrored target: the fit stays a proper rotation
    let mirrored: Vec<_> = target
        .iter()
        .map(|p| Vector3::new(-p.x, p.y, p.z))
        .collect();
    let proper = umeyama(&source, &mirrored, true)?;
    println!("mirror fit det(R) = {:.6}", proper.rotation().determinant());
    Ok(())
}
