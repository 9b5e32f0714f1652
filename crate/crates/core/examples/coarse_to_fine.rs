//! Match a template into a cluttered scene and compare the three matching
//! variants.

use kptmatch::bench::{generate_scene, SceneSpec, TransformSpec};
use kptmatch::{MatchParams, MatchVariant, SimilarityTransform};
use nalgebra::Vector3;

fn main() -> kptmatch::Result<()> {
    let truth = SimilarityTransform::from_axis_angle(
        &Vector3::new(1.0, 1.0, 0.0),
        45f64.to_radians(),
        Vector3::new(0.1, -0.05, 0.2),
        1.1,
    )?;
    let scene = generate_scene(&SceneSpec {
        distractor_count: 500,
        transform: TransformSpec::Fixed(truth),
        ambiguity_groups: vec![vec![0, 1]],
        rng_seed: 3,
        ..Default::default()
    })?;
    println!(
        "scene: {} points, template K = {}",
        scene.cloud.len(),
        scene.template.len()
    );

    let params = MatchParams::default();
    for variant in MatchVariant::ALL {
        let m = variant.run(&scene.template, &scene.cloud, &params)?;
        let err: f64 = m
            .keypoints
            .iter()
            .zip(&scene.ground_truth)
            .map(|(k, g)| (k.position - g.position).norm())
            .sum::<f64>()
            / m.keypoints.len() as f64;
        println!(
            "{:6}  mean error {:.2e} m  rotation error {:.2e} rad  objective {:.4}",
            variant.name(),
            err,
            m.transform.rotation_angle_to(&truth),
            m.objective_value
        );
    }
    Ok(())
}
