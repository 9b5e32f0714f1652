//! Hide 40% of the keypoints and recover them from the surviving matches.

use kptmatch::bench::{generate_scene, SceneSpec};
use kptmatch::{match_template, MatchParams, MatchStatus};

fn main() -> kptmatch::Result<()> {
    let scene = generate_scene(&SceneSpec {
        occlusion_fraction: 0.4,
        distractor_count: 300,
        rng_seed: 12,
        ..Default::default()
    })?;
    let m = match_template(&scene.template, &scene.cloud, &MatchParams::default())?;
    println!("inliers: {}", m.inlier_count);
    for (k, (kp, truth)) in m.keypoints.iter().zip(&scene.ground_truth).enumerate() {
        let how = match kp.status {
            MatchStatus::Matched(i) => format!("matched #{i}"),
            MatchStatus::Inferred => "inferred".into(),
        };
        println!(
            "keypoint {k}: visible={:5} {how:14} error {:.1e} m",
            truth.visible,
            (kp.position - truth.position).norm()
        );
    }
    Ok(())
}
