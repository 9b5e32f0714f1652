//! Build a knowledge template from a synthetic object cloud by farthest
//! point sampling and by manual annotation, then check it.

use kptmatch::template_builder::{
    build_from_annotations, fps_sample, validate_template, Annotation, FpsWeights,
};
use kptmatch::SemanticPointCloud;
use nalgebra::Vector3;

fn main() -> kptmatch::Result<()> {
    // a 10 cm mug-like ring; the descriptor turns slowly around the rim
    let mut cloud = SemanticPointCloud::empty(4, true)?;
    for i in 0..24 {
        for j in 0..6 {
            let a = i as f64 / 24.0 * std::f64::consts::TAU;
            let h = j as f64 * 0.02;
            let p = Vector3::new(0.05 * a.cos(), 0.05 * a.sin(), h);
            let f = [a.cos(), a.sin(), h * 5.0, 1.0];
            let n = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            cloud.push(p, [0.8, 0.2, 0.1], &f.map(|x| x / n))?;
        }
    }

    let t = fps_sample(&cloud, 8, &FpsWeights::default(), None, "mug")?;
    println!("FPS template: {} keypoints", t.len());
    for (k, kp) in t.keypoints().iter().enumerate() {
        println!("  {k}: {:.3?}", kp.position.as_slice());
    }
    let positional = fps_sample(&cloud, 8, &FpsWeights::positional(), None, "mug")?;
    println!(
        "positional-only FPS differs: {}",
        positional.positions() != t.positions()
    );

    let handles = [
        Annotation::Index(0),
        Annotation::Index(5),
        Annotation::Index(72),
        Annotation::Index(140),
    ];
    let annotated = build_from_annotations(&cloud, &handles, None, "mug")?;
    println!("annotated template: {} keypoints", annotated.len());

    let tiny = fps_sample(&cloud, 2, &FpsWeights::default(), None, "mug")?;
    for d in validate_template(&tiny) {
        println!("warning: {d}");
    }
    Ok(())
}
