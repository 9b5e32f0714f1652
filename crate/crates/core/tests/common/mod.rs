#![allow(dead_code)]

use kptmatch::bench::{SceneSpec, TransformSpec};
use kptmatch::{SemanticPointCloud, SimilarityTransform};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn random_point(rng: &mut impl Rng, half: f64) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-half..half),
        rng.random_range(-half..half),
        rng.random_range(-half..half),
    )
}

/// Random cloud with unit features. With `grid`, coordinates and colors are
/// quantized so exact distance ties occur.
pub fn random_cloud(rng: &mut impl Rng, n: usize, dim: usize, grid: bool) -> SemanticPointCloud {
    let mut cloud = SemanticPointCloud::empty(dim, true).unwrap();
    let palette: Vec<Vec<f64>> = (0..4).map(|_| unit_vector(rng, dim)).collect();
    for _ in 0..n {
        let (p, c, f) = if grid {
            let mut q = || rng.random_range(0..5) as f64 * 0.25;
            let p = Vector3::new(q(), q(), q());
            let c = [q(), q(), q()];
            (p, c, palette[rng.random_range(0..palette.len())].clone())
        } else {
            (
                random_point(rng, 0.5),
                [rng.random(), rng.random(), rng.random()],
                unit_vector(rng, dim),
            )
        };
        cloud.push(p, c, &f).unwrap();
    }
    cloud
}

/// Reference farthest point sampling, recomputing every minimum distance
/// from scratch: O(n²·k).
pub fn brute_force_fps(cloud: &SemanticPointCloud, k: usize, w: (f64, f64, f64)) -> Vec<usize> {
    let n = cloud.len();
    let pos: Vec<[f64; 3]> = cloud.positions().iter().map(|p| [p.x, p.y, p.z]).collect();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &pos {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let diag = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2)).sqrt();
    let diag = if diag > 0.0 { diag } else { 1.0 };
    let dist = |a: usize, b: usize| {
        let dp: f64 = (0..3)
            .map(|i| ((pos[a][i] - pos[b][i]) / diag).powi(2))
            .sum();
        let (ca, cb) = (cloud.color(a), cloud.color(b));
        let dc: f64 = (0..3).map(|i| (ca[i] - cb[i]) * (ca[i] - cb[i])).sum();
        let df: f64 = cloud
            .feature(a)
            .iter()
            .zip(cloud.feature(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        w.0 * dp + w.1 * dc + w.2 * df
    };
    let mut c = [0.0; 3];
    for p in &pos {
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    let c = c.map(|x| x / n as f64);
    let mut first = 0;
    let mut best = f64::INFINITY;
    for (i, p) in pos.iter().enumerate() {
        let d: f64 = (0..3).map(|a| (p[a] - c[a]) * (p[a] - c[a])).sum();
        if d < best {
            best = d;
            first = i;
        }
    }
    let mut selected = vec![first];
    while selected.len() < k {
        let mut pick = None;
        let mut pick_d = f64::NEG_INFINITY;
        for i in 0..n {
            if selected.contains(&i) {
                continue;
            }
            let m = selected
                .iter()
                .map(|&s| dist(s, i))
                .fold(f64::INFINITY, f64::min);
            if m > pick_d {
                pick_d = m;
                pick = Some(i);
            }
        }
        selected.push(pick.unwrap());
    }
    selected
}

pub fn rot_axis_angle(
    axis: Vector3<f64>,
    deg: f64,
    t: Vector3<f64>,
    s: f64,
) -> SimilarityTransform {
    SimilarityTransform::from_axis_angle(&axis, deg.to_radians(), t, s).unwrap()
}

/// Noise-free clutter scene with a fixed ground-truth transform.
pub fn clutter_spec(seed: u64, transform: SimilarityTransform, distractors: usize) -> SceneSpec {
    SceneSpec {
        distractor_count: distractors,
        transform: TransformSpec::Fixed(transform),
        rng_seed: seed,
        ..Default::default()
    }
}

pub fn transform_errors(a: &SimilarityTransform, b: &SimilarityTransform) -> (f64, f64, f64) {
    (
        a.rotation_angle_to(b),
        (a.translation() - b.translation()).norm(),
        (a.scale() - b.scale()).abs(),
    )
}

pub struct RgbdFixture {
    pub features: kptmatch::projection::FeatureImage,
    pub depth: kptmatch::projection::DepthImage,
    pub calib: kptmatch::io::Calibration,
}

/// A tabletop seen from above: a background plane at 1.2 m and a raised
/// object in the middle whose descriptors vary smoothly across its surface.
/// A few pixels have no depth.
pub fn synthetic_rgbd(width: u32, height: u32, dim: usize, seed: u64) -> RgbdFixture {
    use kptmatch::projection::{CameraExtrinsics, CameraIntrinsics, DepthImage, FeatureImage};
    let mut r = rng(seed);
    let background = unit_vector(&mut r, dim);
    let anchors: Vec<Vec<f64>> = (0..6).map(|_| unit_vector(&mut r, dim)).collect();
    let mut feats = Vec::with_capacity((width * height) as usize * dim);
    let mut depth = Vec::with_capacity((width * height) as usize);
    for v in 0..height {
        for u in 0..width {
            let x = u as f64 / width as f64;
            let y = v as f64 / height as f64;
            let on_object = (0.25..0.75).contains(&x) && (0.2..0.8).contains(&y);
            let f: Vec<f64> = if on_object {
                let a = ((x - 0.25) * 2.0 * 2.999) as usize;
                let b = if y < 0.5 { 0 } else { 3 };
                let w = (y - 0.2) / 0.6;
                anchors[(a + b) % 6]
                    .iter()
                    .zip(&anchors[(a + b + 1) % 6])
                    .map(|(p, q)| p * (1.0 - w) + q * w + 0.02 * r.random_range(-1.0..1.0))
                    .collect()
            } else {
                background
                    .iter()
                    .map(|p| p + 0.05 * r.random_range(-1.0..1.0))
                    .collect()
            };
            feats.extend(f.iter().map(|x| *x as f32));
            let z = if r.random_bool(0.03) {
                0
            } else if on_object {
                (1000.0 - 150.0 * (1.0 - ((x - 0.5).powi(2) + (y - 0.5).powi(2)) * 4.0)) as u16
            } else {
                1200
            };
            depth.push(z);
        }
    }
    let intrinsics = CameraIntrinsics {
        fx: width as f64,
        fy: width as f64,
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
        width,
        height,
    };
    let flip = nalgebra::Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
    let extrinsics = CameraExtrinsics::new(flip, Vector3::new(0.0, 0.0, 1.3)).unwrap();
    RgbdFixture {
        features: FeatureImage::new(width, height, dim as u32, feats).unwrap(),
        depth: DepthImage::new(width, height, depth).unwrap(),
        calib: kptmatch::io::Calibration {
            intrinsics,
            extrinsics,
        },
    }
}

/// Writes the fixture as `features.sfim`, `depth.sdep` and `calib.json`.
pub fn write_rgbd(dir: &std::path::Path, fx: &RgbdFixture) {
    kptmatch::io::write_sfim(&dir.join("features.sfim"), &fx.features).unwrap();
    kptmatch::io::write_sdep(&dir.join("depth.sdep"), &fx.depth).unwrap();
    kptmatch::io::write_calib(&dir.join("calib.json"), &fx.calib).unwrap();
}

/// Runs the CLI in-process, returning (exit code, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = kptmatch::cli::run(
        std::iter::once("kptmatch").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}
