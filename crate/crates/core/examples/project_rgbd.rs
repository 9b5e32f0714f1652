//! Back-project a synthetic RGB-D frame into a semantic point cloud, with
//! and without a workspace box.

use kptmatch::projection::{
    project_with_pixels, CameraExtrinsics, CameraIntrinsics, DepthImage, FeatureImage,
    ProjectionOptions, Workspace,
};
use nalgebra::{Matrix3, Vector3};

fn main() -> kptmatch::Result<()> {
    let (w, h, dim) = (64u32, 48u32, 3u32);
    let mut feats = Vec::new();
    let mut depth = Vec::new();
    for v in 0..h {
        for u in 0..w {
            let on_box = (20..44).contains(&u) && (14..34).contains(&v);
            feats.extend_from_slice(if on_box {
                &[1.0f32, 0.2, 0.0]
            } else {
                &[0.0, 0.3, 1.0]
            });
            depth.push(if (u + v) % 17 == 0 {
                0
            } else if on_box {
                1100
            } else {
                1250
            });
        }
    }
    let features = FeatureImage::new(w, h, dim, feats)?;
    let depth = DepthImage::new(w, h, depth)?;
    let intrinsics = CameraIntrinsics {
        fx: 60.0,
        fy: 60.0,
        cx: 32.0,
        cy: 24.0,
        width: w,
        height: h,
    };
    // camera 1.3 m above the table, looking straight down
    let extrinsics = CameraExtrinsics::new(
        Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0),
        Vector3::new(0.0, 0.0, 1.3),
    )?;

    let all = project_with_pixels(
        &features,
        &depth,
        &intrinsics,
        &extrinsics,
        &ProjectionOptions::default(),
    )?;
    println!("stride 4: {} points", all.cloud.len());

    let table_top = Workspace::new(Vector3::new(-1.0, -1.0, 0.1), Vector3::new(1.0, 1.0, 1.0))?;
    let options = ProjectionOptions {
        stride: 1,
        workspace: Some(&table_top),
        ..Default::default()
    };
    let object = project_with_pixels(&features, &depth, &intrinsics, &extrinsics, &options)?;
    println!("object above z = 0.1 m: {} points", object.cloud.len());
    let (u, v) = object.pixels[0];
    println!(
        "first point from pixel ({u}, {v}) at {:.3?}",
        object.cloud.position(0).as_slice()
    );
    Ok(())
}
