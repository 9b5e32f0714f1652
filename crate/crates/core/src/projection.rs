//! Back-projection of per-pixel descriptors and depth into a semantic point
//! cloud in robot-base coordinates.
//!
//! Feature images are expected at pixel resolution: the producer is
//! responsible for upsampling patch-grid features (nearest neighbour) before
//! writing them. Nothing here resamples.

use nalgebra::{Matrix3, Vector3};

use crate::cloud::{normalize_features, SemanticPointCloud};
use crate::error::{Error, Result};
use crate::transform::check_rotation;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image size must be positive"));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(Error::invalid("principal point lies outside the image"));
        }
        Ok(())
    }

    /// Camera-frame point for pixel `(u, v)` at depth `z` meters.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }

    /// Pixel coordinates and depth of a camera-frame point.
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64, f64) {
        (
            p.x * self.fx / p.z + self.cx,
            p.y * self.fy / p.z + self.cy,
            p.z,
        )
    }
}

/// Rigid camera-to-base transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraExtrinsics {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl CameraExtrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation)?;
        if !translation.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("extrinsic translation must be finite"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn camera_to_base(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn base_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }
}

/// Row-major `height × width × feature_dim` descriptor raster.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImage {
    width: u32,
    height: u32,
    feature_dim: u32,
    data: Vec<f32>,
}

impl FeatureImage {
    pub fn new(width: u32, height: u32, feature_dim: u32, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || feature_dim == 0 {
            return Err(Error::invalid("feature image dimensions must be positive"));
        }
        let expected = width as usize * height as usize * feature_dim as usize;
        if data.len() != expected {
            return Err(Error::Dimension {
                context: "feature image data vs width × height × feature_dim",
                left: data.len(),
                right: expected,
            });
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("feature image contains non-finite values"));
        }
        Ok(Self {
            width,
            height,
            feature_dim,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn feature_dim(&self) -> u32 {
        self.feature_dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, u: u32, v: u32) -> &[f32] {
        let n = self.feature_dim as usize;
        let start = (v as usize * self.width as usize + u as usize) * n;
        &self.data[start..start + n]
    }
}

/// Row-major depth raster in millimeters; zero marks an invalid pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    data: Vec<u16>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32, data: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("depth image dimensions must be positive"));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::Dimension {
                context: "depth data vs width × height",
                left: data.len(),
                right: width as usize * height as usize,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn at(&self, u: u32, v: u32) -> u16 {
        self.data[v as usize * self.width as usize + u as usize]
    }
}

/// Row-major RGB raster with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    width: u32,
    height: u32,
    data: Vec<[f64; 3]>,
}

impl ColorImage {
    pub fn new(width: u32, height: u32, data: Vec<[f64; 3]>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::Dimension {
                context: "color data vs width × height",
                left: data.len(),
                right: width as usize * height as usize,
            });
        }
        if !data.iter().flatten().all(|c| (0.0..=1.0).contains(c)) {
            return Err(Error::invalid("color channels must lie in [0, 1]"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn at(&self, u: u32, v: u32) -> [f64; 3] {
        self.data[v as usize * self.width as usize + u as usize]
    }
}

/// Row-major boolean raster; `true` keeps the pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32, data: Vec<bool>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::Dimension {
                context: "mask data vs width × height",
                left: data.len(),
                right: width as usize * height as usize,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn at(&self, u: u32, v: u32) -> bool {
        self.data[v as usize * self.width as usize + u as usize]
    }
}

/// Axis-aligned box in base coordinates (bounds inclusive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Workspace {
    min: Vector3<f64>,
    max: Vector3<f64>,
}

impl Workspace {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Result<Self> {
        if !(min.iter().chain(max.iter()).all(|x| x.is_finite())) {
            return Err(Error::invalid("workspace bounds must be finite"));
        }
        if !(0..3).all(|i| min[i] < max[i]) {
            return Err(Error::invalid(
                "workspace min must be below max on every axis",
            ));
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> &Vector3<f64> {
        &self.min
    }

    pub fn max(&self) -> &Vector3<f64> {
        &self.max
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }
}

/// Optional inputs and knobs for [`project`].
#[derive(Debug, Clone, Copy)]
pub struct ProjectionOptions<'a> {
    pub color: Option<&'a ColorImage>,
    pub mask: Option<&'a Mask>,
    pub workspace: Option<&'a Workspace>,
    /// Sample every `stride`-th pixel along both axes.
    pub stride: u32,
    /// L2-normalize descriptors (recorded in the cloud flag).
    pub normalize: bool,
}

impl Default for ProjectionOptions<'_> {
    fn default() -> Self {
        Self {
            color: None,
            mask: None,
            workspace: None,
            stride: 4,
            normalize: true,
        }
    }
}

/// A projected cloud together with the source pixel of every point.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedCloud {
    pub cloud: SemanticPointCloud,
    pub pixels: Vec<(u32, u32)>,
}

impl ProjectedCloud {
    /// Cloud index produced from pixel `(u, v)`, if it survived filtering.
    pub fn index_of_pixel(&self, u: u32, v: u32) -> Option<usize> {
        self.pixels.iter().position(|&p| p == (u, v))
    }
}

/// Projects sampled pixels with valid depth into a semantic point cloud.
///
/// Points come out in row-major scan order. Pixels with zero depth, a false
/// mask entry, or a base-frame position outside the workspace are skipped.
pub fn project(
    features: &FeatureImage,
    depth: &DepthImage,
    intrinsics: &CameraIntrinsics,
    extrinsics: &CameraExtrinsics,
    options: &ProjectionOptions<'_>,
) -> Result<SemanticPointCloud> {
    project_with_pixels(features, depth, intrinsics, extrinsics, options).map(|p| p.cloud)
}

pub fn project_with_pixels(
    features: &FeatureImage,
    depth: &DepthImage,
    intrinsics: &CameraIntrinsics,
    extrinsics: &CameraExtrinsics,
    options: &ProjectionOptions<'_>,
) -> Result<ProjectedCloud> {
    intrinsics.validate()?;
    if options.stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    let (w, h) = (features.width(), features.height());
    let check = |context, dims: (u32, u32)| {
        if dims != (w, h) {
            Err(Error::Dimension {
                context,
                left: dims.0 as usize * dims.1 as usize,
                right: w as usize * h as usize,
            })
        } else {
            Ok(())
        }
    };
    check(
        "depth raster vs feature raster",
        (depth.width(), depth.height()),
    )?;
    check(
        "intrinsics size vs feature raster",
        (intrinsics.width, intrinsics.height),
    )?;
    if let Some(c) = options.color {
        check("color raster vs feature raster", (c.width(), c.height()))?;
    }
    if let Some(m) = options.mask {
        check("mask vs feature raster", (m.width(), m.height()))?;
    }

    let dim = features.feature_dim() as usize;
    let mut cloud = SemanticPointCloud::empty(dim, false)?;
    let mut pixels = Vec::new();
    let mut feature = vec![0.0f64; dim];
    for v in (0..h).step_by(options.stride as usize) {
        for u in (0..w).step_by(options.stride as usize) {
            let d = depth.at(u, v);
            if d == 0 {
                continue;
            }
            if let Some(m) = options.mask {
                if !m.at(u, v) {
                    continue;
                }
            }
            let z = d as f64 / 1000.0;
            let cam = intrinsics.unproject(u as f64, v as f64, z);
            let p = extrinsics.camera_to_base(&cam);
            if let Some(ws) = options.workspace {
                if !ws.contains(&p) {
                    continue;
                }
            }
            let color = options.color.map(|c| c.at(u, v)).unwrap_or([0.0; 3]);
            for (dst, src) in feature.iter_mut().zip(features.pixel(u, v)) {
                *dst = *src as f64;
            }
            cloud.push(p, color, &feature)?;
            pixels.push((u, v));
        }
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if options.normalize {
        cloud = normalize_features(&cloud)?;
    }
    Ok(ProjectedCloud { cloud, pixels })
}

/// Concatenates clouds (e.g. from several calibrated cameras) in order.
pub fn merge_clouds(clouds: &[SemanticPointCloud]) -> Result<SemanticPointCloud> {
    let first = clouds.first().ok_or(Error::EmptyCloud)?;
    let mut merged = first.clone();
    merged.reserve(clouds[1..].iter().map(|c| c.len()).sum());
    for c in &clouds[1..] {
        merged.extend_from(c)?;
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::SemanticPoint;

    fn intr(w: u32, h: u32) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 500.0,
            fy: 520.0,
            cx: (w / 2) as f64,
            cy: (h / 2) as f64,
            width: w,
            height: h,
        }
    }

    fn uniform_features(w: u32, h: u32, dim: u32) -> FeatureImage {
        let data = (0..w * h * dim).map(|i| 1.0 + (i % 7) as f32).collect();
        FeatureImage::new(w, h, dim, data).unwrap()
    }

    fn opts(stride: u32) -> ProjectionOptions<'static> {
        ProjectionOptions {
            stride,
            ..Default::default()
        }
    }

    #[test]
    fn principal_ray() {
        let k = intr(8, 8);
        let mut depth = vec![0u16; 64];
        depth[4 * 8 + 4] = 1000;
        let cloud = project(
            &uniform_features(8, 8, 3),
            &DepthImage::new(8, 8, depth).unwrap(),
            &k,
            &CameraExtrinsics::identity(),
            &opts(1),
        )
        .unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(*cloud.position(0), Vector3::new(0.0, 0.0, 1.0));
        assert!(cloud.features_normalized());
    }

    #[test]
    fn off_axis_pinhole_arithmetic() {
        // u = cx + fx lies one focal length off axis: x = z.
        let k = CameraIntrinsics {
            fx: 3.0,
            fy: 3.0,
            cx: 1.0,
            cy: 2.0,
            width: 6,
            height: 5,
        };
        let mut depth = vec![0u16; 30];
        depth[2 * 6 + 4] = 2000;
        let cloud = project(
            &uniform_features(6, 5, 2),
            &DepthImage::new(6, 5, depth).unwrap(),
            &k,
            &CameraExtrinsics::identity(),
            &opts(1),
        )
        .unwrap();
        assert_eq!(*cloud.position(0), Vector3::new(2.0, 0.0, 2.0));
    }

    #[test]
    fn workspace_filter_matches_brute_force_count() {
        let k = intr(4, 4);
        let depth: Vec<u16> = (0..16)
            .map(|i| if i % 5 == 3 { 0 } else { 800 + 10 * i as u16 })
            .collect();
        let ws =
            Workspace::new(Vector3::new(-1.0, -1.0, 0.0), Vector3::new(1.0, 1.0, 0.875)).unwrap();
        let options = ProjectionOptions {
            workspace: Some(&ws),
            stride: 1,
            ..Default::default()
        };
        let depth_img = DepthImage::new(4, 4, depth.clone()).unwrap();
        let cloud = project(
            &uniform_features(4, 4, 2),
            &depth_img,
            &k,
            &CameraExtrinsics::identity(),
            &options,
        )
        .unwrap();

        let mut expected = 0;
        let mut total_valid = 0;
        for v in 0..4u32 {
            for u in 0..4u32 {
                let d = depth[(v * 4 + u) as usize];
                if d == 0 {
                    continue;
                }
                total_valid += 1;
                let z = d as f64 / 1000.0;
                let x = (u as f64 - k.cx) * z / k.fx;
                let y = (v as f64 - k.cy) * z / k.fy;
                if (-1.0..=1.0).contains(&x)
                    && (-1.0..=1.0).contains(&y)
                    && (0.0..=0.875).contains(&z)
                {
                    expected += 1;
                }
            }
        }
        assert_eq!(cloud.len(), expected);
        assert!(expected > 0 && expected < total_valid);
    }

    #[test]
    fn mask_stride_and_row_major_order() {
        let k = intr(6, 4);
        let depth = DepthImage::new(6, 4, vec![1500; 24]).unwrap();
        let mask = Mask::new(6, 4, (0..24).map(|i| i % 6 != 0).collect()).unwrap();
        let options = ProjectionOptions {
            mask: Some(&mask),
            stride: 2,
            ..Default::default()
        };
        let projected = project_with_pixels(
            &uniform_features(6, 4, 2),
            &depth,
            &k,
            &CameraExtrinsics::identity(),
            &options,
        )
        .unwrap();
        assert_eq!(projected.pixels, vec![(2, 0), (4, 0), (2, 2), (4, 2)]);
        assert_eq!(projected.index_of_pixel(4, 2), Some(3));
    }

    #[test]
    fn dimension_mismatch_and_empty_output() {
        let k = intr(4, 4);
        let bad_depth = DepthImage::new(4, 3, vec![1000; 12]).unwrap();
        assert!(matches!(
            project(
                &uniform_features(4, 4, 2),
                &bad_depth,
                &k,
                &CameraExtrinsics::identity(),
                &opts(1)
            ),
            Err(Error::Dimension { .. })
        ));
        let zero_depth = DepthImage::new(4, 4, vec![0; 16]).unwrap();
        assert!(matches!(
            project(
                &uniform_features(4, 4, 2),
                &zero_depth,
                &k,
                &CameraExtrinsics::identity(),
                &opts(1)
            ),
            Err(Error::EmptyCloud)
        ));
    }

    #[test]
    fn inverse_projection_recovers_pixel_and_depth() {
        let k = CameraIntrinsics {
            fx: 615.3,
            fy: 614.8,
            cx: 319.6,
            cy: 241.2,
            width: 64,
            height: 48,
        };
        let ext = CameraExtrinsics::new(
            *nalgebra::Rotation3::from_euler_angles(0.3, -0.7, 1.2).matrix(),
            Vector3::new(0.4, -0.1, 0.9),
        )
        .unwrap();
        let depth = DepthImage::new(
            64,
            48,
            (0..64 * 48).map(|i| 300 + (i * 37 % 1700) as u16).collect(),
        )
        .unwrap();
        let k_small = CameraIntrinsics {
            cx: 31.6,
            cy: 23.2,
            ..k
        };
        let projected = project_with_pixels(
            &uniform_features(64, 48, 2),
            &depth,
            &k_small,
            &ext,
            &opts(3),
        )
        .unwrap();
        for (i, &(u, v)) in projected.pixels.iter().enumerate() {
            let cam = ext.base_to_camera(projected.cloud.position(i));
            let (pu, pv, z) = k_small.project(&cam);
            assert!((pu - u as f64).abs() < 0.5 && (pv - v as f64).abs() < 0.5);
            assert!((z * 1000.0 - depth.at(u, v) as f64).abs() < 1.0);
        }
    }

    #[test]
    fn merge_preserves_order_and_checks_dims() {
        let mk = |n: usize, dim: usize, off: f64| {
            SemanticPointCloud::from_points(
                (0..n)
                    .map(|i| SemanticPoint {
                        position: Vector3::new(off + i as f64, 0.0, 0.0),
                        color: [0.5; 3],
                        feature: vec![1.0; dim],
                    })
                    .collect(),
                dim,
                false,
            )
            .unwrap()
        };
        let c1 = mk(3, 2, 0.0);
        let c2 = mk(4, 2, 100.0);
        assert_eq!(merge_clouds(std::slice::from_ref(&c1)).unwrap(), c1);
        let m = merge_clouds(&[c1.clone(), c2.clone()]).unwrap();
        assert_eq!(m.len(), 7);
        for i in 0..c2.len() {
            assert_eq!(m.position(c1.len() + i), c2.position(i));
        }
        assert!(matches!(
            merge_clouds(&[c1, mk(2, 3, 0.0)]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(merge_clouds(&[]), Err(Error::EmptyCloud)));
    }
}
