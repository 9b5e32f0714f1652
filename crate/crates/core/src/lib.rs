//! Category-level semantic keypoint templates and coarse-to-fine template
//! matching.
//!
//! A [`KnowledgeTemplate`] is a small rigid graph of keypoints, each with a
//! 3D position and a semantic descriptor from a pretrained vision backbone.
//! Matching a template against a [`SemanticPointCloud`] runs in two stages:
//!
//! - **coarse**: descriptor-gated correspondences feed a RANSAC loop around
//!   a closed-form (Umeyama) similarity solver, giving one rotation,
//!   translation and scale for the whole template. Occluded keypoints are
//!   inferred from the transform.
//! - **fine**: each keypoint is relocated within a small ball around its
//!   predicted position, trading descriptor distance against displacement.
//!
//! The independent nearest-descriptor baseline is [`matcher::top1_match`].
//!
//! # Quick start
//! ```
//! use kptmatch::bench::{generate_scene, SceneSpec};
//! use kptmatch::{match_template, MatchParams};
//!
//! let scene = generate_scene(&SceneSpec::default()).unwrap();
//! let result = match_template(&scene.template, &scene.cloud, &MatchParams::default()).unwrap();
//! assert_eq!(result.keypoints.len(), scene.template.len());
//! ```
//!
//! # Modules
//! - [`projection`]: RGB-D + feature raster back-projection into base coordinates.
//! - [`template_builder`]: farthest point sampling and manual annotation.
//! - [`matcher`]: all matching algorithms.
//! - [`bench`]: synthetic scenes and the evaluation harness.
//! - [`io`]: binary and JSON file formats.
//! - [`cli`]: the `kptmatch` command-line front end.
//!
//! Runnable walkthroughs live in `examples/`; `cargo run --example <name>`.

pub mod bench;
pub mod cli;
pub mod cloud;
mod error;
pub mod feature;
pub mod geometry;
pub mod io;
pub mod matcher;
mod params;
pub mod projection;
mod result;
pub mod template;
pub mod template_builder;
pub mod transform;

pub use cloud::{normalize_features, SemanticPoint, SemanticPointCloud};
pub use error::{Error, Result};
pub use feature::feature_distance;
pub use matcher::{coarse_match, fine_match, match_template, top1_match, umeyama, MatchVariant};
pub use params::MatchParams;
pub use result::{KeypointMatch, MatchResult, MatchStatus};
pub use template::{Keypoint, KnowledgeTemplate};
pub use transform::{apply_transform, compose, SimilarityTransform};
