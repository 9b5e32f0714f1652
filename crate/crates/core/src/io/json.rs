//! JSON documents: templates, match results, camera calibration,
//! annotation lists and pixel maps.
//!
//! Readers report errors with a JSON path (`keypoints[3].feature[7]`). In
//! strict mode unknown fields are rejected; lenient mode ignores them.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::matcher::MatchVariant;
use crate::params::MatchParams;
use crate::projection::{CameraExtrinsics, CameraIntrinsics};
use crate::result::{KeypointMatch, MatchResult, MatchStatus};
use crate::template::{Keypoint, KnowledgeTemplate, SourceMeta};
use crate::template_builder::Annotation;
use crate::transform::SimilarityTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JsonMode {
    #[default]
    Strict,
    Lenient,
}

fn json_err(path: impl Into<String>, message: impl ToString) -> Error {
    Error::Json {
        path: path.into(),
        message: message.to_string(),
    }
}

/// Finds the first key present in `input` but absent from `known` (the
/// re-serialized document). Keys holding `null` are tolerated.
fn first_unknown(input: &Value, known: &Value, path: &str) -> Option<String> {
    match (input, known) {
        (Value::Object(a), Value::Object(b)) => a.iter().find_map(|(k, v)| {
            let sub = if path.is_empty() {
                k.clone()
            } else {
                format!("{path}.{k}")
            };
            match b.get(k) {
                None if v.is_null() => None,
                None => Some(sub),
                Some(kv) => first_unknown(v, kv, &sub),
            }
        }),
        (Value::Array(a), Value::Array(b)) => a
            .iter()
            .zip(b)
            .enumerate()
            .find_map(|(i, (x, y))| first_unknown(x, y, &format!("{path}[{i}]"))),
        _ => None,
    }
}

fn parse_doc<T: DeserializeOwned + Serialize>(text: &str, mode: JsonMode) -> Result<T> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| json_err(format!("line {} column {}", e.line(), e.column()), e))?;
    let doc: T = serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        json_err(if path == "." { "$".into() } else { path }, e.into_inner())
    })?;
    if mode == JsonMode::Strict {
        let known = serde_json::to_value(&doc).map_err(|e| json_err("$", e))?;
        if let Some(path) = first_unknown(&value, &known, "") {
            return Err(json_err(path, "unknown field"));
        }
    }
    Ok(doc)
}

fn to_text<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| json_err("$", e))?;
    s.push('\n');
    Ok(s)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct KeypointDoc {
    position: [f64; 3],
    feature: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TemplateDoc {
    category: String,
    feature_dim: usize,
    keypoints: Vec<KeypointDoc>,
    #[serde(default)]
    meta: SourceMeta,
}

pub fn template_to_json(t: &KnowledgeTemplate) -> Result<String> {
    to_text(&TemplateDoc {
        category: t.category_label().to_string(),
        feature_dim: t.feature_dim(),
        keypoints: t
            .keypoints()
            .iter()
            .map(|k| KeypointDoc {
                position: k.position.into(),
                feature: k.feature.clone(),
            })
            .collect(),
        meta: t.source_meta().clone(),
    })
}

pub fn template_from_json(text: &str, mode: JsonMode) -> Result<KnowledgeTemplate> {
    let doc: TemplateDoc = parse_doc(text, mode)?;
    for (k, kp) in doc.keypoints.iter().enumerate() {
        if kp.feature.len() != doc.feature_dim {
            return Err(json_err(
                format!("keypoints[{k}].feature"),
                format!(
                    "length {} does not match feature_dim {}",
                    kp.feature.len(),
                    doc.feature_dim
                ),
            ));
        }
    }
    let keypoints = doc
        .keypoints
        .into_iter()
        .map(|k| Keypoint {
            feature: k.feature,
            position: Vector3::from(k.position),
        })
        .collect();
    KnowledgeTemplate::new(keypoints, doc.feature_dim, doc.category, doc.meta)
        .map_err(|e| json_err("keypoints", e))
}

pub fn write_template(path: &Path, t: &KnowledgeTemplate) -> Result<()> {
    super::write_atomic(path, template_to_json(t)?.as_bytes())
}

pub fn read_template(path: &Path, mode: JsonMode) -> Result<KnowledgeTemplate> {
    template_from_json(&read_text(path)?, mode)
}

#[derive(Serialize, Deserialize)]
struct TransformDoc {
    rotation: [f64; 9],
    translation: [f64; 3],
    scale: f64,
}

#[derive(Serialize, Deserialize, PartialEq, Eq, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum StatusDoc {
    Matched,
    Inferred,
}

#[derive(Serialize, Deserialize)]
struct KeypointMatchDoc {
    status: StatusDoc,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    index: Option<usize>,
    position: [f64; 3],
    feature_residual: f64,
    structure_residual: f64,
}

#[derive(Serialize, Deserialize)]
struct MatchDoc {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    variant: Option<MatchVariant>,
    transform: TransformDoc,
    keypoints: Vec<KeypointMatchDoc>,
    objective: f64,
    #[serde(default)]
    objective_fallback: bool,
    #[serde(default)]
    inlier_count: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    params_echo: Option<MatchParams>,
}

/// A match result plus the provenance stored alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchDocument {
    pub variant: Option<MatchVariant>,
    pub result: MatchResult,
    pub params: Option<MatchParams>,
}

pub fn match_to_json(doc: &MatchDocument) -> Result<String> {
    let r = &doc.result;
    to_text(&MatchDoc {
        variant: doc.variant,
        transform: TransformDoc {
            rotation: r.transform.rotation_row_major(),
            translation: (*r.transform.translation()).into(),
            scale: r.transform.scale(),
        },
        keypoints: r
            .keypoints
            .iter()
            .map(|k| KeypointMatchDoc {
                status: if k.status.is_matched() {
                    StatusDoc::Matched
                } else {
                    StatusDoc::Inferred
                },
                index: k.status.index(),
                position: k.position.into(),
                feature_residual: k.feature_residual,
                structure_residual: k.structure_residual,
            })
            .collect(),
        objective: r.objective_value,
        objective_fallback: r.objective_fallback,
        inlier_count: r.inlier_count,
        params_echo: doc.params,
    })
}

pub fn match_from_json(text: &str, mode: JsonMode) -> Result<MatchDocument> {
    let doc: MatchDoc = parse_doc(text, mode)?;
    let t = &doc.transform;
    let transform = SimilarityTransform::from_row_major(&t.rotation, t.translation, t.scale)
        .map_err(|e| json_err("transform", e))?;
    let keypoints = doc
        .keypoints
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let status = match (m.status, m.index) {
                (StatusDoc::Matched, Some(i)) => MatchStatus::Matched(i),
                (StatusDoc::Inferred, None) => MatchStatus::Inferred,
                (StatusDoc::Matched, None) => {
                    return Err(json_err(
                        format!("keypoints[{k}].index"),
                        "matched keypoint needs an index",
                    ))
                }
                (StatusDoc::Inferred, Some(_)) => {
                    return Err(json_err(
                        format!("keypoints[{k}].index"),
                        "inferred keypoint has an index",
                    ))
                }
            };
            Ok(KeypointMatch {
                status,
                position: Vector3::from(m.position),
                feature_residual: m.feature_residual,
                structure_residual: m.structure_residual,
            })
        })
        .collect::<Result<_>>()?;
    Ok(MatchDocument {
        variant: doc.variant,
        result: MatchResult {
            keypoints,
            transform,
            inlier_count: doc.inlier_count,
            objective_value: doc.objective,
            objective_fallback: doc.objective_fallback,
        },
        params: doc.params_echo,
    })
}

pub fn write_match(path: &Path, doc: &MatchDocument) -> Result<()> {
    super::write_atomic(path, match_to_json(doc)?.as_bytes())
}

pub fn read_match(path: &Path, mode: JsonMode) -> Result<MatchDocument> {
    match_from_json(&read_text(path)?, mode)
}

#[derive(Serialize, Deserialize)]
struct IntrinsicsDoc {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct ExtrinsicsDoc {
    rotation: [f64; 9],
    translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct CalibDoc {
    intrinsics: IntrinsicsDoc,
    extrinsics: ExtrinsicsDoc,
}

/// Camera intrinsics plus the camera-to-base extrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
}

pub fn calib_to_json(c: &Calibration) -> Result<String> {
    let i = &c.intrinsics;
    let r = c.extrinsics.rotation();
    to_text(&CalibDoc {
        intrinsics: IntrinsicsDoc {
            fx: i.fx,
            fy: i.fy,
            cx: i.cx,
            cy: i.cy,
            width: i.width,
            height: i.height,
        },
        extrinsics: ExtrinsicsDoc {
            rotation: std::array::from_fn(|k| r[(k / 3, k % 3)]),
            translation: (*c.extrinsics.translation()).into(),
        },
    })
}

pub fn calib_from_json(text: &str, mode: JsonMode) -> Result<Calibration> {
    let doc: CalibDoc = parse_doc(text, mode)?;
    let i = doc.intrinsics;
    let intrinsics = CameraIntrinsics {
        fx: i.fx,
        fy: i.fy,
        cx: i.cx,
        cy: i.cy,
        width: i.width,
        height: i.height,
    };
    intrinsics
        .validate()
        .map_err(|e| json_err("intrinsics", e))?;
    let extrinsics = CameraExtrinsics::new(
        Matrix3::from_row_slice(&doc.extrinsics.rotation),
        Vector3::from(doc.extrinsics.translation),
    )
    .map_err(|e| json_err("extrinsics.rotation", e))?;
    Ok(Calibration {
        intrinsics,
        extrinsics,
    })
}

pub fn write_calib(path: &Path, c: &Calibration) -> Result<()> {
    super::write_atomic(path, calib_to_json(c)?.as_bytes())
}

pub fn read_calib(path: &Path, mode: JsonMode) -> Result<Calibration> {
    calib_from_json(&read_text(path)?, mode)
}

/// Annotation list: `[{"index": 12}, {"pixel": [40, 31]}, ...]`.
pub fn annotations_from_json(text: &str) -> Result<Vec<Annotation>> {
    parse_doc(text, JsonMode::Strict)
}

pub fn annotations_to_json(a: &[Annotation]) -> Result<String> {
    to_text(&a)
}

/// Pixel map: the source `[u, v]` of every cloud point, in cloud order.
pub fn pixel_map_from_json(text: &str) -> Result<Vec<(u32, u32)>> {
    let pairs: Vec<[u32; 2]> = parse_doc(text, JsonMode::Strict)?;
    Ok(pairs.into_iter().map(|[u, v]| (u, v)).collect())
}

pub fn pixel_map_to_json(pixels: &[(u32, u32)]) -> Result<String> {
    let pairs: Vec<[u32; 2]> = pixels.iter().map(|&(u, v)| [u, v]).collect();
    Ok(serde_json::to_string(&pairs).map_err(|e| json_err("$", e))? + "\n")
}
