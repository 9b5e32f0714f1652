//! Seeded scene suites, aggregate reports and the dominance check.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::MatchVariant;
use crate::params::MatchParams;
use crate::projection::Workspace;

use super::evaluate::{evaluate, VariantMetrics};
use super::scene::{generate_scene, DeformationSpec, SceneSpec, TransformSpec};

/// Environment variable naming the directory searched for suite configs
/// given by bare name.
pub const CONFIG_DIR_ENV: &str = "KPTMATCH_CONFIG_DIR";

pub const PRESET_NAMES: [&str; 4] = ["ablation", "clutter", "deformation", "occlusion"];

fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "ablation" => include_str!("../../presets/ablation.toml"),
        "clutter" => include_str!("../../presets/clutter.toml"),
        "deformation" => include_str!("../../presets/deformation.toml"),
        "occlusion" => include_str!("../../presets/occlusion.toml"),
        _ => return None,
    })
}

/// Flat suite configuration. Every key is optional; see `presets/` for
/// annotated examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub name: String,
    pub scenes: usize,
    pub seed: u64,
    pub variants: Vec<MatchVariant>,
    pub matched_threshold: f64,
    pub output: Option<PathBuf>,

    pub template_k: usize,
    pub distractor_count: usize,
    pub feature_dim: usize,
    pub rotation_max_deg: f64,
    pub translation_min: [f64; 3],
    pub translation_max: [f64; 3],
    pub scale_min: f64,
    pub scale_max: f64,
    pub position_noise_sigma: f64,
    pub feature_noise_sigma: f64,
    pub occlusion_fraction: f64,
    pub ambiguity_groups: Vec<Vec<usize>>,
    pub deformation_max: f64,
    pub template_extent: f64,
    pub min_keypoint_separation: f64,
    pub workspace_min: [f64; 3],
    pub workspace_max: [f64; 3],
    pub distractor_feature_margin: f64,

    pub beta: f64,
    pub delta_f: f64,
    pub delta_p: f64,
    pub ransac_iterations: usize,
    pub ransac_inlier_radius: f64,
    pub candidate_cap: usize,
    pub scale_bound_min: f64,
    pub scale_bound_max: f64,
    pub match_seed: u64,
    pub fine_feature_gate: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        let scene = SceneSpec::default();
        let params = MatchParams::default();
        let (t_min, t_max, s_range, max_rot) = match scene.transform {
            TransformSpec::Random {
                max_rotation,
                translation_min,
                translation_max,
                scale_range,
            } => (translation_min, translation_max, scale_range, max_rotation),
            TransformSpec::Fixed(_) => unreachable!("default scene uses a random transform"),
        };
        Self {
            name: "suite".into(),
            scenes: 100,
            seed: 0,
            variants: MatchVariant::ALL.to_vec(),
            matched_threshold: 0.03,
            output: None,
            template_k: scene.template_k,
            distractor_count: scene.distractor_count,
            feature_dim: scene.feature_dim,
            rotation_max_deg: max_rot.to_degrees(),
            translation_min: t_min.into(),
            translation_max: t_max.into(),
            scale_min: s_range.0,
            scale_max: s_range.1,
            position_noise_sigma: scene.position_noise_sigma,
            feature_noise_sigma: scene.feature_noise_sigma,
            occlusion_fraction: scene.occlusion_fraction,
            ambiguity_groups: scene.ambiguity_groups,
            deformation_max: 0.0,
            template_extent: scene.template_extent,
            min_keypoint_separation: scene.min_keypoint_separation,
            workspace_min: (*scene.workspace.min()).into(),
            workspace_max: (*scene.workspace.max()).into(),
            distractor_feature_margin: scene.distractor_feature_margin,
            beta: params.beta,
            delta_f: params.delta_f,
            delta_p: params.delta_p,
            ransac_iterations: params.ransac_iterations,
            ransac_inlier_radius: params.ransac_inlier_radius,
            candidate_cap: params.candidate_cap,
            scale_bound_min: params.scale_bounds.0,
            scale_bound_max: params.scale_bounds.1,
            match_seed: params.rng_seed,
            fine_feature_gate: params.fine_feature_gate,
        }
    }
}

fn line_of_key(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map_or(0, |i| i + 1)
}

impl SuiteConfig {
    /// Parses TOML text. Syntax errors, unknown keys and invalid values are
    /// reported with the offending line (1-based; 0 when not attributable).
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SuiteConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map_or(0, |s| {
                text[..s.start.min(text.len())].matches('\n').count() + 1
            }),
            message: e.message().trim().to_string(),
        })?;
        cfg.check().map_err(|(key, message)| Error::Config {
            line: line_of_key(text, key),
            message: format!("{key}: {message}"),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = preset_text(name).ok_or_else(|| {
            Error::invalid(format!(
                "unknown preset {name:?} (available: {})",
                PRESET_NAMES.join(", ")
            ))
        })?;
        Self::parse(text)
    }

    /// Validates by building the derived scene spec and match params.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.scenes == 0 {
            return Err(("scenes", "must be positive".into()));
        }
        if self.variants.is_empty() {
            return Err(("variants", "at least one variant is required".into()));
        }
        if !(self.matched_threshold.is_finite() && self.matched_threshold > 0.0) {
            return Err(("matched_threshold", "must be positive".into()));
        }
        Workspace::new(self.workspace_min.into(), self.workspace_max.into())
            .map_err(|e| ("workspace_min", e.to_string()))?;
        self.match_params()
            .validate()
            .map_err(|e| ("beta", e.to_string()))?;
        let spec = self
            .scene_spec(0)
            .map_err(|e| ("template_k", e.to_string()))?;
        spec.validate().map_err(|e| {
            let msg = e.to_string();
            let key = [
                ("occlusion", "occlusion_fraction"),
                ("ambiguity", "ambiguity_groups"),
                ("feature_dim", "feature_dim"),
                ("sigma", "position_noise_sigma"),
                ("scale", "scale_min"),
                ("translation", "translation_min"),
                ("max_displacement", "deformation_max"),
                ("extent", "template_extent"),
            ]
            .into_iter()
            .find(|(needle, _)| msg.contains(needle))
            .map_or("template_k", |(_, key)| key);
            (key, msg)
        })
    }

    pub fn match_params(&self) -> MatchParams {
        MatchParams {
            beta: self.beta,
            delta_f: self.delta_f,
            delta_p: self.delta_p,
            ransac_iterations: self.ransac_iterations,
            ransac_inlier_radius: self.ransac_inlier_radius,
            candidate_cap: self.candidate_cap,
            scale_bounds: (self.scale_bound_min, self.scale_bound_max),
            rng_seed: self.match_seed,
            fine_feature_gate: self.fine_feature_gate,
        }
    }

    /// Seed of scene `i`: an independent stream of the suite seed, so the
    /// scene set does not depend on evaluation order.
    pub fn scene_seed(&self, i: usize) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        rng.next_u64()
    }

    pub fn scene_spec(&self, i: usize) -> Result<SceneSpec> {
        Ok(SceneSpec {
            template_k: self.template_k,
            distractor_count: self.distractor_count,
            feature_dim: self.feature_dim,
            transform: TransformSpec::Random {
                max_rotation: self.rotation_max_deg.to_radians(),
                translation_min: self.translation_min.into(),
                translation_max: self.translation_max.into(),
                scale_range: (self.scale_min, self.scale_max),
            },
            position_noise_sigma: self.position_noise_sigma,
            feature_noise_sigma: self.feature_noise_sigma,
            occlusion_fraction: self.occlusion_fraction,
            ambiguity_groups: self.ambiguity_groups.clone(),
            deformation: if self.deformation_max > 0.0 {
                DeformationSpec::Random {
                    max_displacement: self.deformation_max,
                }
            } else {
                DeformationSpec::None
            },
            rng_seed: self.scene_seed(i),
            template_extent: self.template_extent,
            min_keypoint_separation: self.min_keypoint_separation,
            workspace: Workspace::new(
                Vector3::from(self.workspace_min),
                Vector3::from(self.workspace_max),
            )?,
            distractor_feature_margin: self.distractor_feature_margin,
        })
    }
}

/// Resolves a `bench run --config` argument: existing paths win, otherwise
/// a bare name is looked up as `<name>.toml` in `config_dir`.
pub fn resolve_config_path(arg: &Path, config_dir: Option<&Path>) -> PathBuf {
    if arg.exists() {
        return arg.to_path_buf();
    }
    if let Some(dir) = config_dir {
        let mut candidate = dir.join(arg);
        if candidate.extension().is_none() {
            candidate.set_extension("toml");
        }
        if candidate.exists() {
            return candidate;
        }
    }
    arg.to_path_buf()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRow {
    pub scene: usize,
    pub scene_seed: u64,
    pub variant: MatchVariant,
    pub visible_keypoints: usize,
    pub occluded_keypoints: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(flatten, skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<VariantMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantAggregate {
    pub variant: MatchVariant,
    pub scenes_evaluated: usize,
    pub scenes_failed: usize,
    pub average_error: Option<f64>,
    pub matched_rate: Option<f64>,
    pub visible_average_error: Option<f64>,
    pub occluded_average_error: Option<f64>,
    pub transform_rotation_error: Option<f64>,
    pub transform_translation_error: Option<f64>,
    pub transform_scale_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub name: String,
    /// Seconds since the Unix epoch; the only field that varies across reruns.
    pub generated_at_unix: u64,
    pub config: SuiteConfig,
    pub aggregates: Vec<VariantAggregate>,
    pub rows: Vec<SceneRow>,
}

fn weighted_mean(pairs: impl Iterator<Item = (f64, usize)>) -> Option<f64> {
    let (sum, n) = pairs.fold((0.0, 0usize), |(s, n), (v, w)| (s + v * w as f64, n + w));
    (n > 0).then(|| sum / n as f64)
}

fn aggregate(variant: MatchVariant, rows: &[SceneRow]) -> VariantAggregate {
    let ok: Vec<(&SceneRow, &VariantMetrics)> = rows
        .iter()
        .filter(|r| r.variant == variant)
        .filter_map(|r| r.metrics.as_ref().map(|m| (r, m)))
        .collect();
    let failed = rows
        .iter()
        .filter(|r| r.variant == variant && r.metrics.is_none())
        .count();
    let k = |r: &SceneRow| r.visible_keypoints + r.occluded_keypoints;
    let opt_mean = |f: fn(&VariantMetrics) -> Option<f64>| {
        weighted_mean(ok.iter().filter_map(|(_, m)| f(m).map(|v| (v, 1))))
    };
    VariantAggregate {
        variant,
        scenes_evaluated: ok.len(),
        scenes_failed: failed,
        average_error: weighted_mean(ok.iter().map(|(r, m)| (m.average_error, k(r)))),
        matched_rate: weighted_mean(ok.iter().map(|(r, m)| (m.matched_rate, k(r)))),
        visible_average_error: weighted_mean(
            ok.iter()
                .filter_map(|(r, m)| m.visible_average_error.map(|v| (v, r.visible_keypoints))),
        ),
        occluded_average_error: weighted_mean(
            ok.iter()
                .filter_map(|(r, m)| m.occluded_average_error.map(|v| (v, r.occluded_keypoints))),
        ),
        transform_rotation_error: opt_mean(|m| m.transform_rotation_error),
        transform_translation_error: opt_mean(|m| m.transform_translation_error),
        transform_scale_error: opt_mean(|m| m.transform_scale_error),
    }
}

/// Generates and evaluates every scene of the suite. Scenes run in
/// parallel; results do not depend on thread count.
pub fn run_suite_config(config: &SuiteConfig) -> Result<BenchReport> {
    config.check().map_err(|(key, message)| Error::Config {
        line: 0,
        message: format!("{key}: {message}"),
    })?;
    let params = config.match_params();
    let per_scene: Vec<Vec<SceneRow>> = (0..config.scenes)
        .into_par_iter()
        .map(|i| -> Result<Vec<SceneRow>> {
            let spec = config.scene_spec(i)?;
            let seed = spec.rng_seed;
            let scene = generate_scene(&spec)?;
            let occluded = scene.occluded_count();
            let visible = scene.template.len() - occluded;
            Ok(
                evaluate(&scene, &config.variants, &params, config.matched_threshold)
                    .into_iter()
                    .map(|o| SceneRow {
                        scene: i,
                        scene_seed: seed,
                        variant: o.variant,
                        visible_keypoints: visible,
                        occluded_keypoints: occluded,
                        error: o.metrics.as_ref().err().cloned(),
                        metrics: o.metrics.ok(),
                    })
                    .collect(),
            )
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SceneRow> = per_scene.into_iter().flatten().collect();
    let aggregates = config
        .variants
        .iter()
        .map(|&v| aggregate(v, &rows))
        .collect();
    Ok(BenchReport {
        name: config.name.clone(),
        generated_at_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        config: config.clone(),
        aggregates,
        rows,
    })
}

/// Loads a config file, runs it and writes the JSON report plus a `.txt`
/// summary table next to it. Returns the report and the JSON path.
pub fn run_suite(config_path: &Path, output: Option<&Path>) -> Result<(BenchReport, PathBuf)> {
    let config = SuiteConfig::load(config_path)?;
    let report = run_suite_config(&config)?;
    let out = output
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}_report.json", config.name)));
    write_report(&report, &out)?;
    Ok((report, out))
}

pub fn write_report(report: &BenchReport, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::invalid(format!("cannot serialize report: {e}")))?;
    json.push('\n');
    crate::io::write_atomic(path, json.as_bytes())?;
    crate::io::write_atomic(
        &path.with_extension("txt"),
        summary_table(report).as_bytes(),
    )
}

pub fn read_report(path: &Path) -> Result<BenchReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Json {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn cell(v: Option<f64>, factor: f64, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.*}", digits, x * factor))
}

pub fn summary_table(report: &BenchReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "suite {} | {} scenes | matched threshold {} cm",
        report.name,
        report.config.scenes,
        report.config.matched_threshold * 100.0
    );
    let _ = writeln!(
        s,
        "{:<8} {:>6} {:>6} {:>10} {:>8} {:>10} {:>10} {:>10} {:>10} {:>9}",
        "variant",
        "scenes",
        "failed",
        "err[cm]",
        "matched",
        "vis[cm]",
        "occ[cm]",
        "rot[rad]",
        "trans[cm]",
        "scale"
    );
    for a in &report.aggregates {
        let _ = writeln!(
            s,
            "{:<8} {:>6} {:>6} {:>10} {:>8} {:>10} {:>10} {:>10} {:>10} {:>9}",
            a.variant.name(),
            a.scenes_evaluated,
            a.scenes_failed,
            cell(a.average_error, 100.0, 3),
            cell(a.matched_rate, 100.0, 1),
            cell(a.visible_average_error, 100.0, 3),
            cell(a.occluded_average_error, 100.0, 3),
            cell(a.transform_rotation_error, 1.0, 4),
            cell(a.transform_translation_error, 100.0, 3),
            cell(a.transform_scale_error, 1.0, 4),
        );
    }
    s
}

/// One line of `bench check`. `passed` is `None` for informational lines.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub label: String,
    pub passed: Option<bool>,
}

/// Full (coarse+fine) must dominate top-1 in aggregate; the fine-versus-
/// coarse comparison is reported without a verdict. A report with neither
/// pair fails.
pub fn check_report(report: &BenchReport) -> Vec<CheckLine> {
    let find = |v| report.aggregates.iter().find(|a| a.variant == v);
    let mut lines = Vec::new();
    if let (Some(full), Some(top1)) = (find(MatchVariant::Full), find(MatchVariant::Top1)) {
        let pair = |a: Option<f64>, b: Option<f64>| a.zip(b);
        lines.push(match pair(full.average_error, top1.average_error) {
            Some((f, t)) => CheckLine {
                label: format!(
                    "full average_error {:.4} cm <= top1 {:.4} cm",
                    f * 100.0,
                    t * 100.0
                ),
                passed: Some(f <= t),
            },
            None => CheckLine {
                label: "average_error unavailable (all scenes failed)".into(),
                passed: Some(false),
            },
        });
        lines.push(match pair(full.matched_rate, top1.matched_rate) {
            Some((f, t)) => CheckLine {
                label: format!("full matched_rate {:.4} >= top1 {:.4}", f, t),
                passed: Some(f >= t),
            },
            None => CheckLine {
                label: "matched_rate unavailable (all scenes failed)".into(),
                passed: Some(false),
            },
        });
    }
    if find(MatchVariant::Coarse).is_some() && find(MatchVariant::Full).is_some() {
        let (better, total) = fine_beats_coarse(report);
        lines.push(CheckLine {
            label: format!("full average_error < coarse on {better}/{total} scenes"),
            passed: None,
        });
    }
    if lines.is_empty() {
        lines.push(CheckLine {
            label: "report has no comparable variant pair (needs full with top1 or coarse)".into(),
            passed: Some(false),
        });
    }
    lines
}

/// Number of scenes where full beats coarse-only, out of scenes where both
/// succeeded.
pub fn fine_beats_coarse(report: &BenchReport) -> (usize, usize) {
    let err = |scene: usize, v: MatchVariant| {
        report
            .rows
            .iter()
            .find(|r| r.scene == scene && r.variant == v)
            .and_then(|r| r.metrics.as_ref())
            .map(|m| m.average_error)
    };
    let mut better = 0;
    let mut total = 0;
    for scene in 0..report.config.scenes {
        if let (Some(f), Some(c)) = (
            err(scene, MatchVariant::Full),
            err(scene, MatchVariant::Coarse),
        ) {
            total += 1;
            if f < c {
                better += 1;
            }
        }
    }
    (better, total)
}
