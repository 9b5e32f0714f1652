//! The `kptmatch` command line. [`run`] is the whole program; the binary
//! only forwards process arguments and streams.
//!
//! Exit codes: 0 success, 1 operational error (message on stderr), 2 usage
//! error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;

use crate::bench::{self, SuiteConfig, CONFIG_DIR_ENV};
use crate::error::{Error, Result};
use crate::io::{self, JsonMode, MatchDocument};
use crate::matcher::MatchVariant;
use crate::params::MatchParams;
use crate::projection::{merge_clouds, project_with_pixels, ProjectionOptions, Workspace};
use crate::template_builder::{build_from_annotations, fps_sample, validate_template, FpsWeights};

#[derive(Debug, Parser)]
#[command(
    name = "kptmatch",
    version,
    about = "Semantic keypoint templates and coarse-to-fine matching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Point cloud operations.
    #[command(subcommand)]
    Cloud(CloudCommand),
    /// Build or check knowledge templates.
    #[command(subcommand)]
    Template(TemplateCommand),
    /// Match a template against a point cloud.
    Match(MatchArgs),
    /// Synthetic benchmark suites.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Print a summary of any supported file.
    Inspect { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum CloudCommand {
    /// Back-project a feature image and depth image into an SPCF cloud.
    Project(ProjectArgs),
    /// Concatenate SPCF clouds in the given order.
    Merge {
        #[arg(required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ProjectArgs {
    /// SFIM feature image at pixel resolution.
    #[arg(long)]
    features: PathBuf,
    /// SDEP depth image in millimeters.
    #[arg(long)]
    depth: PathBuf,
    /// Calibration JSON (intrinsics and camera-to-base extrinsics).
    #[arg(long)]
    calib: PathBuf,
    /// Image whose nonzero pixels are kept.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// RGB image providing point colors (default black).
    #[arg(long)]
    color: Option<PathBuf>,
    /// Workspace box corner `x,y,z` in meters; needs --workspace-max.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, requires = "workspace_max")]
    workspace_min: Option<Vector3<f64>>,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, requires = "workspace_min")]
    workspace_max: Option<Vector3<f64>>,
    #[arg(long, default_value_t = 4)]
    stride: u32,
    /// Keep raw descriptors instead of L2-normalizing them.
    #[arg(long)]
    no_normalize: bool,
    /// Also write the source pixel of every point (needed for pixel annotations).
    #[arg(long)]
    pixel_map: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum TemplateCommand {
    /// Build a template by farthest point sampling or from annotations.
    Build(BuildArgs),
    /// Check a template file and report diagnostics.
    Validate {
        file: PathBuf,
        /// Ignore unknown JSON fields.
        #[arg(long)]
        lenient: bool,
    },
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["fps", "annotations"])))]
struct BuildArgs {
    #[arg(long)]
    cloud: PathBuf,
    /// Number of keypoints to sample.
    #[arg(long)]
    fps: Option<usize>,
    /// JSON list of `{"index": i}` / `{"pixel": [u, v]}` entries.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Pixel map written by `cloud project --pixel-map`.
    #[arg(long, requires = "annotations")]
    pixel_map: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    w_position: f64,
    #[arg(long, default_value_t = 1.0)]
    w_color: f64,
    #[arg(long, default_value_t = 1.0)]
    w_feature: f64,
    /// First FPS point (default: the point nearest the centroid).
    #[arg(long)]
    seed_index: Option<usize>,
    #[arg(long, default_value = "object")]
    category: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ParamArgs {
    #[arg(long, default_value_t = 10.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.6)]
    delta_f: f64,
    #[arg(long, default_value_t = 0.05)]
    delta_p: f64,
    #[arg(long, default_value_t = 512)]
    ransac_iterations: usize,
    #[arg(long, default_value_t = 0.02)]
    inlier_radius: f64,
    #[arg(long, default_value_t = 50)]
    candidate_cap: usize,
    #[arg(long, default_value_t = 0.5)]
    scale_min: f64,
    #[arg(long, default_value_t = 2.0)]
    scale_max: f64,
    /// RANSAC seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Let fine refinement consider points beyond the descriptor gate.
    #[arg(long)]
    no_fine_gate: bool,
}

impl ParamArgs {
    fn params(&self) -> MatchParams {
        MatchParams {
            beta: self.beta,
            delta_f: self.delta_f,
            delta_p: self.delta_p,
            ransac_iterations: self.ransac_iterations,
            ransac_inlier_radius: self.inlier_radius,
            candidate_cap: self.candidate_cap,
            scale_bounds: (self.scale_min, self.scale_max),
            rng_seed: self.seed,
            fine_feature_gate: !self.no_fine_gate,
        }
    }
}

#[derive(Debug, Args)]
struct MatchArgs {
    #[arg(long)]
    template: PathBuf,
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long, default_value = "full")]
    variant: MatchVariant,
    #[command(flatten)]
    params: ParamArgs,
    /// Output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Run a suite from a config file or a built-in preset.
    Run(BenchRunArgs),
    /// Print the dominance checks of a report; exit 1 if any fails.
    Check { report: PathBuf },
    /// Print a built-in preset config.
    Preset { name: String },
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("suite").required(true).args(["config", "preset"])))]
struct BenchRunArgs {
    /// Config path, or a bare name looked up in $KPTMATCH_CONFIG_DIR.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ablation, clutter, deformation or occlusion.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the suite seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scene count.
    #[arg(long)]
    scenes: Option<usize>,
}

fn parse_vec3(s: &str) -> std::result::Result<Vector3<f64>, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut v = Vector3::zeros();
    for (k, p) in parts.iter().enumerate() {
        v[k] = p.trim().parse().map_err(|e| format!("{p:?}: {e}"))?;
    }
    Ok(v)
}

/// Runs the CLI with `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    2
                }
            };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Cloud(CloudCommand::Project(a)) => cloud_project(&a, out),
        Command::Cloud(CloudCommand::Merge { inputs, out: path }) => {
            let clouds = inputs
                .iter()
                .map(|p| io::read_spcf(p))
                .collect::<Result<Vec<_>>>()?;
            let merged = merge_clouds(&clouds)?;
            io::write_spcf(&path, &merged)?;
            writeln!(out, "wrote {} points to {}", merged.len(), path.display())
                .map_err(out_err)?;
            Ok(0)
        }
        Command::Template(TemplateCommand::Build(a)) => template_build(&a, out),
        Command::Template(TemplateCommand::Validate { file, lenient }) => {
            let mode = if lenient {
                JsonMode::Lenient
            } else {
                JsonMode::Strict
            };
            let t = io::read_template(&file, mode)?;
            writeln!(
                out,
                "ok: {} keypoints, feature_dim {}",
                t.len(),
                t.feature_dim()
            )
            .map_err(out_err)?;
            for d in validate_template(&t) {
                writeln!(out, "warning: {d}").map_err(out_err)?;
            }
            Ok(0)
        }
        Command::Match(a) => run_match(&a, out),
        Command::Bench(BenchCommand::Run(a)) => bench_run(&a, out),
        Command::Bench(BenchCommand::Check { report }) => {
            let report = bench::read_report(&report)?;
            let mut all = true;
            for line in bench::check_report(&report) {
                let tag = match line.passed {
                    Some(true) => "PASS",
                    Some(false) => {
                        all = false;
                        "FAIL"
                    }
                    None => "INFO",
                };
                writeln!(out, "{tag} {}", line.label).map_err(out_err)?;
            }
            Ok(if all { 0 } else { 1 })
        }
        Command::Bench(BenchCommand::Preset { name }) => {
            let text = toml::to_string(&SuiteConfig::preset(&name)?)
                .map_err(|e| Error::invalid(e.to_string()))?;
            write!(out, "{text}").map_err(out_err)?;
            Ok(0)
        }
        Command::Inspect { file } => {
            write!(out, "{}", io::inspect(&file)?).map_err(out_err)?;
            Ok(0)
        }
    }
}

fn cloud_project(a: &ProjectArgs, out: &mut dyn Write) -> Result<i32> {
    let features = io::read_sfim(&a.features)?;
    let depth = io::read_sdep(&a.depth)?;
    let calib = io::read_calib(&a.calib, JsonMode::Strict)?;
    let mask = a.mask.as_deref().map(io::read_mask_image).transpose()?;
    let color = a.color.as_deref().map(io::read_color_image).transpose()?;
    let workspace = match (a.workspace_min, a.workspace_max) {
        (Some(lo), Some(hi)) => Some(Workspace::new(lo, hi)?),
        _ => None,
    };
    let options = ProjectionOptions {
        color: color.as_ref(),
        mask: mask.as_ref(),
        workspace: workspace.as_ref(),
        stride: a.stride,
        normalize: !a.no_normalize,
    };
    let projected = project_with_pixels(
        &features,
        &depth,
        &calib.intrinsics,
        &calib.extrinsics,
        &options,
    )?;
    io::write_spcf(&a.out, &projected.cloud)?;
    if let Some(p) = &a.pixel_map {
        io::write_atomic(p, io::pixel_map_to_json(&projected.pixels)?.as_bytes())?;
    }
    writeln!(
        out,
        "wrote {} points to {}",
        projected.cloud.len(),
        a.out.display()
    )
    .map_err(out_err)?;
    Ok(0)
}

fn read_json_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn template_build(a: &BuildArgs, out: &mut dyn Write) -> Result<i32> {
    let cloud = io::read_spcf(&a.cloud)?;
    let template = if let Some(k) = a.fps {
        let weights = FpsWeights {
            position: a.w_position,
            color: a.w_color,
            feature: a.w_feature,
        };
        fps_sample(&cloud, k, &weights, a.seed_index, &a.category)?
    } else {
        let path = a
            .annotations
            .as_ref()
            .expect("clap enforces the source group");
        let annotations = io::annotations_from_json(&read_json_text(path)?)?;
        let pixel_map = a
            .pixel_map
            .as_ref()
            .map(|p| read_json_text(p).and_then(|t| io::pixel_map_from_json(&t)))
            .transpose()?;
        build_from_annotations(&cloud, &annotations, pixel_map.as_deref(), &a.category)?
    };
    io::write_template(&a.out, &template)?;
    writeln!(
        out,
        "wrote {}-keypoint template to {}",
        template.len(),
        a.out.display()
    )
    .map_err(out_err)?;
    for d in validate_template(&template) {
        writeln!(out, "warning: {d}").map_err(out_err)?;
    }
    Ok(0)
}

fn run_match(a: &MatchArgs, out: &mut dyn Write) -> Result<i32> {
    let params = a.params.params();
    params.validate()?;
    let template = io::read_template(&a.template, JsonMode::Strict)?;
    let cloud = io::read_spcf(&a.cloud)?;
    let result = a.variant.run(&template, &cloud, &params)?;
    let doc = MatchDocument {
        variant: Some(a.variant),
        result,
        params: Some(params),
    };
    match &a.out {
        Some(p) => {
            io::write_match(p, &doc)?;
            writeln!(
                out,
                "{}: {}/{} keypoints matched, objective {:.6}, wrote {}",
                a.variant,
                doc.result.matched_count(),
                doc.result.keypoints.len(),
                doc.result.objective_value,
                p.display()
            )
            .map_err(out_err)?;
        }
        None => write!(out, "{}", io::match_to_json(&doc)?).map_err(out_err)?,
    }
    Ok(0)
}

fn bench_run(a: &BenchRunArgs, out: &mut dyn Write) -> Result<i32> {
    let mut config = match (&a.config, &a.preset) {
        (Some(path), _) => {
            let dir = std::env::var_os(CONFIG_DIR_ENV).map(PathBuf::from);
            SuiteConfig::load(&bench::resolve_config_path(path, dir.as_deref()))?
        }
        (None, Some(name)) => SuiteConfig::preset(name)?,
        (None, None) => unreachable!("clap enforces the suite group"),
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(n) = a.scenes {
        config.scenes = n;
    }
    let report = bench::run_suite_config(&config)?;
    let path = a
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}_report.json", config.name)));
    bench::write_report(&report, &path)?;
    write!(out, "{}", bench::summary_table(&report)).map_err(out_err)?;
    writeln!(out, "wrote {}", path.display()).map_err(out_err)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut o = Vec::new();
        let mut e = Vec::new();
        let code = run(
            std::iter::once("kptmatch").chain(args.iter().copied()),
            &mut o,
            &mut e,
        );
        (
            code,
            String::from_utf8(o).unwrap(),
            String::from_utf8(e).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_capture(&[]).0, 2);
        assert_eq!(run_capture(&["frobnicate"]).0, 2);
        assert_eq!(run_capture(&["match", "--template", "t.json"]).0, 2);
        assert_eq!(
            run_capture(&[
                "match",
                "--template",
                "a",
                "--cloud",
                "b",
                "--variant",
                "best"
            ])
            .0,
            2
        );
        assert_eq!(
            run_capture(&["template", "build", "--cloud", "c.spcf", "--out", "t.json"]).0,
            2
        );
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("match"));
    }

    #[test]
    fn missing_file_exits_1() {
        let (code, _, err) = run_capture(&["inspect", "/nonexistent/file.spcf"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error:"));
    }

    #[test]
    fn vec3_flag() {
        assert_eq!(
            parse_vec3("1, -2,0.5").unwrap(),
            Vector3::new(1.0, -2.0, 0.5)
        );
        assert!(parse_vec3("1,2").is_err());
    }
}
