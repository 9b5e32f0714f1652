//! Synthetic benchmark: scene generation, per-scene metrics and seeded
//! suites with JSON reports.

mod evaluate;
mod scene;
mod suite;

pub use evaluate::{compute_metrics, evaluate, VariantMetrics, VariantOutcome};
pub use scene::{
    generate_scene, DeformationSpec, KeypointTruth, SceneInstance, SceneSpec, TransformSpec,
};
pub use suite::{
    check_report, fine_beats_coarse, read_report, resolve_config_path, run_suite, run_suite_config,
    summary_table, write_report, BenchReport, CheckLine, SceneRow, SuiteConfig, VariantAggregate,
    CONFIG_DIR_ENV, PRESET_NAMES,
};
