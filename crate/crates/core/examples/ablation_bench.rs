//! Run a reduced ablation suite and print its dominance checks.
//!
//!     cargo run --release --example ablation_bench -- 40

use kptmatch::bench::{check_report, run_suite_config, summary_table, SuiteConfig};

fn main() -> kptmatch::Result<()> {
    let scenes = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(25);
    let mut config = SuiteConfig::preset("ablation")?;
    config.scenes = scenes;
    let report = run_suite_config(&config)?;
    print!("{}", summary_table(&report));
    for line in check_report(&report) {
        let tag = match line.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "INFO",
        };
        println!("{tag} {}", line.label);
    }
    Ok(())
}
