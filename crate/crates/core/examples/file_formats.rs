//! Write and read back every file format in a temporary directory, then
//! show what a corrupt file reports.

use kptmatch::bench::{generate_scene, SceneSpec};
use kptmatch::io::{self, JsonMode, MatchDocument};
use kptmatch::{match_template, MatchParams, MatchVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let scene = generate_scene(&SceneSpec {
        distractor_count: 50,
        ..Default::default()
    })?;
    let params = MatchParams::default();
    let result = match_template(&scene.template, &scene.cloud, &params)?;

    let cloud_path = dir.path().join("scene.spcf");
    let template_path = dir.path().join("template.json");
    let match_path = dir.path().join("match.json");
    io::write_spcf(&cloud_path, &scene.cloud)?;
    io::write_template(&template_path, &scene.template)?;
    io::write_match(
        &match_path,
        &MatchDocument {
            variant: Some(MatchVariant::Full),
            result,
            params: Some(params),
        },
    )?;
    for p in [&cloud_path, &template_path, &match_path] {
        println!("== {}", p.file_name().unwrap().to_string_lossy());
        print!("{}", io::inspect(p)?);
    }
    assert_eq!(
        io::read_template(&template_path, JsonMode::Strict)?,
        scene.template
    );

    let mut bytes = std::fs::read(&cloud_path)?;
    bytes.truncate(bytes.len() - 10);
    println!("truncated SPCF: {}", io::decode_spcf(&bytes).unwrap_err());
    bytes[0] = b'X';
    println!("wrong magic:    {}", io::decode_spcf(&bytes).unwrap_err());
    Ok(())
}
