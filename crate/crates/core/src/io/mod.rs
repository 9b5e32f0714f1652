//! File formats and atomic file output.

mod binary;
mod json;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

pub use binary::{
    decode_sdep, decode_sfim, decode_spcf, encode_sdep, encode_sfim, encode_spcf, read_sdep,
    read_sfim, read_spcf, spcf_record_len, write_sdep, write_sfim, write_spcf, FORMAT_VERSION,
    SDEP_HEADER_LEN, SDEP_MAGIC, SFIM_HEADER_LEN, SFIM_MAGIC, SPCF_HEADER_LEN, SPCF_MAGIC,
};
pub use json::{
    annotations_from_json, annotations_to_json, calib_from_json, calib_to_json, match_from_json,
    match_to_json, pixel_map_from_json, pixel_map_to_json, read_calib, read_match, read_template,
    template_from_json, template_to_json, write_calib, write_match, write_template, Calibration,
    JsonMode, MatchDocument,
};

use crate::error::{Error, Result};
use crate::projection::{ColorImage, Mask};

/// Writes to a temporary file in the target directory, then renames it into
/// place. Readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

/// Binary mask from an image file: any nonzero luma is foreground.
pub fn read_mask_image(path: &Path) -> Result<Mask> {
    let img = open_image(path)?.to_luma8();
    let (w, h) = img.dimensions();
    Mask::new(w, h, img.pixels().map(|p| p.0[0] > 0).collect())
}

/// RGB image scaled to `[0, 1]`.
pub fn read_color_image(path: &Path) -> Result<ColorImage> {
    let img = open_image(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    ColorImage::new(
        w,
        h,
        img.pixels()
            .map(|p| p.0.map(|c| c as f64 / 255.0))
            .collect(),
    )
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Human-readable summary of any supported file, detected from content.
/// The file is fully parsed, so corrupt files produce the reader's error.
pub fn inspect(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut s = String::new();
    let magic: Option<[u8; 4]> = bytes.get(..4).map(|m| m.try_into().unwrap());
    match magic {
        Some(SPCF_MAGIC) => {
            let c = decode_spcf(&bytes)?;
            let _ = writeln!(s, "format: SPCF v{FORMAT_VERSION}");
            let _ = writeln!(s, "points: {}", c.len());
            let _ = writeln!(s, "feature_dim: {}", c.feature_dim());
            let _ = writeln!(s, "features_normalized: {}", c.features_normalized());
            if !c.is_empty() {
                let mut lo = [f64::INFINITY; 3];
                let mut hi = [f64::NEG_INFINITY; 3];
                for p in c.positions() {
                    for k in 0..3 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
                let _ = writeln!(s, "bounds_min: {}", fmt_vec(&lo));
                let _ = writeln!(s, "bounds_max: {}", fmt_vec(&hi));
            }
        }
        Some(SFIM_MAGIC) => {
            let f = decode_sfim(&bytes)?;
            let _ = writeln!(s, "format: SFIM v{FORMAT_VERSION}");
            let _ = writeln!(s, "width: {}", f.width());
            let _ = writeln!(s, "height: {}", f.height());
            let _ = writeln!(s, "feature_dim: {}", f.feature_dim());
        }
        Some(SDEP_MAGIC) => {
            let d = decode_sdep(&bytes)?;
            let valid: Vec<u16> = d.data().iter().copied().filter(|&z| z > 0).collect();
            let _ = writeln!(s, "format: SDEP v{FORMAT_VERSION}");
            let _ = writeln!(s, "width: {}", d.width());
            let _ = writeln!(s, "height: {}", d.height());
            let _ = writeln!(s, "valid_pixels: {}", valid.len());
            if let (Some(lo), Some(hi)) = (valid.iter().min(), valid.iter().max()) {
                let _ = writeln!(s, "depth_range_mm: {lo}..{hi}");
            }
        }
        _ => inspect_json(path, &bytes, &mut s)?,
    }
    Ok(s)
}

fn inspect_json(path: &Path, bytes: &[u8], s: &mut String) -> Result<()> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::invalid(format!("{}: unrecognized file format", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Json {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let has = |k: &str| value.get(k).is_some();
    if has("feature_dim") && has("keypoints") {
        let t = template_from_json(text, JsonMode::Lenient)?;
        let _ = writeln!(s, "format: template");
        let _ = writeln!(s, "K: {}", t.len());
        let _ = writeln!(s, "feature_dim: {}", t.feature_dim());
        let _ = writeln!(s, "category: {}", t.category_label());
        if let Some(m) = t.source_meta().get("method") {
            let _ = writeln!(s, "method: {m}");
        }
    } else if has("transform") && has("keypoints") {
        let doc = match_from_json(text, JsonMode::Lenient)?;
        let r = &doc.result;
        let _ = writeln!(s, "format: match");
        if let Some(v) = doc.variant {
            let _ = writeln!(s, "variant: {v}");
        }
        let _ = writeln!(s, "K: {}", r.keypoints.len());
        let _ = writeln!(s, "matched: {}", r.matched_count());
        let _ = writeln!(s, "inferred: {}", r.keypoints.len() - r.matched_count());
        let _ = writeln!(s, "scale: {}", r.transform.scale());
        let _ = writeln!(
            s,
            "translation: {}",
            fmt_vec(r.transform.translation().as_slice())
        );
        let _ = writeln!(s, "objective: {}", r.objective_value);
    } else if has("intrinsics") && has("extrinsics") {
        let c = calib_from_json(text, JsonMode::Lenient)?;
        let i = c.intrinsics;
        let _ = writeln!(s, "format: calibration");
        let _ = writeln!(s, "image: {}x{}", i.width, i.height);
        let _ = writeln!(s, "focal: {} {}", i.fx, i.fy);
        let _ = writeln!(s, "principal_point: {} {}", i.cx, i.cy);
    } else if has("aggregates") && has("rows") {
        let report = crate::bench::read_report(path)?;
        let _ = writeln!(s, "format: bench report");
        let _ = writeln!(s, "rows: {}", report.rows.len());
        s.push_str(&crate::bench::summary_table(&report));
    } else {
        return Err(Error::invalid(format!(
            "{}: unrecognized JSON document",
            path.display()
        )));
    }
    Ok(())
}
