//! Little-endian binary formats: SPCF point clouds, SFIM feature images and
//! SDEP depth images. Values are stored as f32 (u16 for depth) and widened
//! on read.

use std::path::Path;

use nalgebra::Vector3;

use crate::cloud::SemanticPointCloud;
use crate::error::{Error, Result};
use crate::projection::{DepthImage, FeatureImage};

pub const FORMAT_VERSION: u32 = 1;

pub const SPCF_MAGIC: [u8; 4] = *b"SPCF";
pub const SFIM_MAGIC: [u8; 4] = *b"SFIM";
pub const SDEP_MAGIC: [u8; 4] = *b"SDEP";

pub const SPCF_HEADER_LEN: usize = 17;
pub const SFIM_HEADER_LEN: usize = 20;
pub const SDEP_HEADER_LEN: usize = 16;

const FLAG_NORMALIZED: u8 = 1;

/// Bytes per SPCF point record for a given descriptor width.
pub fn spcf_record_len(feature_dim: usize) -> usize {
    4 * (6 + feature_dim)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn need(&self, n: usize, header_len: usize) -> Result<()> {
        if self.bytes.len() < self.pos + n {
            return Err(Error::TruncatedPayload {
                offset: self.bytes.len(),
                expected: header_len.max(self.pos + n),
                available: self.bytes.len(),
            });
        }
        Ok(())
    }

    fn magic(&mut self, expected: [u8; 4], header_len: usize) -> Result<()> {
        // a short file with the wrong prefix is still a magic mismatch
        let mut found = [0u8; 4];
        let n = self.bytes.len().min(4);
        found[..n].copy_from_slice(&self.bytes[..n]);
        if found[..n] != expected[..n] {
            return Err(Error::BadMagic { expected, found });
        }
        self.need(4, header_len)?;
        self.pos = 4;
        Ok(())
    }

    fn u32(&mut self) -> u32 {
        let v = u32::from_le_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        v
    }

    fn u8(&mut self) -> u8 {
        let v = self.bytes[self.pos];
        self.pos += 1;
        v
    }

    fn f32(&mut self) -> Result<f64> {
        let offset = self.pos;
        let v = f32::from_le_bytes(self.bytes[offset..offset + 4].try_into().unwrap());
        self.pos += 4;
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { offset });
        }
        Ok(v as f64)
    }

    fn u16(&mut self) -> u16 {
        let v = u16::from_le_bytes(self.bytes[self.pos..self.pos + 2].try_into().unwrap());
        self.pos += 2;
        v
    }
}

fn version(r: &mut Reader<'_>) -> Result<()> {
    let v = r.u32();
    if v != FORMAT_VERSION {
        return Err(Error::VersionUnsupported {
            found: v,
            supported: FORMAT_VERSION,
        });
    }
    Ok(())
}

/// Checks the payload size against the header. A short payload is reported
/// at the first record that cannot be read completely.
fn check_payload(len: usize, header_len: usize, records: u64, record_len: usize) -> Result<()> {
    let expected = (records as u128) * (record_len as u128) + header_len as u128;
    if (len as u128) < expected {
        let complete = (len - header_len) / record_len.max(1);
        return Err(Error::TruncatedPayload {
            offset: header_len + complete * record_len,
            expected: usize::try_from(expected).unwrap_or(usize::MAX),
            available: len,
        });
    }
    let expected = expected as usize;
    if len > expected {
        return Err(Error::TrailingData {
            offset: expected,
            extra: len - expected,
        });
    }
    Ok(())
}

fn put_f32(out: &mut Vec<u8>, v: f64) -> Result<()> {
    let x = v as f32;
    if !x.is_finite() {
        return Err(Error::invalid(format!(
            "value {v} is not representable as a finite f32"
        )));
    }
    out.extend_from_slice(&x.to_le_bytes());
    Ok(())
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invalid(format!("{what} {v} exceeds the u32 range")))
}

pub fn encode_spcf(cloud: &SemanticPointCloud) -> Result<Vec<u8>> {
    let dim = cloud.feature_dim();
    let mut out = Vec::with_capacity(SPCF_HEADER_LEN + cloud.len() * spcf_record_len(dim));
    out.extend_from_slice(&SPCF_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(cloud.len(), "point count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(dim, "feature_dim")?.to_le_bytes());
    out.push(if cloud.features_normalized() {
        FLAG_NORMALIZED
    } else {
        0
    });
    for p in cloud.iter() {
        for v in p
            .position
            .iter()
            .chain(p.color.iter())
            .chain(p.feature.iter())
        {
            put_f32(&mut out, *v)?;
        }
    }
    Ok(out)
}

pub fn decode_spcf(bytes: &[u8]) -> Result<SemanticPointCloud> {
    let mut r = Reader::new(bytes);
    r.magic(SPCF_MAGIC, SPCF_HEADER_LEN)?;
    r.need(SPCF_HEADER_LEN - 4, SPCF_HEADER_LEN)?;
    version(&mut r)?;
    let count = r.u32() as usize;
    let dim = r.u32() as usize;
    let flags = r.u8();
    if flags & !FLAG_NORMALIZED != 0 {
        return Err(Error::invalid(format!(
            "unknown SPCF flag bits {flags:#04x} at byte offset 16"
        )));
    }
    if dim == 0 {
        return Err(Error::invalid(
            "SPCF feature_dim must be positive (byte offset 12)",
        ));
    }
    check_payload(
        bytes.len(),
        SPCF_HEADER_LEN,
        count as u64,
        spcf_record_len(dim),
    )?;
    let mut positions = Vec::with_capacity(count);
    let mut colors = Vec::with_capacity(count);
    let mut features = Vec::with_capacity(count * dim);
    for _ in 0..count {
        positions.push(Vector3::new(r.f32()?, r.f32()?, r.f32()?));
        colors.push([r.f32()?, r.f32()?, r.f32()?]);
        for _ in 0..dim {
            features.push(r.f32()?);
        }
    }
    SemanticPointCloud::from_parts(
        positions,
        colors,
        features,
        dim,
        flags & FLAG_NORMALIZED != 0,
    )
}

pub fn encode_sfim(image: &FeatureImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(SFIM_HEADER_LEN + image.data().len() * 4);
    out.extend_from_slice(&SFIM_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&image.width().to_le_bytes());
    out.extend_from_slice(&image.height().to_le_bytes());
    out.extend_from_slice(&image.feature_dim().to_le_bytes());
    for v in image.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_sfim(bytes: &[u8]) -> Result<FeatureImage> {
    let mut r = Reader::new(bytes);
    r.magic(SFIM_MAGIC, SFIM_HEADER_LEN)?;
    r.need(SFIM_HEADER_LEN - 4, SFIM_HEADER_LEN)?;
    version(&mut r)?;
    let (w, h, n) = (r.u32(), r.u32(), r.u32());
    let pixels = w as u64 * h as u64;
    check_payload(bytes.len(), SFIM_HEADER_LEN, pixels, 4 * n as usize)?;
    let total = (pixels * n as u64) as usize;
    let mut data = Vec::with_capacity(total);
    for _ in 0..total {
        data.push(r.f32()? as f32);
    }
    FeatureImage::new(w, h, n, data)
}

pub fn encode_sdep(depth: &DepthImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(SDEP_HEADER_LEN + depth.data().len() * 2);
    out.extend_from_slice(&SDEP_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&depth.width().to_le_bytes());
    out.extend_from_slice(&depth.height().to_le_bytes());
    for v in depth.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_sdep(bytes: &[u8]) -> Result<DepthImage> {
    let mut r = Reader::new(bytes);
    r.magic(SDEP_MAGIC, SDEP_HEADER_LEN)?;
    r.need(SDEP_HEADER_LEN - 4, SDEP_HEADER_LEN)?;
    version(&mut r)?;
    let (w, h) = (r.u32(), r.u32());
    check_payload(bytes.len(), SDEP_HEADER_LEN, w as u64 * h as u64, 2)?;
    let data = (0..w as usize * h as usize).map(|_| r.u16()).collect();
    DepthImage::new(w, h, data)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_spcf(path: &Path) -> Result<SemanticPointCloud> {
    decode_spcf(&read_bytes(path)?)
}

pub fn write_spcf(path: &Path, cloud: &SemanticPointCloud) -> Result<()> {
    super::write_atomic(path, &encode_spcf(cloud)?)
}

pub fn read_sfim(path: &Path) -> Result<FeatureImage> {
    decode_sfim(&read_bytes(path)?)
}

pub fn write_sfim(path: &Path, image: &FeatureImage) -> Result<()> {
    super::write_atomic(path, &encode_sfim(image))
}

pub fn read_sdep(path: &Path) -> Result<DepthImage> {
    decode_sdep(&read_bytes(path)?)
}

pub fn write_sdep(path: &Path, depth: &DepthImage) -> Result<()> {
    super::write_atomic(path, &encode_sdep(depth))
}
