//! Depth-map files.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "DTDEPTH1"
//! width      u32
//! height     u32
//! downsample u32
//! id_len     u32
//! id         id_len bytes, UTF-8
//! values     grid_w * grid_h f64, row-major; +inf marks an empty patch
//! ```

use std::path::Path;

use image::{ImageBuffer, Luma};

use super::ply::write_bytes;
use crate::error::{Error, Location, Result};
use crate::projection::DepthMap;

const MAGIC: &[u8; 8] = b"DTDEPTH1";
const MAX_ID_LEN: u32 = 4096;

pub fn encode_depth_map(map: &DepthMap) -> Vec<u8> {
    let id = map.camera_id().as_bytes();
    let (w, h) = map.image_size();
    let mut out = Vec::with_capacity(24 + id.len() + map.values().len() * 8);
    out.extend_from_slice(MAGIC);
    for v in [w, h, map.downsample(), id.len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(id);
    for d in map.values() {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out
}

pub fn decode_depth_map(bytes: &[u8], source_name: &str) -> Result<DepthMap> {
    let err = |at: usize, msg: String| Error::malformed(source_name, Location::Byte(at as u64), msg);
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(err(0, "not a depth-map file (bad magic)".into()));
    }
    let u32_at = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| err(at, "unexpected end of header".into()))
    };
    let width = u32_at(8)?;
    let height = u32_at(12)?;
    let downsample = u32_at(16)?;
    let id_len = u32_at(20)?;
    if width == 0 || height == 0 {
        return Err(err(8, format!("image size {width}x{height} is empty")));
    }
    if downsample == 0 {
        return Err(err(16, "downsample factor is 0".into()));
    }
    if id_len > MAX_ID_LEN {
        return Err(err(20, format!("camera id length {id_len} exceeds {MAX_ID_LEN}")));
    }
    let id_end = 24 + id_len as usize;
    let id = bytes
        .get(24..id_end)
        .ok_or_else(|| err(24, "unexpected end of camera id".into()))?;
    let id = std::str::from_utf8(id).map_err(|e| err(24 + e.valid_up_to(), "camera id is not UTF-8".into()))?;

    let cells = width.div_ceil(downsample) as u64 * height.div_ceil(downsample) as u64;
    let payload = &bytes[id_end..];
    if payload.len() as u64 != cells * 8 {
        return Err(err(
            id_end,
            format!("expected {} bytes of depth values, found {}", cells * 8, payload.len()),
        ));
    }
    let mut values = Vec::with_capacity(cells as usize);
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let d = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !(d > 0.0) {
            return Err(err(id_end + i * 8, format!("depth {d} is not positive")));
        }
        values.push(d);
    }
    Ok(DepthMap::from_values(id, width, height, downsample, values).expect("validated above"))
}

pub fn write_depth_map(map: &DepthMap, path: &Path) -> Result<()> {
    write_bytes(path, &encode_depth_map(map))
}

pub fn read_depth_map(path: &Path) -> Result<DepthMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::read(path, e))?;
    decode_depth_map(&bytes, &path.display().to_string())
}

/// 16-bit grayscale preview at patch resolution: depth is mapped linearly
/// from `[0, max finite depth]` onto `[0, 65535]`; empty patches are 0.
pub fn encode_depth_png(map: &DepthMap) -> Vec<u8> {
    let (gw, gh) = map.grid_size();
    let max = map.max_finite().unwrap_or(1.0);
    let pixels: Vec<u16> = map
        .values()
        .iter()
        .map(|&d| {
            if d.is_finite() {
                (d / max * 65535.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            }
        })
        .collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(gw, gh, pixels).expect("buffer matches grid");
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .expect("PNG encoding to memory");
    out.into_inner()
}

pub fn write_depth_png(map: &DepthMap, path: &Path) -> Result<()> {
    write_bytes(path, &encode_depth_png(map))
}
