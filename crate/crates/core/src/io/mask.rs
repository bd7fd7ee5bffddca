//! Per-view label masks: 8-bit single-channel PNG or PGM, one class index
//! per pixel.

use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma};

use crate::classes::{ClassId, ClassTable};
use crate::error::{Error, Location, Result};

/// Row-major class indices for one image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMask {
    width: u32,
    height: u32,
    labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: u32, height: u32, labels: Vec<u8>) -> Self {
        assert_eq!(
            labels.len(),
            width as usize * height as usize,
            "label buffer does not match mask dimensions"
        );
        LabelMask { width, height, labels }
    }

    pub fn filled(width: u32, height: u32, class: ClassId) -> Self {
        LabelMask::new(width, height, vec![class.0; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> ClassId {
        ClassId(self.labels[y as usize * self.width as usize + x as usize])
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Fails with `UnknownClassIndex` on the first value outside `classes`.
    pub fn validate_classes(&self, classes: &ClassTable, source_name: &str) -> Result<()> {
        match self.labels.iter().find(|&&v| v as usize >= classes.len()) {
            Some(&bad) => Err(Error::UnknownClassIndex {
                source_name: source_name.to_string(),
                class: bad as u32,
                classes: classes.len(),
            }),
            None => Ok(()),
        }
    }
}

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Decodes a mask from PNG or PGM (`P2`/`P5`, maxval ≤ 255) bytes.
pub fn decode_mask(bytes: &[u8], source_name: &str) -> Result<LabelMask> {
    if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes, source_name)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        decode_pgm(bytes, source_name)
    } else {
        Err(Error::malformed(
            source_name,
            Location::Byte(0),
            "not a PNG or PGM image",
        ))
    }
}

fn decode_png(bytes: &[u8], src: &str) -> Result<LabelMask> {
    let mut reader = image::ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png);
    let mut limits = image::Limits::default();
    limits.max_alloc = Some(256 << 20);
    reader.limits(limits);
    let img = reader
        .decode()
        .map_err(|e| Error::malformed(src, Location::Byte(0), format!("PNG decode failed: {e}")))?;
    match img {
        image::DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Ok(LabelMask::new(w, h, buf.into_raw()))
        }
        other => Err(Error::malformed(
            src,
            Location::Byte(0),
            format!("mask must be 8-bit single channel, found {:?}", other.color()),
        )),
    }
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, src: &str, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::malformed(src, Location::Byte(start as u64), format!("expected {what}"))
            })
    }
}

fn decode_pgm(bytes: &[u8], src: &str) -> Result<LabelMask> {
    let binary = bytes[1] == b'5';
    let mut cur = PgmCursor { bytes, pos: 2 };
    let width = cur.number(src, "width")?;
    let height = cur.number(src, "height")?;
    let maxval_at = cur.pos;
    let maxval = cur.number(src, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::malformed(src, Location::Byte(2), "mask dimensions must be positive"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::malformed(
            src,
            Location::Byte(maxval_at as u64),
            "only 8-bit PGM (maxval 1..=255) is supported",
        ));
    }
    let n = width as u64 * height as u64;
    if binary {
        // Exactly one whitespace byte separates the header from raster data.
        let start = cur.pos + 1;
        let available = bytes.len().saturating_sub(start) as u64;
        if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) || available < n {
            return Err(Error::malformed(
                src,
                Location::Byte(cur.pos as u64),
                format!("expected {n} raster bytes, found {available}"),
            ));
        }
        let labels = bytes[start..start + n as usize].to_vec();
        Ok(LabelMask::new(width, height, labels))
    } else {
        // ASCII rasters need at least two bytes per value.
        if n > bytes.len() as u64 {
            return Err(Error::malformed(src, Location::Byte(2), "raster is larger than the file"));
        }
        let mut labels = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let at = cur.pos;
            let v = cur.number(src, "pixel value")?;
            if v > maxval {
                return Err(Error::malformed(src, Location::Byte(at as u64), "pixel value exceeds maxval"));
            }
            labels.push(v as u8);
        }
        Ok(LabelMask::new(width, height, labels))
    }
}

pub fn read_mask(path: &Path) -> Result<LabelMask> {
    let bytes = std::fs::read(path).map_err(|e| Error::read(path, e))?;
    decode_mask(&bytes, &path.display().to_string())
}

pub fn encode_mask_png(mask: &LabelMask) -> Vec<u8> {
    let buf: ImageBuffer<Luma<u8>, &[u8]> =
        ImageBuffer::from_raw(mask.width, mask.height, mask.labels.as_slice())
            .expect("mask buffer matches its dimensions");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .expect("encoding to memory cannot fail");
    out.into_inner()
}

pub fn write_mask(mask: &LabelMask, path: &Path) -> Result<()> {
    super::ply::write_bytes(path, &encode_mask_png(mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let mask = LabelMask::new(3, 2, vec![0, 1, 2, 3, 4, 5]);
        let back = decode_mask(&encode_mask_png(&mask), "m").unwrap();
        assert_eq!(back, mask);
        assert_eq!(back.get(2, 1), ClassId(5));
    }

    #[test]
    fn binary_pgm() {
        let mut bytes = b"P5\n# comment\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 1, 2, 3]);
        let mask = decode_mask(&bytes, "m").unwrap();
        assert_eq!((mask.width(), mask.height()), (2, 2));
        assert_eq!(mask.get(1, 1), ClassId(3));
    }

    #[test]
    fn ascii_pgm() {
        let mask = decode_mask(b"P2 3 1 5\n0 5 2\n", "m").unwrap();
        assert_eq!(mask.labels(), &[0, 5, 2]);
    }

    #[test]
    fn truncated_pgm_is_malformed() {
        let bytes = b"P5 4 4 255\n\x00\x01";
        assert!(matches!(decode_mask(bytes, "m"), Err(Error::Malformed { .. })));
    }

    #[test]
    fn sixteen_bit_pgm_rejected() {
        assert!(decode_mask(b"P5 1 1 65535\n\x00\x00", "m").is_err());
    }

    #[test]
    fn rgb_png_rejected() {
        let img = image::RgbImage::new(2, 2);
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        assert!(decode_mask(out.get_ref(), "m").is_err());
    }

    #[test]
    fn unknown_class_detected() {
        let classes = ClassTable::debris_default();
        let mask = LabelMask::new(2, 1, vec![1, 6]);
        assert!(matches!(
            mask.validate_classes(&classes, "m"),
            Err(Error::UnknownClassIndex { class: 6, .. })
        ));
    }
}
