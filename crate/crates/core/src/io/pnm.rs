//! Binary portable-anymap readers and writers (P6 pixmaps, P5 graymaps).
//!
//! Heatmaps travel as 8-bit P6 with maxval 255; depth maps as P5 with
//! maxval 255 or 65535 (big-endian 16-bit). Failures are typed errors
//! carrying the byte offset, never panics.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::{ActivationHeatmap, DepthMap};

#[inline]
fn is_pnm_whitespace(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

struct Header {
    width: usize,
    height: usize,
    maxval: u32,
    payload_offset: usize,
}

fn malformed(path: &Path, offset: usize, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        offset,
        reason: reason.into(),
    }
}

fn read_number(bytes: &[u8], pos: &mut usize, path: &Path, what: &str) -> Result<u64> {
    // Skip whitespace and '#' comments, which run to end of line.
    loop {
        while *pos < bytes.len() && is_pnm_whitespace(bytes[*pos]) {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return Err(malformed(path, start, format!("expected {what}")));
    }
    if *pos - start > 9 {
        return Err(malformed(path, start, format!("{what} has too many digits")));
    }
    let text = std::str::from_utf8(&bytes[start..*pos]).expect("digits are ascii");
    Ok(text.parse().expect("digit run fits in u64"))
}

fn parse_header(bytes: &[u8], magic: &[u8; 2], path: &Path) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(malformed(
            path,
            0,
            format!("expected magic '{}'", String::from_utf8_lossy(magic)),
        ));
    }
    let mut pos = 2;
    let width = read_number(bytes, &mut pos, path, "width")? as usize;
    let height = read_number(bytes, &mut pos, path, "height")? as usize;
    let maxval = read_number(bytes, &mut pos, path, "maxval")? as u32;
    if width == 0 || height == 0 {
        return Err(malformed(path, pos, "zero image dimension"));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !is_pnm_whitespace(bytes[pos]) {
        return Err(malformed(path, pos, "expected single whitespace after maxval"));
    }
    pos += 1;
    Ok(Header {
        width,
        height,
        maxval,
        payload_offset: pos,
    })
}

fn payload<'a>(bytes: &'a [u8], header: &Header, expected: usize, path: &Path) -> Result<&'a [u8]> {
    let available = bytes.len() - header.payload_offset;
    if available < expected {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            actual: available,
        });
    }
    Ok(&bytes[header.payload_offset..header.payload_offset + expected])
}

/// Read a binary PPM (P6, maxval 255) as a normalized heatmap.
pub fn read_ppm(path: &Path) -> Result<ActivationHeatmap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&bytes, b"P6", path)?;
    if header.maxval != 255 {
        return Err(malformed(
            path,
            header.payload_offset,
            format!("unsupported maxval {} (expected 255)", header.maxval),
        ));
    }
    let data = payload(&bytes, &header, header.width * header.height * 3, path)?;
    let pixels = data
        .chunks_exact(3)
        .map(|c| {
            [
                f64::from(c[0]) / 255.0,
                f64::from(c[1]) / 255.0,
                f64::from(c[2]) / 255.0,
            ]
        })
        .collect();
    ActivationHeatmap::new(header.width, header.height, pixels)
}

/// Write raw 8-bit RGB triples as a binary PPM.
pub fn write_ppm_bytes(width: usize, height: usize, rgb: &[u8], path: &Path) -> Result<()> {
    debug_assert_eq!(rgb.len(), width * height * 3);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[inline]
pub(crate) fn quantize_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Write a heatmap as a binary PPM, quantizing channels to 8 bits.
pub fn write_ppm(heatmap: &ActivationHeatmap, path: &Path) -> Result<()> {
    let rgb = super::quantize_rgb8(heatmap);
    write_ppm_bytes(heatmap.width(), heatmap.height(), &rgb, path)
}

/// Read a binary PGM (P5) as a normalized depth map. Maxval 255 reads one
/// byte per pixel, maxval 65535 two bytes big-endian.
pub fn read_pgm(path: &Path) -> Result<DepthMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&bytes, b"P5", path)?;
    let pixel_count = header.width * header.height;
    let values = match header.maxval {
        255 => payload(&bytes, &header, pixel_count, path)?
            .iter()
            .map(|&v| f64::from(v) / 255.0)
            .collect(),
        65535 => payload(&bytes, &header, pixel_count * 2, path)?
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) / 65535.0)
            .collect(),
        other => {
            return Err(malformed(
                path,
                header.payload_offset,
                format!("unsupported maxval {other} (expected 255 or 65535)"),
            ))
        }
    };
    DepthMap::new(header.width, header.height, values)
}

/// Write a depth map as a 16-bit big-endian binary PGM.
pub fn write_pgm16(depth: &DepthMap, path: &Path) -> Result<()> {
    let mut out = format!("P5\n{} {}\n65535\n", depth.width(), depth.height()).into_bytes();
    for &v in depth.values() {
        let q = (v * 65535.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
