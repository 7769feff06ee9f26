//! Float-CSV raster format, the lossless companion to the PNM formats.
//!
//! First line: `width,height`. Then one line per pixel row holding either
//! `r,g,b` triples (heatmaps) or single values (depth maps). Floats are
//! written with 9 significant digits, which round-trips losslessly at that
//! precision.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::{ActivationHeatmap, DepthMap};

fn malformed(path: &Path, line: usize, field: usize, reason: impl Into<String>) -> Error {
    Error::MalformedValue {
        path: path.to_path_buf(),
        line,
        field,
        reason: reason.into(),
    }
}

fn parse_dim(path: &Path, text: &str) -> Result<(usize, usize)> {
    let mut fields = text.split(',');
    let mut next = |idx: usize, what: &str| -> Result<usize> {
        fields
            .next()
            .ok_or_else(|| malformed(path, 1, idx, format!("missing {what}")))?
            .trim()
            .parse::<usize>()
            .map_err(|e| malformed(path, 1, idx, format!("bad {what}: {e}")))
    };
    let width = next(1, "width")?;
    let height = next(2, "height")?;
    if width == 0 || height == 0 {
        return Err(malformed(path, 1, 1, "zero image dimension"));
    }
    Ok((width, height))
}

fn parse_row(path: &Path, line_no: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(expected);
    for (i, field) in text.split(',').enumerate() {
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|e| malformed(path, line_no, i + 1, format!("bad float: {e}")))?;
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(malformed(
                path,
                line_no,
                i + 1,
                format!("value {v} outside [0, 1]"),
            ));
        }
        values.push(v);
    }
    if values.len() != expected {
        return Err(malformed(
            path,
            line_no,
            values.len(),
            format!("expected {expected} fields, found {}", values.len()),
        ));
    }
    Ok(values)
}

/// Read `height` data rows of `fields_per_row` floats each.
fn read_grid(path: &Path, fields_per_pixel: usize) -> Result<(usize, usize, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| malformed(path, 1, 1, "empty file"))?;
    let (width, height) = parse_dim(path, header)?;

    let mut data = Vec::with_capacity(width * height * fields_per_pixel);
    let mut rows = 0usize;
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        if rows > height {
            return Err(malformed(path, i + 2, 1, format!("expected {height} data rows")));
        }
        data.extend(parse_row(path, i + 2, line, width * fields_per_pixel)?);
    }
    if rows < height {
        return Err(malformed(
            path,
            rows + 1,
            1,
            format!("expected {height} data rows, found {rows}"),
        ));
    }
    Ok((width, height, data))
}

pub fn read_heatmap_csv(path: &Path) -> Result<ActivationHeatmap> {
    let (width, height, data) = read_grid(path, 3)?;
    let pixels = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    ActivationHeatmap::new(width, height, pixels)
}

pub fn read_depth_csv(path: &Path) -> Result<DepthMap> {
    let (width, height, data) = read_grid(path, 1)?;
    DepthMap::new(width, height, data)
}

fn write_rows(
    path: &Path,
    width: usize,
    height: usize,
    mut row: impl FnMut(usize, &mut String),
) -> Result<()> {
    let mut out = format!("{width},{height}\n");
    for y in 0..height {
        row(y, &mut out);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_heatmap_csv(heatmap: &ActivationHeatmap, path: &Path) -> Result<()> {
    write_rows(path, heatmap.width(), heatmap.height(), |y, out| {
        for x in 0..heatmap.width() {
            let px = heatmap.pixel(x, y);
            if x > 0 {
                out.push(',');
            }
            write!(out, "{:.8e},{:.8e},{:.8e}", px[0], px[1], px[2]).unwrap();
        }
    })
}

pub fn write_depth_csv(depth: &DepthMap, path: &Path) -> Result<()> {
    write_rows(path, depth.width(), depth.height(), |y, out| {
        for x in 0..depth.width() {
            if x > 0 {
                out.push(',');
            }
            write!(out, "{:.8e}", depth.value(x, y)).unwrap();
        }
    })
}
