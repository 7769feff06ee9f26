//! Core domain types: activation heatmaps, depth maps, bounding boxes and scenes.
//!
//! All types validate their invariants on construction and are immutable
//! afterwards, so they can be shared freely across worker threads.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pipeline mode: full RGB-D fusion or the RGB-only baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rgbd,
    Rgb,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Rgbd => "rgbd",
            Mode::Rgb => "rgb",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgbd" => Ok(Mode::Rgbd),
            "rgb" => Ok(Mode::Rgb),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode '{other}': expected 'rgbd' or 'rgb'"
            ))),
        }
    }
}

/// Scene difficulty: whether the expression needs depth to disambiguate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Easy,
    Difficult,
}

impl Category {
    pub fn label(self) -> &'static str {
        match self {
            Category::Easy => "easy",
            Category::Difficult => "difficult",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn check_unit_range(what: &str, value: f64) -> Result<()> {
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(Error::OutOfRange {
            what: what.to_string(),
            value,
        });
    }
    Ok(())
}

/// An H x W grid of normalized activation intensities in jet-like encoding:
/// high red means high activation, high blue means low activation.
///
/// Every channel is finite and within [0, 1]; row-major storage, origin at
/// the top-left corner, x rightward, y downward.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationHeatmap {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl ActivationHeatmap {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "activation heatmap pixel buffer",
                expected_width: width,
                expected_height: height,
                actual_width: pixels.len(),
                actual_height: 1,
            });
        }
        for (i, px) in pixels.iter().enumerate() {
            for (c, &v) in px.iter().enumerate() {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::OutOfRange {
                        what: format!("heatmap channel {c} at pixel {i}"),
                        value: v,
                    });
                }
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Build a heatmap by evaluating `f(x, y)` over the grid.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[self.index(x, y)]
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub fn same_dimensions(&self, other: &ActivationHeatmap) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// An H x W grid of normalized depth values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "depth map value buffer",
                expected_width: width,
                expected_height: height,
                actual_width: values.len(),
                actual_height: 1,
            });
        }
        for (i, &v) in values.iter().enumerate() {
            check_unit_range(&format!("depth value at pixel {i}"), v)?;
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Axis-aligned bounding box with inclusive corners.
///
/// A single pixel is the box (x, y, x, y) with area 1. Construction fails
/// unless x_min <= x_max and y_min <= y_max.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct BoundingBox {
    x_min: u32,
    y_min: u32,
    x_max: u32,
    y_max: u32,
}

impl BoundingBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Result<Self> {
        if x_min > x_max || y_min > y_max {
            return Err(Error::DegenerateBox {
                x_min,
                y_min,
                x_max,
                y_max,
            });
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Minimal cover of a non-empty pixel set.
    pub fn covering(pixels: impl IntoIterator<Item = (u32, u32)>) -> Option<Self> {
        let mut bounds: Option<(u32, u32, u32, u32)> = None;
        for (x, y) in pixels {
            bounds = Some(match bounds {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
        bounds.map(|(x_min, y_min, x_max, y_max)| Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> u32 {
        self.x_min
    }

    pub fn y_min(&self) -> u32 {
        self.y_min
    }

    pub fn x_max(&self) -> u32 {
        self.x_max
    }

    pub fn y_max(&self) -> u32 {
        self.y_max
    }

    /// Horizontal extent in pixels (inclusive corners).
    pub fn width(&self) -> u32 {
        self.x_max - self.x_min + 1
    }

    /// Vertical extent in pixels (inclusive corners).
    pub fn height(&self) -> u32 {
        self.y_max - self.y_min + 1
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    /// Continuous center of mass: ((x_min + x_max) / 2, (y_min + y_max) / 2).
    pub fn center(&self) -> (f64, f64) {
        (
            (f64::from(self.x_min) + f64::from(self.x_max)) / 2.0,
            (f64::from(self.y_min) + f64::from(self.y_max)) / 2.0,
        )
    }

    pub fn fits_within(&self, width: usize, height: usize) -> bool {
        (self.x_max as usize) < width && (self.y_max as usize) < height
    }
}

impl TryFrom<[u32; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [u32; 4]) -> Result<Self> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [u32; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

/// One dataset instance: the two activation heatmaps, the depth map, the
/// referring expression, the ground-truth box and the difficulty category.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub rgb_heatmap: ActivationHeatmap,
    pub depth_heatmap: ActivationHeatmap,
    pub depth_map: DepthMap,
    pub expression: String,
    pub ground_truth: BoundingBox,
    pub category: Category,
}

impl Scene {
    pub fn new(
        id: String,
        rgb_heatmap: ActivationHeatmap,
        depth_heatmap: ActivationHeatmap,
        depth_map: DepthMap,
        expression: String,
        ground_truth: BoundingBox,
        category: Category,
    ) -> Result<Self> {
        let scene = Self {
            id,
            rgb_heatmap,
            depth_heatmap,
            depth_map,
            expression,
            ground_truth,
            category,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn width(&self) -> usize {
        self.rgb_heatmap.width()
    }

    pub fn height(&self) -> usize {
        self.rgb_heatmap.height()
    }

    /// Check the cross-field invariants: all rasters share dimensions and
    /// the ground-truth box lies within them. Channel and depth ranges are
    /// enforced by the raster constructors. Idempotent.
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.rgb_heatmap.width(), self.rgb_heatmap.height());
        if !self.rgb_heatmap.same_dimensions(&self.depth_heatmap) {
            return Err(Error::DimensionMismatch {
                what: "depth heatmap",
                expected_width: w,
                expected_height: h,
                actual_width: self.depth_heatmap.width(),
                actual_height: self.depth_heatmap.height(),
            });
        }
        if self.depth_map.width() != w || self.depth_map.height() != h {
            return Err(Error::DimensionMismatch {
                what: "depth map",
                expected_width: w,
                expected_height: h,
                actual_width: self.depth_map.width(),
                actual_height: self.depth_map.height(),
            });
        }
        if !self.ground_truth.fits_within(w, h) {
            return Err(Error::BoxOutOfBounds {
                x_min: self.ground_truth.x_min(),
                y_min: self.ground_truth.y_min(),
                x_max: self.ground_truth.x_max(),
                y_max: self.ground_truth.y_max(),
                width: w,
                height: h,
            });
        }
        Ok(())
    }
}

/// Per-pixel feature vectors laid out row-major with a fixed dimensionality:
/// 6 components (x, y, depth, r, g, b) in RGB-D mode, 5 (x, y, r, g, b) in
/// RGB mode. Inactive pixels carry the all-zeros vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    width: usize,
    height: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    pub(crate) fn from_raw(width: usize, height: usize, dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * dim);
        Self {
            width,
            height,
            dim,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn feature(&self, pixel: usize) -> &[f64] {
        &self.data[pixel * self.dim..(pixel + 1) * self.dim]
    }

    /// True when the pixel carries the all-zeros (inactive) vector.
    #[inline]
    pub fn is_zero(&self, pixel: usize) -> bool {
        self.feature(pixel).iter().all(|&v| v == 0.0)
    }

    /// Flat row-major buffer, `pixel_count * dim` values.
    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// A connected pixel region with its activation score and minimal cover.
///
/// `pixels` holds row-major indices in ascending order; the set is non-empty
/// and 8-connected by construction. `activation` is 0 until scored.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub pixels: Vec<usize>,
    pub activation: f64,
    pub bbox: BoundingBox,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_heatmap(w: usize, h: usize, px: [f64; 3]) -> ActivationHeatmap {
        ActivationHeatmap::from_fn(w, h, |_, _| px).unwrap()
    }

    fn valid_scene() -> Scene {
        Scene::new(
            "s1".into(),
            uniform_heatmap(640, 480, [0.2, 0.1, 0.7]),
            uniform_heatmap(640, 480, [0.3, 0.2, 0.5]),
            DepthMap::from_fn(640, 480, |_, _| 0.5).unwrap(),
            "the mug next to the books".into(),
            BoundingBox::new(10, 10, 50, 50).unwrap(),
            Category::Easy,
        )
        .unwrap()
    }

    #[test]
    fn valid_scene_passes_validation() {
        let scene = valid_scene();
        scene.validate().unwrap();
        // Idempotent: a second validation leaves the scene unchanged.
        let copy = scene.clone();
        scene.validate().unwrap();
        assert_eq!(scene, copy);
    }

    #[test]
    fn mismatched_depth_map_is_rejected() {
        let result = Scene::new(
            "s2".into(),
            uniform_heatmap(640, 480, [0.2, 0.1, 0.7]),
            uniform_heatmap(640, 480, [0.3, 0.2, 0.5]),
            DepthMap::from_fn(320, 240, |_, _| 0.5).unwrap(),
            "x".into(),
            BoundingBox::new(0, 0, 10, 10).unwrap(),
            Category::Easy,
        );
        assert!(matches!(result, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn out_of_range_channel_is_rejected() {
        let result = ActivationHeatmap::new(1, 1, vec![[1.5, 0.0, 0.0]]);
        assert!(matches!(result, Err(Error::OutOfRange { .. })));
        let nan = ActivationHeatmap::new(1, 1, vec![[f64::NAN, 0.0, 0.0]]);
        assert!(matches!(nan, Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn degenerate_box_fails_construction() {
        assert!(matches!(
            BoundingBox::new(5, 0, 4, 10),
            Err(Error::DegenerateBox { .. })
        ));
        assert!(BoundingBox::new(5, 5, 5, 5).is_ok());
    }

    #[test]
    fn ground_truth_outside_image_is_rejected() {
        let mut scene = valid_scene();
        scene.ground_truth = BoundingBox::new(0, 0, 640, 100).unwrap();
        assert!(matches!(
            scene.validate(),
            Err(Error::BoxOutOfBounds { .. })
        ));
    }

    #[test]
    fn inclusive_box_geometry() {
        let b = BoundingBox::new(2, 3, 4, 7).unwrap();
        assert_eq!(b.width(), 3);
        assert_eq!(b.height(), 5);
        assert_eq!(b.area(), 15);
        assert_eq!(b.center(), (3.0, 5.0));
        let single = BoundingBox::new(9, 9, 9, 9).unwrap();
        assert_eq!(single.area(), 1);
    }

    #[test]
    fn covering_box_is_minimal() {
        let b = BoundingBox::covering([(2, 3), (4, 7)]).unwrap();
        assert_eq!(<[u32; 4]>::from(b), [2, 3, 4, 7]);
        assert!(BoundingBox::covering(std::iter::empty()).is_none());
    }

    #[test]
    fn bounding_box_serde_uses_corner_array() {
        let b = BoundingBox::new(1, 2, 3, 4).unwrap();
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, "[1,2,3,4]");
        let back: BoundingBox = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
        let bad: std::result::Result<BoundingBox, _> = serde_json::from_str("[3,2,1,4]");
        assert!(bad.is_err());
    }
}
