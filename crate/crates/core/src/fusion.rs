//! Intersection of the RGB and depth activation heatmaps.
//!
//! A pixel counts as active in a heatmap when its red or green channel is
//! strictly above the activation threshold. Where both input heatmaps are
//! active the fused heatmap takes the channel-wise mean; everywhere else it
//! takes the inactive sentinel (0, 0, 1), pure blue.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::ActivationHeatmap;

/// Output pixel for positions where the inputs do not overlap.
pub const INACTIVE_PIXEL: [f64; 3] = [0.0, 0.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Activation threshold on the red/green channels, strict inequality.
    pub t_rgb: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { t_rgb: 0.39 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.t_rgb.is_finite() || !(0.0..=1.0).contains(&self.t_rgb) {
            return Err(Error::OutOfRange {
                what: "fusion threshold t_rgb".into(),
                value: self.t_rgb,
            });
        }
        Ok(())
    }
}

/// Strictly above the threshold in red or green.
#[inline]
pub fn is_active(pixel: [f64; 3], threshold: f64) -> bool {
    pixel[0].max(pixel[1]) > threshold
}

/// Fuse two equal-sized heatmaps into their intersection heatmap.
///
/// Symmetric in its heatmap arguments, and every output pixel is either
/// exactly `INACTIVE_PIXEL` or the exact channel-wise mean of the inputs.
pub fn intersect(
    h_rgb: &ActivationHeatmap,
    h_depth: &ActivationHeatmap,
    cfg: &FusionConfig,
) -> Result<ActivationHeatmap> {
    cfg.validate()?;
    if !h_rgb.same_dimensions(h_depth) {
        return Err(Error::DimensionMismatch {
            what: "fusion inputs",
            expected_width: h_rgb.width(),
            expected_height: h_rgb.height(),
            actual_width: h_depth.width(),
            actual_height: h_depth.height(),
        });
    }

    let pixels = h_rgb
        .pixels()
        .iter()
        .zip(h_depth.pixels())
        .map(|(&a, &b)| {
            if is_active(a, cfg.t_rgb) && is_active(b, cfg.t_rgb) {
                [
                    (a[0] + b[0]) / 2.0,
                    (a[1] + b[1]) / 2.0,
                    (a[2] + b[2]) / 2.0,
                ]
            } else {
                INACTIVE_PIXEL
            }
        })
        .collect();

    ActivationHeatmap::new(h_rgb.width(), h_rgb.height(), pixels)
}
