//! Deterministic synthetic scene generation and overlay rendering.
//!
//! Scenes are built from isotropic Gaussian activation bumps encoded with a
//! jet-style colormap (activation a maps to (a, 1 - |2a - 1|, 1 - a), so 0
//! is pure blue and 1 pure red). The depth-critical preset places two
//! identical bumps side by side, activates only the target on the depth
//! side, and so builds a scene that RGB alone cannot disambiguate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::clustering::ProposalSet;
use crate::error::{Error, Result};
use crate::fusion::{intersect, FusionConfig};
use crate::io::{quantize_rgb8, write_ppm_bytes};
use crate::scene::{ActivationHeatmap, BoundingBox, Category, DepthMap, Mode, Scene};

/// One Gaussian activation bump with its scene depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    /// Center in pixel coordinates.
    pub center: (u32, u32),
    /// Standard deviation of the bump in pixels.
    pub radius_sigma: f64,
    /// Peak activation in [0, 1].
    pub peak: f64,
    /// Normalized depth of the blob in [0, 1].
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub blobs: Vec<BlobSpec>,
    /// Blob indices visible in the RGB heatmap.
    #[serde(default)]
    pub rgb_active_blobs: Vec<usize>,
    /// Blob indices visible in the depth heatmap.
    #[serde(default)]
    pub depth_active_blobs: Vec<usize>,
    /// Index of the blob the expression refers to; its region above
    /// activation 0.5 becomes the ground-truth box. None only makes sense
    /// for blob-free background scenes.
    #[serde(default)]
    pub target_blob: Option<usize>,
    /// Uniform per-channel noise amplitude; samples come from [-a, a].
    #[serde(default)]
    pub noise_amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub expression: Option<String>,
    #[serde(default)]
    pub category: Option<Category>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidSpec("image dimensions must be positive".into()));
        }
        for (i, blob) in self.blobs.iter().enumerate() {
            if blob.center.0 as usize >= self.width || blob.center.1 as usize >= self.height {
                return Err(Error::InvalidSpec(format!(
                    "blob {i} center {:?} outside {}x{}",
                    blob.center, self.width, self.height
                )));
            }
            if !blob.radius_sigma.is_finite() || blob.radius_sigma <= 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "blob {i} radius_sigma must be positive"
                )));
            }
            for (what, v) in [("peak", blob.peak), ("depth", blob.depth)] {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidSpec(format!(
                        "blob {i} {what} {v} outside [0, 1]"
                    )));
                }
            }
        }
        for (what, indices) in [
            ("rgb_active_blobs", &self.rgb_active_blobs),
            ("depth_active_blobs", &self.depth_active_blobs),
        ] {
            if let Some(&bad) = indices.iter().find(|&&i| i >= self.blobs.len()) {
                return Err(Error::InvalidSpec(format!(
                    "{what} references blob {bad} but only {} exist",
                    self.blobs.len()
                )));
            }
        }
        if !self.noise_amplitude.is_finite() || !(0.0..=1.0).contains(&self.noise_amplitude) {
            return Err(Error::InvalidSpec(format!(
                "noise_amplitude {} outside [0, 1]",
                self.noise_amplitude
            )));
        }
        if let Some(t) = self.target_blob {
            if t >= self.blobs.len() {
                return Err(Error::InvalidSpec(format!(
                    "target_blob {t} but only {} blobs exist",
                    self.blobs.len()
                )));
            }
            if self.blobs[t].peak <= 0.5 {
                return Err(Error::InvalidSpec(format!(
                    "target blob {t} peaks at {} and never exceeds the 0.5 \
                     ground-truth level",
                    self.blobs[t].peak
                )));
            }
        }
        Ok(())
    }
}

/// Jet-style encoding of a scalar activation.
#[inline]
pub fn jet(a: f64) -> [f64; 3] {
    [a, 1.0 - (2.0 * a - 1.0).abs(), 1.0 - a]
}

fn bump(blob: &BlobSpec, x: usize, y: usize) -> f64 {
    let dx = x as f64 - f64::from(blob.center.0);
    let dy = y as f64 - f64::from(blob.center.1);
    blob.peak * (-(dx * dx + dy * dy) / (2.0 * blob.radius_sigma * blob.radius_sigma)).exp()
}

fn activation_field(spec: &SynthSpec, active: &[usize], x: usize, y: usize) -> f64 {
    active
        .iter()
        .map(|&i| bump(&spec.blobs[i], x, y))
        .fold(0.0, f64::max)
}

/// Generate the deterministic scene a spec describes. Noise draws come from
/// a ChaCha stream seeded with `spec.seed`, consumed pixel by pixel in
/// row-major order, channels r, g, b, for the RGB heatmap first and the
/// depth heatmap second. The depth map and ground truth are noise-free.
pub fn generate(spec: &SynthSpec) -> Result<Scene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let amp = spec.noise_amplitude;

    let noisy_heatmap = |active: &[usize], rng: &mut ChaCha8Rng| -> Result<ActivationHeatmap> {
        let mut pixels = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let mut px = jet(activation_field(spec, active, x, y));
                for v in &mut px {
                    let noise = amp * (2.0 * rng.gen::<f64>() - 1.0);
                    *v = (*v + noise).clamp(0.0, 1.0);
                }
                pixels.push(px);
            }
        }
        ActivationHeatmap::new(w, h, pixels)
    };

    let rgb_heatmap = noisy_heatmap(&spec.rgb_active_blobs, &mut rng)?;
    let depth_heatmap = noisy_heatmap(&spec.depth_active_blobs, &mut rng)?;

    // Each pixel takes the depth of its nearest blob when it sits within
    // three sigmas of that blob's center; background depth is 1 (farthest).
    let depth_map = DepthMap::from_fn(w, h, |x, y| {
        let mut best: Option<(f64, &BlobSpec)> = None;
        for blob in &spec.blobs {
            let dx = x as f64 - f64::from(blob.center.0);
            let dy = y as f64 - f64::from(blob.center.1);
            let dist_sq = dx * dx + dy * dy;
            if best.map(|(d, _)| dist_sq < d).unwrap_or(true) {
                best = Some((dist_sq, blob));
            }
        }
        match best {
            Some((dist_sq, blob)) if dist_sq <= (3.0 * blob.radius_sigma).powi(2) => blob.depth,
            _ => 1.0,
        }
    })?;

    let ground_truth = match spec.target_blob {
        Some(t) => {
            let blob = &spec.blobs[t];
            BoundingBox::covering((0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter_map(
                |(x, y)| {
                    if bump(blob, x, y) > 0.5 {
                        Some((x as u32, y as u32))
                    } else {
                        None
                    }
                },
            ))
            .expect("validated target peak exceeds 0.5 at its center")
        }
        None => BoundingBox::new(0, 0, 0, 0).expect("unit box"),
    };

    Scene::new(
        spec.id.clone().unwrap_or_else(|| format!("synth-{}", spec.seed)),
        rgb_heatmap,
        depth_heatmap,
        depth_map,
        spec.expression
            .clone()
            .unwrap_or_else(|| "the synthetic target blob".into()),
        ground_truth,
        spec.category.unwrap_or(Category::Easy),
    )
}

/// Two identical blobs side by side; the RGB heatmap activates both, the
/// depth heatmap only the target, so only depth can tell them apart. The
/// seed drives the placement jitter and which side holds the target.
pub fn depth_critical_preset(seed: u64) -> SynthSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cx: i64 = 160 + rng.gen_range(-12i64..=12);
    let cy: i64 = 120 + rng.gen_range(-12i64..=12);
    let separation: i64 = 96 + rng.gen_range(0i64..=16);
    let target_is_left = rng.gen::<bool>();

    let sigma = 22.0;
    let peak = 0.98;
    let make = |x: i64, depth: f64| BlobSpec {
        center: (x as u32, cy as u32),
        radius_sigma: sigma,
        peak,
        depth,
    };
    let target = usize::from(!target_is_left);
    let (left_depth, right_depth) = if target_is_left {
        (0.3, 0.55)
    } else {
        (0.55, 0.3)
    };

    SynthSpec {
        width: 320,
        height: 240,
        blobs: vec![
            make(cx - separation / 2, left_depth),
            make(cx + separation / 2, right_depth),
        ],
        rgb_active_blobs: vec![0, 1],
        depth_active_blobs: vec![target],
        target_blob: Some(target),
        noise_amplitude: 0.0,
        seed,
        id: Some(format!("depth-critical-{seed:04}")),
        expression: Some("the blob nearer the camera".into()),
        category: Some(Category::Difficult),
    }
}

const STROKE_RED: [u8; 3] = [255, 0, 0];
const STROKE_GREEN: [u8; 3] = [0, 255, 0];

fn stroke(rgb: &mut [u8], width: usize, bbox: &BoundingBox, color: [u8; 3]) {
    let (x0, y0) = (bbox.x_min() as usize, bbox.y_min() as usize);
    let (x1, y1) = (bbox.x_max() as usize, bbox.y_max() as usize);
    let mut paint = |x: usize, y: usize| {
        let base = (y * width + x) * 3;
        rgb[base..base + 3].copy_from_slice(&color);
    };
    for x in x0..=x1 {
        paint(x, y0);
        paint(x, y1);
    }
    for y in y0..=y1 {
        paint(x0, y);
        paint(x1, y);
    }
}

/// Render the working heatmap with the ground truth outlined in red and the
/// candidates in green (1-pixel strokes, rank 1 painted last) to a binary
/// PPM. RGB-D proposals draw over the fused heatmap, RGB proposals over the
/// scene's RGB heatmap.
pub fn render_overlay(scene: &Scene, proposals: &ProposalSet, path: &Path) -> Result<()> {
    if proposals.scene_id != scene.id {
        return Err(Error::SceneMismatch {
            scene: scene.id.clone(),
            proposals: proposals.scene_id.clone(),
        });
    }
    let base = match proposals.mode {
        Mode::Rgbd => intersect(
            &scene.rgb_heatmap,
            &scene.depth_heatmap,
            &FusionConfig::default(),
        )?,
        Mode::Rgb => scene.rgb_heatmap.clone(),
    };
    let mut rgb = quantize_rgb8(&base);
    stroke(&mut rgb, base.width(), &scene.ground_truth, STROKE_RED);
    for proposal in proposals.proposals.iter().rev() {
        stroke(&mut rgb, base.width(), &proposal.bbox, STROKE_GREEN);
    }
    write_ppm_bytes(base.width(), base.height(), &rgb, path)
}
