//! From a fused heatmap to ranked bounding-box proposals.
//!
//! The working heatmap is smoothed with a Gaussian filter, every pixel gets
//! a feature vector (position, depth, channel intensities; inactive pixels
//! get zeros), K-means groups the pixels, spatially disconnected parts of a
//! group become separate clusters, small and background clusters are
//! dropped, and the survivors are scored by their weighted red/green
//! intensity, ranked and boxed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{intersect, FusionConfig};
use crate::kmeans::{kmeans, KmeansParams};
use crate::scene::{ActivationHeatmap, BoundingBox, Cluster, DepthMap, FeatureGrid, Mode, Scene};
use crate::segmentation::{count_regions, label_active, RegionCountConfig};

/// Channel pair tested when deciding whether a smoothed pixel is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityChannels {
    /// Red or green above the threshold (default; blue marks inactivity).
    RedGreen,
    /// Red or blue above the threshold. With a jet-style encoding this
    /// marks the entire background active; kept for comparison runs.
    RedBlue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    /// Gaussian filter size in pixels; odd.
    pub kernel_size: usize,
    pub kernel_sigma: f64,
    /// Activity threshold on the smoothed heatmap, strict inequality.
    pub post_smooth_active_threshold: f64,
    pub activity_channels: ActivityChannels,
    /// Clusters with strictly fewer pixels than this are discarded.
    pub min_cluster_area: usize,
    /// Red-channel weight in the cluster activation score.
    pub w_r: f64,
    /// Green-channel weight; `w_r + w_g` must equal 1.
    pub w_g: f64,
    pub kmeans_seed: u64,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
    pub mode: Mode,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            kernel_size: 11,
            kernel_sigma: 2.0,
            post_smooth_active_threshold: 0.5,
            activity_channels: ActivityChannels::RedGreen,
            min_cluster_area: 150,
            w_r: 0.7,
            w_g: 0.3,
            kmeans_seed: 42,
            kmeans_max_iters: 300,
            kmeans_tol: 1e-4,
            mode: Mode::Rgbd,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidKernel(self.kernel_size));
        }
        if !self.kernel_sigma.is_finite() || self.kernel_sigma <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "kernel_sigma must be positive, got {}",
                self.kernel_sigma
            )));
        }
        if !self.post_smooth_active_threshold.is_finite()
            || !(0.0..=1.0).contains(&self.post_smooth_active_threshold)
        {
            return Err(Error::OutOfRange {
                what: "post_smooth_active_threshold".into(),
                value: self.post_smooth_active_threshold,
            });
        }
        if self.min_cluster_area == 0 {
            return Err(Error::InvalidConfig(
                "min_cluster_area must be >= 1".into(),
            ));
        }
        if self.w_r < 0.0 || self.w_g < 0.0 || (self.w_r + self.w_g - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "channel weights must be non-negative and sum to 1, got w_r={} w_g={}",
                self.w_r, self.w_g
            )));
        }
        Ok(())
    }

    fn kmeans_params(&self) -> KmeansParams {
        KmeansParams {
            seed: self.kmeans_seed,
            max_iters: self.kmeans_max_iters,
            tol: self.kmeans_tol,
        }
    }
}

/// One ranked candidate region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionProposal {
    /// 1-based rank, 1 being the strongest candidate.
    pub rank: u32,
    pub bbox: BoundingBox,
    /// Weighted mean red/green intensity over the cluster, in [0, 1].
    pub activation: f64,
    pub pixel_count: usize,
}

/// Ranked candidate regions for one scene and mode, strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSet {
    pub scene_id: String,
    pub mode: Mode,
    pub proposals: Vec<RegionProposal>,
}

impl ProposalSet {
    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }
}

/// Symmetric boundary reflection: index -1 maps back to 0, index n to n-1.
#[inline]
fn reflect(idx: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = idx;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

fn gaussian_kernel_1d(size: usize, sigma: f64) -> Vec<f64> {
    let radius = (size / 2) as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= sum;
    }
    kernel
}

/// Convolve each channel with a normalized 2-D Gaussian (size x size,
/// standard deviation `kernel_sigma`), reflecting at the borders. The 2-D
/// kernel factors exactly into two normalized 1-D passes. Output channels
/// are clamped to [0, 1].
pub fn gaussian_smooth(
    heatmap: &ActivationHeatmap,
    cfg: &ClusteringConfig,
) -> Result<ActivationHeatmap> {
    if cfg.kernel_size == 0 || cfg.kernel_size.is_multiple_of(2) {
        return Err(Error::InvalidKernel(cfg.kernel_size));
    }
    let (w, h) = (heatmap.width(), heatmap.height());
    let kernel = gaussian_kernel_1d(cfg.kernel_size, cfg.kernel_sigma);
    let radius = (cfg.kernel_size / 2) as isize;

    // Horizontal pass.
    let mut tmp = vec![[0.0f64; 3]; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for (t, &weight) in kernel.iter().enumerate() {
                let sx = reflect(x as isize + t as isize - radius, w);
                let px = heatmap.pixel(sx, y);
                for c in 0..3 {
                    acc[c] += weight * px[c];
                }
            }
            tmp[y * w + x] = acc;
        }
    }

    // Vertical pass, clamping away any floating-point overshoot.
    let mut out = vec![[0.0f64; 3]; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for (t, &weight) in kernel.iter().enumerate() {
                let sy = reflect(y as isize + t as isize - radius, h);
                let px = tmp[sy * w + x];
                for c in 0..3 {
                    acc[c] += weight * px[c];
                }
            }
            for v in &mut acc {
                *v = v.clamp(0.0, 1.0);
            }
            out[y * w + x] = acc;
        }
    }
    ActivationHeatmap::new(w, h, out)
}

#[inline]
fn smoothed_pixel_active(px: [f64; 3], cfg: &ClusteringConfig) -> bool {
    let second = match cfg.activity_channels {
        ActivityChannels::RedGreen => px[1],
        ActivityChannels::RedBlue => px[2],
    };
    px[0].max(second) > cfg.post_smooth_active_threshold
}

/// Build per-pixel feature vectors from the smoothed heatmap.
///
/// Active pixels get (x, y, depth, r, g, b) with x scaled by width-1 and y
/// by height-1 so corner pixels reach exactly 1; inactive pixels get the
/// all-zeros vector. RGB mode drops the depth component.
pub fn extract_features(
    h_s: &ActivationHeatmap,
    depth: &DepthMap,
    cfg: &ClusteringConfig,
) -> Result<FeatureGrid> {
    let (w, h) = (h_s.width(), h_s.height());
    if cfg.mode == Mode::Rgbd && (depth.width() != w || depth.height() != h) {
        return Err(Error::DimensionMismatch {
            what: "depth map for feature extraction",
            expected_width: w,
            expected_height: h,
            actual_width: depth.width(),
            actual_height: depth.height(),
        });
    }
    let dim = match cfg.mode {
        Mode::Rgbd => 6,
        Mode::Rgb => 5,
    };
    // Direct division keeps corner pixels at exactly 1; single-column or
    // single-row grids normalize their coordinate to 0.
    let x_denom = if w > 1 { (w - 1) as f64 } else { f64::INFINITY };
    let y_denom = if h > 1 { (h - 1) as f64 } else { f64::INFINITY };

    let mut data = vec![0.0f64; w * h * dim];
    for y in 0..h {
        for x in 0..w {
            let px = h_s.pixel(x, y);
            if !smoothed_pixel_active(px, cfg) {
                continue;
            }
            let base = (y * w + x) * dim;
            data[base] = x as f64 / x_denom;
            data[base + 1] = y as f64 / y_denom;
            match cfg.mode {
                Mode::Rgbd => {
                    data[base + 2] = depth.value(x, y);
                    data[base + 3] = px[0];
                    data[base + 4] = px[1];
                    data[base + 5] = px[2];
                }
                Mode::Rgb => {
                    data[base + 2] = px[0];
                    data[base + 3] = px[1];
                    data[base + 4] = px[2];
                }
            }
        }
    }
    Ok(FeatureGrid::from_raw(w, h, dim, data))
}

const EIGHT_NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Split each K-means cluster into its 8-connected components, then drop
/// components smaller than `min_cluster_area` and components made entirely
/// of all-zeros feature vectors (the background). The result can hold more
/// or fewer clusters than K-means produced.
pub fn refine_clusters(
    assignments: &[u32],
    features: &FeatureGrid,
    cfg: &ClusteringConfig,
) -> Vec<Cluster> {
    let (w, h) = (features.width(), features.height());
    debug_assert_eq!(assignments.len(), w * h);

    let mut visited = vec![false; w * h];
    let mut clusters = Vec::new();
    let mut frontier = Vec::new();

    for start in 0..w * h {
        if visited[start] {
            continue;
        }
        let label = assignments[start];
        let mut pixels = Vec::new();
        let mut any_nonzero = false;
        visited[start] = true;
        frontier.push(start);
        while let Some(idx) = frontier.pop() {
            pixels.push(idx);
            any_nonzero |= !features.is_zero(idx);
            let x = (idx % w) as isize;
            let y = (idx / w) as isize;
            for (dx, dy) in EIGHT_NEIGHBORS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if !visited[nidx] && assignments[nidx] == label {
                    visited[nidx] = true;
                    frontier.push(nidx);
                }
            }
        }
        if !any_nonzero || pixels.len() < cfg.min_cluster_area {
            continue;
        }
        pixels.sort_unstable();
        let bbox = BoundingBox::covering(
            pixels.iter().map(|&i| ((i % w) as u32, (i / w) as u32)),
        )
        .expect("component is non-empty");
        clusters.push(Cluster {
            pixels,
            activation: 0.0,
            bbox,
        });
    }
    clusters
}

/// Score each cluster as the mean of `w_r * red + w_g * green` over its
/// pixels, with intensities read from the unsmoothed working heatmap.
pub fn score_clusters(
    mut clusters: Vec<Cluster>,
    h_int: &ActivationHeatmap,
    cfg: &ClusteringConfig,
) -> Vec<Cluster> {
    for cluster in &mut clusters {
        let sum: f64 = cluster
            .pixels
            .iter()
            .map(|&idx| {
                let px = h_int.pixels()[idx];
                cfg.w_r * px[0] + cfg.w_g * px[1]
            })
            .sum();
        cluster.activation = sum / cluster.pixels.len() as f64;
    }
    clusters
}

/// Sort clusters by activation (descending), breaking ties toward the
/// larger cluster and then the one appearing first in row-major order, and
/// map each to its minimal covering box with ranks 1..k.
pub fn rank_and_box(mut clusters: Vec<Cluster>, scene_id: String, mode: Mode) -> ProposalSet {
    clusters.sort_by(|a, b| {
        b.activation
            .total_cmp(&a.activation)
            .then_with(|| b.pixels.len().cmp(&a.pixels.len()))
            .then_with(|| a.pixels[0].cmp(&b.pixels[0]))
    });
    let proposals = clusters
        .iter()
        .enumerate()
        .map(|(i, c)| RegionProposal {
            rank: (i + 1) as u32,
            bbox: c.bbox,
            activation: c.activation,
            pixel_count: c.pixels.len(),
        })
        .collect();
    ProposalSet {
        scene_id,
        mode,
        proposals,
    }
}

/// Run the full proposal pipeline on one scene.
///
/// RGB-D mode fuses the two heatmaps first; RGB mode skips fusion, works
/// directly on the scene's RGB heatmap and uses 5-component features. The
/// result can be empty when no cluster survives filtering.
pub fn propose(
    scene: &Scene,
    fusion_cfg: &FusionConfig,
    region_cfg: &RegionCountConfig,
    cluster_cfg: &ClusteringConfig,
) -> Result<ProposalSet> {
    scene.validate()?;
    fusion_cfg.validate()?;
    region_cfg.validate()?;
    cluster_cfg.validate()?;

    let working = match cluster_cfg.mode {
        Mode::Rgbd => intersect(&scene.rgb_heatmap, &scene.depth_heatmap, fusion_cfg)?,
        Mode::Rgb => scene.rgb_heatmap.clone(),
    };

    let mask = label_active(&working, region_cfg);
    let n = count_regions(&mask, region_cfg);

    let smoothed = gaussian_smooth(&working, cluster_cfg)?;
    let features = extract_features(&smoothed, &scene.depth_map, cluster_cfg)?;
    let outcome = kmeans(
        features.data(),
        features.dim(),
        n,
        &cluster_cfg.kmeans_params(),
    );
    let clusters = refine_clusters(&outcome.assignments, &features, cluster_cfg);
    let clusters = score_clusters(clusters, &working, cluster_cfg);
    Ok(rank_and_box(clusters, scene.id.clone(), cluster_cfg.mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cluster_of(pixels: Vec<usize>, width: usize) -> Cluster {
        let bbox = BoundingBox::covering(
            pixels.iter().map(|&i| ((i % width) as u32, (i / width) as u32)),
        )
        .unwrap();
        Cluster {
            pixels,
            activation: 0.0,
            bbox,
        }
    }

    #[test]
    fn smoothing_preserves_constant_heatmaps() {
        let h = ActivationHeatmap::from_fn(16, 12, |_, _| [0.4, 0.2, 0.1]).unwrap();
        let smoothed = gaussian_smooth(&h, &ClusteringConfig::default()).unwrap();
        for px in smoothed.pixels() {
            assert_abs_diff_eq!(px[0], 0.4, epsilon = 1e-12);
            assert_abs_diff_eq!(px[1], 0.2, epsilon = 1e-12);
            assert_abs_diff_eq!(px[2], 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn even_kernel_size_is_rejected() {
        let h = ActivationHeatmap::from_fn(8, 8, |_, _| [0.0; 3]).unwrap();
        let cfg = ClusteringConfig {
            kernel_size: 10,
            ..ClusteringConfig::default()
        };
        assert!(matches!(
            gaussian_smooth(&h, &cfg),
            Err(Error::InvalidKernel(10))
        ));
    }

    #[test]
    fn impulse_center_matches_kernel_weight_and_mass_is_preserved() {
        let mut pixels = vec![[0.0; 3]; 21 * 21];
        pixels[10 * 21 + 10] = [1.0, 0.0, 0.0];
        let h = ActivationHeatmap::new(21, 21, pixels).unwrap();
        let cfg = ClusteringConfig::default();
        let smoothed = gaussian_smooth(&h, &cfg).unwrap();

        // Center weight of the normalized 11x11 sigma-2 kernel, computed
        // directly from the definition.
        let mut total = 0.0;
        for i in -5i32..=5 {
            for j in -5i32..=5 {
                total += (-f64::from(i * i + j * j) / 8.0).exp();
            }
        }
        let center_weight = 1.0 / total;
        assert_abs_diff_eq!(smoothed.pixel(10, 10)[0], center_weight, epsilon = 1e-12);

        // The kernel support stays away from all borders, so the unit mass
        // is preserved.
        let mass: f64 = smoothed.pixels().iter().map(|px| px[0]).sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn features_follow_the_activity_rule() {
        let h_s = ActivationHeatmap::new(
            2,
            1,
            vec![[0.8, 0.3, 0.1], [0.2, 0.2, 0.9]],
        )
        .unwrap();
        let depth = DepthMap::new(2, 1, vec![0.5, 0.5]).unwrap();
        let cfg = ClusteringConfig::default();
        let grid = extract_features(&h_s, &depth, &cfg).unwrap();
        assert_eq!(grid.dim(), 6);
        assert_eq!(grid.feature(0), &[0.0, 0.0, 0.5, 0.8, 0.3, 0.1]);
        assert_eq!(grid.feature(1), &[0.0; 6]);
        assert!(grid.is_zero(1));
    }

    #[test]
    fn corner_pixels_normalize_to_one() {
        let h_s = ActivationHeatmap::from_fn(100, 50, |_, _| [0.8, 0.3, 0.1]).unwrap();
        let depth = DepthMap::from_fn(100, 50, |_, _| 0.25).unwrap();
        let grid = extract_features(&h_s, &depth, &ClusteringConfig::default()).unwrap();
        let corner = grid.feature(50 * 100 - 1);
        assert_eq!(corner[0], 1.0);
        assert_eq!(corner[1], 1.0);
    }

    #[test]
    fn rgb_mode_features_drop_depth() {
        let h_s = ActivationHeatmap::new(1, 1, vec![[0.8, 0.3, 0.1]]).unwrap();
        let depth = DepthMap::new(1, 1, vec![0.5]).unwrap();
        let cfg = ClusteringConfig {
            mode: Mode::Rgb,
            ..ClusteringConfig::default()
        };
        let grid = extract_features(&h_s, &depth, &cfg).unwrap();
        assert_eq!(grid.dim(), 5);
        assert_eq!(grid.feature(0), &[0.0, 0.0, 0.8, 0.3, 0.1]);
    }

    #[test]
    fn literal_red_blue_activity_marks_background_active() {
        let h_s = ActivationHeatmap::new(1, 1, vec![[0.0, 0.0, 1.0]]).unwrap();
        let depth = DepthMap::new(1, 1, vec![0.5]).unwrap();
        let cfg = ClusteringConfig {
            activity_channels: ActivityChannels::RedBlue,
            ..ClusteringConfig::default()
        };
        let grid = extract_features(&h_s, &depth, &cfg).unwrap();
        assert!(!grid.is_zero(0));
    }

    #[test]
    fn disconnected_cluster_parts_split() {
        // One K-means label containing two separate 3x3 blobs on a 16x8
        // grid; everything else belongs to label 1 with zero features.
        let (w, h) = (16, 8);
        let mut assignments = vec![1u32; w * h];
        let mut data = vec![0.0f64; w * h * 6];
        let mut paint = |x0: usize| {
            for y in 2..5 {
                for x in x0..x0 + 3 {
                    assignments[y * w + x] = 0;
                    data[(y * w + x) * 6 + 3] = 0.9;
                }
            }
        };
        paint(1);
        paint(10);
        let features = FeatureGrid::from_raw(w, h, 6, data);
        let cfg = ClusteringConfig {
            min_cluster_area: 5,
            ..ClusteringConfig::default()
        };
        let clusters = refine_clusters(&assignments, &features, &cfg);
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].pixels.len(), 9);
        assert_eq!(<[u32; 4]>::from(clusters[0].bbox), [1, 2, 3, 4]);
        assert_eq!(<[u32; 4]>::from(clusters[1].bbox), [10, 2, 12, 4]);
    }

    #[test]
    fn undersized_components_are_dropped() {
        let (w, h) = (20, 20);
        let mut assignments = vec![1u32; w * h];
        let mut data = vec![0.0f64; w * h * 6];
        // A 149-pixel strip assigned to label 0.
        for i in 0..149 {
            let (x, y) = (i % w, i / w);
            assignments[y * w + x] = 0;
            data[(y * w + x) * 6 + 3] = 0.9;
        }
        let features = FeatureGrid::from_raw(w, h, 6, data);
        let clusters = refine_clusters(&assignments, &features, &ClusteringConfig::default());
        assert!(clusters.is_empty());
    }

    #[test]
    fn background_cluster_is_dropped() {
        // A large all-zero-feature region is discarded no matter its size.
        let (w, h) = (100, 100);
        let assignments = vec![0u32; w * h];
        let features = FeatureGrid::from_raw(w, h, 6, vec![0.0; w * h * 6]);
        let clusters = refine_clusters(&assignments, &features, &ClusteringConfig::default());
        assert!(clusters.is_empty());
    }

    #[test]
    fn scoring_follows_the_channel_weights() {
        let cfg = ClusteringConfig::default();
        let h = ActivationHeatmap::new(
            2,
            2,
            vec![
                [1.0, 1.0, 0.0],
                [1.0, 1.0, 0.0],
                [0.5, 0.5, 0.2],
                [1.0, 0.0, 0.0],
            ],
        )
        .unwrap();
        let scored = score_clusters(
            vec![
                cluster_of(vec![0, 1], 2),
                cluster_of(vec![2], 2),
                cluster_of(vec![3], 2),
            ],
            &h,
            &cfg,
        );
        assert_abs_diff_eq!(scored[0].activation, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(scored[1].activation, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(scored[2].activation, 0.7, epsilon = 1e-12);

        // Two pixels with complementary channels average to 0.5.
        let h2 = ActivationHeatmap::new(
            2,
            1,
            vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        )
        .unwrap();
        let scored = score_clusters(vec![cluster_of(vec![0, 1], 2)], &h2, &cfg);
        assert_abs_diff_eq!(scored[0].activation, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ranking_orders_by_activation() {
        let mut clusters = vec![
            cluster_of(vec![0], 10),
            cluster_of(vec![5], 10),
            cluster_of(vec![9], 10),
        ];
        clusters[0].activation = 0.3;
        clusters[1].activation = 0.9;
        clusters[2].activation = 0.6;
        let set = rank_and_box(clusters, "s".into(), Mode::Rgbd);
        let activations: Vec<f64> = set.proposals.iter().map(|p| p.activation).collect();
        assert_eq!(activations, vec![0.9, 0.6, 0.3]);
        let ranks: Vec<u32> = set.proposals.iter().map(|p| p.rank).collect();
        assert_eq!(ranks, vec![1, 2, 3]);
    }

    #[test]
    fn equal_activation_breaks_toward_the_larger_cluster() {
        let mut big = cluster_of((0..300).collect(), 30);
        let mut small = cluster_of((300..500).collect(), 30);
        big.activation = 0.5;
        small.activation = 0.5;
        let set = rank_and_box(vec![small, big], "s".into(), Mode::Rgbd);
        assert_eq!(set.proposals[0].pixel_count, 300);
        assert_eq!(set.proposals[1].pixel_count, 200);
    }

    #[test]
    fn minimal_box_covers_sparse_pixels() {
        let set = rank_and_box(
            vec![cluster_of(vec![3 * 10 + 2, 7 * 10 + 4], 10)],
            "s".into(),
            Mode::Rgbd,
        );
        assert_eq!(<[u32; 4]>::from(set.proposals[0].bbox), [2, 3, 4, 7]);
    }

    #[test]
    fn pipeline_output_upholds_the_proposal_invariants() {
        use crate::fusion::FusionConfig;
        use crate::segmentation::RegionCountConfig;
        use crate::synth::{depth_critical_preset, generate};

        // RGB mode on a depth-critical scene produces several clusters per
        // blob, a good stress case for the ordering rules.
        let mut spec = depth_critical_preset(13);
        spec.noise_amplitude = 0.02;
        let scene = generate(&spec).unwrap();
        let cfg = ClusteringConfig {
            mode: Mode::Rgb,
            ..ClusteringConfig::default()
        };
        let set = propose(
            &scene,
            &FusionConfig::default(),
            &RegionCountConfig::default(),
            &cfg,
        )
        .unwrap();
        assert!(set.proposals.len() >= 2);

        for (i, p) in set.proposals.iter().enumerate() {
            assert_eq!(p.rank, (i + 1) as u32, "ranks must be 1..k with no gaps");
            assert!((0.0..=1.0).contains(&p.activation));
            assert!(p.pixel_count >= cfg.min_cluster_area);
            assert!(p.bbox.fits_within(scene.width(), scene.height()));
        }
        for pair in set.proposals.windows(2) {
            assert!(pair[0].activation >= pair[1].activation);
        }

        // Identical inputs give identical output.
        let again = propose(
            &scene,
            &FusionConfig::default(),
            &RegionCountConfig::default(),
            &cfg,
        )
        .unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn refined_cluster_boxes_are_minimal() {
        use crate::segmentation::RegionCountConfig;
        use crate::synth::{depth_critical_preset, generate};
        use crate::segmentation::{count_regions, label_active};

        let scene = generate(&depth_critical_preset(4)).unwrap();
        let cfg = ClusteringConfig {
            mode: Mode::Rgb,
            ..ClusteringConfig::default()
        };
        let region_cfg = RegionCountConfig::default();
        let working = scene.rgb_heatmap.clone();
        let n = count_regions(&label_active(&working, &region_cfg), &region_cfg);
        let smoothed = gaussian_smooth(&working, &cfg).unwrap();
        let features = extract_features(&smoothed, &scene.depth_map, &cfg).unwrap();
        let outcome = kmeans(features.data(), features.dim(), n, &KmeansParams::default());
        let clusters = refine_clusters(&outcome.assignments, &features, &cfg);
        assert!(!clusters.is_empty());

        let w = features.width() as u32;
        for cluster in &clusters {
            let xs: Vec<u32> = cluster.pixels.iter().map(|&i| i as u32 % w).collect();
            let ys: Vec<u32> = cluster.pixels.iter().map(|&i| i as u32 / w).collect();
            // Shrinking any side would drop the pixel touching it.
            assert!(xs.contains(&cluster.bbox.x_min()));
            assert!(xs.contains(&cluster.bbox.x_max()));
            assert!(ys.contains(&cluster.bbox.y_min()));
            assert!(ys.contains(&cluster.bbox.y_max()));
        }
    }
}
