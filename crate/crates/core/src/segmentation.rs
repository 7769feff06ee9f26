//! Binary activity labeling and connected-region counting.
//!
//! The number of well-sized connected high-activation regions (plus one for
//! the background) becomes the cluster count handed to K-means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::ActivationHeatmap;

/// Neighborhood used when growing regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    /// N, S, E, W neighbors only.
    Four,
    /// All eight neighbors, diagonals included.
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        }
    }
}

/// Row-major grid of {0, 1} labels, 1 marking high-activation pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "binary mask label buffer",
                expected_width: width,
                expected_height: height,
                actual_width: labels.len(),
                actual_height: 1,
            });
        }
        if let Some(bad) = labels.iter().find(|&&v| v > 1) {
            return Err(Error::OutOfRange {
                what: "binary mask label".into(),
                value: f64::from(*bad),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionCountConfig {
    /// A pixel is high-activity when red or green is strictly above this.
    pub high_activity_threshold: f64,
    /// Regions with strictly fewer pixels than this are discarded.
    pub min_region_area: usize,
    /// Count the background as one extra region.
    pub count_background: bool,
    /// Neighborhood for region growing. The default follows the ridge-safe
    /// choice; four-connectivity is available for comparison runs.
    pub connectivity: Connectivity,
}

impl Default for RegionCountConfig {
    fn default() -> Self {
        Self {
            high_activity_threshold: 0.9,
            min_region_area: 150,
            count_background: true,
            connectivity: Connectivity::Eight,
        }
    }
}

impl RegionCountConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.high_activity_threshold.is_finite()
            || !(0.0..=1.0).contains(&self.high_activity_threshold)
        {
            return Err(Error::OutOfRange {
                what: "high_activity_threshold".into(),
                value: self.high_activity_threshold,
            });
        }
        if self.min_region_area == 0 {
            return Err(Error::InvalidConfig(
                "min_region_area must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Label each pixel active (1) when red or green is strictly above the
/// high-activity threshold, inactive (0) otherwise.
pub fn label_active(heatmap: &ActivationHeatmap, cfg: &RegionCountConfig) -> BinaryMask {
    let labels = heatmap
        .pixels()
        .iter()
        .map(|px| u8::from(px[0].max(px[1]) > cfg.high_activity_threshold))
        .collect();
    BinaryMask {
        width: heatmap.width(),
        height: heatmap.height(),
        labels,
    }
}

/// Partition the 1-labeled pixels into maximal connected components.
///
/// Components are listed by their smallest row-major pixel index, and each
/// component's indices come back sorted ascending, so the partition is
/// deterministic and independent of traversal order.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Vec<usize>> {
    let (w, h) = (mask.width, mask.height);
    let offsets = connectivity.offsets();
    let mut visited = vec![false; w * h];
    let mut components = Vec::new();
    let mut frontier = Vec::new();

    for start in 0..w * h {
        if mask.labels[start] == 0 || visited[start] {
            continue;
        }
        let mut component = Vec::new();
        visited[start] = true;
        frontier.push(start);
        while let Some(idx) = frontier.pop() {
            component.push(idx);
            let x = (idx % w) as isize;
            let y = (idx / w) as isize;
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if mask.labels[nidx] == 1 && !visited[nidx] {
                    visited[nidx] = true;
                    frontier.push(nidx);
                }
            }
        }
        component.sort_unstable();
        components.push(component);
    }
    components
}

/// Number of clusters to request from K-means: the count of connected
/// regions at least `min_region_area` pixels large, plus one for the
/// background when enabled. Never less than 1.
pub fn count_regions(mask: &BinaryMask, cfg: &RegionCountConfig) -> usize {
    let surviving = connected_components(mask, cfg.connectivity)
        .iter()
        .filter(|c| c.len() >= cfg.min_region_area)
        .count();
    let n = surviving + usize::from(cfg.count_background);
    n.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_from(width: usize, height: usize, ones: &[(usize, usize)]) -> BinaryMask {
        let mut labels = vec![0u8; width * height];
        for &(x, y) in ones {
            labels[y * width + x] = 1;
        }
        BinaryMask::new(width, height, labels).unwrap()
    }

    #[test]
    fn labeling_thresholds_red_or_green() {
        let h = ActivationHeatmap::new(
            3,
            1,
            vec![[0.95, 0.10, 0.0], [0.50, 0.50, 0.0], [0.0, 0.0, 1.0]],
        )
        .unwrap();
        let mask = label_active(&h, &RegionCountConfig::default());
        assert_eq!(mask.labels(), &[1, 0, 0]);
    }

    #[test]
    fn empty_mask_has_no_components() {
        let mask = mask_from(10, 10, &[]);
        assert!(connected_components(&mask, Connectivity::Eight).is_empty());
    }

    #[test]
    fn diagonal_pixels_connect_under_eight_but_not_four() {
        let mask = mask_from(4, 4, &[(0, 0), (1, 1)]);
        let eight = connected_components(&mask, Connectivity::Eight);
        assert_eq!(eight.len(), 1);
        assert_eq!(eight[0], vec![0, 5]);
        let four = connected_components(&mask, Connectivity::Four);
        assert_eq!(four.len(), 2);
    }

    #[test]
    fn count_regions_background_only() {
        let mask = mask_from(32, 32, &[]);
        assert_eq!(count_regions(&mask, &RegionCountConfig::default()), 1);
    }

    #[test]
    fn count_regions_two_blobs_plus_background() {
        // Two disjoint 200-pixel blobs (20x10 rectangles).
        let mut ones = Vec::new();
        for y in 0..10 {
            for x in 0..20 {
                ones.push((x, y));
                ones.push((x + 40, y + 20));
            }
        }
        let mask = mask_from(64, 64, &ones);
        assert_eq!(count_regions(&mask, &RegionCountConfig::default()), 3);
    }

    #[test]
    fn small_blob_is_discarded() {
        // A 100-pixel blob falls below the 150-pixel minimum.
        let mut ones = Vec::new();
        for y in 0..10 {
            for x in 0..10 {
                ones.push((x, y));
            }
        }
        let mask = mask_from(64, 64, &ones);
        assert_eq!(count_regions(&mask, &RegionCountConfig::default()), 1);
    }

    #[test]
    fn exact_minimum_area_survives() {
        let mut ones = Vec::new();
        for y in 0..10 {
            for x in 0..15 {
                ones.push((x, y));
            }
        }
        let mask = mask_from(64, 64, &ones);
        assert_eq!(count_regions(&mask, &RegionCountConfig::default()), 2);
    }

    #[test]
    fn no_background_counting_still_reports_at_least_one() {
        let mask = mask_from(8, 8, &[]);
        let cfg = RegionCountConfig {
            count_background: false,
            ..RegionCountConfig::default()
        };
        assert_eq!(count_regions(&mask, &cfg), 1);
    }

    proptest! {
        #[test]
        fn components_partition_the_foreground(
            labels in prop::collection::vec(0u8..=1, 16 * 16),
        ) {
            let mask = BinaryMask::new(16, 16, labels.clone()).unwrap();
            let comps = connected_components(&mask, Connectivity::Eight);
            let mut seen = vec![false; labels.len()];
            for comp in &comps {
                for &idx in comp {
                    prop_assert_eq!(labels[idx], 1);
                    prop_assert!(!seen[idx], "components must be disjoint");
                    seen[idx] = true;
                }
            }
            let covered = seen.iter().filter(|&&s| s).count();
            let foreground = labels.iter().filter(|&&v| v == 1).count();
            prop_assert_eq!(covered, foreground);
        }

        #[test]
        fn raising_min_area_never_increases_count(
            labels in prop::collection::vec(0u8..=1, 16 * 16),
            area_lo in 1usize..16,
            area_hi in 16usize..80,
        ) {
            let mask = BinaryMask::new(16, 16, labels).unwrap();
            let lo = RegionCountConfig { min_region_area: area_lo, ..RegionCountConfig::default() };
            let hi = RegionCountConfig { min_region_area: area_hi, ..RegionCountConfig::default() };
            prop_assert!(count_regions(&mask, &hi) <= count_regions(&mask, &lo));
        }
    }
}
