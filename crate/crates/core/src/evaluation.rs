//! Matching proposals against ground truth and aggregating the outcomes.
//!
//! A candidate matches when its distance-IoU score is strictly positive;
//! only the first three candidates are consulted. Outcomes per mode feed a
//! contingency table and a Pearson chi-squared statistic.

use serde::{Deserialize, Serialize};

use crate::clustering::ProposalSet;
use crate::error::{Error, Result};
use crate::io::ser_f64_vec_sig9;
use crate::scene::{BoundingBox, Category, Mode};

/// Which of the first three candidates matched the target, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchedRank {
    First,
    Second,
    Third,
    None,
}

pub const OUTCOME_LABELS: [&str; 4] = ["first", "second", "third", "none"];

impl MatchedRank {
    pub fn column(self) -> usize {
        match self {
            MatchedRank::First => 0,
            MatchedRank::Second => 1,
            MatchedRank::Third => 2,
            MatchedRank::None => 3,
        }
    }
}

/// Per-scene evaluation outcome. `scores` holds the matching scores of the
/// candidates examined, in rank order; examination stops at the first match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub scene_id: String,
    pub mode: Mode,
    pub category: Category,
    pub matched_rank: MatchedRank,
    #[serde(serialize_with = "ser_f64_vec_sig9")]
    pub scores: Vec<f64>,
}

/// Intersection over union under the inclusive-corner convention: a box's
/// area is (x_max - x_min + 1) * (y_max - y_min + 1). Exact integer areas
/// are divided only at the end. Returns 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix0 = a.x_min().max(b.x_min());
    let iy0 = a.y_min().max(b.y_min());
    let ix1 = a.x_max().min(b.x_max());
    let iy1 = a.y_max().min(b.y_max());
    if ix0 > ix1 || iy0 > iy1 {
        return 0.0;
    }
    let intersection =
        u64::from(ix1 - ix0 + 1) * u64::from(iy1 - iy0 + 1);
    let union = a.area() + b.area() - intersection;
    intersection as f64 / union as f64
}

/// Distance-IoU matching score: `IoU - rho^2 / c^2`, where `rho` is the
/// distance between box centers and `c` the diagonal of the smallest
/// enclosing box, measured between outer pixel edges so that single-pixel
/// boxes keep a nonzero diagonal. Ranges over (-1, 1]; 1 only for identical
/// boxes.
pub fn diou_matching_score(candidate: &BoundingBox, target: &BoundingBox) -> f64 {
    let overlap = iou(candidate, target);
    let (cx_a, cy_a) = candidate.center();
    let (cx_b, cy_b) = target.center();
    let rho_sq = (cx_a - cx_b).powi(2) + (cy_a - cy_b).powi(2);

    let ex = f64::from(candidate.x_max().max(target.x_max()) - candidate.x_min().min(target.x_min()) + 1);
    let ey = f64::from(candidate.y_max().max(target.y_max()) - candidate.y_min().min(target.y_min()) + 1);
    let c_sq = ex * ex + ey * ey;
    if c_sq == 0.0 {
        // Unreachable under the inclusive-extent convention; kept as the
        // documented resolution for a degenerate enclosure.
        return overlap;
    }
    overlap - rho_sq / c_sq
}

/// Walk the first three candidates in rank order and report the first one
/// whose matching score is strictly positive.
pub fn match_rank(
    proposals: &ProposalSet,
    target: &BoundingBox,
    category: Category,
) -> MatchReport {
    let mut scores = Vec::new();
    let mut matched = MatchedRank::None;
    for (i, proposal) in proposals.proposals.iter().take(3).enumerate() {
        let score = diou_matching_score(&proposal.bbox, target);
        scores.push(score);
        if score > 0.0 {
            matched = match i {
                0 => MatchedRank::First,
                1 => MatchedRank::Second,
                _ => MatchedRank::Third,
            };
            break;
        }
    }
    MatchReport {
        scene_id: proposals.scene_id.clone(),
        mode: proposals.mode,
        category,
        matched_rank: matched,
        scores,
    }
}

/// Outcome counts for one mode: [first, second, third, none].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyRow {
    pub mode: Mode,
    pub counts: [u64; 4],
}

/// Outcome counts per mode, RGB-D row first. Row sums equal the number of
/// evaluated scenes for that mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub rows: Vec<ContingencyRow>,
}

impl ContingencyTable {
    pub fn row(&self, mode: Mode) -> Option<&ContingencyRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    pub fn counts_matrix(&self) -> Vec<Vec<u64>> {
        self.rows.iter().map(|r| r.counts.to_vec()).collect()
    }

    /// Pearson chi-squared over this table's counts.
    pub fn chi_squared(&self) -> Result<(f64, usize)> {
        pearson_chi_squared(&self.counts_matrix())
    }
}

/// Count matched-rank outcomes per mode, optionally restricted to one
/// difficulty category. Both mode rows are always present, RGB-D first.
pub fn aggregate(reports: &[MatchReport], category: Option<Category>) -> ContingencyTable {
    let mut rows = vec![
        ContingencyRow {
            mode: Mode::Rgbd,
            counts: [0; 4],
        },
        ContingencyRow {
            mode: Mode::Rgb,
            counts: [0; 4],
        },
    ];
    for report in reports {
        if let Some(wanted) = category {
            if report.category != wanted {
                continue;
            }
        }
        let row = match report.mode {
            Mode::Rgbd => &mut rows[0],
            Mode::Rgb => &mut rows[1],
        };
        row.counts[report.matched_rank.column()] += 1;
    }
    ContingencyTable { rows }
}

/// Pearson chi-squared statistic with expected counts from the row/column
/// margins, plus the degrees of freedom (rows-1)(cols-1). Errors when any
/// margin sums to zero, which would make an expected count zero.
pub fn pearson_chi_squared(counts: &[Vec<u64>]) -> Result<(f64, usize)> {
    let n_rows = counts.len();
    if n_rows == 0 {
        return Err(Error::ZeroMargin("row"));
    }
    let n_cols = counts[0].len();
    if n_cols == 0 || counts.iter().any(|r| r.len() != n_cols) {
        return Err(Error::ZeroMargin("column"));
    }

    let row_sums: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..n_cols)
        .map(|c| counts.iter().map(|r| r[c]).sum())
        .collect();
    if row_sums.contains(&0) {
        return Err(Error::ZeroMargin("row"));
    }
    if col_sums.contains(&0) {
        return Err(Error::ZeroMargin("column"));
    }
    let total: u64 = row_sums.iter().sum();

    let mut statistic = 0.0;
    for (r, row) in counts.iter().enumerate() {
        for (c, &observed) in row.iter().enumerate() {
            let expected = row_sums[r] as f64 * col_sums[c] as f64 / total as f64;
            let diff = observed as f64 - expected;
            statistic += diff * diff / expected;
        }
    }
    Ok((statistic, (n_rows - 1) * (n_cols - 1)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquaredOutcome {
    #[serde(serialize_with = "crate::io::ser_f64_sig9")]
    pub statistic: f64,
    pub degrees_of_freedom: usize,
}

/// Whole-dataset and per-category contingency tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryTables {
    pub whole: ContingencyTable,
    pub easy: ContingencyTable,
    pub difficult: ContingencyTable,
}

/// The full evaluation output: one report per scene and mode, the count
/// tables, and the chi-squared statistic for the whole-dataset table
/// (absent, with a note, when a margin is zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scenes: Vec<MatchReport>,
    pub tables: CategoryTables,
    pub chi_squared_whole: Option<ChiSquaredOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_squared_note: Option<String>,
}

impl EvaluationReport {
    pub fn compile(scenes: Vec<MatchReport>) -> Self {
        let tables = CategoryTables {
            whole: aggregate(&scenes, None),
            easy: aggregate(&scenes, Some(Category::Easy)),
            difficult: aggregate(&scenes, Some(Category::Difficult)),
        };
        let (chi_squared_whole, chi_squared_note) = match tables.whole.chi_squared() {
            Ok((statistic, degrees_of_freedom)) => (
                Some(ChiSquaredOutcome {
                    statistic,
                    degrees_of_freedom,
                }),
                None,
            ),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            scenes,
            tables,
            chi_squared_whole,
            chi_squared_note,
        }
    }
}
