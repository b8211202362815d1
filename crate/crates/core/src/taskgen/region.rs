use std::fmt;

use serde::{Deserialize, Serialize};

use super::mask::Mask;
use crate::error::{input, Result};

/// One cell of the 3×3 localisation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionLabel {
    TopLeft,
    TopCenter,
    TopRight,
    MiddleLeft,
    Center,
    MiddleRight,
    BottomLeft,
    BottomCenter,
    BottomRight,
}

impl RegionLabel {
    /// All nine labels in reading order.
    pub const ALL: [RegionLabel; 9] = [
        RegionLabel::TopLeft,
        RegionLabel::TopCenter,
        RegionLabel::TopRight,
        RegionLabel::MiddleLeft,
        RegionLabel::Center,
        RegionLabel::MiddleRight,
        RegionLabel::BottomLeft,
        RegionLabel::BottomCenter,
        RegionLabel::BottomRight,
    ];

    pub fn from_cell(row: usize, col: usize) -> RegionLabel {
        Self::ALL[row * 3 + col]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::TopLeft => "top left",
            RegionLabel::TopCenter => "top center",
            RegionLabel::TopRight => "top right",
            RegionLabel::MiddleLeft => "middle left",
            RegionLabel::Center => "center",
            RegionLabel::MiddleRight => "middle right",
            RegionLabel::BottomLeft => "bottom left",
            RegionLabel::BottomCenter => "bottom center",
            RegionLabel::BottomRight => "bottom right",
        }
    }

    pub fn parse(s: &str) -> Option<RegionLabel> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }

    /// First region phrase mentioned in free text; at equal positions the longer phrase wins.
    pub fn find_in_text(text: &str) -> Option<RegionLabel> {
        let lower = text.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .filter_map(|r| lower.find(r.as_str()).map(|at| (at, std::cmp::Reverse(r.as_str().len()), r)))
            .min()
            .map(|(_, _, r)| r)
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Band boundaries `[0, ⌊len/3⌋, ⌊2len/3⌋, len]`; the last band takes the remainder.
pub fn band_edges(len: usize) -> [usize; 4] {
    [0, len / 3, 2 * len / 3, len]
}

/// Grid cell holding the most positive mask pixels; ties go to the earliest cell in reading order.
pub fn mask_to_region(mask: &Mask) -> Result<RegionLabel> {
    let rows = band_edges(mask.height());
    let cols = band_edges(mask.width());
    let mut counts = [0usize; 9];
    for i in 0..mask.height() {
        let band_i = (0..3).rfind(|&b| i >= rows[b]).unwrap_or(0);
        for j in 0..mask.width() {
            if mask.get(i, j) {
                let band_j = (0..3).rfind(|&b| j >= cols[b]).unwrap_or(0);
                counts[band_i * 3 + band_j] += 1;
            }
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(input("mask has no positive pixels: no defect to localize"));
    }
    let mut best = 0;
    for (cell, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = cell;
        }
    }
    Ok(RegionLabel::ALL[best])
}
