use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// Patch features of one image at one layer, `height × width × dim`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGrid {
    pub layer: usize,
    height: usize,
    width: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(layer: usize, height: usize, width: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || dim == 0 {
            return Err(input(format!(
                "feature grid must be non-empty, got {height}x{width}x{dim}"
            )));
        }
        if values.len() != height * width * dim {
            return Err(input(format!(
                "feature grid {height}x{width}x{dim} needs {} values, got {}",
                height * width * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("feature grid contains non-finite values".into()));
        }
        Ok(FeatureGrid {
            layer,
            height,
            width,
            dim,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.dim)
    }

    pub fn patch(&self, i: usize, j: usize) -> &[f64] {
        let at = (i * self.width + j) * self.dim;
        &self.values[at..at + self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapSource {
    Layer(usize),
    Aggregated,
}

/// Per-patch minimum cosine distance, values in `[0, 2]`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    height: usize,
    width: usize,
    values: Vec<f64>,
    pub source: HeatmapSource,
}

impl Heatmap {
    pub fn new(height: usize, width: usize, values: Vec<f64>, source: HeatmapSource) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(input(format!(
                "heatmap {height}x{width} with {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || !(0.0..=2.0).contains(v)) {
            return Err(input("heatmap values must be finite and within [0, 2]"));
        }
        Ok(Heatmap {
            height,
            width,
            values,
            source,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.width + j]
    }

    /// Position of the largest value; ties resolve to the first in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (idx, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = idx;
            }
        }
        (best / self.width, best % self.width)
    }
}

/// `1 − cos(u, v)`; 1 when exactly one vector is zero and 0 when both are.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    match (nu == 0.0, nv == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        // sqrt(nu·nv) is exact for u == v, so identical patches give exactly 0
        _ => (1.0 - dot / (nu * nv).sqrt()).clamp(0.0, 2.0),
    }
}

/// For each query patch, the smallest cosine distance to reference patches within
/// Chebyshev radius `k` of the same position, clipped at the grid border.
pub fn layer_heatmap(query: &FeatureGrid, reference: &FeatureGrid, k: usize) -> Result<Heatmap> {
    if query.shape() != reference.shape() {
        return Err(input(format!(
            "query grid {:?} and reference grid {:?} differ in shape",
            query.shape(),
            reference.shape()
        )));
    }
    let (m, n, _) = query.shape();
    let mut values = vec![0.0; m * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let (i0, i1) = (i.saturating_sub(k), (i + k).min(m - 1));
        for (j, out) in row.iter_mut().enumerate() {
            let (j0, j1) = (j.saturating_sub(k), (j + k).min(n - 1));
            let q = query.patch(i, j);
            let mut best = f64::INFINITY;
            for ii in i0..=i1 {
                for jj in j0..=j1 {
                    best = best.min(cosine_distance(q, reference.patch(ii, jj)));
                }
            }
            *out = best;
        }
    });
    Heatmap::new(m, n, values, HeatmapSource::Layer(query.layer))
}

/// Element-wise mean over layers. Each position sums its values in sorted order, so the
/// result does not depend on the order of `maps`.
pub fn aggregate(maps: &[Heatmap]) -> Result<Heatmap> {
    let first = maps.first().ok_or_else(|| input("cannot aggregate zero heatmaps"))?;
    let (m, n) = (first.height, first.width);
    if maps.iter().any(|h| h.height != m || h.width != n) {
        return Err(input("heatmaps to aggregate differ in shape"));
    }
    let count = maps.len() as f64;
    let mut scratch = Vec::with_capacity(maps.len());
    let values = (0..m * n)
        .map(|idx| {
            scratch.clear();
            scratch.extend(maps.iter().map(|h| h.values[idx]));
            scratch.sort_by(f64::total_cmp);
            (scratch.iter().sum::<f64>() / count).clamp(0.0, 2.0)
        })
        .collect();
    Heatmap::new(m, n, values, HeatmapSource::Aggregated)
}
