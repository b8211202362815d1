//! Synthetic reference/query feature grids with an optional planted defect.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::grid::FeatureGrid;
use crate::error::{input, Result};

/// Rectangle of patches, `rows × cols` starting at `(top, left)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Rect {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.top && i < self.top + self.rows && j >= self.left && j < self.left + self.cols
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// Unit vectors varying smoothly with position.
    #[default]
    Smooth,
    /// Constant unit vectors on square blocks of this side length.
    PiecewiseConstant { block: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub layers: usize,
    pub defect: Option<Rect>,
    /// Query patch `(i, j)` copies reference patch `(i − di, j − dj)`, clamped to the grid.
    pub shift: (isize, isize),
    /// Radius of the reference window a defect patch is made dissimilar to.
    pub window: usize,
    pub field: FieldKind,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            height: 16,
            width: 16,
            dim: 16,
            layers: 3,
            defect: None,
            shift: (0, 0),
            window: 1,
            field: FieldKind::Smooth,
        }
    }
}

/// Per-layer `(reference, query)` pairs.
pub fn synth_features<R: Rng + ?Sized>(
    spec: &SynthSpec,
    rng: &mut R,
) -> Result<Vec<(FeatureGrid, FeatureGrid)>> {
    let (m, n, d) = (spec.height, spec.width, spec.dim);
    if m == 0 || n == 0 || d == 0 || spec.layers == 0 {
        return Err(input(format!(
            "degenerate synthetic shape {m}x{n}x{d} with {} layers",
            spec.layers
        )));
    }
    if spec.shift.0.unsigned_abs() >= m || spec.shift.1.unsigned_abs() >= n {
        return Err(input(format!("shift {:?} too large for {m}x{n}", spec.shift)));
    }
    if let Some(r) = spec.defect {
        if r.rows == 0 || r.cols == 0 || r.top + r.rows > m || r.left + r.cols > n {
            return Err(input(format!("defect {r:?} does not fit in {m}x{n}")));
        }
    }
    if let FieldKind::PiecewiseConstant { block: 0 } = spec.field {
        return Err(input("block size must be positive"));
    }
    (0..spec.layers)
        .map(|layer| {
            let reference = match spec.field {
                FieldKind::Smooth => smooth_field(m, n, d, rng),
                FieldKind::PiecewiseConstant { block } => blocky_field(m, n, d, block, rng),
            };
            let mut query = vec![0.0; m * n * d];
            for i in 0..m {
                for j in 0..n {
                    let si = clamp_shift(i, spec.shift.0, m);
                    let sj = clamp_shift(j, spec.shift.1, n);
                    let src = &reference[(si * n + sj) * d..(si * n + sj + 1) * d];
                    let dst = &mut query[(i * n + j) * d..(i * n + j + 1) * d];
                    if spec.defect.is_some_and(|r| r.contains(i, j)) {
                        let window = window_vectors(&reference, m, n, d, i, j, spec.window);
                        dst.copy_from_slice(&dissimilar_vector(&window, d, rng));
                    } else {
                        dst.copy_from_slice(src);
                    }
                }
            }
            Ok((
                FeatureGrid::new(layer, m, n, d, reference)?,
                FeatureGrid::new(layer, m, n, d, query)?,
            ))
        })
        .collect()
}

fn clamp_shift(i: usize, shift: isize, len: usize) -> usize {
    (i as isize - shift).clamp(0, len as isize - 1) as usize
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-12 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[0] = 1.0;
    }
}

fn gaussian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn smooth_field<R: Rng + ?Sized>(m: usize, n: usize, d: usize, rng: &mut R) -> Vec<f64> {
    // a fixed direction plus low-frequency waves keeps neighbours close and norms away from 0
    let base = gaussian(d, rng);
    let waves: Vec<(f64, f64, f64)> = (0..d)
        .map(|_| {
            (
                rng.random_range(0.05..0.4),
                rng.random_range(0.05..0.4),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let mut out = Vec::with_capacity(m * n * d);
    for i in 0..m {
        for j in 0..n {
            let mut v: Vec<f64> = base
                .iter()
                .zip(&waves)
                .map(|(b, (fi, fj, ph))| b + (fi * i as f64 + fj * j as f64 + ph).sin())
                .collect();
            normalize(&mut v);
            out.extend(v);
        }
    }
    out
}

fn blocky_field<R: Rng + ?Sized>(m: usize, n: usize, d: usize, block: usize, rng: &mut R) -> Vec<f64> {
    let (bm, bn) = (m.div_ceil(block), n.div_ceil(block));
    let blocks: Vec<Vec<f64>> = (0..bm * bn)
        .map(|_| {
            let mut v = gaussian(d, rng);
            normalize(&mut v);
            v
        })
        .collect();
    let mut out = Vec::with_capacity(m * n * d);
    for i in 0..m {
        for j in 0..n {
            out.extend_from_slice(&blocks[(i / block) * bn + j / block]);
        }
    }
    out
}

fn window_vectors(
    field: &[f64],
    m: usize,
    n: usize,
    d: usize,
    i: usize,
    j: usize,
    k: usize,
) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for ii in i.saturating_sub(k)..=(i + k).min(m - 1) {
        for jj in j.saturating_sub(k)..=(j + k).min(n - 1) {
            out.push(field[(ii * n + jj) * d..(ii * n + jj + 1) * d].to_vec());
        }
    }
    out
}

/// A unit vector orthogonal to every window vector when they leave room for one; otherwise
/// the negated window mean.
fn dissimilar_vector<R: Rng + ?Sized>(window: &[Vec<f64>], d: usize, rng: &mut R) -> Vec<f64> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for w in window {
        let mut v = w.clone();
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    if basis.len() < d {
        let mut g = gaussian(d, rng);
        // two passes of Gram-Schmidt keep the residual orthogonal to working precision
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = g.iter().zip(b).map(|(x, y)| x * y).sum();
                g.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            g.iter_mut().for_each(|x| *x /= norm);
            return g;
        }
    }
    let mut mean = vec![0.0; d];
    for w in window {
        mean.iter_mut().zip(w).for_each(|(m, x)| *m -= x);
    }
    normalize(&mut mean);
    mean
}
