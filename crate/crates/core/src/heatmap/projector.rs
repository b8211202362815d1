//! Batch normalisation, 2-D convolution and flattening of heatmaps into embedding sequences.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::Heatmap;
use crate::error::{config, input, Result};

/// A multi-channel map, `channels × height × width`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maps {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Maps {
    /// Single-channel input from an aggregated heatmap.
    pub fn from_heatmap(h: &Heatmap) -> Self {
        Maps {
            channels: 1,
            height: h.height(),
            width: h.width(),
            data: h.values().to_vec(),
        }
    }

    /// Per-layer heatmaps stacked as channels.
    pub fn stack(layers: &[Heatmap]) -> Result<Self> {
        let first = layers.first().ok_or_else(|| input("no heatmaps to stack"))?;
        let (h, w) = (first.height(), first.width());
        if layers.iter().any(|l| l.height() != h || l.width() != w) {
            return Err(input("stacked heatmaps differ in shape"));
        }
        Ok(Maps {
            channels: layers.len(),
            height: h,
            width: w,
            data: layers.iter().flat_map(|l| l.values().iter().copied()).collect(),
        })
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let plane = self.height * self.width;
        &mut self.data[c * plane..(c + 1) * plane]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectorMode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub shift: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNorm {
    pub fn new(channels: usize, eps: f64, momentum: f64) -> Self {
        BatchNorm {
            gamma: vec![1.0; channels],
            shift: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps,
            momentum,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Normalised (pre-affine) values. Train mode uses batch statistics and updates the
    /// running estimates; eval mode uses the running estimates.
    pub fn normalize(&mut self, batch: &[Maps], mode: ProjectorMode) -> Result<Vec<Maps>> {
        let c = self.channels();
        if batch.iter().any(|m| m.channels != c) {
            return Err(input(format!("batch norm expects {c} channels")));
        }
        let (mean, var) = match mode {
            ProjectorMode::Eval => (self.running_mean.clone(), self.running_var.clone()),
            ProjectorMode::Train => {
                if batch.len() < 2 {
                    return Err(input(
                        "train-mode batch normalisation needs at least 2 samples",
                    ));
                }
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for ch in 0..c {
                    let count: usize = batch.iter().map(|m| m.height * m.width).sum();
                    let sum: f64 = batch.iter().flat_map(|m| m.channel(ch)).sum();
                    let mu = sum / count as f64;
                    let sq: f64 = batch
                        .iter()
                        .flat_map(|m| m.channel(ch))
                        .map(|x| (x - mu).powi(2))
                        .sum();
                    let biased = sq / count as f64;
                    mean[ch] = mu;
                    var[ch] = biased;
                    let unbiased = sq / (count - 1) as f64;
                    self.running_mean[ch] =
                        (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mu;
                    self.running_var[ch] =
                        (1.0 - self.momentum) * self.running_var[ch] + self.momentum * unbiased;
                }
                (mean, var)
            }
        };
        Ok(batch
            .iter()
            .map(|m| {
                let mut out = m.clone();
                for ch in 0..c {
                    let denom = (var[ch] + self.eps).sqrt();
                    for x in out.channel_mut(ch) {
                        *x = (*x - mean[ch]) / denom;
                    }
                }
                out
            })
            .collect())
    }

    pub fn affine(&self, normalized: &mut Maps) {
        for ch in 0..self.channels() {
            let (g, b) = (self.gamma[ch], self.shift[ch]);
            for x in normalized.channel_mut(ch) {
                *x = g * *x + b;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub padding: usize,
    /// `out × in × kh × kw`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn output_shape(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        let (kh, kw) = self.kernel;
        let (ph, pw) = (height + 2 * self.padding, width + 2 * self.padding);
        if self.stride == 0 || kh == 0 || kw == 0 || ph < kh || pw < kw {
            return Err(input(format!(
                "convolution {kh}x{kw} stride {} padding {} does not fit a {height}x{width} map",
                self.stride, self.padding
            )));
        }
        Ok(((ph - kh) / self.stride + 1, (pw - kw) / self.stride + 1))
    }

    pub fn forward(&self, x: &Maps) -> Result<Maps> {
        if x.channels != self.in_channels {
            return Err(input(format!(
                "convolution expects {} input channels, got {}",
                self.in_channels, x.channels
            )));
        }
        let (oh, ow) = self.output_shape(x.height, x.width)?;
        let (kh, kw) = self.kernel;
        let pad = self.padding as isize;
        let mut data = vec![0.0; self.out_channels * oh * ow];
        for o in 0..self.out_channels {
            for oi in 0..oh {
                for oj in 0..ow {
                    let mut acc = self.bias[o];
                    for c in 0..self.in_channels {
                        let plane = x.channel(c);
                        for a in 0..kh {
                            let i = (oi * self.stride + a) as isize - pad;
                            if i < 0 || i >= x.height as isize {
                                continue;
                            }
                            for b in 0..kw {
                                let j = (oj * self.stride + b) as isize - pad;
                                if j < 0 || j >= x.width as isize {
                                    continue;
                                }
                                let w = self.weights[((o * self.in_channels + c) * kh + a) * kw + b];
                                acc += w * plane[i as usize * x.width + j as usize];
                            }
                        }
                    }
                    data[(o * oh + oi) * ow + oj] = acc;
                }
            }
        }
        Ok(Maps {
            channels: self.out_channels,
            height: oh,
            width: ow,
            data,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectorConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub momentum: f64,
    pub eps: f64,
}

impl Default for ProjectorConfig {
    fn default() -> Self {
        ProjectorConfig {
            in_channels: 1,
            out_channels: 32,
            kernel: 3,
            stride: 1,
            padding: 1,
            momentum: 0.1,
            eps: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorParams {
    pub bn: BatchNorm,
    pub conv: Conv2d,
    pub mode: ProjectorMode,
}

impl ProjectorParams {
    /// Conv weights drawn uniformly from `±1/sqrt(fan_in)`, zero bias, identity batch norm.
    pub fn init<R: Rng + ?Sized>(cfg: &ProjectorConfig, rng: &mut R) -> Result<Self> {
        if cfg.in_channels == 0 || cfg.out_channels == 0 || cfg.kernel == 0 || cfg.stride == 0 {
            return Err(config(format!("degenerate projector configuration {cfg:?}")));
        }
        if !(cfg.eps > 0.0) || !(0.0..=1.0).contains(&cfg.momentum) {
            return Err(config("batch norm eps must be > 0 and momentum in [0, 1]"));
        }
        let fan_in = (cfg.in_channels * cfg.kernel * cfg.kernel) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let n = cfg.out_channels * cfg.in_channels * cfg.kernel * cfg.kernel;
        let weights = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        Ok(ProjectorParams {
            bn: BatchNorm::new(cfg.in_channels, cfg.eps, cfg.momentum),
            conv: Conv2d {
                in_channels: cfg.in_channels,
                out_channels: cfg.out_channels,
                kernel: (cfg.kernel, cfg.kernel),
                stride: cfg.stride,
                padding: cfg.padding,
                weights,
                bias: vec![0.0; cfg.out_channels],
            },
            mode: ProjectorMode::Train,
        })
    }
}

/// Contrastive embeddings for one input map, one vector per output position in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSequence {
    pub embeddings: Vec<Vec<f64>>,
    pub spatial_shape: (usize, usize),
}

/// Normalise, convolve and flatten a batch of maps.
pub fn project(batch: &[Maps], p: &mut ProjectorParams) -> Result<Vec<EmbeddingSequence>> {
    if batch.is_empty() {
        return Err(input("projector batch is empty"));
    }
    let normalized = p.bn.normalize(batch, p.mode)?;
    normalized
        .into_iter()
        .map(|mut x| {
            p.bn.affine(&mut x);
            let y = p.conv.forward(&x)?;
            Ok(flatten(&y))
        })
        .collect()
}

fn flatten(y: &Maps) -> EmbeddingSequence {
    let plane = y.height * y.width;
    let embeddings = (0..plane)
        .map(|pos| (0..y.channels).map(|c| y.data[c * plane + pos]).collect())
        .collect();
    EmbeddingSequence {
        embeddings,
        spatial_shape: (y.height, y.width),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatmap::HeatmapSource;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(h: usize, w: usize, offset: f64) -> Maps {
        Maps {
            channels: 1,
            height: h,
            width: w,
            data: (0..h * w).map(|i| (i as f64 * 0.37 + offset).sin().abs()).collect(),
        }
    }

    #[test]
    fn default_shape_is_same_padding() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = ProjectorParams::init(&ProjectorConfig::default(), &mut rng).unwrap();
        let out = project(&[ramp(16, 16, 0.0), ramp(16, 16, 1.0)], &mut p).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].embeddings.len(), 256);
        assert!(out[0].embeddings.iter().all(|e| e.len() == 32));
        assert_eq!(out[0].spatial_shape, (16, 16));
    }

    #[test]
    fn identity_configuration_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = ProjectorConfig {
            out_channels: 1,
            kernel: 1,
            padding: 0,
            ..ProjectorConfig::default()
        };
        let mut p = ProjectorParams::init(&cfg, &mut rng).unwrap();
        p.conv.weights = vec![1.0];
        p.mode = ProjectorMode::Eval;
        p.bn.eps = 1e-300;
        let h = Heatmap::new(3, 4, (0..12).map(|i| i as f64 / 10.0).collect(), HeatmapSource::Aggregated)
            .unwrap();
        let out = project(&[Maps::from_heatmap(&h)], &mut p).unwrap();
        let flat: Vec<f64> = out[0].embeddings.iter().map(|e| e[0]).collect();
        assert_eq!(flat, h.values());
    }

    #[test]
    fn train_mode_needs_two_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = ProjectorParams::init(&ProjectorConfig::default(), &mut rng).unwrap();
        assert!(project(&[ramp(4, 4, 0.0)], &mut p).is_err());
        p.mode = ProjectorMode::Eval;
        assert!(project(&[ramp(4, 4, 0.0)], &mut p).is_ok());
        assert!(project(&[], &mut p).is_err());
    }

    #[test]
    fn running_stats_move_towards_batch() {
        let mut bn = BatchNorm::new(1, 1e-5, 0.1);
        let batch = [ramp(4, 4, 0.0), ramp(4, 4, 2.0)];
        bn.normalize(&batch, ProjectorMode::Train).unwrap();
        assert!(bn.running_mean[0] > 0.0);
        assert!(bn.running_var[0] < 1.0);
    }
}
