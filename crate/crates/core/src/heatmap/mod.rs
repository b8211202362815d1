//! Contrastive heatmaps between query and reference patch features.
//!
//! Each layer's heatmap holds, per query patch, the smallest cosine distance to any reference
//! patch inside a `(2k+1)²` window around the same position. Layers are averaged and the result
//! goes through batch normalisation, a convolution and a flatten to give embedding sequences.

pub mod bench;
mod grid;
pub mod io;
mod projector;
mod synth;

pub use grid::{aggregate, cosine_distance, layer_heatmap, FeatureGrid, Heatmap, HeatmapSource};
pub use projector::{
    project, BatchNorm, Conv2d, EmbeddingSequence, Maps, ProjectorConfig, ProjectorMode,
    ProjectorParams,
};
pub use synth::{synth_features, FieldKind, Rect, SynthSpec};

/// Number of learnable soft-prompt slots a downstream model would place before the embeddings.
/// Recorded as metadata only.
pub const SOFT_PROMPT_SLOTS: usize = 8;
