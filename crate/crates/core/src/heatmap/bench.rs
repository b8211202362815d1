use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{aggregate, layer_heatmap, Heatmap};
use super::projector::{project, Maps, ProjectorConfig, ProjectorParams};
use super::synth::{synth_features, Rect, SynthSpec};
use crate::error::{config, Result};
use crate::taskgen::derive_seed;

/// Planted-defect localisation benchmark on synthetic feature grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Grid shape, layer count and field; `defect` is replaced by a random rectangle per fixture.
    pub spec: SynthSpec,
    pub fixtures: usize,
    /// Window radius of the heatmap search.
    pub k: usize,
    /// Largest side of a planted defect.
    pub max_defect: usize,
    pub projector: ProjectorConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            spec: SynthSpec::default(),
            fixtures: 20,
            k: 1,
            max_defect: 4,
            projector: ProjectorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureResult {
    pub defect: Rect,
    pub argmax: (usize, usize),
    pub hit: bool,
    pub mean_inside: f64,
    pub mean_outside: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub fixtures: Vec<FixtureResult>,
    pub hits: usize,
    pub hit_rate: f64,
    /// Embedding sequence length and width produced by the projector.
    pub embedding_shape: (usize, usize),
    /// Aggregated heatmap of the first fixture.
    pub example: Heatmap,
}

fn random_rect(h: usize, w: usize, max_side: usize, rng: &mut impl Rng) -> Rect {
    let rows = rng.random_range(1..=max_side.min(h));
    let cols = rng.random_range(1..=max_side.min(w));
    Rect {
        top: rng.random_range(0..=h - rows),
        left: rng.random_range(0..=w - cols),
        rows,
        cols,
    }
}

pub fn run_bench(cfg: &BenchConfig, seed: u64) -> Result<BenchResult> {
    if cfg.fixtures == 0 || cfg.max_defect == 0 {
        return Err(config("benchmark needs at least one fixture and a positive defect size"));
    }
    let mut maps = Vec::with_capacity(cfg.fixtures);
    let mut fixtures = Vec::with_capacity(cfg.fixtures);
    for f in 0..cfg.fixtures {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("fixture/{f}")));
        let defect = random_rect(cfg.spec.height, cfg.spec.width, cfg.max_defect, &mut rng);
        let spec = SynthSpec {
            defect: Some(defect),
            ..cfg.spec.clone()
        };
        let layers = synth_features(&spec, &mut rng)?
            .iter()
            .map(|(reference, query)| layer_heatmap(query, reference, cfg.k))
            .collect::<Result<Vec<_>>>()?;
        let agg = aggregate(&layers)?;
        let argmax = agg.argmax();
        let (mut inside, mut n_in, mut outside, mut n_out) = (0.0, 0usize, 0.0, 0usize);
        for i in 0..agg.height() {
            for j in 0..agg.width() {
                if defect.contains(i, j) {
                    inside += agg.get(i, j);
                    n_in += 1;
                } else {
                    outside += agg.get(i, j);
                    n_out += 1;
                }
            }
        }
        fixtures.push(FixtureResult {
            defect,
            argmax,
            hit: defect.contains(argmax.0, argmax.1),
            mean_inside: inside / n_in.max(1) as f64,
            mean_outside: outside / n_out.max(1) as f64,
        });
        maps.push(agg);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "projector"));
    let mut params = ProjectorParams::init(&cfg.projector, &mut rng)?;
    let batch: Vec<Maps> = maps.iter().map(Maps::from_heatmap).collect();
    let seqs = project(&batch, &mut params)?;
    let embedding_shape = (
        seqs[0].embeddings.len(),
        seqs[0].embeddings.first().map_or(0, Vec::len),
    );
    let hits = fixtures.iter().filter(|f| f.hit).count();
    Ok(BenchResult {
        hit_rate: hits as f64 / fixtures.len() as f64,
        hits,
        fixtures,
        embedding_shape,
        example: maps.swap_remove(0),
    })
}
