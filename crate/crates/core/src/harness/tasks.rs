use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, SyntheticSpec};
use crate::error::Result;
use crate::grpo::RolloutQuestion;
use crate::taskgen::{
    build_question, load_samples, AnnotationRecord, DistractorPools, KnowledgeBase, Mask,
    MaskSource, McqSample, Query, TaskKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Easy,
    Hard,
}

/// Object types and their defect vocabularies used for synthetic questions.
pub const SYNTHETIC_CATALOG: [(&str, [&str; 5]); 6] = [
    ("bottle", ["broken_large", "broken_small", "contamination", "crack", "scratch"]),
    ("cable", ["bent_wire", "cable_swap", "cut_insulation", "missing_wire", "poke"]),
    ("capsule", ["crack", "faulty_imprint", "poke", "scratch", "squeeze"]),
    ("hazelnut", ["crack", "cut", "hole", "print", "stain"]),
    ("metal_nut", ["bent", "color", "flip", "scratch", "dent"]),
    ("screw", ["manipulated_front", "scratch_head", "scratch_neck", "thread_side", "thread_top"]),
];

/// Questions of one experiment with everything the policy initialiser and evaluator need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub samples: Vec<McqSample>,
    pub tiers: Vec<Tier>,
    /// Initial probability of the gold letter, per question.
    pub priors: Vec<f64>,
}

impl TaskSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Question `i` uses policy context `i`.
    pub fn rollout_question(&self, i: usize) -> RolloutQuestion {
        let s = &self.samples[i];
        RolloutQuestion {
            context: i,
            gold: s.gold_letter(),
            n_options: s.options.len(),
        }
    }

    pub fn load(source: &DataSource, rng: &mut impl Rng) -> Result<Self> {
        match source {
            DataSource::Synthetic(spec) => make_synthetic_tasks(spec, rng),
            DataSource::Dataset(path) => Self::from_samples_file(path),
        }
    }

    /// Every loaded sample is treated as hard with a uniform answer prior.
    pub fn from_samples_file(path: &Path) -> Result<Self> {
        let samples = load_samples(path)?;
        for s in &samples {
            s.validate()?;
        }
        let priors = samples.iter().map(|s| 1.0 / s.options.len() as f64).collect();
        Ok(TaskSet {
            tiers: vec![Tier::Hard; samples.len()],
            priors,
            samples,
        })
    }
}

fn synthetic_pools() -> DistractorPools {
    let mut pools = DistractorPools::default();
    for (object, defects) in SYNTHETIC_CATALOG {
        pools.add_defects(object, defects);
    }
    pools
}

fn random_mask(rng: &mut impl Rng) -> Mask {
    let (h, w) = (rng.random_range(6..=24), rng.random_range(6..=24));
    let mut m = Mask::zeros(h, w).expect("positive size");
    let (rh, rw) = (rng.random_range(1..=h / 2), rng.random_range(1..=w / 2));
    let (top, left) = (rng.random_range(0..=h - rh), rng.random_range(0..=w - rw));
    for i in top..top + rh {
        for j in left..left + rw {
            m.set(i, j, true);
        }
    }
    m
}

/// Random records over the synthetic catalog, one question each, cycling through the four
/// task kinds. The first `spec.easy` questions form the easy tier.
pub fn make_synthetic_tasks(spec: &SyntheticSpec, rng: &mut impl Rng) -> Result<TaskSet> {
    spec.validate()?;
    let pools = synthetic_pools();
    let knowledge = KnowledgeBase::default();
    let n = spec.easy + spec.hard;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let task = TaskKind::ALL[i % TaskKind::ALL.len()];
        let (object, defects) = *SYNTHETIC_CATALOG.choose(rng).expect("non-empty catalog");
        let anomalous = task.requires_defect() || rng.random_bool(0.5);
        let defect = anomalous.then(|| defects.choose(rng).expect("non-empty").to_string());
        let record = AnnotationRecord {
            id: format!("synthetic-{i:04}"),
            object_type: object.to_string(),
            is_anomalous: anomalous,
            defect_type: defect,
            mask: anomalous.then(|| MaskSource::Rle(random_mask(rng).to_rle())),
            query: Query::Image(format!("synthetic/{object}/{i:04}.png")),
            split: "train".to_string(),
        };
        samples.push(build_question(&record, task, &pools, &knowledge, rng)?);
    }
    let tiers: Vec<Tier> = (0..n)
        .map(|i| if i < spec.easy { Tier::Easy } else { Tier::Hard })
        .collect();
    let priors = tiers
        .iter()
        .map(|t| match t {
            Tier::Easy => spec.easy_prior,
            Tier::Hard => spec.hard_prior,
        })
        .collect();
    Ok(TaskSet {
        samples,
        tiers,
        priors,
    })
}
