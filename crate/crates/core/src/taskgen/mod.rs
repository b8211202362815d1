//! Annotation records to multiple-choice questions.
//!
//! Four question kinds come out of each record: anomaly discrimination (yes/no), defect
//! classification, defect localization on a 3×3 grid, and object classification. Non-binary
//! questions carry one gold option and three distractors in shuffled order.

mod build;
pub mod io;
mod mask;
mod prompts;
mod record;
mod region;

pub use build::{
    build_question, derive_seed, generate, DistractorPools, KnowledgeBase, McqSample, Provenance,
    TaskKind, DISTRACTORS,
};
pub use mask::Mask;
pub use prompts::{render_prompt_template, PromptKind, PromptSlots, Slot};
pub use record::{load_records, AnnotationRecord, MaskSource, Query};
pub use region::{band_edges, mask_to_region, RegionLabel};

use std::path::Path;

use crate::error::Result;

pub fn emit_samples(samples: &[McqSample], path: &Path) -> Result<()> {
    io::write_jsonl(samples, path)
}

pub fn load_samples(path: &Path) -> Result<Vec<McqSample>> {
    io::read_jsonl(path)
}
