use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::{AnnotationRecord, Query};
use super::region::{mask_to_region, RegionLabel};
use crate::error::{input, Error, Result};
use crate::policy::index_letter;

/// Distractors drawn for every non-binary question.
pub const DISTRACTORS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    AnomalyDiscrimination,
    DefectClassification,
    DefectLocalization,
    ObjectClassification,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::AnomalyDiscrimination,
        TaskKind::DefectClassification,
        TaskKind::DefectLocalization,
        TaskKind::ObjectClassification,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::AnomalyDiscrimination => "anomaly_discrimination",
            TaskKind::DefectClassification => "defect_classification",
            TaskKind::DefectLocalization => "defect_localization",
            TaskKind::ObjectClassification => "object_classification",
        }
    }

    pub fn parse(s: &str) -> Option<TaskKind> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// Domain knowledge names the object, so object questions never carry it.
    pub fn uses_knowledge(self) -> bool {
        self != TaskKind::ObjectClassification
    }

    pub fn requires_defect(self) -> bool {
        matches!(self, TaskKind::DefectClassification | TaskKind::DefectLocalization)
    }

    pub fn option_count(self) -> usize {
        match self {
            TaskKind::AnomalyDiscrimination => 2,
            _ => DISTRACTORS + 1,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub record_id: String,
    pub object_type: String,
    pub split: String,
    pub seed: u64,
}

/// A multiple-choice question with its gold option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqSample {
    pub task: TaskKind,
    pub question: String,
    pub options: Vec<String>,
    pub gold: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_knowledge: Option<String>,
    pub query: Query,
    pub provenance: Provenance,
}

impl McqSample {
    pub fn validate(&self) -> Result<()> {
        let n = self.options.len();
        if !(2..=9).contains(&n) {
            return Err(input(format!("{} options, expected 2..=9", n)));
        }
        if self.gold >= n {
            return Err(input(format!("gold index {} out of {} options", self.gold, n)));
        }
        let distinct: BTreeSet<&String> = self.options.iter().collect();
        if distinct.len() != n {
            return Err(input("options are not pairwise distinct"));
        }
        if self.task == TaskKind::AnomalyDiscrimination && n != 2 {
            return Err(input("anomaly discrimination needs exactly 2 options"));
        }
        if !self.task.uses_knowledge() && self.domain_knowledge.is_some() {
            return Err(input("object classification must not carry domain knowledge"));
        }
        Ok(())
    }

    pub fn gold_letter(&self) -> char {
        index_letter(self.gold).expect("validated option count")
    }

    pub fn gold_option(&self) -> &str {
        &self.options[self.gold]
    }

    /// Prompt text: knowledge, query, question and lettered options.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(k) = &self.domain_knowledge {
            out.push_str(&format!("Domain knowledge: {k}\n"));
        }
        match &self.query {
            Query::Image(p) => out.push_str(&format!("Image: {p}\n")),
            Query::Text(t) => out.push_str(&format!("Description: {t}\n")),
        }
        out.push_str(&self.question);
        for (i, opt) in self.options.iter().enumerate() {
            out.push_str(&format!("\n{}. {}", index_letter(i).unwrap_or('?'), opt));
        }
        out
    }
}

/// Candidate wrong answers, collected from the records themselves or given explicitly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistractorPools {
    pub defects: BTreeMap<String, BTreeSet<String>>,
    pub objects: BTreeSet<String>,
}

impl DistractorPools {
    pub fn from_records(records: &[AnnotationRecord]) -> Self {
        let mut pools = DistractorPools::default();
        for r in records {
            pools.objects.insert(r.object_type.clone());
            let entry = pools.defects.entry(r.object_type.clone()).or_default();
            if let Some(d) = &r.defect_type {
                entry.insert(d.clone());
            }
        }
        pools
    }

    pub fn add_defects<I, S>(&mut self, object_type: &str, defects: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.objects.insert(object_type.to_string());
        self.defects
            .entry(object_type.to_string())
            .or_default()
            .extend(defects.into_iter().map(Into::into));
    }
}

/// Domain-knowledge text keyed by object type.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    pub entries: BTreeMap<String, String>,
}

impl KnowledgeBase {
    /// One `<object_type>.txt` file per object type.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    let text = std::fs::read_to_string(&path)?;
                    entries.insert(stem.to_string(), text.trim().to_string());
                }
            }
        }
        Ok(KnowledgeBase { entries })
    }

    pub fn get(&self, object_type: &str) -> Option<&str> {
        self.entries.get(object_type).map(String::as_str)
    }
}

fn draw_distractors<R: Rng + ?Sized>(
    pool: &[String],
    gold: &str,
    what: &str,
    rng: &mut R,
) -> Result<Vec<String>> {
    let candidates: Vec<&String> = pool.iter().filter(|c| c.as_str() != gold).collect();
    if candidates.len() < DISTRACTORS {
        return Err(Error::Generation(format!(
            "{what} pool has {} candidates besides {gold:?}, need {DISTRACTORS}",
            candidates.len()
        )));
    }
    Ok(candidates
        .choose_multiple(rng, DISTRACTORS)
        .map(|s| (*s).clone())
        .collect())
}

fn localization_gold(record: &AnnotationRecord) -> Result<RegionLabel> {
    if let Some(mask) = record.load_mask()? {
        return mask_to_region(&mask);
    }
    match &record.query {
        Query::Text(t) => RegionLabel::find_in_text(t).ok_or_else(|| {
            input(format!("record {}: description states no defect location", record.id))
        }),
        Query::Image(_) => Err(input(format!(
            "record {}: localization needs a mask or a located description",
            record.id
        ))),
    }
}

/// Build one question of kind `task` from `record`. Options are shuffled by `rng`.
pub fn build_question<R: Rng + ?Sized>(
    record: &AnnotationRecord,
    task: TaskKind,
    pools: &DistractorPools,
    knowledge: &KnowledgeBase,
    rng: &mut R,
) -> Result<McqSample> {
    record.validate()?;
    if task.requires_defect() && !record.is_anomalous {
        return Err(input(format!("record {}: {task} needs an anomalous record", record.id)));
    }
    let object = &record.object_type;
    let (question, gold, mut options) = match task {
        TaskKind::AnomalyDiscrimination => {
            let gold = if record.is_anomalous { "Yes" } else { "No" };
            (
                format!("Is there any defect on the {object}?"),
                gold.to_string(),
                vec!["Yes".to_string(), "No".to_string()],
            )
        }
        TaskKind::DefectClassification => {
            let gold = record.defect_type.clone().expect("validated");
            let pool: Vec<String> = pools
                .defects
                .get(object)
                .map(|s| s.iter().cloned().collect())
                .unwrap_or_default();
            let mut options = draw_distractors(&pool, &gold, "defect", rng)?;
            options.push(gold.clone());
            (format!("What type of defect is present on the {object}?"), gold, options)
        }
        TaskKind::DefectLocalization => {
            let gold = localization_gold(record)?;
            let pool: Vec<String> = RegionLabel::ALL.iter().map(|r| r.to_string()).collect();
            let mut options = draw_distractors(&pool, gold.as_str(), "region", rng)?;
            options.push(gold.to_string());
            (
                format!("Where is the defect located on the {object}?"),
                gold.to_string(),
                options,
            )
        }
        TaskKind::ObjectClassification => {
            let pool: Vec<String> = pools.objects.iter().cloned().collect();
            let mut options = draw_distractors(&pool, object, "object", rng)?;
            options.push(object.clone());
            ("What kind of object is shown?".to_string(), object.clone(), options)
        }
    };
    options.shuffle(rng);
    let gold_index = options.iter().position(|o| *o == gold).expect("gold was inserted");
    let domain_knowledge = if task.uses_knowledge() {
        knowledge.get(object).map(str::to_string)
    } else {
        None
    };
    let sample = McqSample {
        task,
        question,
        options,
        gold: gold_index,
        domain_knowledge,
        query: record.query.clone(),
        provenance: Provenance {
            record_id: record.id.clone(),
            object_type: object.clone(),
            split: record.split.clone(),
            seed: 0,
        },
    };
    sample.validate()?;
    Ok(sample)
}

/// Stable 64-bit seed for `key` under `seed` (FNV-1a over both).
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(key.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Build every compatible (record, task) question. Records are processed in id order and
/// each question draws from its own rng, so the output is independent of thread count.
/// Defect tasks are skipped for normal records, localization for records without a location.
pub fn generate(
    records: &[AnnotationRecord],
    tasks: &[TaskKind],
    pools: &DistractorPools,
    knowledge: &KnowledgeBase,
    seed: u64,
) -> Result<Vec<McqSample>> {
    let mut order: Vec<&AnnotationRecord> = records.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let per_record: Vec<Result<Vec<McqSample>>> = order
        .par_iter()
        .map(|record| {
            let mut out = Vec::new();
            for &task in tasks {
                if task.requires_defect() && !record.is_anomalous {
                    continue;
                }
                if task == TaskKind::DefectLocalization && localization_gold(record).is_err() {
                    continue;
                }
                let s = derive_seed(seed, &format!("{}/{}", record.id, task));
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let mut sample = build_question(record, task, pools, knowledge, &mut rng)?;
                sample.provenance.seed = s;
                out.push(sample);
            }
            Ok(out)
        })
        .collect();
    let mut samples = Vec::new();
    for r in per_record {
        samples.extend(r?);
    }
    Ok(samples)
}
