use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// The four generation prompts shipped as text assets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    DefectKnowledge,
    NormalKnowledge,
    DefectDescription,
    NormalDescription,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    ObjectType,
    DefectType,
    DefectLocation,
}

impl Slot {
    pub fn placeholder(self) -> &'static str {
        match self {
            Slot::ObjectType => "{object_type}",
            Slot::DefectType => "{defect_type}",
            Slot::DefectLocation => "{defect_location}",
        }
    }
}

impl PromptKind {
    pub const ALL: [PromptKind; 4] = [
        PromptKind::DefectKnowledge,
        PromptKind::NormalKnowledge,
        PromptKind::DefectDescription,
        PromptKind::NormalDescription,
    ];

    pub fn template(self) -> &'static str {
        match self {
            PromptKind::DefectKnowledge => include_str!("../../assets/prompts/defect_knowledge.txt"),
            PromptKind::NormalKnowledge => include_str!("../../assets/prompts/normal_knowledge.txt"),
            PromptKind::DefectDescription => {
                include_str!("../../assets/prompts/defect_description.txt")
            }
            PromptKind::NormalDescription => {
                include_str!("../../assets/prompts/normal_description.txt")
            }
        }
    }

    pub fn required_slots(self) -> &'static [Slot] {
        match self {
            PromptKind::DefectKnowledge => &[Slot::ObjectType, Slot::DefectType],
            PromptKind::NormalKnowledge | PromptKind::NormalDescription => &[Slot::ObjectType],
            PromptKind::DefectDescription => {
                &[Slot::ObjectType, Slot::DefectType, Slot::DefectLocation]
            }
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PromptKind::DefectKnowledge => "defect_knowledge",
            PromptKind::NormalKnowledge => "normal_knowledge",
            PromptKind::DefectDescription => "defect_description",
            PromptKind::NormalDescription => "normal_description",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PromptSlots<'a> {
    pub object_type: Option<&'a str>,
    pub defect_type: Option<&'a str>,
    pub defect_location: Option<&'a str>,
}

impl PromptSlots<'_> {
    fn value(&self, slot: Slot) -> Option<&str> {
        match slot {
            Slot::ObjectType => self.object_type,
            Slot::DefectType => self.defect_type,
            Slot::DefectLocation => self.defect_location,
        }
    }
}

/// Substitute every required slot into the template for `kind`.
pub fn render_prompt_template(kind: PromptKind, slots: &PromptSlots<'_>) -> Result<String> {
    let mut text = kind.template().to_string();
    for &slot in kind.required_slots() {
        let value = slots
            .value(slot)
            .ok_or_else(|| input(format!("{kind} prompt needs {}", slot.placeholder())))?;
        text = text.replace(slot.placeholder(), value);
    }
    Ok(text)
}
