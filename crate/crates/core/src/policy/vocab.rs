use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

pub type TokenId = usize;

pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";
pub const ANSWER_OPEN: &str = "<answer>";
pub const ANSWER_CLOSE: &str = "</answer>";
pub const EOS: &str = "<eos>";

/// Letters usable as option labels, in option order.
pub const CHOICE_LETTERS: [char; 9] = ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I'];

/// Index of an option letter (`'A'` is 0), if it is one of the nine supported letters.
pub fn letter_index(letter: char) -> Option<usize> {
    CHOICE_LETTERS.iter().position(|&c| c == letter)
}

pub fn index_letter(index: usize) -> Option<char> {
    CHOICE_LETTERS.get(index).copied()
}

/// Fixed token alphabet of the toy policy.
///
/// Layout: the four tag tokens, then option letters, then filler tokens, then end-of-sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabSpec", into = "VocabSpec")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    n_choices: usize,
    n_fillers: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabSpec {
    n_choices: usize,
    n_fillers: usize,
}

impl TryFrom<VocabSpec> for Vocabulary {
    type Error = crate::Error;
    fn try_from(spec: VocabSpec) -> Result<Self> {
        Vocabulary::new(spec.n_choices, spec.n_fillers)
    }
}

impl From<Vocabulary> for VocabSpec {
    fn from(v: Vocabulary) -> Self {
        VocabSpec {
            n_choices: v.n_choices,
            n_fillers: v.n_fillers,
        }
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::new(CHOICE_LETTERS.len(), 4).expect("default vocabulary is valid")
    }
}

impl Vocabulary {
    pub fn new(n_choices: usize, n_fillers: usize) -> Result<Self> {
        if n_choices == 0 || n_choices > CHOICE_LETTERS.len() {
            return Err(input(format!(
                "choice count must be in 1..={}, got {n_choices}",
                CHOICE_LETTERS.len()
            )));
        }
        if n_fillers == 0 {
            return Err(input("at least one filler token is required"));
        }
        let mut tokens: Vec<String> = [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE]
            .iter()
            .map(|s| s.to_string())
            .collect();
        tokens.extend(CHOICE_LETTERS[..n_choices].iter().map(|c| c.to_string()));
        tokens.extend((1..=n_fillers).map(|i| format!("f{i}")));
        tokens.push(EOS.to_string());
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            tokens,
            index,
            n_choices,
            n_fillers,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn think_open(&self) -> TokenId {
        0
    }
    pub fn think_close(&self) -> TokenId {
        1
    }
    pub fn answer_open(&self) -> TokenId {
        2
    }
    pub fn answer_close(&self) -> TokenId {
        3
    }

    pub fn structural_ids(&self) -> [TokenId; 4] {
        [0, 1, 2, 3]
    }

    pub fn is_structural(&self, id: TokenId) -> bool {
        id < 4
    }

    pub fn n_choices(&self) -> usize {
        self.n_choices
    }

    pub fn choice_ids(&self) -> std::ops::Range<TokenId> {
        4..4 + self.n_choices
    }

    pub fn choice_id(&self, letter: char) -> Option<TokenId> {
        letter_index(letter)
            .filter(|&i| i < self.n_choices)
            .map(|i| 4 + i)
    }

    pub fn choice_letter(&self, id: TokenId) -> Option<char> {
        if self.choice_ids().contains(&id) {
            index_letter(id - 4)
        } else {
            None
        }
    }

    pub fn filler_ids(&self) -> std::ops::Range<TokenId> {
        let start = 4 + self.n_choices;
        start..start + self.n_fillers
    }

    pub fn eos(&self) -> TokenId {
        self.tokens.len() - 1
    }

    /// Space-joined token strings with end-of-sequence dropped.
    pub fn render(&self, ids: &[TokenId]) -> Result<String> {
        let mut parts = Vec::with_capacity(ids.len());
        for &id in ids {
            if id == self.eos() {
                continue;
            }
            let tok = self
                .token(id)
                .ok_or_else(|| input(format!("token id {id} out of range")))?;
            parts.push(tok);
        }
        Ok(parts.join(" "))
    }

    /// Whitespace tokenizer over the fixed alphabet; inverse of [`render`](Self::render).
    pub fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        text.split_whitespace()
            .map(|t| {
                self.id(t)
                    .ok_or_else(|| input(format!("unknown token {t:?}")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_sets_are_disjoint() {
        let v = Vocabulary::default();
        let mut seen = vec![0u8; v.len()];
        for id in v.structural_ids() {
            seen[id] += 1;
        }
        for id in v.choice_ids().chain(v.filler_ids()) {
            seen[id] += 1;
        }
        seen[v.eos()] += 1;
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(v.len(), 4 + 9 + 4 + 1);
    }

    #[test]
    fn render_drops_eos() {
        let v = Vocabulary::default();
        let f1 = v.id("f1").unwrap();
        let ids = vec![
            v.think_open(),
            f1,
            v.think_close(),
            v.answer_open(),
            v.choice_id('A').unwrap(),
            v.answer_close(),
            v.eos(),
        ];
        assert_eq!(
            v.render(&ids).unwrap(),
            "<think> f1 </think> <answer> A </answer>"
        );
        assert_eq!(v.render(&[]).unwrap(), "");
        assert_eq!(v.tokenize(&v.render(&ids).unwrap()).unwrap(), ids[..6]);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Vocabulary::new(0, 4).is_err());
        assert!(Vocabulary::new(10, 4).is_err());
        assert!(Vocabulary::new(4, 0).is_err());
        assert!(Vocabulary::default().tokenize("<think> banana").is_err());
    }

    #[test]
    fn serde_keeps_shape() {
        let v = Vocabulary::new(4, 2).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
