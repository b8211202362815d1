//! Policy checkpoints.
//!
//! Binary layout (little endian): magic `DGRP`, format version `u32`, vocabulary size `u32`,
//! max length `u32`, context count `u32`, context mode `u8`, then the logits as `f64`
//! in row-major `[context][slot][position][token]` order. Files ending in `.json` use the
//! serde representation of [`PolicyParams`] instead.

use std::fs;
use std::path::Path;

use super::params::{ContextMode, PolicyParams};
use crate::error::{input, Result};

const MAGIC: &[u8; 4] = b"DGRP";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4 + 1;

pub fn to_bytes(params: &PolicyParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.logits().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for n in [params.vocab_size(), params.max_len(), params.num_contexts()] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.push(params.mode().code());
    for x in params.logits() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<PolicyParams> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(input("not a policy checkpoint"));
    }
    let word = |i: usize| {
        let at = 4 + 4 * i;
        u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
    };
    if word(0) != VERSION {
        return Err(input(format!("unsupported checkpoint version {}", word(0))));
    }
    let (v, t, c) = (word(1) as usize, word(2) as usize, word(3) as usize);
    let mode = ContextMode::from_code(bytes[HEADER_LEN - 1])
        .ok_or_else(|| input("unknown context mode in checkpoint"))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() % 8 != 0 {
        return Err(input("checkpoint body is not a whole number of f64 values"));
    }
    let logits = body
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    PolicyParams::from_logits(v, t, c, mode, logits)
}

pub fn save(params: &PolicyParams, path: &Path) -> Result<()> {
    if is_json(path) {
        fs::write(path, serde_json::to_vec(params)?)?;
    } else {
        fs::write(path, to_bytes(params))?;
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<PolicyParams> {
    let bytes = fs::read(path)?;
    if is_json(path) {
        let p: PolicyParams = serde_json::from_slice(&bytes)?;
        // re-validate through the checked constructor
        PolicyParams::from_logits(
            p.vocab_size(),
            p.max_len(),
            p.num_contexts(),
            p.mode(),
            p.logits().to_vec(),
        )
    } else {
        from_bytes(&bytes)
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}
