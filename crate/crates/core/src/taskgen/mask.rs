//! Binary defect masks: portable bitmap files and inline run-length strings.
//!
//! Run-length strings look like `HxW:r0,r1,...`. Runs alternate starting with zeros and cover
//! the mask in row-major order; a leading `0` run is allowed when the first pixel is set.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(input(format!("mask must be non-empty, got {height}x{width}")));
        }
        Ok(Mask {
            height,
            width,
            bits: vec![false; height * width],
        })
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        let mut m = Mask::zeros(height, width)?;
        if bits.len() != height * width {
            return Err(input(format!(
                "mask {height}x{width} needs {} pixels, got {}",
                height * width,
                bits.len()
            )));
        }
        m.bits = bits;
        Ok(m)
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.width + j]
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        self.bits[i * self.width + j] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_rle(&self) -> String {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0usize;
        for &b in &self.bits {
            if b == current {
                len += 1;
            } else {
                runs.push(len.to_string());
                current = b;
                len = 1;
            }
        }
        runs.push(len.to_string());
        format!("{}x{}:{}", self.height, self.width, runs.join(","))
    }

    pub fn from_rle(s: &str) -> Result<Self> {
        let bad = || input(format!("malformed run-length mask {s:?}"));
        let (shape, runs) = s.trim().split_once(':').ok_or_else(bad)?;
        let (h, w) = shape.split_once('x').ok_or_else(bad)?;
        let h: usize = h.parse().map_err(|_| bad())?;
        let w: usize = w.parse().map_err(|_| bad())?;
        let mut bits = Vec::with_capacity(h * w);
        let mut value = false;
        for r in runs.split(',').filter(|r| !r.is_empty()) {
            let n: usize = r.trim().parse().map_err(|_| bad())?;
            bits.extend(std::iter::repeat(value).take(n));
            value = !value;
        }
        if bits.len() != h * w {
            return Err(bad());
        }
        Mask::from_bits(h, w, bits)
    }

    /// Parse a portable bitmap (`P1` plain or `P4` raw). `1` is a defect pixel.
    pub fn from_pbm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let magic = next_token(bytes, &mut pos).ok_or_else(|| input("empty bitmap"))?;
        let w: usize = parse_num(next_token(bytes, &mut pos))?;
        let h: usize = parse_num(next_token(bytes, &mut pos))?;
        match magic {
            b"P1" => {
                let mut bits = Vec::with_capacity(h * w);
                while bits.len() < h * w {
                    skip_space(bytes, &mut pos);
                    match bytes.get(pos) {
                        Some(b'0') => bits.push(false),
                        Some(b'1') => bits.push(true),
                        _ => return Err(input("truncated or invalid P1 bitmap")),
                    }
                    pos += 1;
                }
                Mask::from_bits(h, w, bits)
            }
            b"P4" => {
                pos += 1; // single whitespace after the header
                let row_bytes = w.div_ceil(8);
                let body = bytes
                    .get(pos..pos + row_bytes * h)
                    .ok_or_else(|| input("truncated P4 bitmap"))?;
                let bits = (0..h)
                    .flat_map(|i| {
                        (0..w).map(move |j| body[i * row_bytes + j / 8] & (0x80 >> (j % 8)) != 0)
                    })
                    .collect();
                Mask::from_bits(h, w, bits)
            }
            _ => Err(input("unsupported bitmap: expected P1 or P4")),
        }
    }

    pub fn load_pbm(path: &Path) -> Result<Self> {
        Mask::from_pbm(&std::fs::read(path)?)
    }

    pub fn to_pbm_plain(&self) -> String {
        let mut out = format!("P1\n{} {}\n", self.width, self.height);
        for i in 0..self.height {
            let row: Vec<&str> = (0..self.width)
                .map(|j| if self.get(i, j) { "1" } else { "0" })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

fn skip_space(bytes: &[u8], pos: &mut usize) {
    while let Some(&b) = bytes.get(*pos) {
        if b == b'#' {
            while bytes.get(*pos).is_some_and(|&c| c != b'\n') {
                *pos += 1;
            }
        } else if b.is_ascii_whitespace() {
            *pos += 1;
        } else {
            break;
        }
    }
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    skip_space(bytes, pos);
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

fn parse_num(tok: Option<&[u8]>) -> Result<usize> {
    tok.and_then(|t| std::str::from_utf8(t).ok())
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| input("bad bitmap dimensions"))
}
