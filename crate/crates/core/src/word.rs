use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Longest pattern accepted by the counting and density routines.
pub const MAX_PATTERN_LEN: usize = 8;

/// A finite word over {0,1}. Used both for short patterns and long host sequences.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BinaryWord(Vec<u8>);

impl BinaryWord {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::invalid(format!("symbol {b} is not 0 or 1")));
        }
        Ok(BinaryWord(bits))
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        BinaryWord(bits.into_iter().map(u8::from).collect())
    }

    /// Word of length `len` built from the low bits of `code`, most significant first.
    pub fn from_index(code: u64, len: usize) -> Self {
        BinaryWord((0..len).rev().map(|i| ((code >> i) & 1) as u8).collect())
    }

    pub fn repeat_symbol(symbol: u8, len: usize) -> Self {
        debug_assert!(symbol <= 1);
        BinaryWord(vec![symbol; len])
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn zeros(&self) -> usize {
        self.len() - self.ones()
    }

    pub fn is_constant(&self) -> bool {
        self.0.windows(2).all(|w| w[0] == w[1])
    }

    pub fn complement(&self) -> Self {
        BinaryWord(self.0.iter().map(|b| 1 - b).collect())
    }

    pub fn reversed(&self) -> Self {
        BinaryWord(self.0.iter().rev().copied().collect())
    }

    pub fn concat(&self, other: &BinaryWord) -> Self {
        let mut bits = self.0.clone();
        bits.extend_from_slice(&other.0);
        BinaryWord(bits)
    }

    /// Maximal runs of equal symbols as (symbol, run length).
    pub fn runs(&self) -> Vec<(u8, usize)> {
        let mut out: Vec<(u8, usize)> = Vec::new();
        for &b in &self.0 {
            match out.last_mut() {
                Some((s, n)) if *s == b => *n += 1,
                _ => out.push((b, 1)),
            }
        }
        out
    }

    /// Each symbol repeated `k` times.
    pub fn stretched(&self, k: usize) -> Self {
        BinaryWord(self.0.iter().flat_map(|&b| std::iter::repeat_n(b, k)).collect())
    }

    /// All words of length `len` in lexicographic order.
    pub fn all_of_len(len: usize) -> impl Iterator<Item = BinaryWord> {
        (0..(1u64 << len)).map(move |c| BinaryWord::from_index(c, len))
    }
}

impl FromStr for BinaryWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::invalid(format!("unexpected character {other:?} in binary word"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(BinaryWord)
    }
}

impl TryFrom<String> for BinaryWord {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BinaryWord> for String {
    fn from(w: BinaryWord) -> String {
        w.to_string()
    }
}

impl fmt::Display for BinaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BinaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryWord({self})")
    }
}

/// Shorthand used heavily in tests: panics on malformed input.
pub fn w(s: &str) -> BinaryWord {
    s.parse().expect("malformed binary word literal")
}
