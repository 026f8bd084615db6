//! Binary block codes used by the secure sketch.

mod bch;
mod gf;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bch::{bch_decode, bch_encode, BchCode};
pub use gf::{gf_mul, GfField};

use crate::error::{Error, Result};
use crate::model::BitSeq;

/// A successfully decoded word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub codeword: BitSeq,
    /// Bit positions that were flipped, ascending.
    pub error_positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeFailure {
    #[error("word has {got} bits, code length is {expected}")]
    Length { expected: usize, got: usize },
    #[error("error locator degree {degree} exceeds t={t}")]
    LocatorDegree { degree: usize, t: usize },
    #[error("error locator of degree {expected} has {found} roots in the field")]
    RootCount { expected: usize, found: usize },
    #[error("corrected word still has non-zero syndromes")]
    ResidualSyndrome,
}

/// A binary (n, k) code correcting up to t errors per block.
pub trait BlockCode {
    fn id(&self) -> &str;
    fn n(&self) -> usize;
    fn k(&self) -> usize;
    fn t(&self) -> usize;
    fn encode(&self, msg: &BitSeq) -> Result<BitSeq>;
    fn decode(&self, word: &BitSeq) -> std::result::Result<Decoded, DecodeFailure>;
}

/// Named codes selectable from configuration and the command line.
///
/// `bch15_t3` is the length-15 triple-error-correcting code, BCH(15,5,3):
/// it corrects 3 of every 15 bits (20%).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodePreset {
    #[serde(rename = "bch15_t3")]
    Bch15T3,
    #[serde(rename = "bch31_t3")]
    Bch31T3,
    #[serde(rename = "bch63_t5")]
    Bch63T5,
}

impl CodePreset {
    pub const ALL: [CodePreset; 3] = [
        CodePreset::Bch15T3,
        CodePreset::Bch31T3,
        CodePreset::Bch63T5,
    ];

    pub fn id(self) -> &'static str {
        match self {
            CodePreset::Bch15T3 => "bch15_t3",
            CodePreset::Bch31T3 => "bch31_t3",
            CodePreset::Bch63T5 => "bch63_t5",
        }
    }

    fn params(self) -> (u32, usize) {
        match self {
            CodePreset::Bch15T3 => (4, 3),
            CodePreset::Bch31T3 => (5, 3),
            CodePreset::Bch63T5 => (6, 5),
        }
    }

    pub fn build(self) -> BchCode {
        let (m, t) = self.params();
        BchCode::new(m, t).expect("preset parameters are valid")
    }
}

impl fmt::Display for CodePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CodePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CodePreset::ALL
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown code preset `{s}`")))
    }
}
