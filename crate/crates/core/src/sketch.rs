//! Code-offset secure sketch reconciliation and hash-based privacy
//! amplification.
//!
//! Alice splits her key into n-bit blocks, masks each with a random codeword
//! and publishes the masked blocks. Bob XORs his own key into them, decodes,
//! and unmasks with the public blocks again. Every block leaks its n-k parity
//! bits, which amplification must later compress away.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coding::BlockCode;
use crate::error::{Error, Result};
use crate::model::BitSeq;

pub const DIGEST_BITS: usize = 256;
pub const DEFAULT_KEY_BITS: usize = 128;

const CONFIRM_DOMAIN: &[u8] = b"rssikey/confirm/v1";

/// The public reconciliation message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchMessage {
    pub code_id: String,
    pub block_count: usize,
    pub pad_len: usize,
    /// Masked key blocks, MSB-first packed, hex-encoded on the wire.
    #[serde(with = "hex_blocks")]
    pub s_blocks: Vec<Vec<u8>>,
}

impl SketchMessage {
    /// Unpacks block `i` as an `n`-bit sequence.
    pub fn block(&self, i: usize, n: usize) -> Result<BitSeq> {
        BitSeq::from_bytes(&self.s_blocks[i], n)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sketch serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: SketchMessage = serde_json::from_str(text)?;
        if s.s_blocks.len() != s.block_count {
            return Err(Error::LengthMismatch {
                expected: s.block_count,
                got: s.s_blocks.len(),
            });
        }
        Ok(s)
    }
}

mod hex_blocks {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(blocks: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(blocks.iter().map(hex::encode))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|h| hex::decode(h).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyStage {
    Quantized,
    Reconciled,
    Amplified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMaterial {
    pub bits: BitSeq,
    pub stage: KeyStage,
}

fn blocks_of(key: &BitSeq, n: usize) -> (Vec<BitSeq>, usize) {
    let block_count = key.len().div_ceil(n);
    let pad_len = block_count * n - key.len();
    let mut padded = key.as_slice().to_vec();
    padded.resize(block_count * n, false);
    let blocks = padded.chunks(n).map(|c| BitSeq::new(c.to_vec())).collect();
    (blocks, pad_len)
}

/// Builds the sketch from explicitly chosen codewords, one per block.
pub fn sketch_with_codewords<C: BlockCode>(
    k_a: &BitSeq,
    codewords: &[BitSeq],
    code: &C,
) -> Result<SketchMessage> {
    if k_a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (blocks, pad_len) = blocks_of(k_a, code.n());
    if codewords.len() != blocks.len() {
        return Err(Error::LengthMismatch {
            expected: blocks.len(),
            got: codewords.len(),
        });
    }
    let s_blocks = blocks
        .iter()
        .zip(codewords)
        .map(|(b, c)| {
            if c.len() != code.n() {
                return Err(Error::LengthMismatch {
                    expected: code.n(),
                    got: c.len(),
                });
            }
            Ok(b.xor(c).to_bytes())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SketchMessage {
        code_id: code.id().to_string(),
        block_count: blocks.len(),
        pad_len,
        s_blocks,
    })
}

/// Masks each block of `k_a` with a uniformly drawn codeword.
pub fn make_sketch<C: BlockCode, R: Rng + ?Sized>(
    k_a: &BitSeq,
    code: &C,
    rng: &mut R,
) -> Result<SketchMessage> {
    let block_count = k_a.len().div_ceil(code.n());
    let codewords = (0..block_count)
        .map(|_| {
            let msg: BitSeq = (0..code.k()).map(|_| rng.random::<bool>()).collect();
            code.encode(&msg)
        })
        .collect::<Result<Vec<_>>>()?;
    sketch_with_codewords(k_a, &codewords, code)
}

/// Corrects `k_b` towards Alice's key using the public sketch.
pub fn recover_key<C: BlockCode>(
    k_b: &BitSeq,
    sketch: &SketchMessage,
    code: &C,
) -> Result<KeyMaterial> {
    if sketch.code_id != code.id() {
        return Err(Error::Config(format!(
            "sketch was built with `{}` but `{}` was selected",
            sketch.code_id,
            code.id()
        )));
    }
    let n = code.n();
    if sketch.s_blocks.len() != sketch.block_count || sketch.pad_len >= n.max(1) {
        return Err(Error::Config("malformed sketch message".into()));
    }
    let expected = sketch.block_count * n - sketch.pad_len;
    if k_b.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            got: k_b.len(),
        });
    }
    let (blocks, _) = blocks_of(k_b, n);
    let mut out = Vec::with_capacity(blocks.len());
    let mut failed = Vec::new();
    for (i, b) in blocks.iter().enumerate() {
        let s = sketch.block(i, n)?;
        match code.decode(&b.xor(&s)) {
            Ok(d) => out.push(d.codeword.xor(&s)),
            Err(_) => failed.push(i),
        }
    }
    if !failed.is_empty() {
        return Err(Error::Reconcile {
            failed_blocks: failed,
        });
    }
    let joined = BitSeq::concat(&out);
    Ok(KeyMaterial {
        bits: joined.slice(0..expected),
        stage: KeyStage::Reconciled,
    })
}

/// Key bits remaining after discounting n-k leaked parity bits per block.
pub fn effective_entropy(key_len: usize, block_count: usize, n: usize, k: usize) -> i64 {
    key_len as i64 - (block_count * (n - k)) as i64
}

fn canonical_bytes(key: &BitSeq) -> Vec<u8> {
    let mut out = (key.len() as u64).to_be_bytes().to_vec();
    out.extend(key.to_bytes());
    out
}

/// First `out_len_bits` of SHA-256(salt || len || packed key).
pub fn amplify(key: &BitSeq, out_len_bits: usize, salt: &[u8]) -> Result<KeyMaterial> {
    if out_len_bits > DIGEST_BITS {
        return Err(Error::UnsupportedLength {
            requested: out_len_bits,
            max: DIGEST_BITS,
        });
    }
    if key.len() < out_len_bits {
        return Err(Error::EntropyBudget {
            available: key.len() as i64,
            requested: out_len_bits,
        });
    }
    let mut h = Sha256::new();
    h.update(salt);
    h.update(canonical_bytes(key));
    let digest = h.finalize();
    let bits = BitSeq::from_bytes(digest.as_slice(), DIGEST_BITS)?.slice(0..out_len_bits);
    Ok(KeyMaterial {
        bits,
        stage: KeyStage::Amplified,
    })
}

/// Hash exchanged to confirm both sides hold the same reconciled key.
/// Domain-separated from [`amplify`].
pub fn confirmation_tag(key: &BitSeq, salt: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(CONFIRM_DOMAIN);
    h.update(salt);
    h.update(canonical_bytes(key));
    hex::encode(h.finalize().as_slice())
}
