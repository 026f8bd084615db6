//! Differential quantization of RSSI series.
//!
//! Each comparison position `i` (1-based, `1..=N-1`) looks at the step from
//! sample `i` to sample `i + 1`. A rise larger than `epsilon` yields a 1, a
//! fall larger than `epsilon` yields a 0, and anything in between is dropped.
//! The positions that produced bits are published so both sides can keep
//! only the positions they have in common.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BitSeq, RssiTrace};

pub const DEFAULT_EPSILON: u32 = 2;
pub const DEFAULT_CALIBRATION_QUANTILE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    /// RSSI resolution in dB; steps within `±epsilon` are dropped.
    pub epsilon: u32,
    /// Compare against the last sample that produced a bit instead of the
    /// immediately preceding sample. Off by default.
    #[serde(default)]
    pub hold_last_kept: bool,
}

impl QuantizerConfig {
    pub fn new(epsilon: u32) -> Self {
        Self {
            epsilon,
            hold_last_kept: false,
        }
    }
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self::new(DEFAULT_EPSILON)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizationResult {
    pub bits: BitSeq,
    pub kept_indices: Vec<usize>,
    pub dropped_indices: Vec<usize>,
    /// Number of samples N of the quantized series.
    pub series_len: usize,
}

pub fn differential_quantize(x: &[i32], cfg: QuantizerConfig) -> Result<QuantizationResult> {
    if x.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: x.len(),
        });
    }
    let eps = i64::from(cfg.epsilon);
    let mut bits = BitSeq::default();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut reference = i64::from(x[0]);
    for i in 1..x.len() {
        let next = i64::from(x[i]);
        if !cfg.hold_last_kept {
            reference = i64::from(x[i - 1]);
        }
        if next > reference + eps {
            bits.push(true);
            kept.push(i);
            reference = next;
        } else if next < reference - eps {
            bits.push(false);
            kept.push(i);
            reference = next;
        } else {
            dropped.push(i);
        }
    }
    Ok(QuantizationResult {
        bits,
        kept_indices: kept,
        dropped_indices: dropped,
        series_len: x.len(),
    })
}

/// Keeps only the bits at comparison positions listed in `keep`, which must
/// be sorted. Positions absent from `res` are ignored.
pub fn retain_positions(res: &QuantizationResult, keep: &[usize]) -> BitSeq {
    let mut out = BitSeq::default();
    let mut j = 0;
    for (pos, bit) in res.kept_indices.iter().zip(res.bits.iter()) {
        while j < keep.len() && keep[j] < *pos {
            j += 1;
        }
        if j < keep.len() && keep[j] == *pos {
            out.push(bit);
        }
    }
    out
}

pub fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Reduces both parties' bit strings to the comparison positions kept by
/// both of them. Returns the two bit strings and the shared positions.
pub fn merge_kept_indices(
    res_a: &QuantizationResult,
    res_b: &QuantizationResult,
) -> Result<(BitSeq, BitSeq, Vec<usize>)> {
    if res_a.series_len != res_b.series_len {
        return Err(Error::Alignment(format!(
            "quantized series have {} and {} samples",
            res_a.series_len, res_b.series_len
        )));
    }
    let common = intersect_sorted(&res_a.kept_indices, &res_b.kept_indices);
    Ok((
        retain_positions(res_a, &common),
        retain_positions(res_b, &common),
        common,
    ))
}

/// Chooses the RSSI resolution from a static capture: the ceiling of the
/// `quantile` of absolute adjacent differences (nearest-rank definition).
pub fn calibrate_epsilon(static_trace: &RssiTrace, quantile: f64) -> Result<u32> {
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::Config(format!("quantile {quantile} not in (0, 1]")));
    }
    let x = static_trace.rssi();
    if x.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: x.len(),
        });
    }
    let mut diffs: Vec<u32> = x.windows(2).map(|w| w[1].abs_diff(w[0])).collect();
    diffs.sort_unstable();
    // Guard against 0.95 * 20 landing a hair above 19.
    let rank = ((quantile * diffs.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(diffs[rank.min(diffs.len()) - 1])
}

/// Mean-threshold baseline: 1 for samples strictly above the series mean.
pub fn mean_quantize(x: &[i32]) -> Result<BitSeq> {
    if x.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let sum: i64 = x.iter().map(|&v| i64::from(v)).sum();
    let n = x.len() as i64;
    // x > sum/n  <=>  x*n > sum, exact in integers.
    Ok(x.iter().map(|&v| i64::from(v) * n > sum).collect())
}

pub fn indices_to_csv(indices: &[usize]) -> String {
    indices.iter().map(|i| format!("{i}\n")).collect()
}

pub fn indices_from_csv(text: &str) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line.parse::<usize>().map_err(|e| Error::Parse {
            line: n + 1,
            msg: format!("index: {e}"),
        })?;
        if out.last().is_some_and(|&last| last >= v) {
            return Err(Error::Parse {
                line: n + 1,
                msg: "indices must be strictly increasing".into(),
            });
        }
        out.push(v);
    }
    Ok(out)
}
