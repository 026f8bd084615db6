//! Probe records, RSSI traces and the bit sequences derived from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Receiver sensitivity floor of the radio.
pub const RSSI_MIN_DBM: i32 = -148;
pub const RSSI_MAX_DBM: i32 = 0;

pub const TRACE_CSV_HEADER: &str = "seq,timestamp_ms,rssi_dbm,freq_hz";

/// One received probe frame as seen by the measuring device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub seq_index: u64,
    pub timestamp_ms: u64,
    pub rssi_dbm: i32,
    pub freq_hz: u64,
}

/// The RSSI observations of one device, ordered by packet sequence index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RssiTrace {
    pub device_id: String,
    records: Vec<ProbeRecord>,
}

impl RssiTrace {
    /// Builds a trace, sorting by sequence index and rejecting duplicate
    /// indices or out-of-range RSSI values.
    pub fn new(device_id: impl Into<String>, mut records: Vec<ProbeRecord>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if !(RSSI_MIN_DBM..=RSSI_MAX_DBM).contains(&r.rssi_dbm) {
                return Err(Error::RssiRange {
                    line: i + 2,
                    rssi: r.rssi_dbm,
                });
            }
        }
        records.sort_by_key(|r| r.seq_index);
        if let Some(w) = records
            .windows(2)
            .find(|w| w[0].seq_index == w[1].seq_index)
        {
            return Err(Error::DuplicateIndex {
                line: 0,
                seq: w[0].seq_index,
            });
        }
        Ok(Self {
            device_id: device_id.into(),
            records,
        })
    }

    pub fn empty(device_id: impl Into<String>) -> Self {
        Self {
            device_id: device_id.into(),
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[ProbeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rssi(&self) -> Vec<i32> {
        self.records.iter().map(|r| r.rssi_dbm).collect()
    }

    /// Parses the trace CSV format (`seq,timestamp_ms,rssi_dbm,freq_hz`).
    /// Both LF and CRLF line endings are accepted.
    pub fn parse_csv(device_id: impl Into<String>, text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((_, l)) => break l,
                None => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: "missing header".into(),
                    })
                }
            }
        };
        if header.trim().trim_start_matches('\u{feff}') != TRACE_CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `{TRACE_CSV_HEADER}`"),
            });
        }

        let mut records = Vec::new();
        let mut seen = std::collections::HashMap::new();
        for (idx, raw) in lines {
            let line = idx + 1;
            let row = raw.trim();
            if row.is_empty() {
                continue;
            }
            let fields: Vec<&str> = row.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 4 fields, found {}", fields.len()),
                });
            }
            let field = |i: usize, name: &str| -> Result<i64> {
                fields[i].parse::<i64>().map_err(|e| Error::Parse {
                    line,
                    msg: format!("{name}: {e}"),
                })
            };
            let seq = field(0, "seq")?;
            let ts = field(1, "timestamp_ms")?;
            let rssi = field(2, "rssi_dbm")?;
            let freq = field(3, "freq_hz")?;
            if seq < 0 || ts < 0 {
                return Err(Error::Parse {
                    line,
                    msg: "seq and timestamp_ms must be non-negative".into(),
                });
            }
            if freq <= 0 {
                return Err(Error::Parse {
                    line,
                    msg: "freq_hz must be positive".into(),
                });
            }
            if !(RSSI_MIN_DBM as i64..=RSSI_MAX_DBM as i64).contains(&rssi) {
                return Err(Error::RssiRange {
                    line,
                    rssi: rssi.clamp(i32::MIN as i64, i32::MAX as i64) as i32,
                });
            }
            if seen.insert(seq, line).is_some() {
                return Err(Error::DuplicateIndex {
                    line,
                    seq: seq as u64,
                });
            }
            records.push(ProbeRecord {
                seq_index: seq as u64,
                timestamp_ms: ts as u64,
                rssi_dbm: rssi as i32,
                freq_hz: freq as u64,
            });
        }
        records.sort_by_key(|r| r.seq_index);
        Ok(Self {
            device_id: device_id.into(),
            records,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.records.len() + 1));
        out.push_str(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.seq_index, r.timestamp_ms, r.rssi_dbm, r.freq_hz
            ));
        }
        out
    }
}

/// RSSI pairs of the probe rounds that both sides observed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedProbes {
    pub indices: Vec<u64>,
    pub x_a: Vec<i32>,
    pub x_b: Vec<i32>,
}

impl AlignedProbes {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Pairs the two sides of each bidirectional probe by sequence index. Rounds
/// missing on either side are excluded.
pub fn align_traces(a: &RssiTrace, b: &RssiTrace) -> AlignedProbes {
    let mut out = AlignedProbes::default();
    let (ra, rb) = (a.records(), b.records());
    let (mut i, mut j) = (0, 0);
    while i < ra.len() && j < rb.len() {
        match ra[i].seq_index.cmp(&rb[j].seq_index) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.indices.push(ra[i].seq_index);
                out.x_a.push(ra[i].rssi_dbm);
                out.x_b.push(rb[j].rssi_dbm);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// An ordered sequence of key bits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitSeq(Vec<bool>);

impl BitSeq {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Bitwise XOR. Panics if lengths differ.
    pub fn xor(&self, other: &BitSeq) -> BitSeq {
        assert_eq!(
            self.len(),
            other.len(),
            "xor of unequal-length bit sequences"
        );
        BitSeq(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }

    pub fn hamming(&self, other: &BitSeq) -> Option<usize> {
        (self.len() == other.len())
            .then(|| self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count())
    }

    pub fn complement(&self) -> BitSeq {
        BitSeq(self.0.iter().map(|b| !b).collect())
    }

    pub fn reversed(&self) -> BitSeq {
        BitSeq(self.0.iter().rev().copied().collect())
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> BitSeq {
        BitSeq(self.0[range].to_vec())
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BitSeq>) -> BitSeq {
        BitSeq(
            parts
                .into_iter()
                .flat_map(|p| p.0.iter().copied())
                .collect(),
        )
    }

    /// Packs bits MSB-first; the final byte is zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|c| {
                c.iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)))
            })
            .collect()
    }

    /// Inverse of [`BitSeq::to_bytes`]; padding bits must be zero.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<BitSeq> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::LengthMismatch {
                expected: len.div_ceil(8),
                got: bytes.len(),
            });
        }
        let bits: Vec<bool> = (0..bytes.len() * 8)
            .map(|i| bytes[i / 8] >> (7 - i % 8) & 1 == 1)
            .collect();
        if bits[len..].iter().any(|&b| b) {
            return Err(Error::Parse {
                line: 0,
                msg: "non-zero padding bits".into(),
            });
        }
        Ok(BitSeq(bits[..len].to_vec()))
    }
}

impl From<Vec<bool>> for BitSeq {
    fn from(v: Vec<bool>) -> Self {
        Self(v)
    }
}

impl FromIterator<bool> for BitSeq {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl fmt::Display for BitSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitSeq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse {
                    line: 0,
                    msg: format!("bit string: unexpected {c:?} at offset {i}"),
                }),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitSeq)
    }
}

impl Serialize for BitSeq {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitSeq {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
