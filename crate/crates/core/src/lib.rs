//! Physical-layer secret key generation from reciprocal RSSI measurements.
//!
//! The crate covers the whole key-agreement pipeline between two radios
//! that probe each other:
//!
//! * [`model`]: probe records, trace CSV parsing and bidirectional alignment.
//! * [`quantizer`]: differential quantization with an RSSI resolution guard.
//! * [`coding`]: binary BCH codes over GF(2^m).
//! * [`sketch`]: code-offset secure sketch reconciliation and hash-based
//!   privacy amplification.
//! * [`metrics`]: cross-correlation, key disagreement ratio, plug-in mutual
//!   information and the secret-key capacity lower bound.
//! * [`randomness`]: nine tests from the NIST SP 800-22 battery.
//! * [`sim`]: a seeded LoRa probing simulator with LoRaWAN channel hopping.
//! * [`pipeline`]: staged orchestration writing the on-disk artifacts.

pub mod coding;
pub mod error;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod quantizer;
pub mod randomness;
pub mod sim;
pub mod sketch;

pub use coding::{BchCode, BlockCode, CodePreset, DecodeFailure, GfField};
pub use error::{Error, Result};
pub use metrics::{CapacityBound, MetricsReport};
pub use model::{AlignedProbes, BitSeq, ProbeRecord, RssiTrace};
pub use pipeline::{PipelineConfig, PipelineReport};
pub use quantizer::{QuantizationResult, QuantizerConfig};
pub use randomness::{NistReport, NistTest, TestResult};
pub use sim::{LinkEvent, PathProfile, SimConfig};
pub use sketch::{KeyMaterial, KeyStage, SketchMessage};
