//! Staged key-agreement pipeline with on-disk artifacts.
//!
//! Each stage reads the files written by the previous ones, so stages can be
//! run one by one (or fed externally captured traces) and still produce the
//! same report as [`run_pipeline`].
//!
//! | stage     | reads                              | writes                          |
//! |-----------|------------------------------------|---------------------------------|
//! | simulate  | config                             | `trace_{a,b,e}.csv`             |
//! | quantize  | `trace_{a,b}.csv`                  | `kept_{a,b}.csv`, `bits_{a,b}.txt` |
//! | reconcile | `bits_{a,b}.txt`                   | `sketch.json`                   |
//! | amplify   | `bits_{a,b}.txt`, `sketch.json`    | `keys.json`                     |
//! | evaluate  | all of the above                   | `metrics.json`, `nist.json`, `report.json` |

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coding::{BlockCode, CodePreset};
use crate::error::{Error, Result};
use crate::metrics::{
    capacity_bound, kdr, mi_plugin, pearson_rho_i32, MetricsReport, DEFAULT_MI_BINS,
};
use crate::model::{align_traces, AlignedProbes, BitSeq, RssiTrace};
use crate::quantizer::{
    differential_quantize, indices_from_csv, indices_to_csv, intersect_sorted, merge_kept_indices,
    retain_positions, QuantizerConfig, DEFAULT_EPSILON,
};
use crate::randomness::{run_suite, NistReport};
use crate::sim::{pair_traces, pair_uplink_ack, simulate_probing, stream_rng, SimConfig, Stream};
use crate::sketch::{
    amplify, confirmation_tag, effective_entropy, make_sketch, recover_key, SketchMessage,
};

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_KEY_BITS: usize = 128;
pub const DEFAULT_SALT: &str = "rssikey/v1";

/// Artifact file names inside the output directory.
pub mod files {
    pub const TRACE_A: &str = "trace_a.csv";
    pub const TRACE_B: &str = "trace_b.csv";
    pub const TRACE_E: &str = "trace_e.csv";
    pub const KEPT_A: &str = "kept_a.csv";
    pub const KEPT_B: &str = "kept_b.csv";
    pub const BITS_A: &str = "bits_a.txt";
    pub const BITS_B: &str = "bits_b.txt";
    pub const SKETCH: &str = "sketch.json";
    pub const KEYS: &str = "keys.json";
    pub const METRICS: &str = "metrics.json";
    pub const NIST: &str = "nist.json";
    pub const REPORT: &str = "report.json";
}

fn default_epsilon() -> u32 {
    DEFAULT_EPSILON
}
fn default_code() -> CodePreset {
    CodePreset::Bch15T3
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_key_bits() -> usize {
    DEFAULT_KEY_BITS
}
fn default_salt() -> String {
    DEFAULT_SALT.to_string()
}
fn default_bins() -> usize {
    DEFAULT_MI_BINS
}

/// Full pipeline configuration. In TOML the simulator settings live in a
/// `[sim]` table; a bare simulator file (such as a shipped preset) is also
/// accepted and gets defaults for everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: u32,
    #[serde(default)]
    pub hold_last_kept: bool,
    #[serde(default = "default_code")]
    pub code: CodePreset,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_key_bits")]
    pub key_bits: usize,
    #[serde(default = "default_salt")]
    pub salt: String,
    #[serde(default = "default_bins")]
    pub mi_bins: usize,
    pub sim: SimConfig,
}

/// Command-line style overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epsilon: Option<u32>,
    pub code: Option<CodePreset>,
    pub alpha: Option<f64>,
    pub key_bits: Option<usize>,
}

impl PipelineConfig {
    pub fn new(sim: SimConfig) -> Self {
        PipelineConfig {
            epsilon: DEFAULT_EPSILON,
            hold_last_kept: false,
            code: default_code(),
            alpha: DEFAULT_ALPHA,
            key_bits: DEFAULT_KEY_BITS,
            salt: default_salt(),
            mi_bins: DEFAULT_MI_BINS,
            sim,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text)?;
        let cfg = if table.contains_key("sim") {
            toml::from_str::<PipelineConfig>(text)?
        } else {
            PipelineConfig::new(toml::from_str::<SimConfig>(text)?)
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        PipelineConfig::from_toml(&read(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, ov: &Overrides) -> Result<()> {
        if let Some(seed) = ov.seed {
            self.sim.seed = seed;
        }
        if let Some(e) = ov.epsilon {
            self.epsilon = e;
        }
        if let Some(c) = ov.code {
            self.code = c;
        }
        if let Some(a) = ov.alpha {
            self.alpha = a;
        }
        if let Some(k) = ov.key_bits {
            self.key_bits = k;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.key_bits == 0 {
            return Err(Error::Config("key_bits must be positive".into()));
        }
        if self.mi_bins < 2 {
            return Err(Error::Config("mi_bins must be at least 2".into()));
        }
        Ok(())
    }

    pub fn quantizer(&self) -> QuantizerConfig {
        QuantizerConfig {
            epsilon: self.epsilon,
            hold_last_kept: self.hold_last_kept,
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::new(SimConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReconcileStatus {
    Success,
    Failure { failed_blocks: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplificationStatus {
    Done,
    /// Effective entropy below the requested key length.
    Refused,
    /// Not attempted because the keys did not agree.
    Skipped,
}

impl AmplificationStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AmplificationStatus::Done => "done",
            AmplificationStatus::Refused => "refused",
            AmplificationStatus::Skipped => "skipped",
        }
    }
}

/// Contents of `keys.json`: the outcome of reconciliation and amplification
/// for both parties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeysFile {
    pub code_id: String,
    pub key_length: usize,
    pub block_count: usize,
    pub effective_entropy_bits: i64,
    pub reconcile_status: ReconcileStatus,
    /// Confirmation hashes of the reconciled keys; Bob's is absent when
    /// his reconciliation failed.
    pub confirm_tag_a: String,
    pub confirm_tag_b: Option<String>,
    pub keys_match: bool,
    pub amplification: AmplificationStatus,
    pub final_key_a: Option<String>,
    pub final_key_b: Option<String>,
}

/// Everything `run` reports; serialized as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config_echo: PipelineConfig,
    pub probe_pairs: usize,
    /// Key bits kept per aligned probe pair.
    pub bit_yield: f64,
    pub key_length: usize,
    pub effective_entropy_bits: i64,
    pub metrics: MetricsReport,
    /// Randomness of Alice's reconciled key before amplification.
    pub nist: NistReport,
    pub reconcile_status: ReconcileStatus,
    pub keys_match: bool,
    pub amplification: AmplificationStatus,
    /// Disagreement between Eve's and Alice's quantized bits; absent without an Eve trace.
    pub eve_kdr: Option<f64>,
}

impl PipelineReport {
    pub fn exit_code(&self) -> i32 {
        keys_exit_code(self.keys_match, self.amplification)
    }
}

fn keys_exit_code(keys_match: bool, amp: AmplificationStatus) -> i32 {
    match (keys_match, amp) {
        (true, AmplificationStatus::Done) => 0,
        (_, AmplificationStatus::Refused) => 3,
        _ => 2,
    }
}

impl KeysFile {
    pub fn exit_code(&self) -> i32 {
        keys_exit_code(self.keys_match, self.amplification)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

pub fn read_trace(path: &Path, device: &str) -> Result<RssiTrace> {
    RssiTrace::parse_csv(device, &read(path)?)
}

fn read_bits(path: &Path) -> Result<BitSeq> {
    read(path)?.trim().parse()
}

/// Runs the simulator and writes the three traces.
pub fn simulate(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let sim = simulate_probing(&cfg.sim)?;
    // The on-air exchange must satisfy the same-carrier rule.
    pair_uplink_ack(&sim.events)?;
    write(&out.join(files::TRACE_A), &sim.trace_a.to_csv())?;
    write(&out.join(files::TRACE_B), &sim.trace_b.to_csv())?;
    write(&out.join(files::TRACE_E), &sim.trace_e.to_csv())?;
    Ok(())
}

/// Both parties' quantized keys after the kept-index exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPair {
    pub probe_pairs: usize,
    pub kept_a: Vec<usize>,
    pub kept_b: Vec<usize>,
    pub bits_a: BitSeq,
    pub bits_b: BitSeq,
}

/// Quantizes two aligned series and reduces both to the shared positions.
pub fn quantize_pair(aligned: &AlignedProbes, q: QuantizerConfig) -> Result<QuantizedPair> {
    let res_a = differential_quantize(&aligned.x_a, q)?;
    let res_b = differential_quantize(&aligned.x_b, q)?;
    let (bits_a, bits_b, _) = merge_kept_indices(&res_a, &res_b)?;
    Ok(QuantizedPair {
        probe_pairs: aligned.len(),
        kept_a: res_a.kept_indices,
        kept_b: res_b.kept_indices,
        bits_a,
        bits_b,
    })
}

/// Quantizes Alice's and Bob's traces and writes the exchanged index lists
/// and each side's key bits.
pub fn quantize(cfg: &PipelineConfig, out: &Path) -> Result<QuantizedPair> {
    let a = read_trace(&out.join(files::TRACE_A), "alice")?;
    let b = read_trace(&out.join(files::TRACE_B), "bob")?;
    let q = quantize_pair(&pair_traces(&a, &b)?, cfg.quantizer())?;
    write(&out.join(files::KEPT_A), &indices_to_csv(&q.kept_a))?;
    write(&out.join(files::KEPT_B), &indices_to_csv(&q.kept_b))?;
    write(&out.join(files::BITS_A), &format!("{}\n", q.bits_a))?;
    write(&out.join(files::BITS_B), &format!("{}\n", q.bits_b))?;
    Ok(q)
}

/// Alice builds the public sketch, or an externally supplied one is used;
/// Bob then attempts recovery. Writes `sketch.json` when Alice built it.
pub fn reconcile(
    cfg: &PipelineConfig,
    out: &Path,
    external_sketch: Option<&Path>,
) -> Result<(SketchMessage, ReconcileStatus)> {
    let code = cfg.code.build();
    let bits_a = read_bits(&out.join(files::BITS_A))?;
    let bits_b = read_bits(&out.join(files::BITS_B))?;
    let sketch = match external_sketch {
        Some(path) => {
            let s = SketchMessage::from_json(&read(path)?)?;
            if s.code_id != code.id() {
                return Err(Error::Config(format!(
                    "sketch in {} uses `{}` but `{}` was selected",
                    path.display(),
                    s.code_id,
                    code.id()
                )));
            }
            s
        }
        None => {
            let mut rng = stream_rng(cfg.sim.seed, Stream::Sketch);
            make_sketch(&bits_a, &code, &mut rng)?
        }
    };
    let status = match recover_key(&bits_b, &sketch, &code) {
        Ok(_) => ReconcileStatus::Success,
        Err(Error::Reconcile { failed_blocks }) => ReconcileStatus::Failure { failed_blocks },
        Err(e) => return Err(e),
    };
    let dest = out.join(files::SKETCH);
    if external_sketch.is_none_or(|p| p != dest) {
        write(&dest, &sketch.to_json())?;
    }
    Ok((sketch, status))
}

/// Confirms key agreement by hash comparison, enforces the entropy budget
/// and hashes both keys down to `key_bits`. Writes `keys.json`.
pub fn amplify_keys(cfg: &PipelineConfig, out: &Path) -> Result<KeysFile> {
    let code = cfg.code.build();
    let bits_a = read_bits(&out.join(files::BITS_A))?;
    let bits_b = read_bits(&out.join(files::BITS_B))?;
    let sketch = SketchMessage::from_json(&read(&out.join(files::SKETCH))?)?;
    let salt = cfg.salt.as_bytes();
    let (status, recovered) = match recover_key(&bits_b, &sketch, &code) {
        Ok(k) => (ReconcileStatus::Success, Some(k.bits)),
        Err(Error::Reconcile { failed_blocks }) => {
            (ReconcileStatus::Failure { failed_blocks }, None)
        }
        Err(e) => return Err(e),
    };
    let tag_a = confirmation_tag(&bits_a, salt);
    let tag_b = recovered.as_ref().map(|k| confirmation_tag(k, salt));
    let keys_match = tag_b.as_deref() == Some(tag_a.as_str());
    let entropy = effective_entropy(bits_a.len(), sketch.block_count, code.n(), code.k());
    let (amplification, final_a, final_b) = if !keys_match {
        (AmplificationStatus::Skipped, None, None)
    } else if entropy < cfg.key_bits as i64 {
        (AmplificationStatus::Refused, None, None)
    } else {
        let ka = amplify(&bits_a, cfg.key_bits, salt)?;
        let kb = amplify(recovered.as_ref().expect("keys match"), cfg.key_bits, salt)?;
        (
            AmplificationStatus::Done,
            Some(hex::encode(ka.bits.to_bytes())),
            Some(hex::encode(kb.bits.to_bytes())),
        )
    };
    let keys = KeysFile {
        code_id: code.id().to_string(),
        key_length: bits_a.len(),
        block_count: sketch.block_count,
        effective_entropy_bits: entropy,
        reconcile_status: status,
        confirm_tag_a: tag_a,
        confirm_tag_b: tag_b,
        keys_match,
        amplification,
        final_key_a: final_a,
        final_key_b: final_b,
    };
    write(&out.join(files::KEYS), &json(&keys))?;
    Ok(keys)
}

/// Reciprocity and secrecy metrics for a pair of traces and an optional
/// eavesdropper trace. Without Eve the leakage terms are reported as zero.
pub fn evaluate_traces(
    a: &RssiTrace,
    b: &RssiTrace,
    e: Option<&RssiTrace>,
    q: QuantizerConfig,
    bins: usize,
) -> Result<MetricsReport> {
    let ab = pair_traces(a, b)?;
    let as_f64 = |v: &[i32]| v.iter().map(|&x| f64::from(x)).collect::<Vec<_>>();
    let rho = pearson_rho_i32(&ab.x_a, &ab.x_b)?;
    let pair = quantize_pair(&ab, q)?;
    let kdr_ab = kdr(&pair.bits_a, &pair.bits_b)?;
    let (mi_ab, mi_ae, mi_be, bound) = match e {
        Some(e) => {
            let t = triple_align(&ab, e);
            let cb = capacity_bound(&as_f64(&t.0), &as_f64(&t.1), &as_f64(&t.2), bins)?;
            (cb.mi_ab_bits, cb.mi_ae_bits, cb.mi_be_bits, cb.bound_bits)
        }
        None => {
            let mi = mi_plugin(&as_f64(&ab.x_a), &as_f64(&ab.x_b), bins)?;
            (mi, 0.0, 0.0, mi)
        }
    };
    Ok(MetricsReport {
        rho,
        kdr: kdr_ab,
        mi_ab_bits: mi_ab,
        mi_ae_bits: mi_ae,
        mi_be_bits: mi_be,
        csk_lower_bits: bound,
    })
}

/// Restricts an aligned A/B series to the rounds Eve also overheard.
fn triple_align(ab: &AlignedProbes, e: &RssiTrace) -> (Vec<i32>, Vec<i32>, Vec<i32>) {
    let ab_a = RssiTrace::new(
        "ab",
        ab.indices
            .iter()
            .zip(&ab.x_a)
            .map(|(&seq, &rssi)| crate::model::ProbeRecord {
                seq_index: seq,
                timestamp_ms: 0,
                rssi_dbm: rssi,
                freq_hz: 0,
            })
            .collect(),
    )
    .expect("aligned indices are unique");
    let ae = align_traces(&ab_a, e);
    let mut xb = Vec::with_capacity(ae.len());
    let mut j = 0;
    for seq in &ae.indices {
        while ab.indices[j] < *seq {
            j += 1;
        }
        xb.push(ab.x_b[j]);
    }
    (ae.x_a, xb, ae.x_b)
}

/// Eve quantizes her own observations of the rounds Alice and Bob both
/// used; returns her disagreement with Alice over the positions both kept.
pub fn eve_kdr(a: &RssiTrace, b: &RssiTrace, e: &RssiTrace, q: QuantizerConfig) -> Result<f64> {
    let (xa, _, xe) = triple_align(&pair_traces(a, b)?, e);
    let res_a = differential_quantize(&xa, q)?;
    let res_e = differential_quantize(&xe, q)?;
    let common = intersect_sorted(&res_a.kept_indices, &res_e.kept_indices);
    kdr(
        &retain_positions(&res_a, &common),
        &retain_positions(&res_e, &common),
    )
}

/// Computes metrics and randomness results from the artifacts and writes
/// `metrics.json`, `nist.json` and `report.json`. An absent `trace_e.csv`
/// is treated as "no eavesdropper".
pub fn evaluate(cfg: &PipelineConfig, out: &Path) -> Result<PipelineReport> {
    let a = read_trace(&out.join(files::TRACE_A), "alice")?;
    let b = read_trace(&out.join(files::TRACE_B), "bob")?;
    let e_path = out.join(files::TRACE_E);
    let e = if e_path.exists() {
        Some(read_trace(&e_path, "eve")?)
    } else {
        None
    };
    let q = cfg.quantizer();
    let metrics = evaluate_traces(&a, &b, e.as_ref(), q, cfg.mi_bins)?;
    let bits_a = read_bits(&out.join(files::BITS_A))?;
    let kept_a = indices_from_csv(&read(&out.join(files::KEPT_A))?)?;
    let kept_b = indices_from_csv(&read(&out.join(files::KEPT_B))?)?;
    let keys: KeysFile = serde_json::from_str(&read(&out.join(files::KEYS))?)?;
    let nist = run_suite(&bits_a, cfg.alpha);
    let probe_pairs = pair_traces(&a, &b)?.len();
    let shared = intersect_sorted(&kept_a, &kept_b).len();
    let eve = match &e {
        Some(e) => Some(eve_kdr(&a, &b, e, q)?),
        None => None,
    };
    let report = PipelineReport {
        config_echo: cfg.clone(),
        probe_pairs,
        bit_yield: shared as f64 / probe_pairs as f64,
        key_length: keys.key_length,
        effective_entropy_bits: keys.effective_entropy_bits,
        metrics,
        nist,
        reconcile_status: keys.reconcile_status,
        keys_match: keys.keys_match,
        amplification: keys.amplification,
        eve_kdr: eve,
    };
    write(&out.join(files::METRICS), &json(&report.metrics))?;
    write(&out.join(files::NIST), &json(&report.nist))?;
    write(&out.join(files::REPORT), &json(&report))?;
    Ok(report)
}

/// Runs all five stages into `out`.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<PipelineReport> {
    cfg.validate()?;
    simulate(cfg, out)?;
    quantize(cfg, out)?;
    reconcile(cfg, out, None)?;
    amplify_keys(cfg, out)?;
    evaluate(cfg, out)
}
