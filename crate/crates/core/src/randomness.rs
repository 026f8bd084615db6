//! Nine statistical tests from the NIST SP 800-22 battery: frequency, block
//! frequency, runs, longest run of ones, DFT, serial, approximate entropy and
//! the forward/backward cumulative sums.
//!
//! Parameters are picked from the sequence length so that short keys (a few
//! hundred bits) still get meaningful statistics:
//!
//! * block frequency: `M = max(20, n/10)` capped at 128;
//! * serial: the largest `m` with `m < floor(log2 n) - 2`;
//! * approximate entropy: the largest `m` with `m < log2 n - 5`.

use std::fmt;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::model::BitSeq;

pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NistTest {
    Frequency,
    BlockFrequency,
    Runs,
    #[serde(rename = "longest_run_of_1s")]
    LongestRunOfOnes,
    Dft,
    Serial,
    ApproximateEntropy,
    #[serde(rename = "cumulative_sums_fwd")]
    CusumForward,
    #[serde(rename = "cumulative_sums_rev")]
    CusumReverse,
}

impl NistTest {
    /// Report order.
    pub const ALL: [NistTest; 9] = [
        NistTest::Frequency,
        NistTest::BlockFrequency,
        NistTest::Runs,
        NistTest::LongestRunOfOnes,
        NistTest::Dft,
        NistTest::Serial,
        NistTest::ApproximateEntropy,
        NistTest::CusumForward,
        NistTest::CusumReverse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NistTest::Frequency => "frequency",
            NistTest::BlockFrequency => "block_frequency",
            NistTest::Runs => "runs",
            NistTest::LongestRunOfOnes => "longest_run_of_1s",
            NistTest::Dft => "dft",
            NistTest::Serial => "serial",
            NistTest::ApproximateEntropy => "approximate_entropy",
            NistTest::CusumForward => "cumulative_sums_fwd",
            NistTest::CusumReverse => "cumulative_sums_rev",
        }
    }

    pub fn run(self, bits: &BitSeq, alpha: f64) -> Result<TestResult> {
        match self {
            NistTest::Frequency => frequency_test(bits, alpha),
            NistTest::Runs => runs_test(bits, alpha),
            other => Ok(remaining_tests(bits, other, alpha)),
        }
    }
}

impl fmt::Display for NistTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    pub p_values: Vec<f64>,
    pub pass: bool,
    /// False when the sequence is too short for the test; such a result is
    /// neither a pass nor a statistical failure.
    pub applicable: bool,
}

impl TestResult {
    fn new(test: NistTest, p_values: Vec<f64>, alpha: f64) -> Self {
        let p_values: Vec<f64> = p_values.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Self {
            test_name: test.name().to_string(),
            pass: p_values.iter().all(|&p| p > alpha),
            p_values,
            applicable: true,
        }
    }

    fn not_applicable(test: NistTest) -> Self {
        Self {
            test_name: test.name().to_string(),
            p_values: Vec::new(),
            pass: false,
            applicable: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NistReport {
    pub sequence_length: usize,
    pub alpha: f64,
    pub results: Vec<TestResult>,
    pub overall_pass: bool,
}

impl NistReport {
    pub fn result(&self, test: NistTest) -> Option<&TestResult> {
        self.results.iter().find(|r| r.test_name == test.name())
    }

    /// Aligned text table for terminals.
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<22} {:<20} {}\n",
            "test",
            "p-value",
            format_args!("result (alpha={})", self.alpha)
        );
        out.push_str(&format!(
            "{:<22} {}\n",
            "sequence length", self.sequence_length
        ));
        for r in &self.results {
            let p = if r.applicable {
                r.p_values
                    .iter()
                    .map(|p| format!("{p:.3}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            } else {
                "-".to_string()
            };
            let verdict = match (r.applicable, r.pass) {
                (false, _) => "n/a",
                (true, true) => "pass",
                (true, false) => "FAIL",
            };
            out.push_str(&format!("{:<22} {:<20} {}\n", r.test_name, p, verdict));
        }
        out.push_str(&format!(
            "{:<22} {:<20} {}\n",
            "overall",
            "",
            if self.overall_pass { "pass" } else { "FAIL" }
        ));
        out
    }
}

fn require_len(test: &'static str, bits: &BitSeq, min: usize) -> Result<()> {
    if bits.len() < min {
        return Err(Error::SequenceTooShort {
            test,
            min,
            got: bits.len(),
        });
    }
    Ok(())
}

fn igamc(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(a, x)
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Monobit test: balance of ones and zeros.
pub fn frequency_test(bits: &BitSeq, alpha: f64) -> Result<TestResult> {
    require_len("frequency", bits, 10)?;
    let n = bits.len() as f64;
    let s = 2.0 * bits.ones() as f64 - n;
    let p = erfc(s.abs() / (2.0 * n).sqrt());
    Ok(TestResult::new(NistTest::Frequency, vec![p], alpha))
}

/// Runs test. A sequence failing the balance precondition gets p = 0.
pub fn runs_test(bits: &BitSeq, alpha: f64) -> Result<TestResult> {
    require_len("runs", bits, 10)?;
    let n = bits.len() as f64;
    let pi = bits.ones() as f64 / n;
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        return Ok(TestResult::new(NistTest::Runs, vec![0.0], alpha));
    }
    let s = bits.as_slice();
    let v = 1 + s.windows(2).filter(|w| w[0] != w[1]).count();
    let q = pi * (1.0 - pi);
    let p = erfc((v as f64 - 2.0 * n * q).abs() / (2.0 * (2.0 * n).sqrt() * q));
    Ok(TestResult::new(NistTest::Runs, vec![p], alpha))
}

/// The seven tests beyond frequency and runs. Sequences below a test's
/// minimum length produce a not-applicable result.
pub fn remaining_tests(bits: &BitSeq, test: NistTest, alpha: f64) -> TestResult {
    let p = match test {
        NistTest::BlockFrequency => block_frequency(bits),
        NistTest::LongestRunOfOnes => longest_run(bits),
        NistTest::Dft => dft(bits),
        NistTest::Serial => serial(bits),
        NistTest::ApproximateEntropy => approximate_entropy(bits),
        NistTest::CusumForward => cusum(bits.as_slice().iter().copied(), bits.len()),
        NistTest::CusumReverse => cusum(bits.as_slice().iter().rev().copied(), bits.len()),
        NistTest::Frequency | NistTest::Runs => {
            return test
                .run(bits, alpha)
                .unwrap_or_else(|_| TestResult::not_applicable(test))
        }
    };
    match p {
        Some(p) => TestResult::new(test, p, alpha),
        None => TestResult::not_applicable(test),
    }
}

fn block_frequency(bits: &BitSeq) -> Option<Vec<f64>> {
    let n = bits.len();
    let m = (n / 10).clamp(20, 128);
    let blocks = n / m;
    if blocks == 0 {
        return None;
    }
    let chi: f64 = bits.as_slice()[..blocks * m]
        .chunks(m)
        .map(|c| {
            let pi = c.iter().filter(|&&b| b).count() as f64 / m as f64;
            (pi - 0.5).powi(2)
        })
        .sum::<f64>()
        * 4.0
        * m as f64;
    Some(vec![igamc(blocks as f64 / 2.0, chi / 2.0)])
}

fn longest_run(bits: &BitSeq) -> Option<Vec<f64>> {
    let n = bits.len();
    let (m, lo, probs): (usize, usize, &[f64]) = if n < 128 {
        return None;
    } else if n < 6272 {
        (8, 1, &[0.2148, 0.3672, 0.2305, 0.1875])
    } else if n < 750_000 {
        (128, 4, &[0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124])
    } else {
        (
            10_000,
            10,
            &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727],
        )
    };
    let k = probs.len() - 1;
    let blocks = n / m;
    let mut counts = vec![0usize; probs.len()];
    for c in bits.as_slice()[..blocks * m].chunks(m) {
        let (mut run, mut best) = (0usize, 0usize);
        for &b in c {
            run = if b { run + 1 } else { 0 };
            best = best.max(run);
        }
        counts[best.saturating_sub(lo).min(k)] += 1;
    }
    let chi: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&v, &p)| {
            let e = blocks as f64 * p;
            (v as f64 - e).powi(2) / e
        })
        .sum();
    Some(vec![igamc(k as f64 / 2.0, chi / 2.0)])
}

fn dft(bits: &BitSeq) -> Option<Vec<f64>> {
    let n = bits.len();
    if n < 10 {
        return None;
    }
    let mut buf: Vec<Complex<f64>> = bits
        .iter()
        .map(|b| Complex::new(if b { 1.0 } else { -1.0 }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let threshold = ((1.0f64 / 0.05).ln() * n as f64).sqrt();
    let expected = 0.95 * n as f64 / 2.0;
    let below = buf[..n / 2].iter().filter(|c| c.norm() < threshold).count() as f64;
    let d = (below - expected) / (n as f64 * 0.95 * 0.05 / 4.0).sqrt();
    Some(vec![erfc(d.abs() / std::f64::consts::SQRT_2)])
}

/// Overlapping m-bit pattern counts with wrap-around.
fn pattern_counts(bits: &[bool], m: usize) -> Vec<u64> {
    let n = bits.len();
    let mut counts = vec![0u64; 1 << m];
    if m == 0 {
        counts[0] = n as u64;
        return counts;
    }
    let mask = (1usize << m) - 1;
    let mut v = 0usize;
    for &b in &bits[..m - 1] {
        v = (v << 1) | b as usize;
    }
    for i in 0..n {
        v = ((v << 1) | bits[(i + m - 1) % n] as usize) & mask;
        counts[v] += 1;
    }
    counts
}

fn serial_param(n: usize) -> Option<usize> {
    let lg = n.checked_ilog2()? as usize;
    (lg >= 5).then(|| lg - 3)
}

fn apen_param(n: usize) -> Option<usize> {
    let lg = (n as f64).log2();
    let m = (lg - 5.0).ceil() as i64 - 1;
    (m >= 1).then_some(m as usize)
}

fn serial(bits: &BitSeq) -> Option<Vec<f64>> {
    let n = bits.len();
    let m = serial_param(n)?;
    let s = bits.as_slice();
    let psi = |m: usize| -> f64 {
        if m == 0 {
            return 0.0;
        }
        let sum: f64 = pattern_counts(s, m)
            .iter()
            .map(|&c| (c as f64).powi(2))
            .sum();
        (1u64 << m) as f64 / n as f64 * sum - n as f64
    };
    let (p0, p1, p2) = (psi(m), psi(m - 1), psi(m - 2));
    let d1 = p0 - p1;
    let d2 = p0 - 2.0 * p1 + p2;
    Some(vec![
        igamc(2f64.powi(m as i32 - 2), d1 / 2.0),
        igamc(2f64.powi(m as i32 - 3), d2 / 2.0),
    ])
}

fn approximate_entropy(bits: &BitSeq) -> Option<Vec<f64>> {
    let n = bits.len();
    let m = apen_param(n)?;
    let s = bits.as_slice();
    let phi = |m: usize| -> f64 {
        pattern_counts(s, m)
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n as f64;
                p * p.ln()
            })
            .sum()
    };
    let apen = phi(m) - phi(m + 1);
    let chi = 2.0 * n as f64 * (std::f64::consts::LN_2 - apen);
    Some(vec![igamc(2f64.powi(m as i32 - 1), chi / 2.0)])
}

fn cusum(bits: impl Iterator<Item = bool>, n: usize) -> Option<Vec<f64>> {
    if n < 10 {
        return None;
    }
    let mut s = 0i64;
    let mut z = 0i64;
    for b in bits {
        s += if b { 1 } else { -1 };
        z = z.max(s.abs());
    }
    let (nf, zf) = (n as f64, z as f64);
    let sq = nf.sqrt();
    let mut sum1 = 0.0;
    let k_lo = ((-nf / zf + 1.0) / 4.0).floor() as i64;
    let k_hi = ((nf / zf - 1.0) / 4.0).floor() as i64;
    for k in k_lo..=k_hi {
        let k = k as f64;
        sum1 += normal_cdf((4.0 * k + 1.0) * zf / sq) - normal_cdf((4.0 * k - 1.0) * zf / sq);
    }
    let mut sum2 = 0.0;
    let k_lo = ((-nf / zf - 3.0) / 4.0).floor() as i64;
    for k in k_lo..=k_hi {
        let k = k as f64;
        sum2 += normal_cdf((4.0 * k + 3.0) * zf / sq) - normal_cdf((4.0 * k + 1.0) * zf / sq);
    }
    Some(vec![1.0 - sum1 + sum2])
}

/// Runs all nine tests in report order. Tests that cannot run on a sequence
/// this short are marked not applicable and make the overall verdict fail.
pub fn run_suite(bits: &BitSeq, alpha: f64) -> NistReport {
    let results: Vec<TestResult> = NistTest::ALL
        .iter()
        .map(|&t| {
            t.run(bits, alpha)
                .unwrap_or_else(|_| TestResult::not_applicable(t))
        })
        .collect();
    NistReport {
        sequence_length: bits.len(),
        alpha,
        overall_pass: results.iter().all(|r| r.applicable && r.pass),
        results,
    }
}
