//! Reciprocity and secrecy metrics.
//!
//! Mutual information uses a plug-in estimate over equal-width bins spanning
//! each series' range. It is biased upward by roughly
//! `(bins - 1)^2 / (2 N ln 2)` bits for independent inputs, which matters
//! only for short series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BitSeq;

pub const DEFAULT_MI_BINS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rho: f64,
    pub kdr: f64,
    pub mi_ab_bits: f64,
    pub mi_ae_bits: f64,
    pub mi_be_bits: f64,
    pub csk_lower_bits: f64,
}

/// Pearson cross-correlation coefficient.
pub fn pearson_rho(x_a: &[f64], x_b: &[f64]) -> Result<f64> {
    if x_a.len() != x_b.len() {
        return Err(Error::LengthMismatch {
            expected: x_a.len(),
            got: x_b.len(),
        });
    }
    let n = x_a.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / n as f64;
    let (ma, mb) = (mean(x_a), mean(x_b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in x_a.iter().zip(x_b) {
        let (da, db) = (a - ma, b - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson_rho_i32(x_a: &[i32], x_b: &[i32]) -> Result<f64> {
    let a: Vec<f64> = x_a.iter().map(|&v| f64::from(v)).collect();
    let b: Vec<f64> = x_b.iter().map(|&v| f64::from(v)).collect();
    pearson_rho(&a, &b)
}

/// Key disagreement ratio: fraction of differing positions.
pub fn kdr(k_a: &BitSeq, k_b: &BitSeq) -> Result<f64> {
    let d = k_a.hamming(k_b).ok_or(Error::LengthMismatch {
        expected: k_a.len(),
        got: k_b.len(),
    })?;
    if k_a.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(d as f64 / k_a.len() as f64)
}

fn bin_indices(x: &[f64], bins: usize) -> Vec<usize> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    x.iter()
        .map(|&v| {
            if width <= 0.0 {
                0
            } else {
                (((v - lo) / width * bins as f64) as usize).min(bins - 1)
            }
        })
        .collect()
}

/// Entropy in bits of a histogram, summed in ascending count order so the
/// result depends only on the multiset of counts.
fn entropy_of_counts(mut counts: Vec<u64>, total: u64) -> f64 {
    counts.retain(|&c| c > 0);
    counts.sort_unstable();
    let n = total as f64;
    let s: f64 = counts.iter().map(|&c| c as f64 * (c as f64).log2()).sum();
    n.log2() - s / n
}

fn check_bins(bins: usize) -> Result<()> {
    if bins < 2 {
        return Err(Error::Config(format!(
            "bins must be at least 2, got {bins}"
        )));
    }
    Ok(())
}

/// Plug-in entropy of `x` after equal-width binning.
pub fn entropy_plugin(x: &[f64], bins: usize) -> Result<f64> {
    check_bins(bins)?;
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut counts = vec![0u64; bins];
    for b in bin_indices(x, bins) {
        counts[b] += 1;
    }
    Ok(entropy_of_counts(counts, x.len() as u64))
}

/// Plug-in mutual information in bits, `H(X) + H(Y) - H(X, Y)`.
pub fn mi_plugin(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    check_bins(bins)?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len() as u64;
    let (bx, by) = (bin_indices(x, bins), bin_indices(y, bins));
    let mut cx = vec![0u64; bins];
    let mut cy = vec![0u64; bins];
    let mut cxy = vec![0u64; bins * bins];
    for (&i, &j) in bx.iter().zip(&by) {
        cx[i] += 1;
        cy[j] += 1;
        cxy[i * bins + j] += 1;
    }
    let hx = entropy_of_counts(cx, n);
    let hy = entropy_of_counts(cy, n);
    let hxy = entropy_of_counts(cxy, n);
    Ok(((hx + hy) - hxy).clamp(0.0, hx.min(hy)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityBound {
    pub mi_ab_bits: f64,
    pub mi_ae_bits: f64,
    pub mi_be_bits: f64,
    /// `I(A;B) - min(I(A;E), I(B;E))`; negative values are reported as-is.
    pub bound_bits: f64,
}

pub fn capacity_bound(x_a: &[f64], x_b: &[f64], x_e: &[f64], bins: usize) -> Result<CapacityBound> {
    let mi_ab = mi_plugin(x_a, x_b, bins)?;
    let mi_ae = mi_plugin(x_a, x_e, bins)?;
    let mi_be = mi_plugin(x_b, x_e, bins)?;
    Ok(CapacityBound {
        mi_ab_bits: mi_ab,
        mi_ae_bits: mi_ae,
        mi_be_bits: mi_be,
        bound_bits: mi_ab - mi_ae.min(mi_be),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> BitSeq {
        s.parse().unwrap()
    }

    #[test]
    fn rho_examples() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        assert!((pearson_rho(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| 3.0 - v).collect();
        assert!((pearson_rho(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        // Sums by hand: Sxy = 6.5, Sxx = 5, Syy = 8.75.
        let r = pearson_rho(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 5.0]).unwrap();
        assert!((r - 6.5 / (5.0f64 * 8.75).sqrt()).abs() < 1e-12);
        assert!((r - 0.982708).abs() < 1e-6);
    }

    #[test]
    fn rho_errors() {
        assert!(matches!(
            pearson_rho(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::UndefinedCorrelation)
        ));
        assert!(pearson_rho(&[1.0], &[1.0]).is_err());
        assert!(pearson_rho(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn kdr_examples() {
        let a = bits("01101001101001011010");
        assert_eq!(kdr(&a, &a).unwrap(), 0.0);
        assert_eq!(kdr(&a, &a.complement()).unwrap(), 1.0);
        let mut b = a.as_slice().to_vec();
        b[7] = !b[7];
        assert_eq!(kdr(&a, &BitSeq::new(b)).unwrap(), 0.05);
        assert!(kdr(&a, &bits("0")).is_err());
        assert!(kdr(&BitSeq::default(), &BitSeq::default()).is_err());
    }

    /// Entropy straight from value frequencies, no binning.
    fn discrete_entropy(x: &[f64]) -> f64 {
        let mut m = std::collections::BTreeMap::new();
        for v in x {
            *m.entry(v.to_bits()).or_insert(0usize) += 1;
        }
        let n = x.len() as f64;
        m.values()
            .map(|&c| -(c as f64 / n) * (c as f64 / n).log2())
            .sum()
    }

    #[test]
    fn mi_identity_channel_is_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..5000).map(|_| rng.random_range(0..4) as f64).collect();
        let mi = mi_plugin(&x, &x, 4).unwrap();
        assert_eq!(mi, entropy_plugin(&x, 4).unwrap());
        assert!((mi - discrete_entropy(&x)).abs() < 1e-12);
    }

    #[test]
    fn mi_independent_and_partial() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64).collect();
        assert!(mi_plugin(&x, &y, 8).unwrap() < 0.01);
        let half: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { x[i] } else { y[i] })
            .collect();
        let mi = mi_plugin(&x, &half, 8).unwrap();
        assert!(
            mi > 0.1 && mi < entropy_plugin(&x, 8).unwrap() - 0.1,
            "{mi}"
        );
    }

    #[test]
    fn mi_errors() {
        assert!(mi_plugin(&[], &[], 4).is_err());
        assert!(mi_plugin(&[1.0], &[1.0], 1).is_err());
        assert!(mi_plugin(&[1.0, 2.0], &[1.0], 4).is_err());
    }

    #[test]
    fn capacity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 100_000;
        let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 0.05 * rng.random::<f64>()).collect();
        let e: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let far = capacity_bound(&a, &b, &e, 16).unwrap();
        assert!(far.bound_bits > 0.5 * far.mi_ab_bits);
        let same = capacity_bound(&a, &b, &a, 16).unwrap();
        assert!(same.bound_bits.abs() < 0.02, "{same:?}");
        assert_eq!(
            same.bound_bits,
            far.mi_ab_bits - same.mi_ae_bits.min(same.mi_be_bits)
        );
    }

    fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..80).prop_flat_map(|n| {
            (
                proptest::collection::vec(-100.0f64..100.0, n),
                proptest::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn rho_affine_invariance((x, y) in series(), a in 0.1f64..10.0, b in -50.0f64..50.0) {
            if let Ok(r) = pearson_rho(&x, &y) {
                let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                let xn: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
                prop_assert!((pearson_rho(&xs, &y).unwrap() - r).abs() < 1e-9);
                prop_assert!((pearson_rho(&xn, &y).unwrap() + r).abs() < 1e-9);
            }
        }

        #[test]
        fn mi_symmetric_and_bounded((x, y) in series(), bins in 2usize..20) {
            let xy = mi_plugin(&x, &y, bins).unwrap();
            prop_assert_eq!(xy, mi_plugin(&y, &x, bins).unwrap());
            prop_assert!(xy >= 0.0);
            let hx = entropy_plugin(&x, bins).unwrap();
            let hy = entropy_plugin(&y, bins).unwrap();
            prop_assert!(xy <= hx.min(hy));
        }

        #[test]
        fn kdr_is_a_scaled_metric(a in proptest::collection::vec(any::<bool>(), 1..64), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = BitSeq::new(a);
            let b: BitSeq = a.iter().map(|v| v ^ rng.random_bool(0.3)).collect();
            let c: BitSeq = a.iter().map(|v| v ^ rng.random_bool(0.3)).collect();
            let l = a.len() as f64;
            prop_assert_eq!(kdr(&a, &b).unwrap(), kdr(&b, &a).unwrap());
            prop_assert_eq!(kdr(&a, &a).unwrap(), 0.0);
            prop_assert!(kdr(&a, &c).unwrap() * l <= (kdr(&a, &b).unwrap() + kdr(&b, &c).unwrap()) * l + 1e-9);
            prop_assert_eq!(kdr(&a, &b).unwrap() == 0.0, a == b);
        }
    }
}
