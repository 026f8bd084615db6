use super::gf::GfField;
use super::{BlockCode, DecodeFailure, Decoded};
use crate::error::{Error, Result};
use crate::model::BitSeq;

/// Binary narrow-sense primitive BCH code of length n = 2^m - 1.
///
/// Codewords are laid out MSB-first: bit `j` is the coefficient of
/// `x^(n-1-j)`. Encoding is systematic, message bits first.
#[derive(Debug, Clone)]
pub struct BchCode {
    id: String,
    field: GfField,
    n: usize,
    k: usize,
    t: usize,
    /// GF(2) coefficients, index = degree.
    generator: Vec<u8>,
}

impl BchCode {
    /// Builds the code with designed distance 2t+1 over the default
    /// primitive polynomial for `m`.
    pub fn new(m: u32, t: usize) -> Result<Self> {
        Self::with_field(GfField::with_default_poly(m)?, t)
    }

    pub fn with_field(field: GfField, t: usize) -> Result<Self> {
        let n = field.order();
        if t == 0 || 2 * t >= n {
            return Err(Error::InvalidCode(format!("t={t} invalid for n={n}")));
        }
        let mut generator = vec![1u8];
        let mut covered = vec![false; n];
        for i in 1..=2 * t {
            if covered[i % n] {
                continue;
            }
            let coset = cyclotomic_coset(i, n);
            for &j in &coset {
                covered[j] = true;
            }
            generator = poly_mul_gf2(&generator, &minimal_poly(&field, &coset)?);
        }
        let r = generator.len() - 1;
        if r >= n {
            return Err(Error::InvalidCode(format!(
                "t={t} leaves no message bits at n={n}"
            )));
        }
        let mut x_n_plus_1 = vec![0u8; n + 1];
        x_n_plus_1[0] = 1;
        x_n_plus_1[n] = 1;
        if poly_rem_gf2(&x_n_plus_1, &generator)
            .iter()
            .any(|&c| c != 0)
        {
            return Err(Error::InvalidCode(
                "generator does not divide x^n + 1".into(),
            ));
        }
        Ok(Self {
            id: format!("bch{n}_t{t}"),
            field,
            n,
            k: n - r,
            t,
            generator,
        })
    }

    pub fn field(&self) -> &GfField {
        &self.field
    }

    /// Generator polynomial coefficients, index = degree.
    pub fn generator_poly(&self) -> &[u8] {
        &self.generator
    }

    /// `r(alpha^j)` for `j = 1..=2t`.
    pub fn syndromes(&self, word: &BitSeq) -> Vec<u16> {
        let f = &self.field;
        let powers: Vec<usize> = word
            .iter()
            .enumerate()
            .filter(|(_, b)| *b)
            .map(|(j, _)| self.n - 1 - j)
            .collect();
        (1..=2 * self.t)
            .map(|j| powers.iter().fold(0u16, |acc, &p| acc ^ f.alpha_pow(j * p)))
            .collect()
    }

    pub fn encode(&self, msg: &BitSeq) -> Result<BitSeq> {
        if msg.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                got: msg.len(),
            });
        }
        let r = self.n - self.k;
        // Division register, index = degree.
        let mut reg = vec![0u8; r];
        for bit in msg.iter() {
            let feedback = u8::from(bit) ^ reg[r - 1];
            reg.rotate_right(1);
            reg[0] = 0;
            if feedback == 1 {
                for (c, g) in reg.iter_mut().zip(&self.generator[..r]) {
                    *c ^= g;
                }
            }
        }
        let mut out = msg.clone();
        for d in (0..r).rev() {
            out.push(reg[d] == 1);
        }
        Ok(out)
    }

    pub fn decode(&self, word: &BitSeq) -> std::result::Result<Decoded, DecodeFailure> {
        if word.len() != self.n {
            return Err(DecodeFailure::Length {
                expected: self.n,
                got: word.len(),
            });
        }
        let synd = self.syndromes(word);
        if synd.iter().all(|&s| s == 0) {
            return Ok(Decoded {
                codeword: word.clone(),
                error_positions: Vec::new(),
            });
        }
        let (locator, degree) = berlekamp_massey(&self.field, &synd);
        if degree > self.t {
            return Err(DecodeFailure::LocatorDegree { degree, t: self.t });
        }
        let roots = self.chien_search(&locator);
        if roots.len() != degree || locator.len() - 1 != degree {
            return Err(DecodeFailure::RootCount {
                expected: degree,
                found: roots.len(),
            });
        }
        let mut bits = word.as_slice().to_vec();
        let mut positions: Vec<usize> = roots.iter().map(|&p| self.n - 1 - p).collect();
        positions.sort_unstable();
        for &j in &positions {
            bits[j] = !bits[j];
        }
        let codeword = BitSeq::new(bits);
        if self.syndromes(&codeword).iter().any(|&s| s != 0) {
            return Err(DecodeFailure::ResidualSyndrome);
        }
        Ok(Decoded {
            codeword,
            error_positions: positions,
        })
    }

    /// Powers `p` with `locator(alpha^-p) = 0`.
    fn chien_search(&self, locator: &[u16]) -> Vec<usize> {
        let f = &self.field;
        let n = self.n;
        (0..n)
            .filter(|&p| {
                let inv = (n - p) % n;
                locator
                    .iter()
                    .enumerate()
                    .fold(0u16, |acc, (i, &c)| acc ^ f.mul(c, f.alpha_pow(inv * i)))
                    == 0
            })
            .collect()
    }
}

impl BlockCode for BchCode {
    fn id(&self) -> &str {
        &self.id
    }
    fn n(&self) -> usize {
        self.n
    }
    fn k(&self) -> usize {
        self.k
    }
    fn t(&self) -> usize {
        self.t
    }
    fn encode(&self, msg: &BitSeq) -> Result<BitSeq> {
        BchCode::encode(self, msg)
    }
    fn decode(&self, word: &BitSeq) -> std::result::Result<Decoded, DecodeFailure> {
        BchCode::decode(self, word)
    }
}

pub fn bch_encode(msg: &BitSeq, code: &BchCode) -> Result<BitSeq> {
    code.encode(msg)
}

pub fn bch_decode(word: &BitSeq, code: &BchCode) -> std::result::Result<Decoded, DecodeFailure> {
    code.decode(word)
}

/// Shortest LFSR generating the syndrome sequence. Returns the connection
/// polynomial (trailing zeros trimmed) and the register length.
fn berlekamp_massey(f: &GfField, synd: &[u16]) -> (Vec<u16>, usize) {
    let mut c = vec![1u16];
    let mut b = vec![1u16];
    let mut l = 0usize;
    let mut shift = 1usize;
    let mut last_d = 1u16;
    for k in 0..synd.len() {
        let mut d = synd[k];
        for i in 1..=l.min(c.len() - 1) {
            d ^= f.mul(c[i], synd[k - i]);
        }
        if d == 0 {
            shift += 1;
            continue;
        }
        let coef = f.div(d, last_d).expect("last discrepancy is non-zero");
        let prev = c.clone();
        if c.len() < b.len() + shift {
            c.resize(b.len() + shift, 0);
        }
        for (i, &bi) in b.iter().enumerate() {
            c[i + shift] ^= f.mul(coef, bi);
        }
        if 2 * l <= k {
            l = k + 1 - l;
            b = prev;
            last_d = d;
            shift = 1;
        } else {
            shift += 1;
        }
    }
    while c.len() > 1 && *c.last().unwrap() == 0 {
        c.pop();
    }
    (c, l)
}

fn cyclotomic_coset(i: usize, n: usize) -> Vec<usize> {
    let mut coset = vec![i % n];
    let mut j = (2 * i) % n;
    while j != i % n {
        coset.push(j);
        j = (2 * j) % n;
    }
    coset
}

fn minimal_poly(f: &GfField, coset: &[usize]) -> Result<Vec<u8>> {
    let mut poly = vec![1u16];
    for &j in coset {
        let root = f.alpha_pow(j);
        let mut next = vec![0u16; poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i + 1] ^= c;
            next[i] ^= f.mul(c, root);
        }
        poly = next;
    }
    poly.into_iter()
        .map(|c| match c {
            0 | 1 => Ok(c as u8),
            _ => Err(Error::InvalidCode("minimal polynomial not binary".into())),
        })
        .collect()
}

fn poly_mul_gf2(a: &[u8], b: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 1 {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] ^= y;
            }
        }
    }
    out
}

fn poly_rem_gf2(num: &[u8], den: &[u8]) -> Vec<u8> {
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    for i in (dd..rem.len()).rev() {
        if rem[i] == 1 {
            for (j, &c) in den.iter().enumerate() {
                rem[i - dd + j] ^= c;
            }
        }
    }
    rem.truncate(dd);
    rem
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits_of(v: u64, len: usize) -> BitSeq {
        (0..len).map(|j| v >> (len - 1 - j) & 1 == 1).collect()
    }

    fn bch15() -> BchCode {
        BchCode::new(4, 3).unwrap()
    }

    #[test]
    fn standard_dimensions() {
        for (m, t, k) in [
            (4, 1, 11),
            (4, 2, 7),
            (4, 3, 5),
            (5, 3, 16),
            (6, 5, 36),
            (8, 4, 223),
        ] {
            let c = BchCode::new(m, t).unwrap();
            assert_eq!(c.k(), k, "m={m} t={t}");
        }
        assert!(BchCode::new(4, 8).is_err());
        assert!(BchCode::new(4, 0).is_err());
    }

    #[test]
    fn generator_15_5() {
        // x^10 + x^8 + x^5 + x^4 + x^2 + x + 1
        let c = bch15();
        assert_eq!(c.generator_poly(), &[1, 1, 1, 0, 1, 1, 0, 0, 1, 0, 1]);
        let mut x15 = vec![0u8; 16];
        x15[0] = 1;
        x15[15] = 1;
        assert!(poly_rem_gf2(&x15, c.generator_poly())
            .iter()
            .all(|&b| b == 0));
    }

    #[test]
    fn repetition_code_from_gf4() {
        let c = BchCode::new(2, 1).unwrap();
        assert_eq!((c.n(), c.k()), (3, 1));
        assert_eq!(c.encode(&"1".parse().unwrap()).unwrap().to_string(), "111");
    }

    #[test]
    fn encode_unit_message_by_long_division() {
        let c = bch15();
        // x^10 mod g(x) via the independent remainder routine.
        let mut num = vec![0u8; 11];
        num[10] = 1;
        let rem = poly_rem_gf2(&num, c.generator_poly());
        let parity: String = (0..10)
            .rev()
            .map(|d| if rem[d] == 1 { '1' } else { '0' })
            .collect();
        let cw = c.encode(&"00001".parse().unwrap()).unwrap();
        assert_eq!(cw.to_string(), format!("00001{parity}"));
        assert_eq!(cw.to_string(), "000010100110111");
    }

    #[test]
    fn zero_message_and_length_check() {
        let c = bch15();
        assert_eq!(c.encode(&BitSeq::zeros(5)).unwrap(), BitSeq::zeros(15));
        assert!(c.encode(&BitSeq::zeros(4)).is_err());
        assert!(matches!(
            c.decode(&BitSeq::zeros(14)),
            Err(DecodeFailure::Length { .. })
        ));
    }

    #[test]
    fn all_codewords_have_zero_syndromes_and_are_closed() {
        let c = bch15();
        let words: Vec<BitSeq> = (0..32).map(|v| c.encode(&bits_of(v, 5)).unwrap()).collect();
        for a in &words {
            assert!(c.syndromes(a).iter().all(|&s| s == 0));
            for b in &words {
                assert!(c.syndromes(&a.xor(b)).iter().all(|&s| s == 0));
            }
        }
    }

    #[test]
    fn exhaustive_correction_up_to_t() {
        let c = bch15();
        for v in 0..32 {
            let cw = c.encode(&bits_of(v, 5)).unwrap();
            let dec = c.decode(&cw).unwrap();
            assert_eq!(dec.codeword, cw);
            assert!(dec.error_positions.is_empty());
            let mut patterns = 0;
            for e in 1u32..(1 << 15) {
                if e.count_ones() > 3 {
                    continue;
                }
                patterns += 1;
                let err = bits_of(e as u64, 15);
                let dec = c.decode(&cw.xor(&err)).expect("weight <= t must decode");
                assert_eq!(dec.codeword, cw);
                let expect: Vec<usize> = (0..15).filter(|&j| err.get(j).unwrap()).collect();
                assert_eq!(dec.error_positions, expect);
            }
            assert_eq!(patterns, 575);
        }
    }

    #[test]
    fn weight_four_never_returns_original() {
        let c = bch15();
        let cw = c.encode(&"10110".parse().unwrap()).unwrap();
        let mut failures = 0;
        for e in 1u32..(1 << 15) {
            if e.count_ones() != 4 {
                continue;
            }
            match c.decode(&cw.xor(&bits_of(e as u64, 15))) {
                Ok(d) => {
                    assert_ne!(d.codeword, cw);
                    assert!(d.error_positions.len() <= 3);
                }
                Err(_) => failures += 1,
            }
        }
        assert!(failures > 0);
    }

    #[test]
    fn larger_codes_correct_t_errors() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for (m, t) in [(5, 3), (6, 5), (8, 8)] {
            let c = BchCode::new(m, t).unwrap();
            for _ in 0..50 {
                let msg: BitSeq = (0..c.k()).map(|_| rng.random()).collect();
                let cw = c.encode(&msg).unwrap();
                let mut err = BitSeq::zeros(c.n());
                let w = rng.random_range(0..=t);
                let mut pos: Vec<usize> = rand::seq::index::sample(&mut rng, c.n(), w).into_vec();
                pos.sort_unstable();
                let mut e = err.as_slice().to_vec();
                for &p in &pos {
                    e[p] = true;
                }
                err = BitSeq::new(e);
                let d = c.decode(&cw.xor(&err)).unwrap();
                assert_eq!(d.codeword, cw);
                assert_eq!(d.error_positions, pos);
            }
        }
    }

    proptest! {
        #[test]
        fn decode_inverts_bounded_noise(msg in 0u64..32, e in proptest::collection::btree_set(0usize..15, 0..=3)) {
            let c = bch15();
            let cw = c.encode(&bits_of(msg, 5)).unwrap();
            let err: BitSeq = (0..15).map(|j| e.contains(&j)).collect();
            prop_assert_eq!(c.decode(&cw.xor(&err)).unwrap().codeword, cw);
        }
    }
}
