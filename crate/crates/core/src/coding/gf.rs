use crate::error::{Error, Result};

/// GF(2^m) with log/antilog tables, `m` in `2..=8`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GfField {
    m: u32,
    primitive_poly: u32,
    exp: Vec<u16>,
    log: Vec<u16>,
}

/// Default primitive polynomials, indexed by `m`.
const DEFAULT_POLYS: [u32; 9] = [0, 0, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D];

impl GfField {
    pub fn new(m: u32, primitive_poly: u32) -> Result<Self> {
        if !(2..=8).contains(&m) {
            return Err(Error::InvalidCode(format!(
                "field degree m={m} not in [2, 8]"
            )));
        }
        if primitive_poly >> m != 1 {
            return Err(Error::InvalidCode(format!(
                "polynomial {primitive_poly:#x} does not have degree {m}"
            )));
        }
        let order = (1usize << m) - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; order + 1];
        let mut seen = vec![false; order + 1];
        let mut x = 1u32;
        for (i, slot) in exp.iter_mut().take(order).enumerate() {
            if seen[x as usize] {
                return Err(Error::InvalidCode(format!(
                    "polynomial {primitive_poly:#x} is not primitive: alpha has order {i}"
                )));
            }
            seen[x as usize] = true;
            *slot = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x >> m & 1 == 1 {
                x ^= primitive_poly;
            }
        }
        if x != 1 {
            return Err(Error::InvalidCode(format!(
                "polynomial {primitive_poly:#x} is not primitive"
            )));
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(Self {
            m,
            primitive_poly,
            exp,
            log,
        })
    }

    pub fn with_default_poly(m: u32) -> Result<Self> {
        let poly = *DEFAULT_POLYS
            .get(m as usize)
            .filter(|&&p| p != 0)
            .ok_or_else(|| Error::InvalidCode(format!("no default polynomial for m={m}")))?;
        Self::new(m, poly)
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn primitive_poly(&self) -> u32 {
        self.primitive_poly
    }

    /// Multiplicative order of the field, 2^m - 1.
    pub fn order(&self) -> usize {
        (1 << self.m) - 1
    }

    pub fn size(&self) -> usize {
        1 << self.m
    }

    /// alpha^i for any non-negative exponent.
    pub fn alpha_pow(&self, i: usize) -> u16 {
        self.exp[i % self.order()]
    }

    pub fn log(&self, a: u16) -> Option<usize> {
        (a != 0).then(|| self.log[a as usize] as usize)
    }

    pub fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    pub fn inv(&self, a: u16) -> Option<u16> {
        (a != 0).then(|| self.exp[(self.order() - self.log[a as usize] as usize) % self.order()])
    }

    pub fn div(&self, a: u16, b: u16) -> Option<u16> {
        self.inv(b).map(|ib| self.mul(a, ib))
    }
}

/// Product in GF(2^m).
pub fn gf_mul(a: u16, b: u16, field: &GfField) -> u16 {
    field.mul(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Carry-less multiply then reduce, independent of the tables.
    fn slow_mul(a: u16, b: u16, m: u32, poly: u32) -> u16 {
        let mut acc = 0u32;
        for i in 0..m {
            if b >> i & 1 == 1 {
                acc ^= (a as u32) << i;
            }
        }
        for bit in (m..2 * m).rev() {
            if acc >> bit & 1 == 1 {
                acc ^= poly << (bit - m);
            }
        }
        acc as u16
    }

    #[test]
    fn worked_example_gf16() {
        let f = GfField::new(4, 0x13).unwrap();
        // Power table by repeated shift-and-reduce.
        let mut pow = vec![1u16];
        for _ in 1..15 {
            let mut x = (*pow.last().unwrap() as u32) << 1;
            if x & 0x10 != 0 {
                x ^= 0x13;
            }
            pow.push(x as u16);
        }
        assert_eq!(pow[7], 0b1011);
        assert_eq!(pow[9], 0b1010);
        assert_eq!(gf_mul(0b1011, 0b1010, &f), 0b0010);
        assert_eq!(gf_mul(pow[7], pow[9], &f), pow[16 % 15]);
    }

    #[test]
    fn identity_and_annihilator() {
        let f = GfField::with_default_poly(8).unwrap();
        for a in 0..256u16 {
            assert_eq!(f.mul(a, 0), 0);
            assert_eq!(f.mul(a, 1), a);
            if a != 0 {
                assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            }
        }
        assert_eq!(f.inv(0), None);
    }

    #[test]
    fn tables_match_slow_multiply() {
        for m in 2..=8 {
            let f = GfField::with_default_poly(m).unwrap();
            let size = 1u16 << m;
            for a in 0..size {
                for b in 0..size {
                    assert_eq!(f.mul(a, b), slow_mul(a, b, m, f.primitive_poly()));
                }
            }
        }
    }

    #[test]
    fn field_axioms_gf16() {
        let f = GfField::new(4, 0x13).unwrap();
        for a in 0..16u16 {
            for b in 0..16u16 {
                assert_eq!(f.mul(a, b), f.mul(b, a));
                for c in 0..16u16 {
                    assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                    assert_eq!(f.mul(a, b ^ c), f.mul(a, b) ^ f.mul(a, c));
                }
            }
        }
    }

    #[test]
    fn rejects_non_primitive() {
        // x^4 + x^3 + x^2 + x + 1 is irreducible but alpha has order 5.
        assert!(GfField::new(4, 0x1F).is_err());
        // x^4 + 1 is reducible.
        assert!(GfField::new(4, 0x11).is_err());
        assert!(GfField::new(4, 0x7).is_err());
        assert!(GfField::new(9, 0x211).is_err());
    }
}
