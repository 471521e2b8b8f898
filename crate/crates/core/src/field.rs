//! Arithmetic in binary extension fields GF(2^m), polynomial basis.
//!
//! Elements are polynomials over GF(2) stored as bit vectors (bit `i` is the
//! coefficient of `x^i`), reduced modulo an irreducible polynomial `f(x)`.
//! The machinery is generic over `(degree, f)` up to degree 255 so the same
//! code path can be exercised exhaustively in GF(2^4) and used for the
//! B-233 field `f(x) = x^233 + x^74 + 1`.

use std::fmt;

use rand::Rng;
use thiserror::Error;

/// Number of 64-bit limbs in an element; supports degrees up to 255.
const LIMBS: usize = 4;
/// Limbs in an unreduced product of two elements.
const WIDE: usize = 8;

pub const MAX_DEGREE: u32 = 255;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("inverse of zero is undefined")]
    InverseOfZero,
    #[error("invalid hex element `{input}`: {reason}")]
    InvalidHex { input: String, reason: &'static str },
    #[error("unsupported field degree {0} (expected 2..=255)")]
    BadDegree(u32),
}

/// Element of GF(2^m). Canonical: all bits at positions >= m are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FieldElement {
    limbs: [u64; LIMBS],
}

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement { limbs: [0; LIMBS] };
    pub const ONE: FieldElement = FieldElement { limbs: [1, 0, 0, 0] };

    pub fn from_u64(v: u64) -> Self {
        FieldElement { limbs: [v, 0, 0, 0] }
    }

    pub fn is_zero(&self) -> bool {
        self.limbs == [0; LIMBS]
    }

    pub fn bit(&self, i: u32) -> bool {
        let (w, b) = (i as usize / 64, i % 64);
        w < LIMBS && (self.limbs[w] >> b) & 1 == 1
    }

    /// Degree of the polynomial, or `None` for the zero element.
    pub fn degree(&self) -> Option<u32> {
        for w in (0..LIMBS).rev() {
            if self.limbs[w] != 0 {
                return Some(w as u32 * 64 + 63 - self.limbs[w].leading_zeros());
            }
        }
        None
    }

    pub fn hamming_weight(&self) -> u32 {
        self.limbs.iter().map(|l| l.count_ones()).sum()
    }

    pub fn hamming_distance(&self, other: &FieldElement) -> u32 {
        self.limbs
            .iter()
            .zip(other.limbs.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn limbs(&self) -> &[u64; LIMBS] {
        &self.limbs
    }

    fn xor_assign(&mut self, other: &FieldElement) {
        for (a, b) in self.limbs.iter_mut().zip(other.limbs.iter()) {
            *a ^= b;
        }
    }

    /// Low 32-bit window starting at bit `32 * digit`.
    pub fn digit32(&self, digit: u32) -> u32 {
        let bit = digit as u64 * 32;
        let w = (bit / 64) as usize;
        if w >= LIMBS {
            return 0;
        }
        if bit.is_multiple_of(64) {
            self.limbs[w] as u32
        } else {
            (self.limbs[w] >> 32) as u32
        }
    }

    /// Logical right shift by 32 bits (digit consumption, no reduction).
    pub fn shr32(&self) -> FieldElement {
        let mut out = [0u64; LIMBS];
        for w in 0..LIMBS {
            let hi = if w + 1 < LIMBS { self.limbs[w + 1] << 32 } else { 0 };
            out[w] = (self.limbs[w] >> 32) | hi;
        }
        FieldElement { limbs: out }
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "FieldElement({:016x}{:016x}{:016x}{:016x})",
            self.limbs[3], self.limbs[2], self.limbs[1], self.limbs[0]
        )
    }
}

/// Field descriptor: degree m and the reduction polynomial f(x).
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryField {
    degree: u32,
    /// f(x) including the leading x^m term.
    reduction: [u64; LIMBS],
}

impl fmt::Debug for BinaryField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryField(m={})", self.degree)
    }
}

impl BinaryField {
    /// Field with `f(x) = x^degree + sum(x^t for t in mid_terms) + 1`.
    pub fn new(degree: u32, mid_terms: &[u32]) -> Result<Self, FieldError> {
        if !(2..=MAX_DEGREE).contains(&degree) {
            return Err(FieldError::BadDegree(degree));
        }
        let mut reduction = [0u64; LIMBS];
        reduction[0] |= 1;
        reduction[degree as usize / 64] |= 1u64 << (degree % 64);
        for &t in mid_terms {
            assert!(t > 0 && t < degree, "mid term {t} out of range");
            reduction[t as usize / 64] |= 1u64 << (t % 64);
        }
        Ok(BinaryField { degree, reduction })
    }

    /// The field underlying NIST B-233: GF(2^233), f(x) = x^233 + x^74 + 1.
    pub fn b233() -> Self {
        BinaryField::new(233, &[74]).expect("static parameters")
    }

    /// GF(2^4) with f(x) = x^4 + x + 1; small enough for exhaustive checks.
    pub fn gf16() -> Self {
        BinaryField::new(4, &[1]).expect("static parameters")
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Number of hex digits in the canonical serialization (59 for B-233).
    pub fn hex_len(&self) -> usize {
        (self.degree as usize).div_ceil(4)
    }

    pub fn contains(&self, e: &FieldElement) -> bool {
        match e.degree() {
            None => true,
            Some(d) => d < self.degree,
        }
    }

    /// Coefficient-wise XOR.
    pub fn add(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        debug_assert!(self.contains(a) && self.contains(b));
        let mut out = *a;
        out.xor_assign(b);
        out
    }

    /// Multiply by x and reduce.
    fn mulx(&self, a: &FieldElement) -> FieldElement {
        let mut out = [0u64; LIMBS];
        let mut carry = 0u64;
        for w in 0..LIMBS {
            out[w] = (a.limbs[w] << 1) | carry;
            carry = a.limbs[w] >> 63;
        }
        let top = self.degree;
        let mut e = FieldElement { limbs: out };
        if e.bit(top) {
            e.limbs[top as usize / 64] ^= 1u64 << (top % 64);
            let mut f_low = FieldElement { limbs: self.reduction };
            f_low.limbs[top as usize / 64] ^= 1u64 << (top % 64);
            e.xor_assign(&f_low);
        }
        e
    }

    /// Product a*b mod f, by left-to-right shift-and-add with interleaved
    /// reduction. (The test oracle recomputes products via a schoolbook
    /// carry-less multiply followed by long division.)
    pub fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        debug_assert!(self.contains(a) && self.contains(b));
        let mut acc = FieldElement::ZERO;
        for i in (0..self.degree).rev() {
            acc = self.mulx(&acc);
            if a.bit(i) {
                acc.xor_assign(b);
            }
        }
        acc
    }

    /// Squaring via coefficient spreading plus reduction.
    pub fn sqr(&self, a: &FieldElement) -> FieldElement {
        debug_assert!(self.contains(a));
        let mut wide = [0u64; WIDE];
        for w in 0..LIMBS {
            let (lo, hi) = spread_u64(a.limbs[w]);
            wide[2 * w] = lo;
            wide[2 * w + 1] = hi;
        }
        self.reduce_wide(wide)
    }

    /// Square root: the inverse Frobenius, i.e. m-1 repeated squarings.
    pub fn sqrt(&self, a: &FieldElement) -> FieldElement {
        let mut out = *a;
        for _ in 0..self.degree - 1 {
            out = self.sqr(&out);
        }
        out
    }

    /// Multiplicative inverse via the polynomial extended Euclidean
    /// algorithm. Errors on zero input.
    pub fn inv(&self, a: &FieldElement) -> Result<FieldElement, FieldError> {
        if a.is_zero() {
            return Err(FieldError::InverseOfZero);
        }
        debug_assert!(self.contains(a));
        let mut u = *a;
        let mut v = FieldElement { limbs: self.reduction };
        let mut g1 = FieldElement::ONE;
        let mut g2 = FieldElement::ZERO;
        while u != FieldElement::ONE {
            let du = u.degree().expect("u stays nonzero for invertible input");
            let dv = v.degree().expect("v starts at f and never reaches zero first");
            if du < dv {
                std::mem::swap(&mut u, &mut v);
                std::mem::swap(&mut g1, &mut g2);
                continue;
            }
            let j = du - dv;
            u = xor_shifted(&u, &v, j);
            g1 = xor_shifted(&g1, &g2, j);
        }
        Ok(g1)
    }

    /// Reduce an up-to-2m-2 degree polynomial modulo f.
    pub(crate) fn reduce_wide(&self, mut wide: [u64; WIDE]) -> FieldElement {
        let m = self.degree;
        let wide_degree = |p: &[u64; WIDE]| -> Option<u32> {
            for w in (0..WIDE).rev() {
                if p[w] != 0 {
                    return Some(w as u32 * 64 + 63 - p[w].leading_zeros());
                }
            }
            None
        };
        while let Some(d) = wide_degree(&wide) {
            if d < m {
                break;
            }
            // wide ^= f << (d - m)
            let shift = d - m;
            let word = (shift / 64) as usize;
            let off = shift % 64;
            for k in 0..LIMBS {
                if self.reduction[k] == 0 {
                    continue;
                }
                wide[word + k] ^= self.reduction[k] << off;
                if off != 0 && word + k + 1 < WIDE {
                    wide[word + k + 1] ^= self.reduction[k] >> (64 - off);
                }
            }
        }
        FieldElement {
            limbs: [wide[0], wide[1], wide[2], wide[3]],
        }
    }

    /// One digit-serial multiplier step: a * digit * x^(32*digit_index) mod f.
    pub fn mul_digit(&self, a: &FieldElement, digit: u32, digit_index: u32) -> FieldElement {
        let mut wide = [0u64; WIDE];
        let base = digit_index * 32;
        for t in 0..32 {
            if (digit >> t) & 1 != 1 {
                continue;
            }
            let shift = base + t;
            let word = (shift / 64) as usize;
            let off = shift % 64;
            for k in 0..LIMBS {
                if a.limbs[k] == 0 {
                    continue;
                }
                wide[word + k] ^= a.limbs[k] << off;
                if off != 0 && word + k + 1 < WIDE {
                    wide[word + k + 1] ^= a.limbs[k] >> (64 - off);
                }
            }
        }
        self.reduce_wide(wide)
    }

    /// Uniform random element, for randomized tests and scenario setup.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        let mut limbs = [0u64; LIMBS];
        for l in limbs.iter_mut() {
            *l = rng.random();
        }
        for i in self.degree..MAX_DEGREE + 1 {
            let (w, b) = (i as usize / 64, i % 64);
            if w < LIMBS {
                limbs[w] &= !(1u64 << b);
            }
        }
        FieldElement { limbs }
    }

    /// Canonical hex form: `hex_len` digits, most significant nibble first.
    pub fn element_to_hex(&self, e: &FieldElement) -> String {
        let n = self.hex_len();
        let mut s = String::with_capacity(n);
        for i in (0..n).rev() {
            let mut nib = 0u8;
            for b in 0..4 {
                let bit = (i * 4 + b) as u32;
                if e.bit(bit) {
                    nib |= 1 << b;
                }
            }
            s.push(char::from_digit(nib as u32, 16).unwrap());
        }
        s
    }

    /// Parse hex (any length up to `hex_len`); rejects out-of-field values.
    pub fn element_from_hex(&self, s: &str) -> Result<FieldElement, FieldError> {
        let bad = |reason| FieldError::InvalidHex {
            input: s.to_string(),
            reason,
        };
        if s.is_empty() {
            return Err(bad("empty string"));
        }
        if s.len() > self.hex_len() {
            return Err(bad("too many digits for this field"));
        }
        let mut limbs = [0u64; LIMBS];
        for (i, c) in s.chars().rev().enumerate() {
            let nib = c.to_digit(16).ok_or_else(|| bad("non-hex digit"))? as u64;
            limbs[i / 16] |= nib << (4 * (i % 16));
        }
        let e = FieldElement { limbs };
        if !self.contains(&e) {
            return Err(bad("value has degree >= field degree"));
        }
        Ok(e)
    }
}

/// dst ^= src << (shift bits), within a single element's limbs.
fn xor_shifted(dst: &FieldElement, src: &FieldElement, shift: u32) -> FieldElement {
    let mut out = *dst;
    let word = (shift / 64) as usize;
    let off = shift % 64;
    for k in 0..LIMBS {
        if src.limbs[k] == 0 {
            continue;
        }
        if word + k < LIMBS {
            out.limbs[word + k] ^= src.limbs[k] << off;
        }
        if off != 0 && word + k + 1 < LIMBS {
            out.limbs[word + k + 1] ^= src.limbs[k] >> (64 - off);
        }
    }
    out
}

/// Interleave zeros between the bits of `v`: bit i -> bit 2i.
fn spread_u64(v: u64) -> (u64, u64) {
    fn spread32(mut x: u64) -> u64 {
        x &= 0xffff_ffff;
        x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
        x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
        x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
        x = (x | (x << 2)) & 0x3333_3333_3333_3333;
        x = (x | (x << 1)) & 0x5555_5555_5555_5555;
        x
    }
    (spread32(v), spread32(v >> 32))
}
