//! NIST B-233 point arithmetic: x-only Montgomery ladder in López–Dahab
//! projective coordinates, plus an independent affine double-and-add used as
//! a correctness oracle. Curve equation: y^2 + xy = x^3 + a*x^2 + b.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::field::{BinaryField, FieldElement, FieldError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CurveError {
    #[error("point is not on the curve")]
    OffCurve,
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("invalid scalar `{input}`: {reason}")]
    InvalidScalar { input: String, reason: &'static str },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Affine point, or the identity.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AffinePoint {
    Infinity,
    Point { x: FieldElement, y: FieldElement },
}

impl AffinePoint {
    pub fn is_infinity(&self) -> bool {
        matches!(self, AffinePoint::Infinity)
    }

    pub fn xy(&self) -> Option<(FieldElement, FieldElement)> {
        match self {
            AffinePoint::Infinity => None,
            AffinePoint::Point { x, y } => Some((*x, *y)),
        }
    }

    /// Uncompressed serialization: "INF" or "x,y" in field hex.
    pub fn to_hex(&self, field: &BinaryField) -> String {
        match self {
            AffinePoint::Infinity => "INF".to_string(),
            AffinePoint::Point { x, y } => {
                format!("{},{}", field.element_to_hex(x), field.element_to_hex(y))
            }
        }
    }

    pub fn from_hex(field: &BinaryField, s: &str) -> Result<Self, CurveError> {
        if s == "INF" {
            return Ok(AffinePoint::Infinity);
        }
        let (xs, ys) = s.split_once(',').ok_or(FieldError::InvalidHex {
            input: s.to_string(),
            reason: "expected `x,y` or `INF`",
        })?;
        Ok(AffinePoint::Point {
            x: field.element_from_hex(xs)?,
            y: field.element_from_hex(ys)?,
        })
    }
}

/// The two ladder accumulators in López–Dahab x-only form (affine x = X/Z).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct LdPair {
    pub x1: FieldElement,
    pub z1: FieldElement,
    pub x2: FieldElement,
    pub z2: FieldElement,
}

impl LdPair {
    pub fn swapped(&self) -> LdPair {
        LdPair {
            x1: self.x2,
            z1: self.z2,
            x2: self.x1,
            z2: self.z1,
        }
    }
}

/// Scalar as an MSB-first bit sequence with no leading zeros.
///
/// A full-size attack-scenario scalar has 233 bits (leading bit 1), so the
/// ladder processes 232 bits after the implicit leading one.
#[derive(Clone, PartialEq, Eq)]
pub struct Scalar {
    bits: Vec<bool>,
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({} bits, {})", self.bit_len(), self.to_hex())
    }
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar { bits: Vec::new() }
    }

    pub fn from_bits_msb(bits: &[bool]) -> Self {
        let start = bits.iter().position(|&b| b).unwrap_or(bits.len());
        Scalar {
            bits: bits[start..].to_vec(),
        }
    }

    pub fn from_u64(mut v: u64) -> Self {
        let mut bits = Vec::new();
        while v > 0 {
            bits.push(v & 1 == 1);
            v >>= 1;
        }
        bits.reverse();
        Scalar { bits }
    }

    pub fn from_hex(s: &str) -> Result<Self, CurveError> {
        let bad = |reason| CurveError::InvalidScalar {
            input: s.to_string(),
            reason,
        };
        if s.is_empty() {
            return Err(bad("empty string"));
        }
        let mut bits = Vec::with_capacity(s.len() * 4);
        for c in s.chars() {
            let nib = c.to_digit(16).ok_or_else(|| bad("non-hex digit"))?;
            for b in (0..4).rev() {
                bits.push((nib >> b) & 1 == 1);
            }
        }
        Ok(Scalar::from_bits_msb(&bits))
    }

    pub fn to_hex(&self) -> String {
        if self.bits.is_empty() {
            return "0".to_string();
        }
        let n = self.bits.len().div_ceil(4);
        let mut s = String::with_capacity(n);
        let pad = n * 4 - self.bits.len();
        for i in 0..n {
            let mut nib = 0u32;
            for b in 0..4 {
                let idx = (i * 4 + b) as isize - pad as isize;
                nib <<= 1;
                if idx >= 0 && self.bits[idx as usize] {
                    nib |= 1;
                }
            }
            s.push(char::from_digit(nib, 16).unwrap());
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit_len(&self) -> usize {
        self.bits.len()
    }

    /// Bits after the leading one, MSB first — the bits the ladder processes.
    pub fn processed_bits(&self) -> &[bool] {
        if self.bits.is_empty() {
            &[]
        } else {
            &self.bits[1..]
        }
    }

    /// Random scalar of exactly `total_bits` bits (leading bit forced to 1).
    pub fn random_full<R: Rng + ?Sized>(total_bits: usize, rng: &mut R) -> Self {
        let mut bits = Vec::with_capacity(total_bits);
        bits.push(true);
        for _ in 1..total_bits {
            bits.push(rng.random());
        }
        Scalar { bits }
    }

    /// Uniform random scalar in [1, bound) by rejection sampling.
    pub fn random_below<R: Rng + ?Sized>(bound: &Scalar, rng: &mut R) -> Self {
        assert!(bound.bit_len() > 1);
        loop {
            let mut bits = Vec::with_capacity(bound.bit_len());
            for _ in 0..bound.bit_len() {
                bits.push(rng.random());
            }
            let s = Scalar::from_bits_msb(&bits);
            if !s.is_zero() && s.less_than(bound) {
                return s;
            }
        }
    }

    pub fn less_than(&self, other: &Scalar) -> bool {
        if self.bit_len() != other.bit_len() {
            return self.bit_len() < other.bit_len();
        }
        for (a, b) in self.bits.iter().zip(other.bits.iter()) {
            if a != b {
                return !a;
            }
        }
        false
    }
}

/// Domain parameters. `sqrt_b` is precomputed because the ladder step's
/// doubling uses X' = (X^2 + sqrt(b)*Z^2)^2.
#[derive(Clone, Debug)]
pub struct CurveParams {
    pub field: BinaryField,
    pub a: FieldElement,
    pub b: FieldElement,
    pub sqrt_b: FieldElement,
    pub gx: FieldElement,
    pub gy: FieldElement,
    pub order: Scalar,
}

/// NIST B-233 domain parameters (FIPS 186-4 / SEC 2 "sect233r1").
const B233_B: &str = "066647ede6c332c7f8c0923bb58213b333b20e9ce4281fe115f7d8f90ad";
const B233_GX: &str = "0fac9dfcbac8313bb2139f1bb755fef65bc391f8b36f8f8eb7371fd558b";
const B233_GY: &str = "1006a08a41903350678e58528bebf8a0beff867a7ca36716f7e01f81052";
const B233_N: &str = "1000000000000000000000000000013e974e72f8a6922031d2603cfe0d7";

impl CurveParams {
    pub fn b233() -> Self {
        let field = BinaryField::b233();
        let b = field.element_from_hex(B233_B).expect("static parameters");
        let sqrt_b = field.sqrt(&b);
        CurveParams {
            a: FieldElement::ONE,
            gx: field.element_from_hex(B233_GX).expect("static parameters"),
            gy: field.element_from_hex(B233_GY).expect("static parameters"),
            order: Scalar::from_hex(B233_N).expect("static parameters"),
            field,
            b,
            sqrt_b,
        }
    }

    /// Arbitrary curve over a given field; the base point is validated.
    pub fn new(
        field: BinaryField,
        a: FieldElement,
        b: FieldElement,
        gx: FieldElement,
        gy: FieldElement,
        order: Scalar,
    ) -> Result<Self, CurveError> {
        let sqrt_b = field.sqrt(&b);
        let params = CurveParams {
            field,
            a,
            b,
            sqrt_b,
            gx,
            gy,
            order,
        };
        if !params.is_on_curve(&params.generator()) {
            return Err(CurveError::OffCurve);
        }
        Ok(params)
    }

    pub fn generator(&self) -> AffinePoint {
        AffinePoint::Point {
            x: self.gx,
            y: self.gy,
        }
    }

    /// true iff infinity or y^2 + xy = x^3 + a*x^2 + b.
    pub fn is_on_curve(&self, p: &AffinePoint) -> bool {
        let (x, y) = match p {
            AffinePoint::Infinity => return true,
            AffinePoint::Point { x, y } => (x, y),
        };
        let f = &self.field;
        let lhs = f.add(&f.sqr(y), &f.mul(x, y));
        let x2 = f.sqr(x);
        let rhs = f.add(
            &f.add(&f.mul(&x2, x), &f.mul(&self.a, &x2)),
            &self.b,
        );
        lhs == rhs
    }

    pub fn negate(&self, p: &AffinePoint) -> AffinePoint {
        match p {
            AffinePoint::Infinity => AffinePoint::Infinity,
            AffinePoint::Point { x, y } => AffinePoint::Point {
                x: *x,
                y: self.field.add(x, y),
            },
        }
    }

    /// One combined Madd+Mdouble ladder step. The sequence of field-operation
    /// kinds is fixed; only which accumulator gets doubled depends on `bit`.
    pub fn ladder_step(&self, pair: &LdPair, bit: bool, x_p: &FieldElement) -> LdPair {
        let f = &self.field;
        let p = if bit { pair.swapped() } else { *pair };
        // Madd (swap-invariant): T1 = X1*Z2, T2 = X2*Z1,
        //   Z_add = (T1+T2)^2, X_add = x_P*Z_add + T1*T2
        let t1 = f.mul(&p.x1, &p.z2);
        let t2 = f.mul(&p.x2, &p.z1);
        let s = f.add(&t1, &t2);
        let z_add = f.sqr(&s);
        let prod = f.mul(&t1, &t2);
        let x_add = f.add(&f.mul(x_p, &z_add), &prod);
        // Mdouble of the first accumulator:
        //   Z_dbl = (X1*Z1)^2 = X1^2 * Z1^2,
        //   X_dbl = X1^4 + b*Z1^4 = (X1^2 + sqrt(b)*Z1^2)^2
        let xsq = f.sqr(&p.x1);
        let zsq = f.sqr(&p.z1);
        let z_dbl = f.mul(&xsq, &zsq);
        let tb = f.mul(&self.sqrt_b, &zsq);
        let x_dbl = f.sqr(&f.add(&xsq, &tb));
        let out = LdPair {
            x1: x_dbl,
            z1: z_dbl,
            x2: x_add,
            z2: z_add,
        };
        if bit {
            out.swapped()
        } else {
            out
        }
    }

    /// Ladder start state for base x: R0 = (x : 1), R1 = Mdouble(R0).
    pub fn ladder_init(&self, x_p: &FieldElement) -> LdPair {
        let f = &self.field;
        LdPair {
            x1: *x_p,
            z1: FieldElement::ONE,
            x2: f.add(&f.sqr(&f.sqr(x_p)), &self.b),
            z2: f.sqr(x_p),
        }
    }

    /// Recover the affine result from the final ladder state.
    ///
    /// Z1 = 0 means kP = infinity; Z2 = 0 means (k+1)P = infinity, so
    /// kP = -P. Otherwise y is reconstructed from x1 = X1/Z1, x2 = X2/Z2:
    ///   y1 = (x1 + x) * [(x1 + x)(x2 + x) + x^2 + y] / x + y
    pub fn ladder_finish(&self, pair: &LdPair, p: &AffinePoint) -> Result<AffinePoint, CurveError> {
        let f = &self.field;
        let (x, y) = p.xy().ok_or(CurveError::Degenerate("infinity base point"))?;
        if pair.z1.is_zero() {
            if pair.x1.is_zero() {
                return Err(CurveError::Degenerate("ladder collapsed to (0:0)"));
            }
            return Ok(AffinePoint::Infinity);
        }
        if pair.z2.is_zero() {
            if pair.x2.is_zero() {
                return Err(CurveError::Degenerate("ladder collapsed to (0:0)"));
            }
            return Ok(self.negate(p));
        }
        let x1 = f.mul(&pair.x1, &f.inv(&pair.z1)?);
        let x2 = f.mul(&pair.x2, &f.inv(&pair.z2)?);
        let u = f.add(&x1, &x);
        let v = f.add(&x2, &x);
        let t = f.add(&f.mul(&u, &v), &f.add(&f.sqr(&x), &y));
        let y1 = f.add(&f.mul(&f.mul(&u, &t), &f.inv(&x)?), &y);
        Ok(AffinePoint::Point { x: x1, y: y1 })
    }

    /// kP via the x-only Montgomery ladder: exactly one ladder step per
    /// processed key bit (MSB first, after the leading one), then y-recovery.
    pub fn ladder_kp(&self, k: &Scalar, p: &AffinePoint) -> Result<AffinePoint, CurveError> {
        if k.is_zero() {
            return Ok(AffinePoint::Infinity);
        }
        let (x_p, _) = p.xy().ok_or(CurveError::Degenerate("infinity base point"))?;
        if x_p.is_zero() {
            // x = 0 is the order-2 point; the x-only ladder cannot represent
            // its multiples.
            return Err(CurveError::Degenerate("base point with x = 0"));
        }
        let mut pair = self.ladder_init(&x_p);
        for &bit in k.processed_bits() {
            pair = self.ladder_step(&pair, bit, &x_p);
        }
        self.ladder_finish(&pair, p)
    }

    fn add_points(&self, p: &AffinePoint, q: &AffinePoint) -> Result<AffinePoint, CurveError> {
        let f = &self.field;
        let (x1, y1) = match p.xy() {
            None => return Ok(*q),
            Some(v) => v,
        };
        let (x2, y2) = match q.xy() {
            None => return Ok(*p),
            Some(v) => v,
        };
        if x1 == x2 {
            if f.add(&y2, &f.add(&x1, &y1)) == FieldElement::ZERO {
                // q = -p
                return Ok(AffinePoint::Infinity);
            }
            return self.double_point(p);
        }
        let lambda = f.mul(&f.add(&y1, &y2), &f.inv(&f.add(&x1, &x2))?);
        let x3 = f.add(
            &f.add(&f.add(&f.sqr(&lambda), &lambda), &f.add(&x1, &x2)),
            &self.a,
        );
        let y3 = f.add(&f.add(&f.mul(&lambda, &f.add(&x1, &x3)), &x3), &y1);
        Ok(AffinePoint::Point { x: x3, y: y3 })
    }

    fn double_point(&self, p: &AffinePoint) -> Result<AffinePoint, CurveError> {
        let f = &self.field;
        let (x1, y1) = match p.xy() {
            None => return Ok(AffinePoint::Infinity),
            Some(v) => v,
        };
        if x1.is_zero() {
            // order-2 point
            return Ok(AffinePoint::Infinity);
        }
        let lambda = f.add(&x1, &f.mul(&y1, &f.inv(&x1)?));
        let x3 = f.add(&f.add(&f.sqr(&lambda), &lambda), &self.a);
        let y3 = f.add(
            &f.sqr(&x1),
            &f.mul(&f.add(&lambda, &FieldElement::ONE), &x3),
        );
        Ok(AffinePoint::Point { x: x3, y: y3 })
    }

    /// Textbook affine double-and-add; the ladder's independent oracle.
    pub fn double_and_add_kp(&self, k: &Scalar, p: &AffinePoint) -> Result<AffinePoint, CurveError> {
        if p.is_infinity() {
            return Err(CurveError::Degenerate("infinity base point"));
        }
        let mut acc = AffinePoint::Infinity;
        for i in 0..k.bit_len() {
            acc = self.double_point(&acc)?;
            if k.bits[i] {
                acc = self.add_points(&acc, p)?;
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn b233_transcription_gated_by_on_curve() {
        let c = CurveParams::b233();
        assert!(c.is_on_curve(&AffinePoint::Infinity));
        assert!(c.is_on_curve(&c.generator()));
        // perturbation check
        let (x, y) = c.generator().xy().unwrap();
        let bad = AffinePoint::Point {
            x,
            y: c.field.add(&y, &FieldElement::ONE),
        };
        assert!(!c.is_on_curve(&bad));
        assert_eq!(c.order.bit_len(), 233);
        assert_eq!(c.order.processed_bits().len(), 232);
    }

    #[test]
    fn ladder_small_scalars() {
        let c = CurveParams::b233();
        let g = c.generator();
        assert_eq!(c.ladder_kp(&Scalar::from_u64(1), &g).unwrap(), g);
        let two = c.ladder_kp(&Scalar::from_u64(2), &g).unwrap();
        assert_eq!(two, c.double_point(&g).unwrap());
        assert!(c.is_on_curve(&two));
        assert_eq!(
            c.ladder_kp(&Scalar::zero(), &g).unwrap(),
            AffinePoint::Infinity
        );
    }

    #[test]
    fn ladder_matches_double_and_add() {
        let c = CurveParams::b233();
        let g = c.generator();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..64 {
            let k = Scalar::random_below(&c.order, &mut rng);
            let a = c.ladder_kp(&k, &g).unwrap();
            let b = c.double_and_add_kp(&k, &g).unwrap();
            assert_eq!(a, b, "k={}", k.to_hex());
            assert!(c.is_on_curve(&a));
        }
        // also for full-size 233-bit scalars (which may exceed the order)
        for _ in 0..16 {
            let k = Scalar::random_full(233, &mut rng);
            assert_eq!(
                c.ladder_kp(&k, &g).unwrap(),
                c.double_and_add_kp(&k, &g).unwrap()
            );
        }
    }

    #[test]
    fn group_order_annihilates() {
        let c = CurveParams::b233();
        let g = c.generator();
        assert_eq!(
            c.double_and_add_kp(&c.order, &g).unwrap(),
            AffinePoint::Infinity
        );
        // ladder: Z1 = 0 at the end resolves to infinity
        assert_eq!(c.ladder_kp(&c.order, &g).unwrap(), AffinePoint::Infinity);
    }

    #[test]
    fn negation_pair_sums_to_order() {
        let c = CurveParams::b233();
        let g = c.generator();
        let n = BigUint::parse_bytes(c.order.to_hex().as_bytes(), 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..8 {
            let k = Scalar::random_below(&c.order, &mut rng);
            let kb = BigUint::parse_bytes(k.to_hex().as_bytes(), 16).unwrap();
            let k2 = Scalar::from_hex(&(&n - &kb).to_str_radix(16)).unwrap();
            let p1 = c.double_and_add_kp(&k, &g).unwrap();
            let p2 = c.double_and_add_kp(&k2, &g).unwrap();
            let (x1, y1) = p1.xy().unwrap();
            let (x2, y2) = p2.xy().unwrap();
            assert_eq!(x1, x2);
            assert_eq!(y2, c.field.add(&x1, &y1)); // -P = (x, x+y)
        }
    }

    #[test]
    fn ladder_step_swap_symmetry() {
        let c = CurveParams::b233();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..32 {
            let pair = LdPair {
                x1: c.field.random_element(&mut rng),
                z1: c.field.random_element(&mut rng),
                x2: c.field.random_element(&mut rng),
                z2: c.field.random_element(&mut rng),
            };
            let x_p = c.field.random_element(&mut rng);
            let a = c.ladder_step(&pair, true, &x_p);
            let b = c.ladder_step(&pair.swapped(), false, &x_p).swapped();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ladder_step_run_matches_ladder_kp() {
        let c = CurveParams::b233();
        let g = c.generator();
        let (x_p, _) = g.xy().unwrap();
        let k = Scalar::from_hex("1a2b3c4d5e6f").unwrap();
        let mut pair = c.ladder_init(&x_p);
        for &bit in k.processed_bits() {
            pair = c.ladder_step(&pair, bit, &x_p);
        }
        assert_eq!(
            c.ladder_finish(&pair, &g).unwrap(),
            c.ladder_kp(&k, &g).unwrap()
        );
    }

    /// Find a tiny curve over GF(2^4) with an odd-order base point (x != 0)
    /// and check the ladder against double-and-add exhaustively for all k.
    #[test]
    fn tiny_curve_exhaustive() {
        let field = BinaryField::gf16();
        let mut found = false;
        'outer: for b_val in 1u64..16 {
            let b = FieldElement::from_u64(b_val);
            let a = FieldElement::ONE;
            // enumerate points
            let mut points = Vec::new();
            for xv in 0u64..16 {
                for yv in 0u64..16 {
                    let p = AffinePoint::Point {
                        x: FieldElement::from_u64(xv),
                        y: FieldElement::from_u64(yv),
                    };
                    let c = CurveParams {
                        field: field.clone(),
                        a,
                        b,
                        sqrt_b: field.sqrt(&b),
                        gx: FieldElement::from_u64(xv),
                        gy: FieldElement::from_u64(yv),
                        order: Scalar::from_u64(1),
                        };
                    if c.is_on_curve(&p) {
                        points.push(p);
                    }
                }
            }
            for p in &points {
                let (x, _) = p.xy().unwrap();
                if x.is_zero() {
                    continue;
                }
                let c = CurveParams {
                    field: field.clone(),
                    a,
                    b,
                    sqrt_b: field.sqrt(&b),
                    gx: x,
                    gy: p.xy().unwrap().1,
                    order: Scalar::from_u64(1),
                };
                // order of p by repeated addition
                let mut ord = 1u64;
                let mut acc = *p;
                while !acc.is_infinity() {
                    acc = c.add_points(&acc, p).unwrap();
                    ord += 1;
                    if ord > 64 {
                        break;
                    }
                }
                if acc.is_infinity() && ord % 2 == 1 && ord >= 5 {
                    // exhaustive ladder-vs-oracle over all k in [0, 2*ord]
                    for k in 0..=2 * ord {
                        let ks = Scalar::from_u64(k);
                        let oracle = c.double_and_add_kp(&ks, p).unwrap();
                        let ladder = c.ladder_kp(&ks, p).unwrap();
                        assert_eq!(ladder, oracle, "b={b_val} ord={ord} k={k}");
                    }
                    found = true;
                    break 'outer;
                }
            }
        }
        assert!(found, "no odd-order tiny-curve base point found");
    }

    #[test]
    fn scalar_representation() {
        let k = Scalar::from_hex("0f00").unwrap();
        assert_eq!(k.bit_len(), 12);
        assert_eq!(k.processed_bits().len(), 11);
        assert_eq!(k.to_hex(), "f00");
        assert_eq!(Scalar::from_u64(0).to_hex(), "0");
        assert!(Scalar::from_hex("xyz").is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let k = Scalar::random_full(233, &mut rng);
        assert_eq!(k.bit_len(), 233);
        assert_eq!(k.processed_bits().len(), 232);
        let rt = Scalar::from_hex(&k.to_hex()).unwrap();
        assert_eq!(rt, k);
    }

    #[test]
    fn point_hex_round_trip() {
        let c = CurveParams::b233();
        let g = c.generator();
        let s = g.to_hex(&c.field);
        assert_eq!(AffinePoint::from_hex(&c.field, &s).unwrap(), g);
        assert_eq!(
            AffinePoint::from_hex(&c.field, "INF").unwrap(),
            AffinePoint::Infinity
        );
        assert_eq!(AffinePoint::Infinity.to_hex(&c.field), "INF");
    }
}
