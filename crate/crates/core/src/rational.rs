//! Exact rational scalars and radical sums.
//!
//! All feasibility-relevant arithmetic in this crate runs over `Rat`
//! (arbitrary-precision rationals, always in lowest terms with positive
//! denominator). Floating point appears only in plot layout.

use num::bigint::Sign;
use num::{BigInt, BigRational, One, Signed, Zero};
use std::cmp::Ordering;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Exact rational scalar; lowest terms, denominator > 0 by construction.
pub type Rat = BigRational;

/// Rational from an integer.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Rational p/q from integers. Panics if q == 0.
pub fn ratio(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// Parses `"p/q"` or `"p"` (ASCII decimal, optional leading `-`).
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), Some(q.trim())),
        None => (s, None),
    };
    let p = BigInt::from_str(num)
        .map_err(|_| Error::Invalid(format!("malformed rational {s:?}")))?;
    let q = match den {
        Some(q) => BigInt::from_str(q)
            .map_err(|_| Error::Invalid(format!("malformed rational {s:?}")))?,
        None => BigInt::one(),
    };
    if q.is_zero() {
        return Err(Error::Invalid(format!("zero denominator in {s:?}")));
    }
    Ok(Rat::new(p, q))
}

/// Formats in the file-format convention: `"p"` for integers, else `"p/q"`.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Floor of the nonnegative integer square root.
pub fn isqrt(n: &BigInt) -> BigInt {
    assert!(!n.is_negative(), "isqrt of negative");
    n.sqrt()
}

/// A finite sum Σ cᵢ·√rᵢ with rational cᵢ ≥ 0 and rational radicands rᵢ ≥ 0,
/// kept in a normal form (perfect-square parts folded into the rational term,
/// small square factors extracted, equal radicands merged).
///
/// Supports exact comparison: equality by normal form, strict order by
/// adaptive-precision rational enclosures. Used to compare Euclidean track
/// lengths without leaving exact arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqrtSum {
    /// Purely rational part.
    rational: Rat,
    /// (coefficient, radicand) terms, radicand > 0 and not a perfect square,
    /// sorted by radicand, coefficients > 0 merged.
    terms: Vec<(Rat, Rat)>,
}

impl SqrtSum {
    pub fn zero() -> Self {
        SqrtSum { rational: Rat::zero(), terms: Vec::new() }
    }

    /// √r for a rational r ≥ 0.
    pub fn sqrt(r: &Rat) -> Self {
        let mut s = SqrtSum::zero();
        s.add_sqrt(&Rat::one(), r);
        s
    }

    /// Adds c·√r in place (c ≥ 0, r ≥ 0).
    pub fn add_sqrt(&mut self, c: &Rat, r: &Rat) {
        assert!(!c.is_negative() && !r.is_negative(), "SqrtSum terms must be nonnegative");
        if c.is_zero() || r.is_zero() {
            return;
        }
        // √(p/q) = √(pq)/q; pull out the largest square factor we can find.
        let m = r.numer() * r.denom();
        let (square, rest) = split_square(&m);
        let coeff = c * Rat::new(square, r.denom().clone());
        if rest.is_one() {
            self.rational += coeff;
            return;
        }
        let radicand = Rat::from_integer(rest);
        match self.terms.binary_search_by(|(_, rad)| rad.cmp(&radicand)) {
            Ok(i) => {
                self.terms[i].0 += coeff;
            }
            Err(i) => self.terms.insert(i, (coeff, radicand)),
        }
    }

    pub fn add_assign(&mut self, other: &SqrtSum) {
        self.rational += &other.rational;
        for (c, r) in &other.terms {
            // r is already square-free as stored; re-normalizing is harmless.
            self.add_sqrt(c, r);
        }
    }

    /// Rational enclosure [lo, hi] with hi − lo ≤ ‖terms‖ · 2⁻ᵖʳᵉᶜ.
    fn enclosure(&self, prec: u32) -> (Rat, Rat) {
        let mut lo = self.rational.clone();
        let mut hi = self.rational.clone();
        for (c, r) in &self.terms {
            let (slo, shi) = sqrt_bounds(r, prec);
            lo += c * slo;
            hi += c * shi;
        }
        (lo, hi)
    }

    /// Exact three-way comparison.
    ///
    /// Normal forms decide equality; otherwise the enclosures are refined
    /// until they separate. Termination for unequal values follows from the
    /// normal form being unique for sums over independent square roots at
    /// the scales this crate produces; a precision cap guards the loop.
    pub fn cmp_exact(&self, other: &SqrtSum) -> Ordering {
        if self.rational == other.rational && self.terms == other.terms {
            return Ordering::Equal;
        }
        let mut prec = 32u32;
        while prec <= 4096 {
            let (alo, ahi) = self.enclosure(prec);
            let (blo, bhi) = other.enclosure(prec);
            if ahi < blo {
                return Ordering::Less;
            }
            if bhi < alo {
                return Ordering::Greater;
            }
            prec *= 2;
        }
        panic!("SqrtSum comparison did not separate; values may be equal in a non-normal form");
    }

    /// f64 approximation, for display only.
    pub fn to_f64(&self) -> f64 {
        let mut v = rat_to_f64(&self.rational);
        for (c, r) in &self.terms {
            v += rat_to_f64(c) * rat_to_f64(r).sqrt();
        }
        v
    }
}

/// Splits n ≥ 0 as s²·m with m square-free over the primes below 1000
/// (plus a perfect-square check for the remainder). Returns (s, m).
fn split_square(n: &BigInt) -> (BigInt, BigInt) {
    if n.is_zero() {
        return (BigInt::zero(), BigInt::one());
    }
    let root = isqrt(n);
    if &root * &root == *n {
        return (root, BigInt::one());
    }
    let mut s = BigInt::one();
    let mut m = n.clone();
    let mut p = 2u64;
    while p < 1000 {
        let pp = BigInt::from(p * p);
        while (&m % &pp).is_zero() {
            m /= &pp;
            s *= BigInt::from(p);
        }
        p = if p == 2 { 3 } else { p + 2 };
    }
    (s, m)
}

/// Rational bounds lo ≤ √r ≤ hi with hi − lo ≤ 2⁻ᵖʳᵉᶜ·max(1,√r).
fn sqrt_bounds(r: &Rat, prec: u32) -> (Rat, Rat) {
    // Scale by 4^prec so the integer square root carries prec extra bits.
    let scale = BigInt::one() << (2 * prec);
    let scaled = r * Rat::from_integer(scale);
    // floor(√(p/q)) via isqrt(p·q)/q.
    let pq = scaled.numer() * scaled.denom();
    let root = isqrt(&pq);
    let denom = scaled.denom() * (BigInt::one() << prec);
    let lo = Rat::new(root.clone(), denom.clone());
    let hi = Rat::new(root + BigInt::one(), denom);
    (lo, hi)
}

/// Lossy conversion for plotting and human-readable summaries.
pub fn rat_to_f64(r: &Rat) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        // Extremely large components: fall back to sign only.
        match r.numer().sign() {
            Sign::Minus => f64::NEG_INFINITY,
            Sign::NoSign => 0.0,
            Sign::Plus => f64::INFINITY,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["0", "5", "-3", "1/2", "-7/3", "10/4"] {
            let r = parse_rat(s).unwrap();
            let t = parse_rat(&format_rat(&r)).unwrap();
            assert_eq!(r, t);
        }
        assert_eq!(format_rat(&parse_rat("10/4").unwrap()), "5/2");
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("a/b").is_err());
    }

    #[test]
    fn sqrt_sum_folds_perfect_squares() {
        let s = SqrtSum::sqrt(&ratio(9, 4));
        assert_eq!(s, {
            let mut t = SqrtSum::zero();
            t.rational = ratio(3, 2);
            t
        });
    }

    #[test]
    fn sqrt_sum_normalizes_square_factors() {
        // √8 = 2√2
        let a = SqrtSum::sqrt(&rat(8));
        let mut b = SqrtSum::zero();
        b.add_sqrt(&rat(2), &rat(2));
        assert_eq!(a.cmp_exact(&b), Ordering::Equal);
    }

    #[test]
    fn sqrt_sum_strict_comparison() {
        // 4·√4.81 < 4·√5.21
        let mut a = SqrtSum::zero();
        a.add_sqrt(&rat(4), &ratio(481, 100));
        let mut b = SqrtSum::zero();
        b.add_sqrt(&rat(4), &ratio(521, 100));
        assert_eq!(a.cmp_exact(&b), Ordering::Less);
        // √2 + √3 > √5
        let mut c = SqrtSum::sqrt(&rat(2));
        c.add_assign(&SqrtSum::sqrt(&rat(3)));
        let d = SqrtSum::sqrt(&rat(5));
        assert_eq!(c.cmp_exact(&d), Ordering::Greater);
    }
}
