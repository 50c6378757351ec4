//! Exact scalars over the three coefficient domains: prime fields `F_p`,
//! the ring `Z/p^2` of mod-`p^2` lifts, and the rationals `Q`.
//!
//! Modular values are kept as least nonnegative residues; rationals are
//! reduced fractions with positive denominator (enforced by `BigRational`).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;

use crate::error::Error;

/// Coefficient domain tag shared by every value in a computation.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Domain {
    /// Prime field with modulus `p`.
    Fp(u64),
    /// Integers modulo `p^2`, tagged by the prime `p`.
    Zp2(u64),
    /// Arbitrary-precision rationals.
    Q,
}

impl Domain {
    /// Prime field of modulus `p`; rejects composite moduli.
    pub fn fp(p: u64) -> Result<Domain, Error> {
        if is_prime(p) {
            Ok(Domain::Fp(p))
        } else {
            Err(Error::NotPrime(p))
        }
    }

    /// `Z/p^2` tagged by the prime `p`; rejects composite `p`.
    pub fn zp2(p: u64) -> Result<Domain, Error> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        p.checked_mul(p).ok_or(Error::ModulusOverflow(p))?;
        Ok(Domain::Zp2(p))
    }

    /// The prime `p` for the modular domains, `None` over `Q`.
    pub fn prime(&self) -> Option<u64> {
        match self {
            Domain::Fp(p) | Domain::Zp2(p) => Some(*p),
            Domain::Q => None,
        }
    }

    /// Characteristic of the underlying ring (`p`, `p^2`, or 0).
    pub fn characteristic(&self) -> u64 {
        match self {
            Domain::Fp(p) => *p,
            Domain::Zp2(p) => p * p,
            Domain::Q => 0,
        }
    }

    pub fn zero(&self) -> Scalar {
        match self {
            Domain::Fp(p) => Scalar::Fp { p: *p, v: 0 },
            Domain::Zp2(p) => Scalar::Zp2 { p: *p, v: 0 },
            Domain::Q => Scalar::Q(BigRational::zero()),
        }
    }

    pub fn one(&self) -> Scalar {
        self.from_i64(1)
    }

    /// Canonical image of a machine integer.
    pub fn from_i64(&self, n: i64) -> Scalar {
        self.from_bigint(&BigInt::from(n))
    }

    /// Canonical image of an arbitrary-precision integer.
    pub fn from_bigint(&self, n: &BigInt) -> Scalar {
        match self {
            Domain::Fp(p) => Scalar::Fp {
                p: *p,
                v: bigint_mod(n, *p),
            },
            Domain::Zp2(p) => Scalar::Zp2 {
                p: *p,
                v: bigint_mod(n, p * p),
            },
            Domain::Q => Scalar::Q(BigRational::from_integer(n.clone())),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Fp(p) => write!(f, "F_{p}"),
            Domain::Zp2(p) => write!(f, "Z/{p}^2"),
            Domain::Q => write!(f, "Q"),
        }
    }
}

fn bigint_mod(n: &BigInt, m: u64) -> u64 {
    let m_big = BigInt::from(m);
    let r = ((n % &m_big) + &m_big) % &m_big;
    // r is in [0, m), fits in u64
    let (_, digits) = r.to_u64_digits();
    digits.first().copied().unwrap_or(0)
}

/// An exact scalar, tagged by its domain.
///
/// Arithmetic between scalars of different domains is a programming error
/// and panics; the job runner maps such panics to an invariant-violation
/// report.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Scalar {
    Fp { p: u64, v: u64 },
    Zp2 { p: u64, v: u64 },
    Q(BigRational),
}

impl Scalar {
    pub fn domain(&self) -> Domain {
        match self {
            Scalar::Fp { p, .. } => Domain::Fp(*p),
            Scalar::Zp2 { p, .. } => Domain::Zp2(*p),
            Scalar::Q(_) => Domain::Q,
        }
    }

    /// Rational scalar from a numerator/denominator pair.
    pub fn rational(num: i64, den: i64) -> Scalar {
        assert!(den != 0, "zero denominator");
        Scalar::Q(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Fp { v, .. } | Scalar::Zp2 { v, .. } => *v == 0,
            Scalar::Q(q) => q.is_zero(),
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Fp { v, .. } | Scalar::Zp2 { v, .. } => *v == 1,
            Scalar::Q(q) => q.is_one(),
        }
    }

    fn modulus(&self) -> Option<u64> {
        match self {
            Scalar::Fp { p, .. } => Some(*p),
            Scalar::Zp2 { p, .. } => Some(p * p),
            Scalar::Q(_) => None,
        }
    }

    fn check_same(&self, other: &Scalar) {
        assert!(
            self.domain() == other.domain(),
            "scalar domain mismatch: {} vs {}",
            self.domain(),
            other.domain()
        );
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        self.check_same(other);
        match (self, other) {
            (Scalar::Fp { p, v: a }, Scalar::Fp { v: b, .. }) => Scalar::Fp {
                p: *p,
                v: addmod(*a, *b, *p),
            },
            (Scalar::Zp2 { p, v: a }, Scalar::Zp2 { v: b, .. }) => Scalar::Zp2 {
                p: *p,
                v: addmod(*a, *b, p * p),
            },
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a + b),
            _ => unreachable!(),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Fp { p, v } => Scalar::Fp {
                p: *p,
                v: if *v == 0 { 0 } else { p - v },
            },
            Scalar::Zp2 { p, v } => {
                let m = p * p;
                Scalar::Zp2 {
                    p: *p,
                    v: if *v == 0 { 0 } else { m - v },
                }
            }
            Scalar::Q(q) => Scalar::Q(-q),
        }
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        self.check_same(other);
        match (self, other) {
            (Scalar::Fp { p, v: a }, Scalar::Fp { v: b, .. }) => Scalar::Fp {
                p: *p,
                v: mulmod(*a, *b, *p),
            },
            (Scalar::Zp2 { p, v: a }, Scalar::Zp2 { v: b, .. }) => Scalar::Zp2 {
                p: *p,
                v: mulmod(*a, *b, p * p),
            },
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a * b),
            _ => unreachable!(),
        }
    }

    /// Multiplicative inverse; fails on zero and on non-units of `Z/p^2`.
    pub fn inv(&self) -> Result<Scalar, Error> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        match self {
            Scalar::Fp { p, v } => Ok(Scalar::Fp {
                p: *p,
                v: invmod(*v, *p).ok_or(Error::DivisionByZero)?,
            }),
            Scalar::Zp2 { p, v } => {
                if v % p == 0 {
                    return Err(Error::NonUnit(*v, self.modulus().unwrap()));
                }
                Ok(Scalar::Zp2 {
                    p: *p,
                    v: invmod(*v, p * p).expect("unit mod p^2"),
                })
            }
            Scalar::Q(q) => Ok(Scalar::Q(q.recip())),
        }
    }

    pub fn div(&self, other: &Scalar) -> Result<Scalar, Error> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, mut e: u64) -> Scalar {
        let mut base = self.clone();
        let mut acc = self.domain().one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Reduction `Q -> F_p`; `BadReduction` when `p` divides the denominator.
    pub fn reduce_mod_p(&self, p: u64) -> Result<Scalar, Error> {
        match self {
            Scalar::Q(q) => {
                let den = bigint_mod(q.denom(), p);
                if den == 0 {
                    return Err(Error::BadReduction(p));
                }
                let num = bigint_mod(q.numer(), p);
                let inv = invmod(den, p).expect("nonzero residue mod prime");
                Ok(Scalar::Fp {
                    p,
                    v: mulmod(num, inv, p),
                })
            }
            _ => Err(Error::DomainMismatch(
                "reduce_mod_p expects a rational scalar".into(),
            )),
        }
    }

    /// Reduction `Z/p^2 -> F_p`.
    pub fn zp2_to_fp(&self) -> Result<Scalar, Error> {
        match self {
            Scalar::Zp2 { p, v } => Ok(Scalar::Fp { p: *p, v: v % p }),
            _ => Err(Error::DomainMismatch(
                "zp2_to_fp expects a mod-p^2 scalar".into(),
            )),
        }
    }

    /// Exact division by p on a multiple of p in `Z/p^2`, landing in `F_p`.
    pub fn zp2_div_p(&self) -> Result<Scalar, Error> {
        match self {
            Scalar::Zp2 { p, v } if v % p == 0 => Ok(Scalar::Fp { p: *p, v: v / p }),
            Scalar::Zp2 { p, v } => Err(Error::InvalidInput(format!(
                "{v} is not divisible by {p} modulo {p}^2"
            ))),
            _ => Err(Error::DomainMismatch(
                "zp2_div_p expects a mod-p^2 scalar".into(),
            )),
        }
    }

    /// The canonical lift `F_p -> Z/p^2` on representatives 0..p-1.
    pub fn fp_to_zp2(&self) -> Result<Scalar, Error> {
        match self {
            Scalar::Fp { p, v } => Ok(Scalar::Zp2 { p: *p, v: *v }),
            _ => Err(Error::DomainMismatch(
                "fp_to_zp2 expects a prime-field scalar".into(),
            )),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Fp { v, .. } | Scalar::Zp2 { v, .. } => write!(f, "{v}"),
            Scalar::Q(q) => {
                if q.denom().is_one() {
                    write!(f, "{}", q.numer())
                } else {
                    write!(f, "{}/{}", q.numer(), q.denom())
                }
            }
        }
    }
}

/// Display helper that never emits a bare leading '-': the magnitude, with
/// the sign reported separately. Used by the polynomial printer.
pub(crate) fn display_parts(s: &Scalar) -> (bool, String) {
    match s {
        Scalar::Q(q) => {
            let neg = q.is_negative();
            let a = if neg { -q } else { q.clone() };
            if a.denom().is_one() {
                (neg, a.numer().to_string())
            } else {
                (neg, format!("{}/{}", a.numer(), a.denom()))
            }
        }
        _ => (false, s.to_string()),
    }
}

fn addmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 + b as u128) % m as u128) as u64
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn invmod(a: u64, m: u64) -> Option<u64> {
    // extended Euclid on (a, m)
    let (mut r0, mut r1) = (a as i128, m as i128);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return None;
    }
    let m = m as i128;
    Some((((s0 % m) + m) % m) as u64)
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_construction_checks_primality() {
        assert!(Domain::fp(7).is_ok());
        assert!(Domain::fp(1).is_err());
        assert!(Domain::fp(6).is_err());
        assert!(Domain::zp2(4).is_err());
    }

    #[test]
    fn modular_canonical_range() {
        let d = Domain::fp(5).unwrap();
        let s = d.from_i64(-3);
        assert_eq!(s, Scalar::Fp { p: 5, v: 2 });
        let z = Domain::zp2(3).unwrap().from_i64(-1);
        assert_eq!(z, Scalar::Zp2 { p: 3, v: 8 });
    }

    #[test]
    fn field_inverse() {
        let d = Domain::fp(7).unwrap();
        let s = d.from_i64(3);
        assert_eq!(s.mul(&s.inv().unwrap()), d.one());
        assert!(d.zero().inv().is_err());
    }

    #[test]
    fn zp2_units() {
        let d = Domain::zp2(3).unwrap();
        let u = d.from_i64(2);
        assert_eq!(u.mul(&u.inv().unwrap()), d.one());
        // 3 is not a unit mod 9
        assert!(d.from_i64(3).inv().is_err());
    }

    #[test]
    fn rational_reduction() {
        let half = Scalar::rational(1, 2);
        assert_eq!(half.reduce_mod_p(5).unwrap(), Scalar::Fp { p: 5, v: 3 });
        assert!(matches!(
            half.reduce_mod_p(2),
            Err(Error::BadReduction(2))
        ));
    }

    #[test]
    fn fermat_in_fp() {
        let d = Domain::fp(11).unwrap();
        for v in 1..11 {
            let s = d.from_i64(v);
            assert_eq!(s.pow(11), s);
        }
    }
}
