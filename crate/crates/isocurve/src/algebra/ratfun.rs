//! Normalized rational functions: reduced fractions of multivariate
//! polynomials with monic denominator, so equality is structural.
//!
//! Over `Z/p^2` the denominator must normalize to 1 (mod-p^2 values appear
//! only as polynomial lifts); the field domains `F_p` and `Q` support full
//! fraction arithmetic.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::algebra::gcd::{poly_div_exact, poly_gcd};
use crate::algebra::poly::MultiPolynomial;
use crate::algebra::scalar::{Domain, Scalar};
use crate::error::Error;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct RationalFunction {
    num: MultiPolynomial,
    den: MultiPolynomial,
}

impl RationalFunction {
    /// Normalized fraction num/den.
    pub fn new(num: MultiPolynomial, den: MultiPolynomial) -> Result<RationalFunction, Error> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if num.is_zero() {
            return Ok(RationalFunction {
                den: MultiPolynomial::one(num.domain(), num.vars()),
                num,
            });
        }
        if den.is_one() {
            return Ok(RationalFunction { num, den });
        }
        if let Domain::Zp2(_) = num.domain() {
            if !den.is_constant() {
                return Err(Error::DomainMismatch(
                    "nonconstant denominator over Z/p^2".into(),
                ));
            }
            let c = den.constant_coeff().inv()?;
            return Ok(RationalFunction {
                num: num.scale(&c),
                den: MultiPolynomial::one(num.domain(), num.vars()),
            });
        }
        let g = poly_gcd(&num, &den);
        let (num, den) = if g.is_one() {
            (num, den)
        } else {
            (
                poly_div_exact(&num, &g).expect("gcd divides numerator"),
                poly_div_exact(&den, &g).expect("gcd divides denominator"),
            )
        };
        let lc = den.leading_coeff().inv().expect("field leading coefficient");
        Ok(RationalFunction {
            num: num.scale(&lc),
            den: den.scale(&lc),
        })
    }

    pub fn from_poly(num: MultiPolynomial) -> RationalFunction {
        RationalFunction {
            den: MultiPolynomial::one(num.domain(), num.vars()),
            num,
        }
    }

    pub fn zero(domain: Domain, vars: &Arc<[String]>) -> RationalFunction {
        Self::from_poly(MultiPolynomial::zero(domain, vars))
    }

    pub fn one(domain: Domain, vars: &Arc<[String]>) -> RationalFunction {
        Self::from_poly(MultiPolynomial::one(domain, vars))
    }

    pub fn constant(domain: Domain, vars: &Arc<[String]>, c: Scalar) -> RationalFunction {
        Self::from_poly(MultiPolynomial::constant(domain, vars, c))
    }

    pub fn from_i64(domain: Domain, vars: &Arc<[String]>, n: i64) -> RationalFunction {
        Self::from_poly(MultiPolynomial::from_i64(domain, vars, n))
    }

    pub fn variable(domain: Domain, vars: &Arc<[String]>, name: &str) -> RationalFunction {
        Self::from_poly(MultiPolynomial::variable(domain, vars, name))
    }

    pub fn num(&self) -> &MultiPolynomial {
        &self.num
    }

    pub fn den(&self) -> &MultiPolynomial {
        &self.den
    }

    pub fn domain(&self) -> Domain {
        self.num.domain()
    }

    pub fn vars(&self) -> &Arc<[String]> {
        self.num.vars()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    /// The numerator when the denominator is 1.
    pub fn as_poly(&self) -> Option<&MultiPolynomial> {
        self.den.is_one().then_some(&self.num)
    }

    /// The constant value of a constant rational function.
    pub fn as_constant(&self) -> Option<Scalar> {
        (self.num.is_constant() && self.den.is_one()).then(|| self.num.constant_coeff())
    }

    pub fn max_degree(&self) -> u32 {
        self.num.total_degree().max(self.den.total_degree())
    }

    pub fn add(&self, other: &RationalFunction) -> RationalFunction {
        if self.den.is_one() && other.den.is_one() {
            return Self::from_poly(self.num.add(&other.num));
        }
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if let Domain::Zp2(_) = self.domain() {
            // denominators are 1 over Z/p^2 except transiently in new()
            return Self::from_poly(self.num.add(&other.num));
        }
        // with both inputs reduced, any common factor of the combined
        // numerator and the lcm denominator divides g = gcd(d1, d2)
        let g = poly_gcd(&self.den, &other.den);
        if g.is_one() {
            let num = self.num.mul(&other.den).add(&other.num.mul(&self.den));
            if num.is_zero() {
                return Self::zero(self.domain(), self.vars());
            }
            return RationalFunction {
                num,
                den: self.den.mul(&other.den),
            };
        }
        let d2g = poly_div_exact(&other.den, &g).expect("gcd divides");
        let d1g = poly_div_exact(&self.den, &g).expect("gcd divides");
        let num = self.num.mul(&d2g).add(&other.num.mul(&d1g));
        if num.is_zero() {
            return Self::zero(self.domain(), self.vars());
        }
        let den = d1g.mul(&other.den);
        let h = poly_gcd(&num, &g);
        if h.is_one() {
            return RationalFunction { num, den };
        }
        RationalFunction {
            num: poly_div_exact(&num, &h).expect("gcd divides"),
            den: poly_div_exact(&den, &h).expect("gcd divides"),
        }
    }

    pub fn sub(&self, other: &RationalFunction) -> RationalFunction {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> RationalFunction {
        RationalFunction {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &RationalFunction) -> RationalFunction {
        if self.den.is_one() && other.den.is_one() {
            return Self::from_poly(self.num.mul(&other.num));
        }
        if self.is_zero() || other.is_zero() {
            return Self::zero(self.domain(), self.vars());
        }
        // cross-cancel: reduced inputs leave the product reduced
        let g1 = poly_gcd(&self.num, &other.den);
        let g2 = poly_gcd(&other.num, &self.den);
        let n1 = if g1.is_one() {
            self.num.clone()
        } else {
            poly_div_exact(&self.num, &g1).expect("gcd divides")
        };
        let n2 = if g2.is_one() {
            other.num.clone()
        } else {
            poly_div_exact(&other.num, &g2).expect("gcd divides")
        };
        let d1 = if g2.is_one() {
            self.den.clone()
        } else {
            poly_div_exact(&self.den, &g2).expect("gcd divides")
        };
        let d2 = if g1.is_one() {
            other.den.clone()
        } else {
            poly_div_exact(&other.den, &g1).expect("gcd divides")
        };
        RationalFunction {
            num: n1.mul(&n2),
            den: d1.mul(&d2),
        }
    }

    pub fn scale(&self, c: &Scalar) -> RationalFunction {
        if c.is_zero() {
            return Self::zero(self.domain(), self.vars());
        }
        RationalFunction {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn inv(&self) -> Result<RationalFunction, Error> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if let Domain::Zp2(_) = self.domain() {
            return Self::new(self.den.clone(), self.num.clone());
        }
        // already reduced; only the monic normalization moves
        let lc = self.num.leading_coeff().inv().expect("field coefficient");
        Ok(RationalFunction {
            num: self.den.scale(&lc),
            den: self.num.scale(&lc),
        })
    }

    pub fn div(&self, other: &RationalFunction) -> Result<RationalFunction, Error> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, e: u32) -> RationalFunction {
        if e == 0 {
            return Self::one(self.domain(), self.vars());
        }
        // coprime numerator and denominator stay coprime under powers
        RationalFunction {
            num: self.num.pow(e),
            den: self.den.pow(e),
        }
    }

    /// Partial derivative by the quotient rule, renormalized.
    pub fn derive(&self, var: &str) -> RationalFunction {
        if self.den.is_one() {
            return Self::from_poly(self.num.derive(var));
        }
        let num = self
            .num
            .derive(var)
            .mul(&self.den)
            .sub(&self.num.mul(&self.den.derive(var)));
        let den = self.den.mul(&self.den);
        Self::new(num, den).expect("nonzero squared denominator")
    }

    /// Simultaneous substitution; unassigned variables map to themselves.
    pub fn substitute(
        &self,
        assignment: &BTreeMap<String, RationalFunction>,
    ) -> Result<RationalFunction, Error> {
        for img in assignment.values() {
            assert_eq!(img.domain(), self.domain(), "substitution domain mismatch");
            assert_eq!(*img.vars(), *self.vars(), "substitution variable mismatch");
        }
        let num = substitute_into_poly(&self.num, assignment);
        if self.den.is_one() {
            return Ok(num);
        }
        let den = substitute_into_poly(&self.den, assignment);
        if den.is_zero() {
            return Err(Error::SubstitutionPole(self.den.to_string()));
        }
        num.div(&den)
    }

    /// Evaluate at scalar values for every occurring variable.
    pub fn eval(&self, point: &BTreeMap<String, Scalar>) -> Result<Scalar, Error> {
        let assignment: BTreeMap<String, RationalFunction> = point
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    Self::constant(self.domain(), self.vars(), v.clone()),
                )
            })
            .collect();
        let r = self.substitute(&assignment)?;
        r.as_constant().ok_or_else(|| {
            Error::InvalidInput(format!(
                "evaluation left free variables in {r}"
            ))
        })
    }

    /// Coefficientwise reduction mod p followed by renormalization.
    pub fn reduce_mod_p(&self, p: u64) -> Result<RationalFunction, Error> {
        let num = self.num.reduce_mod_p(p)?;
        let den = self.den.reduce_mod_p(p)?;
        if den.is_zero() {
            return Err(Error::BadReduction(p));
        }
        Self::new(num, den)
    }

    /// The same function over a longer variable list; reduced form is
    /// preserved, only the monic normalization can move.
    pub fn embed(&self, new_vars: &Arc<[String]>) -> RationalFunction {
        let num = self.num.embed(new_vars);
        let den = self.den.embed(new_vars);
        if den.is_one() {
            return RationalFunction { num, den };
        }
        let lc = den.leading_coeff().inv().expect("monic in the old order");
        RationalFunction {
            num: num.scale(&lc),
            den: den.scale(&lc),
        }
    }

    /// Coefficientwise reduction `Z/p^2 -> F_p`.
    pub fn zp2_to_fp(&self) -> Result<RationalFunction, Error> {
        let num = self.num.zp2_to_fp()?;
        let den = self.den.zp2_to_fp()?;
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Self::new(num, den)
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

fn substitute_into_poly(
    poly: &MultiPolynomial,
    assignment: &BTreeMap<String, RationalFunction>,
) -> RationalFunction {
    let domain = poly.domain();
    let vars = poly.vars().clone();
    let images: Vec<Option<&RationalFunction>> = vars
        .iter()
        .map(|v| assignment.get(v.as_str()))
        .collect();
    let mut out = RationalFunction::zero(domain, &vars);
    for (m, c) in poly.terms() {
        let mut term = RationalFunction::constant(domain, &vars, c.clone());
        for (i, &e) in m.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let img = match images[i] {
                Some(img) => img.clone(),
                None => RationalFunction::variable(domain, &vars, &vars[i]),
            };
            term = term.mul(&img.pow(e));
        }
        out = out.add(&term);
    }
    out
}
