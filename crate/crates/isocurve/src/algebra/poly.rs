//! Sparse multivariate polynomials over an exact scalar domain.
//!
//! A polynomial carries its declared variable list; exponent vectors have
//! exactly that length and zero coefficients are never stored. Terms are
//! ordered graded-lexicographically with respect to the declared order, so
//! every polynomial has a unique canonical form and a deterministic leading
//! term. Mixing polynomials with different variable lists or domains is a
//! programming error and panics.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::algebra::scalar::{display_parts, Domain, Scalar};
use crate::error::Error;

/// Exponent vector, compared in graded-lexicographic order.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.checked_add(*b).expect("exponent overflow"))
                .collect(),
        )
    }

    /// Componentwise quotient, `None` when not divisible.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(Monomial)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        debug_assert_eq!(self.0.len(), other.0.len());
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct MultiPolynomial {
    domain: Domain,
    vars: Arc<[String]>,
    /// Nonzero coefficients keyed by exponent vector, ascending grlex.
    terms: BTreeMap<Monomial, Scalar>,
}

impl MultiPolynomial {
    pub fn zero(domain: Domain, vars: &Arc<[String]>) -> MultiPolynomial {
        MultiPolynomial {
            domain,
            vars: vars.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(domain: Domain, vars: &Arc<[String]>, c: Scalar) -> MultiPolynomial {
        assert_eq!(c.domain(), domain, "constant from foreign domain");
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial(vec![0; vars.len()]), c);
        }
        MultiPolynomial {
            domain,
            vars: vars.clone(),
            terms,
        }
    }

    pub fn one(domain: Domain, vars: &Arc<[String]>) -> MultiPolynomial {
        Self::constant(domain, vars, domain.one())
    }

    pub fn from_i64(domain: Domain, vars: &Arc<[String]>, n: i64) -> MultiPolynomial {
        Self::constant(domain, vars, domain.from_i64(n))
    }

    /// The variable `name`, which must occur in the declared list.
    pub fn variable(domain: Domain, vars: &Arc<[String]>, name: &str) -> MultiPolynomial {
        let i = vars
            .iter()
            .position(|v| v == name)
            .unwrap_or_else(|| panic!("variable {name} not declared in {:?}", vars));
        let mut exps = vec![0; vars.len()];
        exps[i] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(Monomial(exps), domain.one());
        MultiPolynomial {
            domain,
            vars: vars.clone(),
            terms,
        }
    }

    pub fn from_terms(
        domain: Domain,
        vars: &Arc<[String]>,
        it: impl IntoIterator<Item = (Monomial, Scalar)>,
    ) -> MultiPolynomial {
        let mut acc = Self::zero(domain, vars);
        for (m, c) in it {
            acc.add_term(m, c);
        }
        acc
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn vars(&self) -> &Arc<[String]> {
        &self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .next()
                .map(|(m, c)| m.is_constant() && c.is_one())
                .unwrap_or(false)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_constant())
    }

    /// The constant coefficient (zero if absent).
    pub fn constant_coeff(&self) -> Scalar {
        self.terms
            .get(&Monomial(vec![0; self.vars.len()]))
            .cloned()
            .unwrap_or_else(|| self.domain.zero())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Scalar)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(Monomial::total_degree)
            .max()
            .unwrap_or(0)
    }

    pub fn degree_in(&self, var: &str) -> u32 {
        let i = self.var_index(var);
        self.terms.keys().map(|m| m.0[i]).max().unwrap_or(0)
    }

    pub fn var_index(&self, var: &str) -> usize {
        self.vars
            .iter()
            .position(|v| v == var)
            .unwrap_or_else(|| panic!("variable {var} not declared in {:?}", self.vars))
    }

    /// Leading term under grlex, `None` for the zero polynomial.
    pub fn leading(&self) -> Option<(&Monomial, &Scalar)> {
        self.terms.iter().next_back()
    }

    pub fn leading_coeff(&self) -> Scalar {
        self.leading()
            .map(|(_, c)| c.clone())
            .unwrap_or_else(|| self.domain.zero())
    }

    fn check_compatible(&self, other: &MultiPolynomial) {
        assert_eq!(self.domain, other.domain, "polynomial domain mismatch");
        assert_eq!(*self.vars, *other.vars, "polynomial variable mismatch");
    }

    fn add_term(&mut self, m: Monomial, c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().add(&c);
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &MultiPolynomial) -> MultiPolynomial {
        self.check_compatible(other);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &MultiPolynomial) -> MultiPolynomial {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> MultiPolynomial {
        MultiPolynomial {
            domain: self.domain,
            vars: self.vars.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c.neg()))
                .collect(),
        }
    }

    pub fn mul(&self, other: &MultiPolynomial) -> MultiPolynomial {
        self.check_compatible(other);
        let mut out = Self::zero(self.domain, &self.vars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca.mul(cb));
            }
        }
        out
    }

    pub fn scale(&self, c: &Scalar) -> MultiPolynomial {
        assert_eq!(c.domain(), self.domain, "scale from foreign domain");
        if c.is_zero() {
            return Self::zero(self.domain, &self.vars);
        }
        MultiPolynomial {
            domain: self.domain,
            vars: self.vars.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), k.mul(c)))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> MultiPolynomial {
        let mut acc = Self::one(self.domain, &self.vars);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Partial derivative with respect to a declared variable.
    pub fn derive(&self, var: &str) -> MultiPolynomial {
        let i = self.var_index(var);
        let mut out = Self::zero(self.domain, &self.vars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let factor = self.domain.from_i64(e as i64);
            let mut exps = m.0.clone();
            exps[i] = e - 1;
            out.add_term(Monomial(exps), c.mul(&factor));
        }
        out
    }

    /// Simultaneous substitution by polynomials over the same variable list.
    pub fn substitute_poly(&self, assignment: &BTreeMap<String, MultiPolynomial>) -> MultiPolynomial {
        let images: Vec<Option<&MultiPolynomial>> = self
            .vars
            .iter()
            .map(|v| assignment.get(v.as_str()))
            .collect();
        for img in images.iter().flatten() {
            self.check_compatible(img);
        }
        let mut out = Self::zero(self.domain, &self.vars);
        for (m, c) in &self.terms {
            let mut term = Self::constant(self.domain, &self.vars, c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                match images[i] {
                    Some(img) => term = term.mul(&img.pow(e)),
                    None => {
                        let mut exps = vec![0; self.vars.len()];
                        exps[i] = e;
                        term = term.mul(&Self::from_terms(
                            self.domain,
                            &self.vars,
                            [(Monomial(exps), self.domain.one())],
                        ));
                    }
                }
            }
            out = out.add(&term);
        }
        out
    }

    /// Coefficientwise reduction of a rational-coefficient polynomial mod p.
    pub fn reduce_mod_p(&self, p: u64) -> Result<MultiPolynomial, Error> {
        if self.domain != Domain::Q {
            return Err(Error::DomainMismatch(
                "reduce_mod_p expects rational coefficients".into(),
            ));
        }
        let domain = Domain::fp(p)?;
        let mut out = Self::zero(domain, &self.vars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.reduce_mod_p(p)?);
        }
        Ok(out)
    }

    /// Coefficientwise reduction `Z/p^2 -> F_p`.
    pub fn zp2_to_fp(&self) -> Result<MultiPolynomial, Error> {
        let p = match self.domain {
            Domain::Zp2(p) => p,
            _ => {
                return Err(Error::DomainMismatch(
                    "zp2_to_fp expects mod-p^2 coefficients".into(),
                ))
            }
        };
        let domain = Domain::Fp(p);
        let mut out = Self::zero(domain, &self.vars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.zp2_to_fp()?);
        }
        Ok(out)
    }

    /// Multiply every coefficient by the inverse of the leading coefficient.
    /// Identity on the zero polynomial; fails when the leading coefficient is
    /// not a unit (possible only over Z/p^2).
    pub fn make_monic(&self) -> Result<MultiPolynomial, Error> {
        if self.is_zero() {
            return Ok(self.clone());
        }
        let lc = self.leading_coeff();
        if lc.is_one() {
            return Ok(self.clone());
        }
        Ok(self.scale(&lc.inv()?))
    }

    /// View in a single variable: dense coefficient list, constant term
    /// first. `None` when any other variable occurs.
    pub fn to_univariate(&self, var: &str) -> Option<Vec<Scalar>> {
        let i = self.var_index(var);
        let deg = self.degree_in(var) as usize;
        let mut coeffs = vec![self.domain.zero(); deg + 1];
        for (m, c) in &self.terms {
            for (j, &e) in m.0.iter().enumerate() {
                if j != i && e != 0 {
                    return None;
                }
            }
            coeffs[m.0[i] as usize] = c.clone();
        }
        Some(coeffs)
    }

    /// Inverse of `to_univariate`.
    pub fn from_univariate(
        domain: Domain,
        vars: &Arc<[String]>,
        var: &str,
        coeffs: &[Scalar],
    ) -> MultiPolynomial {
        let i = vars
            .iter()
            .position(|v| v == var)
            .unwrap_or_else(|| panic!("variable {var} not declared"));
        let mut out = Self::zero(domain, vars);
        for (e, c) in coeffs.iter().enumerate() {
            let mut exps = vec![0; vars.len()];
            exps[i] = e as u32;
            out.add_term(Monomial(exps), c.clone());
        }
        out
    }

    /// Coefficientwise exact division by p, `Z/p^2 -> F_p`; fails unless
    /// every coefficient is a multiple of p.
    pub fn zp2_div_p(&self) -> Result<MultiPolynomial, Error> {
        let p = match self.domain {
            Domain::Zp2(p) => p,
            _ => {
                return Err(Error::DomainMismatch(
                    "zp2_div_p expects mod-p^2 coefficients".into(),
                ))
            }
        };
        let domain = Domain::Fp(p);
        let mut out = Self::zero(domain, &self.vars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.zp2_div_p()?);
        }
        Ok(out)
    }

    /// Coefficientwise canonical lift `F_p -> Z/p^2`.
    pub fn fp_to_zp2(&self) -> Result<MultiPolynomial, Error> {
        let p = match self.domain {
            Domain::Fp(p) => p,
            _ => {
                return Err(Error::DomainMismatch(
                    "fp_to_zp2 expects prime-field coefficients".into(),
                ))
            }
        };
        let domain = Domain::zp2(p)?;
        let mut out = Self::zero(domain, &self.vars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.fp_to_zp2()?);
        }
        Ok(out)
    }

    /// The same polynomial over a longer variable list; every old variable
    /// must appear in the new list (matched by name).
    pub fn embed(&self, new_vars: &Arc<[String]>) -> MultiPolynomial {
        let map: Vec<usize> = self
            .vars
            .iter()
            .map(|v| {
                new_vars
                    .iter()
                    .position(|w| w == v)
                    .unwrap_or_else(|| panic!("variable {v} missing from the target list"))
            })
            .collect();
        let mut out = Self::zero(self.domain, new_vars);
        for (m, c) in &self.terms {
            let mut exps = vec![0u32; new_vars.len()];
            for (i, &e) in m.0.iter().enumerate() {
                exps[map[i]] = e;
            }
            out.add_term(Monomial(exps), c.clone());
        }
        out
    }

    /// Variables that actually occur with positive exponent.
    pub fn occurring_vars(&self) -> Vec<usize> {
        let mut seen = vec![false; self.vars.len()];
        for m in self.terms.keys() {
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    seen[i] = true;
                }
            }
        }
        seen.iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect()
    }
}

impl fmt::Display for MultiPolynomial {
    /// Canonical text form, descending grlex. Re-parses to the same value:
    /// a leading negative unit coefficient is printed as `-1*...` because a
    /// bare `-x^2` would re-parse as `(-x)^2` under the expression grammar.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            let (neg, mag) = display_parts(c);
            let mono = monomial_string(&self.vars, m);
            let leading_minus = first && neg;
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            match (&mono, mag.as_str()) {
                (None, _) => write!(f, "{mag}")?,
                (Some(ms), "1") => {
                    if leading_minus && ms.contains('^') {
                        // a bare "-x^2" would re-parse as "(-x)^2"
                        write!(f, "1*{ms}")?
                    } else {
                        write!(f, "{ms}")?
                    }
                }
                (Some(ms), _) => write!(f, "{mag}*{ms}")?,
            }
        }
        Ok(())
    }
}

fn monomial_string(vars: &Arc<[String]>, m: &Monomial) -> Option<String> {
    if m.is_constant() {
        return None;
    }
    let mut parts = Vec::new();
    for (i, &e) in m.0.iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(vars[i].clone()),
            _ => parts.push(format!("{}^{}", vars[i], e)),
        }
    }
    Some(parts.join("*"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Arc<[String]> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn q() -> Domain {
        Domain::Q
    }

    #[test]
    fn grlex_orders_by_degree_then_lex() {
        let a = Monomial(vec![2, 0]); // x^2
        let b = Monomial(vec![1, 1]); // x*y
        let c = Monomial(vec![0, 1]); // y
        assert!(a > b, "x^2 > x*y in grlex with x before y");
        assert!(b > c);
    }

    #[test]
    fn arithmetic_and_canonical_form() {
        let vs = vars(&["x", "y"]);
        let x = MultiPolynomial::variable(q(), &vs, "x");
        let y = MultiPolynomial::variable(q(), &vs, "y");
        let s = x.add(&y);
        let d = x.sub(&y);
        // (x+y)(x-y) = x^2 - y^2
        let prod = s.mul(&d);
        let expect = x.mul(&x).sub(&y.mul(&y));
        assert_eq!(prod, expect);
        // cancellation drops stored terms entirely
        let z = s.sub(&s);
        assert!(z.is_zero());
        assert_eq!(z.num_terms(), 0);
    }

    #[test]
    fn derivative_kills_pth_powers() {
        let vs = vars(&["x"]);
        let d3 = Domain::fp(3).unwrap();
        let x = MultiPolynomial::variable(d3, &vs, "x");
        assert!(x.pow(3).derive("x").is_zero());
        // d/dx (x^3 + 2x) = 2 over F_3
        let f = x.pow(3).add(&x.scale(&d3.from_i64(2)));
        assert_eq!(f.derive("x"), MultiPolynomial::from_i64(d3, &vs, 2));
    }

    #[test]
    fn substitution_is_composition() {
        let vs = vars(&["x"]);
        let d5 = Domain::fp(5).unwrap();
        let x = MultiPolynomial::variable(d5, &vs, "x");
        let mut assign = BTreeMap::new();
        assign.insert("x".to_string(), x.pow(5));
        assert_eq!(x.pow(2).substitute_poly(&assign), x.pow(10));
    }

    #[test]
    fn reduction_mod_p() {
        let vs = vars(&["x"]);
        let x = MultiPolynomial::variable(q(), &vs, "x");
        let half_x = x.scale(&Scalar::rational(1, 2));
        let r = half_x.reduce_mod_p(5).unwrap();
        let d5 = Domain::fp(5).unwrap();
        let expect = MultiPolynomial::variable(d5, &vs, "x").scale(&d5.from_i64(3));
        assert_eq!(r, expect);
        assert!(matches!(
            half_x.reduce_mod_p(2),
            Err(Error::BadReduction(2))
        ));
    }

    #[test]
    fn display_guards_leading_negative_power() {
        let vs = vars(&["x"]);
        let x = MultiPolynomial::variable(q(), &vs, "x");
        let f = x.pow(2).neg();
        assert_eq!(f.to_string(), "-1*x^2");
        let g = x.pow(2).sub(&x);
        assert_eq!(g.to_string(), "x^2 - x");
    }

    #[test]
    fn univariate_round_trip() {
        let vs = vars(&["x", "y"]);
        let x = MultiPolynomial::variable(q(), &vs, "x");
        let f = x.pow(3).add(&MultiPolynomial::from_i64(q(), &vs, 7));
        let coeffs = f.to_univariate("x").unwrap();
        assert_eq!(coeffs.len(), 4);
        let back = MultiPolynomial::from_univariate(q(), &vs, "x", &coeffs);
        assert_eq!(back, f);
        let y = MultiPolynomial::variable(q(), &vs, "y");
        assert!(f.add(&y).to_univariate("x").is_none());
    }
}
