//! Polynomial gcd over the field domains (`F_p`, `Q`).
//!
//! Univariate inputs take a dense Euclidean fast path; genuinely
//! multivariate inputs go through content/primitive-part recursion with a
//! primitive pseudo-remainder sequence in a chosen main variable. Results
//! are normalized monic under grlex, so gcd(a, b) is a canonical
//! representative of the ideal-theoretic gcd. Calling this over `Z/p^2`
//! is a programming error and panics.

use std::collections::BTreeMap;

use crate::algebra::poly::{Monomial, MultiPolynomial};
use crate::algebra::scalar::{Domain, Scalar};

pub fn poly_gcd(a: &MultiPolynomial, b: &MultiPolynomial) -> MultiPolynomial {
    assert!(
        !matches!(a.domain(), Domain::Zp2(_)),
        "gcd is undefined over Z/p^2"
    );
    if a.is_zero() {
        return b.make_monic().expect("field leading coefficient");
    }
    if b.is_zero() {
        return a.make_monic().expect("field leading coefficient");
    }
    if a.is_constant() || b.is_constant() {
        return MultiPolynomial::one(a.domain(), a.vars());
    }

    // strip the common monomial factor first; it both shrinks the PRS and
    // handles the frequent pure-monomial case outright
    let (ma, sa) = strip_monomial(a);
    let (mb, sb) = strip_monomial(b);
    let mono = Monomial(
        ma.0.iter()
            .zip(&mb.0)
            .map(|(x, y)| *x.min(y))
            .collect::<Vec<_>>(),
    );

    // every variable of the gcd occurs in both operands, since degrees in a
    // fixed variable add under multiplication
    let occ_a = sa.occurring_vars();
    let occ_b = sb.occurring_vars();
    let shared: Vec<usize> = occ_a
        .iter()
        .filter(|i| occ_b.contains(i))
        .copied()
        .collect();
    let extra_a = occ_a.iter().any(|i| !shared.contains(i));
    let extra_b = occ_b.iter().any(|i| !shared.contains(i));
    let g = if shared.is_empty() {
        MultiPolynomial::one(a.domain(), a.vars())
    } else if extra_a || extra_b {
        // An operand with variables outside the shared set is first replaced
        // by its largest divisor supported on the shared variables; the gcd
        // itself lives there, and this keeps every recursive step inside the
        // small shared-variable ring.
        let ra = if extra_a { shared_support_content(&sa, &shared) } else { sa };
        let rb = if extra_b { shared_support_content(&sb, &shared) } else { sb };
        poly_gcd(&ra, &rb)
    } else {
        match shared.as_slice() {
            [i] if occ_a.len() == 1 && occ_b.len() == 1 => {
                let var = &a.vars()[*i].clone();
                let ca = sa.to_univariate(var).expect("single occurring variable");
                let cb = sb.to_univariate(var).expect("single occurring variable");
                let g = uni_gcd(ca, cb);
                MultiPolynomial::from_univariate(a.domain(), a.vars(), var, &g)
            }
            _ => {
                // main variable with the shortest pseudo-remainder sequence
                let main = *shared
                    .iter()
                    .min_by_key(|&&i| {
                        let name = &a.vars()[i];
                        let da = sa.degree_in(name);
                        let db = sb.degree_in(name);
                        (da.min(db), da.max(db))
                    })
                    .expect("nonempty shared set");
                multivariate_gcd(&sa, &sb, main)
            }
        }
    };

    let term = MultiPolynomial::from_terms(a.domain(), a.vars(), [(mono, a.domain().one())]);
    g.mul(&term).make_monic().expect("field leading coefficient")
}

/// Exact quotient `a / b`; `None` when b does not divide a.
pub fn poly_div_exact(a: &MultiPolynomial, b: &MultiPolynomial) -> Option<MultiPolynomial> {
    assert!(!b.is_zero(), "division by the zero polynomial");
    let mut rem = a.clone();
    let mut quot = MultiPolynomial::zero(a.domain(), a.vars());
    let (bm, bc) = {
        let (m, c) = b.leading()?;
        (m.clone(), c.clone())
    };
    let bc_inv = bc.inv().expect("unit leading coefficient");
    while !rem.is_zero() {
        let (rm, rc) = {
            let (m, c) = rem.leading().expect("nonzero remainder");
            (m.clone(), c.clone())
        };
        let qm = rm.div(&bm)?;
        let qc = rc.mul(&bc_inv);
        let qterm = MultiPolynomial::from_terms(a.domain(), a.vars(), [(qm, qc)]);
        quot = quot.add(&qterm);
        rem = rem.sub(&qterm.mul(b));
    }
    Some(quot)
}

/// Dense Euclid on coefficient lists (constant term first); monic result.
pub(crate) fn uni_gcd(mut a: Vec<Scalar>, mut b: Vec<Scalar>) -> Vec<Scalar> {
    trim(&mut a);
    trim(&mut b);
    while !b.is_empty() {
        let r = uni_rem(&a, &b);
        a = b;
        b = r;
    }
    uni_monic(a)
}

fn trim(v: &mut Vec<Scalar>) {
    while v.last().map(Scalar::is_zero).unwrap_or(false) {
        v.pop();
    }
}

fn uni_monic(mut a: Vec<Scalar>) -> Vec<Scalar> {
    trim(&mut a);
    if let Some(lc) = a.last().cloned() {
        let inv = lc.inv().expect("field scalar");
        for c in &mut a {
            *c = c.mul(&inv);
        }
    }
    a
}

fn uni_rem(a: &[Scalar], b: &[Scalar]) -> Vec<Scalar> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let lb_inv = b.last().expect("nonzero divisor").inv().expect("field");
    while r.len() > db {
        let lr = r.last().expect("nonempty").clone();
        let q = lr.mul(&lb_inv);
        let shift = r.len() - 1 - db;
        for (i, bc) in b.iter().enumerate() {
            let idx = shift + i;
            r[idx] = r[idx].sub(&q.mul(bc));
        }
        trim(&mut r);
        if r.is_empty() {
            break;
        }
    }
    r
}

/// Largest divisor of `a` supported on the `shared` variables: the gcd of
/// the coefficients of `a` read as a polynomial in its remaining variables.
fn shared_support_content(a: &MultiPolynomial, shared: &[usize]) -> MultiPolynomial {
    let n = a.vars().len();
    let mut keep = vec![false; n];
    for &i in shared {
        keep[i] = true;
    }
    let mut groups: BTreeMap<Monomial, MultiPolynomial> = BTreeMap::new();
    for (m, c) in a.terms() {
        let mut outer = m.0.clone();
        let mut inner = m.0.clone();
        for i in 0..n {
            if keep[i] {
                outer[i] = 0;
            } else {
                inner[i] = 0;
            }
        }
        let entry = groups
            .entry(Monomial(outer))
            .or_insert_with(|| MultiPolynomial::zero(a.domain(), a.vars()));
        *entry = entry.add(&MultiPolynomial::from_terms(
            a.domain(),
            a.vars(),
            [(Monomial(inner), c.clone())],
        ));
    }
    let mut g = MultiPolynomial::zero(a.domain(), a.vars());
    for v in groups.values() {
        g = poly_gcd(&g, v);
        if g.is_one() {
            break;
        }
    }
    g
}

/// Componentwise-min monomial factor and the stripped polynomial.
fn strip_monomial(a: &MultiPolynomial) -> (Monomial, MultiPolynomial) {
    let n = a.vars().len();
    let mut mins = vec![u32::MAX; n];
    for (m, _) in a.terms() {
        for (i, &e) in m.0.iter().enumerate() {
            mins[i] = mins[i].min(e);
        }
    }
    let mins = Monomial(mins.into_iter().map(|e| if e == u32::MAX { 0 } else { e }).collect());
    if mins.is_constant() {
        return (mins, a.clone());
    }
    let stripped = MultiPolynomial::from_terms(
        a.domain(),
        a.vars(),
        a.terms()
            .map(|(m, c)| (m.div(&mins).expect("min exponents divide"), c.clone())),
    );
    (mins, stripped)
}

/// Coefficients of powers of the main variable, each with that variable
/// zeroed out.
fn coeffs_in(a: &MultiPolynomial, main: usize) -> BTreeMap<u32, MultiPolynomial> {
    let mut out: BTreeMap<u32, MultiPolynomial> = BTreeMap::new();
    for (m, c) in a.terms() {
        let e = m.0[main];
        let mut rest = m.0.clone();
        rest[main] = 0;
        let entry = out
            .entry(e)
            .or_insert_with(|| MultiPolynomial::zero(a.domain(), a.vars()));
        *entry = entry.add(&MultiPolynomial::from_terms(
            a.domain(),
            a.vars(),
            [(Monomial(rest), c.clone())],
        ));
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn content_in(a: &MultiPolynomial, main: usize) -> MultiPolynomial {
    let coeffs = coeffs_in(a, main);
    let mut g = MultiPolynomial::zero(a.domain(), a.vars());
    for c in coeffs.values() {
        g = poly_gcd(&g, c);
        if g.is_one() {
            break;
        }
    }
    g
}

fn primitive_part(a: &MultiPolynomial, content: &MultiPolynomial) -> MultiPolynomial {
    if content.is_one() {
        return a.make_monic().expect("field leading coefficient");
    }
    poly_div_exact(a, content)
        .expect("content divides")
        .make_monic()
        .expect("field leading coefficient")
}

/// Pseudo-remainder of a by b in the main variable.
fn pseudo_rem(a: &MultiPolynomial, b: &MultiPolynomial, main: usize) -> MultiPolynomial {
    let db = b.degree_in(&b.vars()[main]);
    let b_coeffs = coeffs_in(b, main);
    let lb = b_coeffs.get(&db).expect("leading coefficient").clone();
    let mut r = a.clone();
    let main_name = a.vars()[main].clone();
    loop {
        let dr = r.degree_in(&main_name);
        if r.is_zero() || dr < db {
            return r;
        }
        let r_coeffs = coeffs_in(&r, main);
        let lr = r_coeffs.get(&dr).expect("leading coefficient").clone();
        // r <- lb*r - lr*x^(dr-db)*b
        let mut exps = vec![0; a.vars().len()];
        exps[main] = dr - db;
        let shift =
            MultiPolynomial::from_terms(a.domain(), a.vars(), [(Monomial(exps), a.domain().one())]);
        r = lb.mul(&r).sub(&lr.mul(&shift).mul(b));
    }
}

fn multivariate_gcd(a: &MultiPolynomial, b: &MultiPolynomial, main: usize) -> MultiPolynomial {
    let cont_a = content_in(a, main);
    let cont_b = content_in(b, main);
    let cont_g = poly_gcd(&cont_a, &cont_b);

    let mut r0 = primitive_part(a, &cont_a);
    let mut r1 = primitive_part(b, &cont_b);
    let main_name = a.vars()[main].clone();
    if r0.degree_in(&main_name) < r1.degree_in(&main_name) {
        std::mem::swap(&mut r0, &mut r1);
    }
    while !r1.is_zero() {
        if r1.degree_in(&main_name) == 0 {
            // content-free and degree zero in the main variable: coprime there
            let one = MultiPolynomial::one(a.domain(), a.vars());
            return cont_g.mul(&one);
        }
        let rem = pseudo_rem(&r0, &r1, main);
        let rem = if rem.is_zero() {
            rem
        } else {
            let c = content_in(&rem, main);
            primitive_part(&rem, &c)
        };
        r0 = r1;
        r1 = rem;
    }
    // r0 is primitive in the main variable; its own content is trivial
    cont_g.mul(&r0)
}
