//! Randomized invariants for the algebra core and the geometric layers.
//!
//! Structured cases (connections, foliations, Higgs fields, lift changes)
//! use a seeded generator so failures are reproducible; the plain ring
//! axioms run under proptest with shrinking.

use std::collections::BTreeMap;
use std::sync::Arc;

use isocurve::algebra::{
    parse_expression, Domain, Monomial, MultiPolynomial, RationalFunction,
    RationalFunctionMatrix, Scalar,
};
use isocurve::cartier::{
    canonical_section, conj_membership, frobenius_twist, lift_transition, FrobeniusLift,
};
use isocurve::connection::{p_curvature, FlatConnection, DEFAULT_DEGREE_CAP};
use isocurve::foliation::{p_closed_test, HorizontalFoliation, PClosedOutcome, VectorField};
use isocurve::higgs::hitchin_map;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vars(names: &[&str]) -> Arc<[String]> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Random polynomial with per-variable degree bounds `degs` and at most
/// `terms` monomials (collisions merge, so sparser outputs occur too).
fn rand_poly(
    rng: &mut ChaCha8Rng,
    domain: Domain,
    vs: &Arc<[String]>,
    degs: &[u32],
    terms: usize,
) -> MultiPolynomial {
    assert_eq!(degs.len(), vs.len());
    let list: Vec<(Monomial, Scalar)> = (0..terms)
        .map(|_| {
            let expo: Vec<u32> = degs.iter().map(|&d| rng.gen_range(0..=d)).collect();
            (Monomial(expo), domain.from_i64(rng.gen_range(-9..=9)))
        })
        .collect();
    MultiPolynomial::from_terms(domain, vs, list)
}

fn rand_matrix(
    rng: &mut ChaCha8Rng,
    domain: Domain,
    vs: &Arc<[String]>,
    size: usize,
    degs: &[u32],
    terms: usize,
) -> RationalFunctionMatrix {
    let entries = (0..size * size)
        .map(|_| RationalFunction::from_poly(rand_poly(rng, domain, vs, degs, terms)))
        .collect();
    RationalFunctionMatrix::new(size, entries)
}

fn strictly_upper(
    rng: &mut ChaCha8Rng,
    domain: Domain,
    vs: &Arc<[String]>,
    size: usize,
    degs: &[u32],
) -> RationalFunctionMatrix {
    let mut m = RationalFunctionMatrix::zeros(domain, vs, size);
    for i in 0..size {
        for j in i + 1..size {
            let f = rand_poly(rng, domain, vs, degs, 3);
            m.set(i, j, RationalFunction::from_poly(f));
        }
    }
    m
}

fn trace_zero_matrix(
    rng: &mut ChaCha8Rng,
    domain: Domain,
    vs: &Arc<[String]>,
    size: usize,
    degs: &[u32],
) -> RationalFunctionMatrix {
    let mut m = rand_matrix(rng, domain, vs, size, degs, 3);
    let mut sum = RationalFunction::zero(domain, vs);
    for i in 0..size - 1 {
        sum = sum.add(m.get(i, i));
    }
    m.set(size - 1, size - 1, sum.neg());
    m
}

/// Unipotent matrix built from random shears, together with its exact
/// inverse; invertible over every domain without a determinant check.
fn unipotent_pair(
    rng: &mut ChaCha8Rng,
    domain: Domain,
    vs: &Arc<[String]>,
    size: usize,
) -> (RationalFunctionMatrix, RationalFunctionMatrix) {
    let mut g = RationalFunctionMatrix::identity(domain, vs, size);
    let mut ginv = RationalFunctionMatrix::identity(domain, vs, size);
    for _ in 0..3 {
        let i = rng.gen_range(0..size);
        let j = rng.gen_range(0..size);
        if i == j {
            continue;
        }
        let c = domain.from_i64(rng.gen_range(-3..=3));
        let mut s = RationalFunctionMatrix::identity(domain, vs, size);
        s.set(i, j, RationalFunction::constant(domain, vs, c.clone()));
        let mut sinv = RationalFunctionMatrix::identity(domain, vs, size);
        sinv.set(i, j, RationalFunction::constant(domain, vs, c).neg());
        g = g.mul(&s);
        ginv = sinv.mul(&ginv);
    }
    (g, ginv)
}

fn single_var_connection(a: RationalFunctionMatrix) -> FlatConnection {
    let var = a.vars()[0].clone();
    FlatConnection::new(vec![var.clone()], BTreeMap::from([(var, a)]), false)
        .expect("one direction is vacuously flat")
}

// ---------------------------------------------------------------------------
// Polynomial arithmetic.
// ---------------------------------------------------------------------------

fn build_poly(domain: Domain, terms: &[((u32, u32), i64)]) -> MultiPolynomial {
    let vs = vars(&["x", "y"]);
    MultiPolynomial::from_terms(
        domain,
        &vs,
        terms
            .iter()
            .map(|&((a, b), c)| (Monomial(vec![a, b]), domain.from_i64(c))),
    )
}

fn poly_terms() -> impl Strategy<Value = Vec<((u32, u32), i64)>> {
    prop::collection::vec(((0u32..4, 0u32..4), -20i64..=20), 0..6)
}

proptest! {
    #[test]
    fn ring_axioms_hold_for_random_polynomials(
        f in poly_terms(),
        g in poly_terms(),
        h in poly_terms(),
    ) {
        for domain in [Domain::Q, Domain::Fp(7)] {
            let a = build_poly(domain, &f);
            let b = build_poly(domain, &g);
            let c = build_poly(domain, &h);
            prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            prop_assert_eq!(a.add(&b), b.add(&a));
            prop_assert_eq!(a.mul(&b), b.mul(&a));
            prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
            prop_assert_eq!(a.sub(&a), MultiPolynomial::zero(domain, a.vars()));
        }
    }
}

#[test]
fn derivations_satisfy_the_leibniz_rule() {
    let vs = vars(&["x", "y"]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..500 {
        let domain = if i % 2 == 0 { Domain::Fp(7) } else { Domain::Q };
        let f = rand_poly(&mut rng, domain, &vs, &[3, 3], 5);
        let g = rand_poly(&mut rng, domain, &vs, &[3, 3], 5);
        for v in ["x", "y"] {
            assert_eq!(
                f.mul(&g).derive(v),
                f.derive(v).mul(&g).add(&f.mul(&g.derive(v))),
                "pair {i}, direction {v}"
            );
        }
    }
}

#[test]
fn substitution_is_a_ring_morphism() {
    let vs = vars(&["x", "y"]);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..200 {
        let domain = if i % 2 == 0 { Domain::Fp(5) } else { Domain::Q };
        let f = rand_poly(&mut rng, domain, &vs, &[2, 2], 4);
        let g = rand_poly(&mut rng, domain, &vs, &[2, 2], 4);
        let assignment = BTreeMap::from([
            ("x".to_string(), rand_poly(&mut rng, domain, &vs, &[2, 1], 3)),
            ("y".to_string(), rand_poly(&mut rng, domain, &vs, &[1, 2], 3)),
        ]);
        assert_eq!(
            f.add(&g).substitute_poly(&assignment),
            f.substitute_poly(&assignment).add(&g.substitute_poly(&assignment)),
            "case {i}"
        );
        assert_eq!(
            f.mul(&g).substitute_poly(&assignment),
            f.substitute_poly(&assignment).mul(&g.substitute_poly(&assignment)),
            "case {i}"
        );
    }
}

#[test]
fn printed_expressions_reparse_to_the_same_value() {
    let vs = vars(&["x", "y"]);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    while checked < 500 {
        let domain = if checked % 2 == 0 { Domain::Fp(7) } else { Domain::Q };
        let num = rand_poly(&mut rng, domain, &vs, &[3, 2], 4);
        let den = rand_poly(&mut rng, domain, &vs, &[2, 1], 3);
        if den.is_zero() {
            continue;
        }
        let r = RationalFunction::from_poly(num)
            .div(&RationalFunction::from_poly(den))
            .unwrap();
        let text = r.to_string();
        let back = parse_expression(&text, &vs, domain).unwrap();
        assert_eq!(back, r, "printed form: {text}");
        checked += 1;
    }
}

// ---------------------------------------------------------------------------
// Connections.
// ---------------------------------------------------------------------------

#[test]
fn zero_connections_have_vanishing_p_curvature() {
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23] {
        let domain = Domain::Fp(p);
        let vs = vars(&["x"]);
        let conn = single_var_connection(RationalFunctionMatrix::zeros(domain, &vs, 2));
        let psi = p_curvature(&conn, "x", p).unwrap();
        assert!(psi.is_zero(), "p = {p}");
    }
}

#[test]
fn p_curvature_adds_across_commuting_constant_directions() {
    let vs = vars(&["x", "y"]);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..10 {
        let p = [3u64, 5][case % 2];
        let domain = Domain::Fp(p);
        let ax = rand_matrix(&mut rng, domain, &vs, 2, &[0, 0], 3);
        // A_y is a polynomial in A_x, so the directions commute and the
        // connection is flat with no derivative terms.
        let c: Vec<Scalar> = (0..3).map(|_| domain.from_i64(rng.gen_range(-4..=4))).collect();
        let ay = RationalFunctionMatrix::identity(domain, &vs, 2)
            .scale_scalar(&c[0])
            .add(&ax.scale_scalar(&c[1]))
            .add(&ax.mul(&ax).scale_scalar(&c[2]));
        let mats = BTreeMap::from([("x".to_string(), ax.clone()), ("y".to_string(), ay.clone())]);
        let conn =
            FlatConnection::new(vec!["x".to_string(), "y".to_string()], mats, false).unwrap();
        let psi_x = p_curvature(&conn, "x", p).unwrap();
        let psi_y = p_curvature(&conn, "y", p).unwrap();
        // Oracle for the diagonal direction: iterate the derivation
        // v ↦ ∂_x v + ∂_y v + (A_x + A_y)·v on the identity columns. The
        // p-th power of ∂_x + ∂_y vanishes, so this is its p-curvature.
        let sum = ax.add(&ay);
        let mut m = RationalFunctionMatrix::identity(domain, &vs, 2);
        for _ in 0..p {
            m = m.derive("x").add(&m.derive("y")).add(&sum.mul(&m));
        }
        assert_eq!(m, psi_x.add(&psi_y), "case {case}, p = {p}");
    }
}

#[test]
fn constant_gauge_changes_conjugate_the_p_curvature() {
    let vs = vars(&["x"]);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for case in 0..50 {
        let p = [3u64, 5][case % 2];
        let domain = Domain::Fp(p);
        let a = rand_matrix(&mut rng, domain, &vs, 2, &[2], 3);
        let (g, ginv) = unipotent_pair(&mut rng, domain, &vs, 2);
        let psi = p_curvature(&single_var_connection(a.clone()), "x", p).unwrap();
        // For constant g the gauge action on the matrix is plain conjugation.
        let conj = single_var_connection(g.mul(&a).mul(&ginv));
        let psi_conj = p_curvature(&conj, "x", p).unwrap();
        assert_eq!(psi_conj, g.mul(&psi).mul(&ginv), "case {case}, p = {p}");
    }
}

#[test]
fn logarithmic_derivatives_have_zero_p_curvature() {
    let vs = vars(&["x"]);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let primes = [3u64, 5, 7];
    for case in 0..20 {
        let p = primes[case % 3];
        let domain = Domain::Fp(p);
        let deg = rng.gen_range(1..=4u32);
        let x = MultiPolynomial::variable(domain, &vs, "x");
        let mut u = x.pow(deg);
        for k in 0..deg {
            let coeff = domain.from_i64(rng.gen_range(-4..=4));
            u = u.add(&x.pow(k).scale(&coeff));
        }
        let a = RationalFunction::from_poly(u.derive("x"))
            .div(&RationalFunction::from_poly(u.clone()))
            .unwrap();
        let conn = single_var_connection(RationalFunctionMatrix::new(1, vec![a]));
        let psi = p_curvature(&conn, "x", p).unwrap();
        assert!(psi.is_zero(), "u = {u}, p = {p}");
    }
}

// ---------------------------------------------------------------------------
// Foliations.
// ---------------------------------------------------------------------------

#[test]
fn pth_powers_match_iterated_application() {
    let vs = vars(&["t", "y"]);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..10 {
        let p = [3u64, 5][case % 2];
        let domain = Domain::Fp(p);
        let mut images = BTreeMap::new();
        for v in ["t", "y"] {
            let f = rand_poly(&mut rng, domain, &vs, &[2, 2], 4);
            images.insert(v.to_string(), RationalFunction::from_poly(f));
        }
        let v = VectorField::new(domain, &vs, images);
        let vp = v.pth_power(p, DEFAULT_DEGREE_CAP).unwrap();
        for w in ["t", "y"] {
            let mut f = RationalFunction::variable(domain, &vs, w);
            for _ in 0..p {
                f = v.apply(&f);
            }
            assert_eq!(vp.image(w), f, "case {case}, coordinate {w}");
        }
    }
}

#[test]
fn base_independent_nilpotent_fiber_flows_are_p_closed() {
    let vs = vars(&["t", "y1", "y2"]);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let primes = [3u64, 5, 7];
    for case in 0..20 {
        let p = primes[case % 3];
        let domain = Domain::Fp(p);
        // D_t moves y1 by a multiple of y2 and fixes y2: the fiber part is
        // N·y for a strictly upper triangular N, so its square is zero.
        let c = domain.from_i64(rng.gen_range(1..p as i64));
        let img = RationalFunction::variable(domain, &vs, "y2").scale(&c);
        let r = BTreeMap::from([("t".to_string(), BTreeMap::from([("y1".to_string(), img)]))]);
        let fol = HorizontalFoliation::new(
            domain,
            &vs,
            vec!["t".to_string()],
            vec!["y1".to_string(), "y2".to_string()],
            &r,
            true,
        )
        .unwrap();
        let out = p_closed_test(&fol, p, DEFAULT_DEGREE_CAP).unwrap();
        assert_eq!(out, PClosedOutcome::Closed, "case {case}, p = {p}");
    }
}

// ---------------------------------------------------------------------------
// Higgs fields.
// ---------------------------------------------------------------------------

#[test]
fn hitchin_invariants_are_conjugation_invariant() {
    let vs = vars(&["x"]);
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..50 {
        let domain = if case % 2 == 0 { Domain::Fp(7) } else { Domain::Q };
        let size = if case % 5 == 0 { 3 } else { 2 };
        let theta = trace_zero_matrix(&mut rng, domain, &vs, size, &[2]);
        let (g, ginv) = unipotent_pair(&mut rng, domain, &vs, size);
        let conj = g.mul(&theta).mul(&ginv);
        assert_eq!(
            hitchin_map(&conj).unwrap(),
            hitchin_map(&theta).unwrap(),
            "case {case}"
        );
    }
}

#[test]
fn hitchin_components_scale_by_their_weights() {
    let vs = vars(&["x", "t"]);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..10 {
        let domain = if case % 2 == 0 { Domain::Fp(7) } else { Domain::Q };
        let size = if case % 3 == 0 { 3 } else { 2 };
        let theta = trace_zero_matrix(&mut rng, domain, &vs, size, &[2, 0]);
        let t = RationalFunction::variable(domain, &vs, "t");
        let plain = hitchin_map(&theta).unwrap();
        let scaled = hitchin_map(&theta.scale(&t)).unwrap();
        for (k, h) in plain.iter().enumerate() {
            let weight = (k + 2) as u32;
            assert_eq!(scaled[k], h.mul(&t.pow(weight)), "case {case}, weight {weight}");
        }
    }
}

#[test]
fn the_hitchin_zero_locus_is_the_nilpotent_cone() {
    let vs = vars(&["x"]);
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for case in 0..40 {
        let domain = if case % 2 == 0 { Domain::Fp(7) } else { Domain::Q };
        let size = if case % 3 == 0 { 3 } else { 2 };
        let theta = if case % 4 < 2 {
            // Conjugated strictly upper triangular input: nilpotent, but not
            // visibly so entrywise.
            let n = strictly_upper(&mut rng, domain, &vs, size, &[2]);
            let (g, ginv) = unipotent_pair(&mut rng, domain, &vs, size);
            g.mul(&n).mul(&ginv)
        } else {
            trace_zero_matrix(&mut rng, domain, &vs, size, &[1])
        };
        let invariants = hitchin_map(&theta).unwrap();
        let all_zero = invariants.iter().all(|h| h.is_zero());
        // Independent check: nilpotency decided by powering the matrix.
        assert_eq!(
            all_zero,
            theta.nilpotency_order().is_some(),
            "case {case}"
        );
    }
}

// ---------------------------------------------------------------------------
// Frobenius descent data.
// ---------------------------------------------------------------------------

#[test]
fn the_frobenius_twist_is_substitution_of_the_pth_power() {
    let vs = vars(&["x"]);
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let primes = [3u64, 5, 7];
    for case in 0..10 {
        let p = primes[case % 3];
        let domain = Domain::Fp(p);
        let theta = rand_matrix(&mut rng, domain, &vs, 2, &[4], 4);
        let twist = frobenius_twist(&theta, "x", p).unwrap();
        let power = RationalFunction::variable(domain, &vs, "x").pow(p as u32);
        let assignment = BTreeMap::from([("x".to_string(), power)]);
        assert_eq!(twist, theta.substitute(&assignment).unwrap(), "p = {p}");
    }
}

#[test]
fn canonical_sections_specialize_to_conjugate_points_at_nonzero_lambda() {
    let p = 7u64;
    let domain = Domain::Fp(p);
    let vs = vars(&["x"]);
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let theta = strictly_upper(&mut rng, domain, &vs, 2, &[3]);
    let lift =
        FrobeniusLift::new("x".to_string(), MultiPolynomial::variable(domain, &vs, "x")).unwrap();
    let family = canonical_section(&theta, &lift, p).unwrap();
    for lam in 1..=5 {
        let pt = family.specialize(&domain.from_i64(lam)).unwrap();
        let violations = conj_membership(&pt).unwrap();
        assert!(violations.is_empty(), "lambda = {lam}: {violations:?}");
    }
}

#[test]
fn lift_transitions_compose_transitively() {
    let p = 7u64;
    let domain = Domain::Fp(p);
    let vs = vars(&["x"]);
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for case in 0..10 {
        let theta = strictly_upper(&mut rng, domain, &vs, 2, &[3]);
        let lifts: Vec<FrobeniusLift> = (0..3)
            .map(|_| {
                let f = rand_poly(&mut rng, domain, &vs, &[2], 3);
                FrobeniusLift::new("x".to_string(), f).unwrap()
            })
            .collect();
        let g12 = lift_transition(&theta, &lifts[0], &lifts[1], p).unwrap();
        let g23 = lift_transition(&theta, &lifts[1], &lifts[2], p).unwrap();
        let g13 = lift_transition(&theta, &lifts[0], &lifts[2], p).unwrap();
        assert_eq!(g12.mul(&g23), g13, "case {case}");
    }
}
