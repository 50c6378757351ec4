//! Frobenius lifts on one-variable charts, the divided Frobenius, the
//! inverse Cartier transform by exponential twisting, canonical sections
//! over an adjoined deformation parameter, and the conjugate-point
//! membership checks.
//!
//! All operations work over F_p on a designated chart variable x. The lift
//! x ↦ x^p + p·f(x) lives over the mod-p² base; only its reduction data
//! (the perturbation f) enters the closed-form formulas, so f is stored as
//! a polynomial over F_p.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::algebra::{Domain, MultiPolynomial, RationalFunction, RationalFunctionMatrix, Scalar};
use crate::connection::{p_curvature, FlatConnection};
use crate::error::Error;

/// The lift x ↦ x^p + p·f(x) of the absolute Frobenius on a chart.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FrobeniusLift {
    var: String,
    f: MultiPolynomial,
}

impl FrobeniusLift {
    pub fn new(var: String, f: MultiPolynomial) -> Result<FrobeniusLift, Error> {
        let Domain::Fp(_) = f.domain() else {
            return Err(Error::DomainMismatch(
                "Frobenius lift perturbation must have prime-field coefficients".into(),
            ));
        };
        let Some(idx) = f.vars().iter().position(|v| v == &var) else {
            return Err(Error::InvalidInput(format!(
                "chart variable {var} missing from the ambient list"
            )));
        };
        if f.occurring_vars().iter().any(|&i| i != idx) {
            return Err(Error::InvalidInput(
                "lift perturbation may involve only the chart variable".into(),
            ));
        }
        Ok(FrobeniusLift { var, f })
    }

    pub fn var(&self) -> &str {
        &self.var
    }

    pub fn perturbation(&self) -> &MultiPolynomial {
        &self.f
    }

    pub fn domain(&self) -> Domain {
        self.f.domain()
    }

    pub fn prime(&self) -> u64 {
        self.f.domain().characteristic()
    }

    fn embed(&self, new_vars: &Arc<[String]>) -> FrobeniusLift {
        FrobeniusLift {
            var: self.var.clone(),
            f: self.f.embed(new_vars),
        }
    }

    /// x^{p−1} + f′(x), the coefficient of the divided Frobenius on dx.
    fn kernel(&self) -> RationalFunction {
        let p = self.prime();
        let x = MultiPolynomial::variable(self.domain(), self.f.vars(), &self.var);
        RationalFunction::from_poly(x.pow(p as u32 - 1).add(&self.f.derive(&self.var)))
    }
}

/// Substitutes x ↦ x^p in every entry (the Frobenius twist of the
/// coefficient matrix).
pub fn frobenius_twist(
    m: &RationalFunctionMatrix,
    var: &str,
    p: u64,
) -> Result<RationalFunctionMatrix, Error> {
    let xp = RationalFunction::variable(m.domain(), m.vars(), var).pow(p as u32);
    let mut assign = BTreeMap::new();
    assign.insert(var.to_string(), xp);
    m.substitute(&assign)
}

/// ζ(g·dx) = g(x^p)·(x^{p−1} + f′(x))·dx, the exact division by p of the
/// pullback of g·dx under the lift. Returns the coefficient of dx.
pub fn divided_frobenius(lift: &FrobeniusLift, g: &RationalFunction) -> Result<RationalFunction, Error> {
    let p = lift.prime();
    let xp = RationalFunction::variable(g.domain(), g.vars(), lift.var()).pow(p as u32);
    let mut assign = BTreeMap::new();
    assign.insert(lift.var().to_string(), xp);
    Ok(g.substitute(&assign)?.mul(&lift.kernel()))
}

fn check_nilpotence(theta: &RationalFunctionMatrix, bound: u32, what: &str) -> Result<u32, Error> {
    match theta.nilpotency_order() {
        Some(ord) if ord <= bound => Ok(ord),
        Some(ord) => Err(Error::NilpotenceBoundViolated(format!(
            "{what}: nilpotence order {ord} exceeds the bound {bound}"
        ))),
        None => Err(Error::NilpotenceBoundViolated(format!(
            "{what}: matrix is not nilpotent"
        ))),
    }
}

/// Inverse Cartier transform of a nilpotent Higgs field on a one-variable
/// chart: the flat connection with matrix A = −Θ(x^p)·(x^{p−1} + f′(x)).
pub fn inverse_cartier_chart(
    theta: &RationalFunctionMatrix,
    lift: &FrobeniusLift,
    p: u64,
) -> Result<FlatConnection, Error> {
    let ch = theta.domain().characteristic();
    if ch != p {
        return Err(Error::CharacteristicMismatch { expected: p, found: ch });
    }
    if theta.vars() != lift.f.vars() {
        return Err(Error::DomainMismatch(
            "Higgs field and lift use different ambient variables".into(),
        ));
    }
    check_nilpotence(theta, p as u32 - 1, "inverse Cartier input")?;
    let a = frobenius_twist(theta, lift.var(), p)?
        .scale(&lift.kernel())
        .neg();
    let trace_zero = a.trace().is_zero();
    let mut mats = BTreeMap::new();
    mats.insert(lift.var().to_string(), a);
    FlatConnection::new(vec![lift.var().to_string()], mats, trace_zero)
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum OvOutcome {
    Pass,
    Fail { discrepancy: RationalFunctionMatrix },
}

/// Verifies that the p-curvature of the inverse Cartier transform equals
/// the Frobenius twist Θ(x^p).
pub fn ov_check(
    theta: &RationalFunctionMatrix,
    lift: &FrobeniusLift,
    p: u64,
) -> Result<OvOutcome, Error> {
    let conn = inverse_cartier_chart(theta, lift, p)?;
    let psi = p_curvature(&conn, lift.var(), p)?;
    let expected = frobenius_twist(theta, lift.var(), p)?;
    let diff = psi.sub(&expected);
    Ok(if diff.is_zero() {
        OvOutcome::Pass
    } else {
        OvOutcome::Fail { discrepancy: diff }
    })
}

/// Truncated exponential Σ_{i=0}^{p−1} M^i / i!; factorials below p are
/// units, and nilpotence makes the truncation exact.
fn truncated_exponential(m: &RationalFunctionMatrix, p: u64) -> RationalFunctionMatrix {
    let mut g = RationalFunctionMatrix::identity(m.domain(), m.vars(), m.size());
    let mut term = RationalFunctionMatrix::identity(m.domain(), m.vars(), m.size());
    for i in 1..p {
        let inv_i = m.domain().from_i64(i as i64).inv().expect("i < p is a unit");
        term = term.mul(m).scale_scalar(&inv_i);
        if term.is_zero() {
            break;
        }
        g = g.add(&term);
    }
    g
}

/// The gluing matrix G = exp((f_2 − f_1)·Θ(x^p)) between the inverse
/// Cartier transforms for two lifts; requires nilpotence order at most
/// (p−1)/2 so that products of transition matrices stay exact.
pub fn lift_transition(
    theta: &RationalFunctionMatrix,
    lift1: &FrobeniusLift,
    lift2: &FrobeniusLift,
    p: u64,
) -> Result<RationalFunctionMatrix, Error> {
    if lift1.var() != lift2.var() {
        return Err(Error::InvalidInput(
            "lifts live on different chart variables".into(),
        ));
    }
    check_nilpotence(theta, (p as u32 - 1) / 2, "lift transition")?;
    let h = RationalFunction::from_poly(lift2.f.sub(&lift1.f));
    let m = frobenius_twist(theta, lift1.var(), p)?.scale(&h);
    Ok(truncated_exponential(&m, p))
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum LiftChangeOutcome {
    Pass,
    Fail { discrepancy: RationalFunctionMatrix },
}

/// Verifies A_2·G = G·A_1 − ∂G for the transition matrix G between the
/// two lifts (the inverse-free form of A_2 = G A_1 G^{−1} − (∂G) G^{−1}).
pub fn change_of_lift_check(
    theta: &RationalFunctionMatrix,
    lift1: &FrobeniusLift,
    lift2: &FrobeniusLift,
    p: u64,
) -> Result<LiftChangeOutcome, Error> {
    let g = lift_transition(theta, lift1, lift2, p)?;
    let a1 = inverse_cartier_chart(theta, lift1, p)?;
    let a2 = inverse_cartier_chart(theta, lift2, p)?;
    let var = lift1.var();
    let lhs = a2.matrix(var).mul(&g);
    let rhs = g.mul(a1.matrix(var)).sub(&g.derive(var));
    let diff = lhs.sub(&rhs);
    Ok(if diff.is_zero() {
        LiftChangeOutcome::Pass
    } else {
        LiftChangeOutcome::Fail { discrepancy: diff }
    })
}

/// The one-parameter family A_λ = −λ·Θ(x^p)·(x^{p−1} + f′(x)) together
/// with its p-curvature Ψ(λ) and the divided curvature θ̃ = Ψ/λ.
#[derive(Clone, Debug)]
pub struct CanonicalSectionFamily {
    lambda_var: String,
    chart_var: String,
    p: u64,
    theta: RationalFunctionMatrix,
    a_lambda: RationalFunctionMatrix,
    psi: RationalFunctionMatrix,
    theta_tilde: RationalFunctionMatrix,
}

impl CanonicalSectionFamily {
    pub fn lambda_var(&self) -> &str {
        &self.lambda_var
    }

    pub fn chart_var(&self) -> &str {
        &self.chart_var
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// The Higgs datum, embedded over the extended variable list.
    pub fn theta(&self) -> &RationalFunctionMatrix {
        &self.theta
    }

    pub fn a_lambda(&self) -> &RationalFunctionMatrix {
        &self.a_lambda
    }

    pub fn psi(&self) -> &RationalFunctionMatrix {
        &self.psi
    }

    pub fn theta_tilde(&self) -> &RationalFunctionMatrix {
        &self.theta_tilde
    }

    /// The family member at a fixed scalar λ value.
    pub fn specialize(&self, value: &Scalar) -> Result<ConjugatePoint, Error> {
        let domain = self.a_lambda.domain();
        let vars = self.a_lambda.vars();
        let lam = RationalFunction::constant(domain, vars, value.clone());
        let mut assign = BTreeMap::new();
        assign.insert(self.lambda_var.clone(), lam.clone());
        Ok(ConjugatePoint {
            chart_var: self.chart_var.clone(),
            p: self.p,
            a: self.a_lambda.substitute(&assign)?,
            theta_hat: self.theta_tilde.substitute(&assign)?,
            lambda: lam,
        })
    }
}

/// Builds the canonical section family over F_p(λ)(x), adjoining `lambda`
/// to the ambient variables when absent.
pub fn canonical_section(
    theta: &RationalFunctionMatrix,
    lift: &FrobeniusLift,
    p: u64,
) -> Result<CanonicalSectionFamily, Error> {
    let ch = theta.domain().characteristic();
    if ch != p {
        return Err(Error::CharacteristicMismatch { expected: p, found: ch });
    }
    check_nilpotence(theta, p as u32 - 1, "canonical section input")?;
    let lambda = "lambda".to_string();
    let (theta_e, lift_e) = if theta.vars().iter().any(|v| v == &lambda) {
        let idx = theta
            .vars()
            .iter()
            .position(|v| v == &lambda)
            .expect("just found");
        let uses_lambda = theta
            .entries()
            .iter()
            .flat_map(|e| {
                e.num()
                    .occurring_vars()
                    .into_iter()
                    .chain(e.den().occurring_vars())
            })
            .any(|i| i == idx);
        if uses_lambda {
            return Err(Error::InvalidInput(
                "Higgs datum already involves the deformation variable lambda".into(),
            ));
        }
        (theta.clone(), lift.clone())
    } else {
        let mut names: Vec<String> = vec![lambda.clone()];
        names.extend(theta.vars().iter().cloned());
        let new_vars: Arc<[String]> = names.into();
        (theta.embed(&new_vars), lift.embed(&new_vars))
    };
    let vars = theta_e.vars().clone();
    let domain = theta_e.domain();
    let lam = RationalFunction::variable(domain, &vars, &lambda);
    let a_lambda = frobenius_twist(&theta_e, lift_e.var(), p)?
        .scale(&lift_e.kernel())
        .scale(&lam)
        .neg();
    // λ-linearity of the family is structural
    debug_assert!(a_lambda
        .entries()
        .iter()
        .all(|e| e.mul(&lam.inv().expect("nonzero")).derive(&lambda).is_zero()));
    let trace_zero = a_lambda.trace().is_zero();
    let mut mats = BTreeMap::new();
    mats.insert(lift_e.var().to_string(), a_lambda.clone());
    let conn = FlatConnection::new(vec![lift_e.var().to_string()], mats, trace_zero)?;
    let psi = p_curvature(&conn, lift_e.var(), p)?;
    let theta_tilde = psi.scale(&lam.inv()?);
    Ok(CanonicalSectionFamily {
        lambda_var: lambda,
        chart_var: lift_e.var().to_string(),
        p,
        theta: theta_e,
        a_lambda,
        psi,
        theta_tilde,
    })
}

/// Itemized verdict of the central-fiber behavior of the canonical
/// section's p-curvature.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct NonabelianKatzReport {
    /// Ψ(λ) vanishes at λ = 0.
    pub central_fiber_vanishes: bool,
    /// Every entry of Ψ is divisible by λ with λ-free denominator.
    pub lambda_divisible: bool,
    /// (Ψ/λ)|_{λ=0} equals the Frobenius twist Θ(x^p).
    pub frobenius_twist_matches: bool,
}

impl NonabelianKatzReport {
    pub fn passed(&self) -> bool {
        self.central_fiber_vanishes && self.lambda_divisible && self.frobenius_twist_matches
    }
}

pub fn nonabelian_katz_check(
    theta: &RationalFunctionMatrix,
    lift: &FrobeniusLift,
    p: u64,
) -> Result<NonabelianKatzReport, Error> {
    let fam = canonical_section(theta, lift, p)?;
    let domain = fam.psi().domain();
    let vars = fam.psi().vars();
    let mut at_zero = BTreeMap::new();
    at_zero.insert(
        fam.lambda_var().to_string(),
        RationalFunction::zero(domain, vars),
    );
    let central_fiber_vanishes = match fam.psi().substitute(&at_zero) {
        Ok(m) => m.is_zero(),
        Err(Error::SubstitutionPole(_)) => false,
        Err(e) => return Err(e),
    };
    let lambda_idx = vars
        .iter()
        .position(|v| v == fam.lambda_var())
        .expect("lambda is ambient");
    let lambda_divisible = fam.psi().entries().iter().all(|e| {
        let den_free = !e.den().occurring_vars().contains(&lambda_idx)
            || !e
                .den()
                .substitute_poly(&BTreeMap::from([(
                    fam.lambda_var().to_string(),
                    MultiPolynomial::zero(domain, vars),
                )]))
                .is_zero();
        let num_divisible = e.is_zero()
            || e.num()
                .substitute_poly(&BTreeMap::from([(
                    fam.lambda_var().to_string(),
                    MultiPolynomial::zero(domain, vars),
                )]))
                .is_zero();
        den_free && num_divisible
    });
    let twist = frobenius_twist(fam.theta(), fam.chart_var(), p)?;
    let frobenius_twist_matches = match fam.theta_tilde().substitute(&at_zero) {
        Ok(m) => m == twist,
        Err(Error::SubstitutionPole(_)) => false,
        Err(e) => return Err(e),
    };
    Ok(NonabelianKatzReport {
        central_fiber_vanishes,
        lambda_divisible,
        frobenius_twist_matches,
    })
}

/// A chart-level conjugate-moduli point: connection matrix A, F-Higgs
/// coefficient Θ̂, and the scaling value λ (a scalar or a formal parameter
/// in the ambient variables).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ConjugatePoint {
    pub chart_var: String,
    pub p: u64,
    pub a: RationalFunctionMatrix,
    pub theta_hat: RationalFunctionMatrix,
    pub lambda: RationalFunction,
}

/// Checks the three membership identities and reports every violation.
pub fn conj_membership(pt: &ConjugatePoint) -> Result<Vec<String>, Error> {
    let ch = pt.a.domain().characteristic();
    if ch != pt.p {
        return Err(Error::CharacteristicMismatch {
            expected: pt.p,
            found: ch,
        });
    }
    let mut violations = Vec::new();
    let trace_zero = pt.a.trace().is_zero();
    let mut mats = BTreeMap::new();
    mats.insert(pt.chart_var.clone(), pt.a.clone());
    let conn = FlatConnection::new(vec![pt.chart_var.clone()], mats, trace_zero)?;
    let psi = p_curvature(&conn, &pt.chart_var, pt.p)?;
    if psi != pt.theta_hat.scale(&pt.lambda) {
        violations.push("p-curvature does not equal lambda times the F-Higgs field".into());
    }
    let horiz = pt
        .theta_hat
        .derive(&pt.chart_var)
        .add(&pt.a.commutator(&pt.theta_hat));
    if !horiz.is_zero() {
        violations.push("F-Higgs field is not horizontal for the connection".into());
    }
    if !pt.theta_hat.trace().is_zero() {
        violations.push("F-Higgs field has nonzero trace".into());
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_expression;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vars(names: &[&str]) -> Arc<[String]> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn lift_from(text: &str, vs: &Arc<[String]>, d: Domain) -> FrobeniusLift {
        let f = parse_expression(text, vs, d)
            .unwrap()
            .as_poly()
            .expect("polynomial perturbation")
            .clone();
        FrobeniusLift::new("x".to_string(), f).unwrap()
    }

    /// Independent oracle over Z/p^2: pull g·dx back along x ↦ x^p + p·f,
    /// then divide the coefficients by p exactly.
    fn divided_frobenius_oracle(lift: &FrobeniusLift, g: &MultiPolynomial) -> RationalFunction {
        let p = lift.prime();
        let d2 = Domain::zp2(p).unwrap();
        let vs = g.vars();
        let g2 = g.fp_to_zp2().unwrap();
        let f2 = lift.perturbation().fp_to_zp2().unwrap();
        let x2 = MultiPolynomial::variable(d2, vs, lift.var());
        let s = x2.pow(p as u32).add(&f2.scale(&d2.from_i64(p as i64)));
        let mut assign = BTreeMap::new();
        assign.insert(lift.var().to_string(), s.clone());
        let pulled = g2.substitute_poly(&assign);
        let form = pulled.mul(&s.derive(lift.var()));
        RationalFunction::from_poly(form.zp2_div_p().unwrap())
    }

    #[test]
    fn divided_frobenius_closed_form() {
        let vs = vars(&["x"]);
        for p in [3u64, 5, 7] {
            let d = Domain::fp(p).unwrap();
            let one = RationalFunction::one(d, &vs);
            let zero_lift = lift_from("0", &vs, d);
            // ω = dx pulls back to p·x^{p−1} dx; divided by p
            let expect = parse_expression(&format!("x^{}", p - 1), &vs, d).unwrap();
            assert_eq!(divided_frobenius(&zero_lift, &one).unwrap(), expect);
            // g = 0
            let z = RationalFunction::zero(d, &vs);
            assert!(divided_frobenius(&zero_lift, &z).unwrap().is_zero());
        }
        // f = x, p = 3: dx ↦ (x^2 + 1) dx
        let d3 = Domain::fp(3).unwrap();
        let lx = lift_from("x", &vs, d3);
        assert_eq!(
            divided_frobenius(&lx, &RationalFunction::one(d3, &vs)).unwrap(),
            parse_expression("x^2 + 1", &vs, d3).unwrap()
        );
    }

    #[test]
    fn divided_frobenius_matches_mod_p2_oracle() {
        let vs = vars(&["x"]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [3u64, 5, 7] {
            let d = Domain::fp(p).unwrap();
            for _ in 0..10 {
                let mut g = MultiPolynomial::zero(d, &vs);
                let mut f = MultiPolynomial::zero(d, &vs);
                let x = MultiPolynomial::variable(d, &vs, "x");
                for e in 0..=4u32 {
                    g = g.add(&x.pow(e).scale(&d.from_i64(rng.gen_range(0..p as i64))));
                    f = f.add(&x.pow(e).scale(&d.from_i64(rng.gen_range(0..p as i64))));
                }
                let lift = FrobeniusLift::new("x".to_string(), f).unwrap();
                let fast = divided_frobenius(&lift, &RationalFunction::from_poly(g.clone())).unwrap();
                assert_eq!(fast, divided_frobenius_oracle(&lift, &g), "p = {p}");
            }
        }
    }

    fn upper(vs: &Arc<[String]>, d: Domain, text: &str) -> RationalFunctionMatrix {
        RationalFunctionMatrix::new(
            2,
            vec![
                RationalFunction::zero(d, vs),
                parse_expression(text, vs, d).unwrap(),
                RationalFunction::zero(d, vs),
                RationalFunction::zero(d, vs),
            ],
        )
    }

    #[test]
    fn inverse_cartier_closed_forms() {
        let vs = vars(&["x"]);
        let p = 5u64;
        let d = Domain::fp(p).unwrap();
        // Θ = 0
        let zero = RationalFunctionMatrix::zeros(d, &vs, 2);
        let lift0 = lift_from("0", &vs, d);
        let conn = inverse_cartier_chart(&zero, &lift0, p).unwrap();
        assert!(conn.matrix("x").is_zero());
        // Θ = N constant: A = −N·x^{p−1}
        let n = upper(&vs, d, "1");
        let conn = inverse_cartier_chart(&n, &lift0, p).unwrap();
        let expect = n.scale(&parse_expression("x^4", &vs, d).unwrap()).neg();
        assert_eq!(conn.matrix("x"), &expect);
        // Θ = N·h(x), f = x: A = −N·h(x^p)·(x^{p−1} + 1)
        let theta = upper(&vs, d, "x^2 + 2");
        let liftx = lift_from("x", &vs, d);
        let conn = inverse_cartier_chart(&theta, &liftx, p).unwrap();
        let expect = upper(&vs, d, "x^10 + 2")
            .scale(&parse_expression("x^4 + 1", &vs, d).unwrap())
            .neg();
        assert_eq!(conn.matrix("x"), &expect);
    }

    #[test]
    fn nilpotence_bound_enforced() {
        let vs = vars(&["x"]);
        let p = 3u64;
        let d = Domain::fp(p).unwrap();
        // order-3 nilpotent needs p − 1 ≥ 3, so p = 3 must reject
        let mut theta = RationalFunctionMatrix::zeros(d, &vs, 3);
        theta.set(0, 1, RationalFunction::one(d, &vs));
        theta.set(1, 2, RationalFunction::one(d, &vs));
        let lift = lift_from("0", &vs, d);
        assert!(matches!(
            inverse_cartier_chart(&theta, &lift, p),
            Err(Error::NilpotenceBoundViolated(_))
        ));
        // a non-nilpotent matrix is rejected outright
        let id = RationalFunctionMatrix::identity(d, &vs, 2);
        assert!(matches!(
            inverse_cartier_chart(&id, &lift, p),
            Err(Error::NilpotenceBoundViolated(_))
        ));
    }

    #[test]
    fn ov_check_wilson_case() {
        let vs = vars(&["x"]);
        for p in [3u64, 5, 7] {
            let d = Domain::fp(p).unwrap();
            let lift0 = lift_from("0", &vs, d);
            // Θ = 0
            let zero = RationalFunctionMatrix::zeros(d, &vs, 2);
            assert_eq!(ov_check(&zero, &lift0, p).unwrap(), OvOutcome::Pass);
            // Θ = N: ψ_p = −N·(p−1)! = N by Wilson's theorem
            let n = upper(&vs, d, "1");
            assert_eq!(ov_check(&n, &lift0, p).unwrap(), OvOutcome::Pass, "p = {p}");
        }
    }

    #[test]
    fn ov_check_random_spot_cases() {
        let vs = vars(&["x"]);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for p in [3u64, 5, 7] {
            let d = Domain::fp(p).unwrap();
            for ftext in ["0", "x", "x^2"] {
                let lift = lift_from(ftext, &vs, d);
                for _ in 0..3 {
                    let x = MultiPolynomial::variable(d, &vs, "x");
                    let mut g = MultiPolynomial::zero(d, &vs);
                    for e in 0..=4u32 {
                        g = g.add(&x.pow(e).scale(&d.from_i64(rng.gen_range(0..p as i64))));
                    }
                    let theta = upper(&vs, d, "0").add(&{
                        let mut m = RationalFunctionMatrix::zeros(d, &vs, 2);
                        m.set(0, 1, RationalFunction::from_poly(g));
                        m
                    });
                    assert_eq!(
                        ov_check(&theta, &lift, p).unwrap(),
                        OvOutcome::Pass,
                        "p = {p}, f = {ftext}"
                    );
                }
            }
        }
    }

    #[test]
    fn change_of_lift_examples() {
        let vs = vars(&["x"]);
        let p = 5u64;
        let d = Domain::fp(p).unwrap();
        let lift0 = lift_from("0", &vs, d);
        let liftx = lift_from("x", &vs, d);
        // identical lifts: G = I
        let theta = upper(&vs, d, "x + 1");
        let g = lift_transition(&theta, &lift0, &lift0, p).unwrap();
        assert_eq!(g, RationalFunctionMatrix::identity(d, &vs, 2));
        assert_eq!(
            change_of_lift_check(&theta, &lift0, &lift0, p).unwrap(),
            LiftChangeOutcome::Pass
        );
        // Θ = 0: both transforms vanish
        let zero = RationalFunctionMatrix::zeros(d, &vs, 2);
        assert_eq!(
            change_of_lift_check(&zero, &lift0, &liftx, p).unwrap(),
            LiftChangeOutcome::Pass
        );
        // Θ = N constant, f1 = 0, f2 = x: G = I + xN
        let n = upper(&vs, d, "1");
        let g = lift_transition(&n, &lift0, &liftx, p).unwrap();
        let expect = RationalFunctionMatrix::identity(d, &vs, 2)
            .add(&n.scale(&parse_expression("x", &vs, d).unwrap()));
        assert_eq!(g, expect);
        assert_eq!(
            change_of_lift_check(&n, &lift0, &liftx, p).unwrap(),
            LiftChangeOutcome::Pass
        );
        // nontrivial polynomial Θ across all three lift pairs
        let theta = upper(&vs, d, "x^3 + 2*x");
        for (l1, l2) in [(&lift0, &liftx), (&liftx, &lift0)] {
            assert_eq!(
                change_of_lift_check(&theta, l1, l2, p).unwrap(),
                LiftChangeOutcome::Pass
            );
        }
    }

    #[test]
    fn lift_transition_cocycle() {
        let vs = vars(&["x"]);
        let p = 7u64;
        let d = Domain::fp(p).unwrap();
        let lifts = [
            lift_from("0", &vs, d),
            lift_from("x", &vs, d),
            lift_from("x^2", &vs, d),
        ];
        let theta = upper(&vs, d, "x^2 + 3");
        let g01 = lift_transition(&theta, &lifts[0], &lifts[1], p).unwrap();
        let g12 = lift_transition(&theta, &lifts[1], &lifts[2], p).unwrap();
        let g02 = lift_transition(&theta, &lifts[0], &lifts[2], p).unwrap();
        assert_eq!(g01.mul(&g12), g02);
    }

    #[test]
    fn canonical_section_square_zero() {
        let vs = vars(&["x"]);
        let p = 5u64;
        let d = Domain::fp(p).unwrap();
        let theta = upper(&vs, d, "x^2 + 1");
        let lift = lift_from("0", &vs, d);
        let fam = canonical_section(&theta, &lift, p).unwrap();
        // Ψ = λ·N·h(x^p), so θ̃ = N·h(x^p) is λ-independent
        assert!(fam
            .theta_tilde()
            .entries()
            .iter()
            .all(|e| e.derive("lambda").is_zero()));
        let twist = frobenius_twist(fam.theta(), "x", p).unwrap();
        assert_eq!(fam.theta_tilde(), &twist);
    }

    #[test]
    fn canonical_section_rank3_lambda_divisible() {
        let vs = vars(&["x"]);
        let p = 7u64;
        let d = Domain::fp(p).unwrap();
        let mut theta = RationalFunctionMatrix::zeros(d, &vs, 3);
        theta.set(0, 1, parse_expression("x", &vs, d).unwrap());
        theta.set(1, 2, parse_expression("x^2 + 1", &vs, d).unwrap());
        let lift = lift_from("x", &vs, d);
        let report = nonabelian_katz_check(&theta, &lift, p).unwrap();
        assert!(report.central_fiber_vanishes);
        assert!(report.lambda_divisible);
        assert!(report.frobenius_twist_matches);
        assert!(report.passed());
    }

    #[test]
    fn katz_check_simple_cases() {
        let vs = vars(&["x"]);
        for p in [5u64, 11] {
            let d = Domain::fp(p).unwrap();
            let lift = lift_from("0", &vs, d);
            let zero = RationalFunctionMatrix::zeros(d, &vs, 2);
            assert!(nonabelian_katz_check(&zero, &lift, p).unwrap().passed());
            let n = upper(&vs, d, "1");
            assert!(nonabelian_katz_check(&n, &lift, p).unwrap().passed());
        }
    }

    #[test]
    fn canonical_section_members_are_conjugate_points() {
        let vs = vars(&["x"]);
        let p = 5u64;
        let d = Domain::fp(p).unwrap();
        let theta = upper(&vs, d, "x^3 + x");
        let lift = lift_from("x^2", &vs, d);
        let fam = canonical_section(&theta, &lift, p).unwrap();
        for v in 1..=3u64 {
            let pt = fam.specialize(&d.from_i64(v as i64)).unwrap();
            let violations = conj_membership(&pt).unwrap();
            assert!(violations.is_empty(), "lambda = {v}: {violations:?}");
        }
    }

    #[test]
    fn conj_membership_examples() {
        let vs = vars(&["x"]);
        let p = 5u64;
        let d = Domain::fp(p).unwrap();
        // A = 0, Θ̂ = 0, λ = 0
        let zero = RationalFunctionMatrix::zeros(d, &vs, 2);
        let pt = ConjugatePoint {
            chart_var: "x".to_string(),
            p,
            a: zero.clone(),
            theta_hat: zero.clone(),
            lambda: RationalFunction::zero(d, &vs),
        };
        assert!(conj_membership(&pt).unwrap().is_empty());
        // A = 0, Θ̂ = N, λ = 0: the Dolbeault fiber point
        let n = upper(&vs, d, "1");
        let pt = ConjugatePoint {
            chart_var: "x".to_string(),
            p,
            a: zero.clone(),
            theta_hat: n.clone(),
            lambda: RationalFunction::zero(d, &vs),
        };
        assert!(conj_membership(&pt).unwrap().is_empty());
        // arbitrary flat A with Θ̂ = ψ_p(A), λ = 1: horizontality is checked
        let a = upper(&vs, d, "x^2").add(&{
            let mut m = RationalFunctionMatrix::zeros(d, &vs, 2);
            m.set(1, 0, RationalFunction::one(d, &vs));
            m
        });
        let mut mats = BTreeMap::new();
        mats.insert("x".to_string(), a.clone());
        let conn = FlatConnection::new(vec!["x".to_string()], mats, false).unwrap();
        let psi = p_curvature(&conn, "x", p).unwrap();
        let pt = ConjugatePoint {
            chart_var: "x".to_string(),
            p,
            a,
            theta_hat: psi,
            lambda: RationalFunction::one(d, &vs),
        };
        // trace-zero A forces tr ψ_p = 0 (determinant line), so all pass
        let violations = conj_membership(&pt).unwrap();
        assert!(violations.is_empty(), "{violations:?}");
        // violation case: Θ̂ not horizontal and wrong p-curvature
        let bad = ConjugatePoint {
            chart_var: "x".to_string(),
            p,
            a: zero,
            theta_hat: upper(&vs, d, "x"),
            lambda: RationalFunction::one(d, &vs),
        };
        let violations = conj_membership(&bad).unwrap();
        assert!(violations.iter().any(|v| v.contains("p-curvature")));
        assert!(violations.iter().any(|v| v.contains("horizontal")));
    }
}
