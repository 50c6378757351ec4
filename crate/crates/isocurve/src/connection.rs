//! Flat connections on coordinate charts and their p-curvature.
//!
//! A connection is stored by its per-variable matrices, with D_i = ∂_i + A_i
//! acting on column vectors. Construction verifies flatness exactly:
//! K_ij = ∂_i A_j − ∂_j A_i + [A_i, A_j] must vanish for every pair. The
//! ambient variable list of the entries may be larger than the list of
//! connection coordinates; extra variables act as transcendental parameters
//! (so a rank-1 system over F_p(c)(x) has coordinate x and parameter c).
//!
//! The p-curvature of a coordinate derivation ∂ is ψ_p(∂) = D^p (∂^p = 0 for
//! coordinates), computed by the recursion M_1 = A, M_{k+1} = ∂M_k + A·M_k.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::algebra::{Domain, RationalFunction, RationalFunctionMatrix};
use crate::error::Error;

/// Default bound on intermediate numerator/denominator total degree during
/// p-fold iteration.
pub const DEFAULT_DEGREE_CAP: usize = 20000;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FlatConnection {
    conn_vars: Vec<String>,
    rank: usize,
    matrices: BTreeMap<String, RationalFunctionMatrix>,
    trace_zero: bool,
}

impl FlatConnection {
    /// Builds a connection after verifying flatness (and the trace-zero
    /// condition when claimed). `conn_vars` orders the coordinates; each must
    /// have a matrix and appear in the entries' ambient variable list.
    pub fn new(
        conn_vars: Vec<String>,
        matrices: BTreeMap<String, RationalFunctionMatrix>,
        trace_zero: bool,
    ) -> Result<FlatConnection, Error> {
        if conn_vars.is_empty() {
            return Err(Error::InvalidInput("connection needs a coordinate".into()));
        }
        let first = matrices
            .values()
            .next()
            .ok_or_else(|| Error::InvalidInput("connection needs a matrix".into()))?;
        let rank = first.size();
        let ambient = first.vars().clone();
        for v in &conn_vars {
            let m = matrices
                .get(v)
                .ok_or_else(|| Error::InvalidInput(format!("no matrix for coordinate {v}")))?;
            if m.size() != rank {
                return Err(Error::InvalidInput("matrix sizes differ".into()));
            }
            if !ambient.iter().any(|a| a == v) {
                return Err(Error::InvalidInput(format!(
                    "coordinate {v} missing from ambient variables {ambient:?}"
                )));
            }
        }
        if matrices.len() != conn_vars.len() {
            return Err(Error::InvalidInput(
                "matrix keys do not match the coordinate list".into(),
            ));
        }
        for ((vi, vj), k) in curvature_matrices(&conn_vars, &matrices) {
            if !k.is_zero() {
                return Err(Error::InvalidInput(format!(
                    "connection is not flat: K_{{{vi},{vj}}} = {k}"
                )));
            }
        }
        if trace_zero {
            for (v, m) in &matrices {
                if !m.trace().is_zero() {
                    return Err(Error::InvalidInput(format!(
                        "trace-zero claimed but tr A_{v} = {}",
                        m.trace()
                    )));
                }
            }
        }
        Ok(FlatConnection {
            conn_vars,
            rank,
            matrices,
            trace_zero,
        })
    }

    pub fn conn_vars(&self) -> &[String] {
        &self.conn_vars
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn trace_zero(&self) -> bool {
        self.trace_zero
    }

    pub fn domain(&self) -> Domain {
        self.matrices.values().next().expect("nonempty").domain()
    }

    pub fn ambient_vars(&self) -> &Arc<[String]> {
        self.matrices.values().next().expect("nonempty").vars()
    }

    pub fn matrix(&self, var: &str) -> &RationalFunctionMatrix {
        self.matrices
            .get(var)
            .unwrap_or_else(|| panic!("{var} is not a coordinate of this connection"))
    }

    /// All curvature matrices K_ij for i < j in coordinate order; empty for
    /// one coordinate, and all zero by the construction invariant.
    pub fn curvature(&self) -> Vec<((String, String), RationalFunctionMatrix)> {
        curvature_matrices(&self.conn_vars, &self.matrices)
    }

    /// Coefficientwise reduction of a Q-connection mod p.
    pub fn reduce_mod_p(&self, p: u64) -> Result<FlatConnection, Error> {
        let mut matrices = BTreeMap::new();
        for (v, m) in &self.matrices {
            matrices.insert(v.clone(), m.reduce_mod_p(p)?);
        }
        FlatConnection::new(self.conn_vars.clone(), matrices, self.trace_zero)
    }
}

fn curvature_matrices(
    conn_vars: &[String],
    matrices: &BTreeMap<String, RationalFunctionMatrix>,
) -> Vec<((String, String), RationalFunctionMatrix)> {
    let mut out = Vec::new();
    for (a, vi) in conn_vars.iter().enumerate() {
        for vj in &conn_vars[a + 1..] {
            let ai = &matrices[vi];
            let aj = &matrices[vj];
            let k = aj.derive(vi).sub(&ai.derive(vj)).add(&ai.commutator(aj));
            out.push(((vi.clone(), vj.clone()), k));
        }
    }
    out
}

/// ψ_p(∂_var) = D_var^p via M_1 = A, M_{k+1} = ∂M_k + A·M_k, with the
/// default degree cap.
pub fn p_curvature(
    conn: &FlatConnection,
    var: &str,
    p: u64,
) -> Result<RationalFunctionMatrix, Error> {
    p_curvature_capped(conn, var, p, DEFAULT_DEGREE_CAP)
}

pub fn p_curvature_capped(
    conn: &FlatConnection,
    var: &str,
    p: u64,
    cap: usize,
) -> Result<RationalFunctionMatrix, Error> {
    let ch = conn.domain().characteristic();
    if ch != p {
        return Err(Error::CharacteristicMismatch {
            expected: p,
            found: ch,
        });
    }
    let a = conn.matrix(var);
    let mut m = a.clone();
    for _ in 1..p {
        m = m.derive(var).add(&a.mul(&m));
        check_degree_cap(&m, cap)?;
    }
    Ok(m)
}

fn check_degree_cap(m: &RationalFunctionMatrix, cap: usize) -> Result<(), Error> {
    let reached = m
        .entries()
        .iter()
        .map(|e| e.max_degree() as usize)
        .max()
        .unwrap_or(0);
    if reached > cap {
        return Err(Error::DegreeCapExceeded { cap, reached });
    }
    Ok(())
}

/// Smallest e with M^e = 0 (bounded by the size), or NotNilpotent.
pub fn nilpotency_order(m: &RationalFunctionMatrix) -> Nilpotency {
    match m.nilpotency_order() {
        Some(e) => Nilpotency::Order(e),
        None => Nilpotency::NotNilpotent,
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Nilpotency {
    Order(u32),
    NotNilpotent,
}

impl fmt::Display for Nilpotency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nilpotency::Order(e) => write!(f, "{e}"),
            Nilpotency::NotNilpotent => write!(f, "not nilpotent"),
        }
    }
}

/// Per-direction p-curvature matrices of a connection at one prime.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PCurvatureReport {
    pub p: u64,
    /// (coordinate, ψ_p(∂_coordinate), nilpotency of that matrix), in
    /// coordinate order.
    pub per_var: Vec<(String, RationalFunctionMatrix, Nilpotency)>,
    /// True exactly when every matrix above is zero.
    pub vanishes: bool,
}

pub fn p_curvature_report(
    conn: &FlatConnection,
    p: u64,
    cap: usize,
) -> Result<PCurvatureReport, Error> {
    let mut per_var = Vec::new();
    let mut vanishes = true;
    for v in conn.conn_vars() {
        let m = p_curvature_capped(conn, v, p, cap)?;
        vanishes &= m.is_zero();
        let n = nilpotency_order(&m);
        per_var.push((v.clone(), m, n));
    }
    Ok(PCurvatureReport { p, per_var, vanishes })
}

/// Outcome of a Grothendieck–Katz scan at one prime.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum KatzOutcome {
    Vanishes,
    /// Some direction has nonzero p-curvature; the worst nilpotency class
    /// over the nonzero directions (NotNilpotent dominates any order).
    Nonzero(Nilpotency),
    /// A coefficient denominator vanishes mod p; the prime must be skipped.
    BadReduction,
}

impl fmt::Display for KatzOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KatzOutcome::Vanishes => write!(f, "vanishes"),
            KatzOutcome::Nonzero(n) => write!(f, "nonzero (nilpotency {n})"),
            KatzOutcome::BadReduction => write!(f, "bad reduction"),
        }
    }
}

/// Reduces a Q-connection at each prime and reports its p-curvature class,
/// in ascending prime order.
pub fn katz_scan(
    conn: &FlatConnection,
    primes: &[u64],
    cap: usize,
) -> Result<Vec<(u64, KatzOutcome)>, Error> {
    if conn.domain() != Domain::Q {
        return Err(Error::DomainMismatch(
            "katz_scan expects a connection over Q".into(),
        ));
    }
    let mut sorted: Vec<u64> = primes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = Vec::new();
    for &p in &sorted {
        let reduced = match conn.reduce_mod_p(p) {
            Ok(c) => c,
            Err(Error::BadReduction(_)) => {
                out.push((p, KatzOutcome::BadReduction));
                continue;
            }
            Err(e) => return Err(e),
        };
        let report = p_curvature_report(&reduced, p, cap)?;
        if report.vanishes {
            out.push((p, KatzOutcome::Vanishes));
        } else {
            let mut worst = Nilpotency::Order(1);
            for (_, m, n) in &report.per_var {
                if m.is_zero() {
                    continue;
                }
                worst = match (worst, *n) {
                    (_, Nilpotency::NotNilpotent) | (Nilpotency::NotNilpotent, _) => {
                        Nilpotency::NotNilpotent
                    }
                    (Nilpotency::Order(a), Nilpotency::Order(b)) => Nilpotency::Order(a.max(b)),
                };
            }
            out.push((p, KatzOutcome::Nonzero(worst)));
        }
    }
    Ok(out)
}

/// The rank-2 system of the hypergeometric operator
/// L = ∂² + a(λ)∂ + b(λ) with a = (1−2λ)/(λ(1−λ)), b = −1/(4λ(1−λ))
/// (the operator λ(1−λ)y″ + (1−2λ)y′ − y/4 made monic), over Q(λ).
///
/// The matrix is taken in the cyclic basis (1, ∂) of the operator module:
/// ∇(∂)(1) = ∂ and ∇(∂)(∂) = ∂² = −b·1 − a·∂, so
/// A = [[0, 1/(4λ(1−λ))], [1, −(1−2λ)/(λ(1−λ))]] with D = ∂ + A. In this
/// orientation ψ_p is the classical p-curvature of the operator (the
/// remainder of ∂^p modulo L), which is nonzero and nilpotent of order 2
/// at every odd prime of good reduction. The transposed orientation
/// (coefficients in the second row) describes the coordinate flow of
/// solution vectors instead and does not have nilpotent ψ_p under the
/// column-vector convention.
pub fn build_legendre() -> FlatConnection {
    let vars: Arc<[String]> = ["lambda".to_string()].into();
    let d = Domain::Q;
    let lam = RationalFunction::variable(d, &vars, "lambda");
    let one = RationalFunction::one(d, &vars);
    let four = RationalFunction::from_i64(d, &vars, 4);
    let two = RationalFunction::from_i64(d, &vars, 2);
    let l_one_minus_l = lam.mul(&one.sub(&lam));
    // -b and -a of the monic operator
    let minus_b = one.div(&four.mul(&l_one_minus_l)).expect("nonzero");
    let minus_a = one.sub(&two.mul(&lam)).div(&l_one_minus_l).expect("nonzero").neg();
    let a = RationalFunctionMatrix::new(
        2,
        vec![RationalFunction::zero(d, &vars), minus_b, one, minus_a],
    );
    let mut matrices = BTreeMap::new();
    matrices.insert("lambda".to_string(), a);
    FlatConnection::new(vec!["lambda".to_string()], matrices, false)
        .expect("single-variable system is vacuously flat")
}
