//! Higgs fields, λ-connection families interpolating between flat
//! connections and Higgs fields, and the coefficients of the spectral
//! characteristic polynomial.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::algebra::{Domain, RationalFunction, RationalFunctionMatrix, Scalar};
use crate::connection::{FlatConnection, Nilpotency};
use crate::error::Error;

/// Commuting tuple of Higgs fields θ_i, one per chart coordinate.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HiggsChart {
    coord_vars: Vec<String>,
    rank: usize,
    fields: BTreeMap<String, RationalFunctionMatrix>,
    trace_zero: bool,
}

impl HiggsChart {
    /// Verifies [θ_i, θ_j] = 0 for every pair and, when claimed, that all
    /// fields are trace-free.
    pub fn new(
        coord_vars: Vec<String>,
        fields: BTreeMap<String, RationalFunctionMatrix>,
        trace_zero: bool,
    ) -> Result<HiggsChart, Error> {
        if coord_vars.is_empty() {
            return Err(Error::InvalidInput("no chart coordinates".into()));
        }
        let first = fields
            .get(&coord_vars[0])
            .ok_or_else(|| Error::InvalidInput("missing Higgs field".into()))?;
        let rank = first.size();
        if fields.len() != coord_vars.len() {
            return Err(Error::InvalidInput(
                "need exactly one Higgs field per coordinate".into(),
            ));
        }
        for v in &coord_vars {
            let th = fields
                .get(v)
                .ok_or_else(|| Error::InvalidInput(format!("missing Higgs field for {v}")))?;
            if th.size() != rank {
                return Err(Error::InvalidInput("Higgs field rank mismatch".into()));
            }
            if !th.vars().iter().any(|x| x == v) {
                return Err(Error::InvalidInput(format!(
                    "coordinate {v} missing from the ambient list"
                )));
            }
            if trace_zero && !th.trace().is_zero() {
                return Err(Error::InvalidInput(format!(
                    "field along {v} is not trace-free"
                )));
            }
        }
        for (i, vi) in coord_vars.iter().enumerate() {
            for vj in &coord_vars[i + 1..] {
                let c = fields[vi].commutator(&fields[vj]);
                if !c.is_zero() {
                    return Err(Error::InvalidInput(format!(
                        "Higgs fields along {vi} and {vj} do not commute"
                    )));
                }
            }
        }
        Ok(HiggsChart {
            coord_vars,
            rank,
            fields,
            trace_zero,
        })
    }

    pub fn coord_vars(&self) -> &[String] {
        &self.coord_vars
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn trace_zero(&self) -> bool {
        self.trace_zero
    }

    pub fn field(&self, var: &str) -> &RationalFunctionMatrix {
        self.fields
            .get(var)
            .unwrap_or_else(|| panic!("{var} is not a chart coordinate"))
    }

    pub fn domain(&self) -> Domain {
        self.fields.values().next().expect("nonempty chart").domain()
    }

    pub fn ambient_vars(&self) -> &Arc<[String]> {
        self.fields.values().next().expect("nonempty chart").vars()
    }
}

/// Family Γ of matrices satisfying the λ-deformed flatness equation
/// λ(∂_i Γ_j − ∂_j Γ_i) + [Γ_i, Γ_j] = 0, with λ a designated ambient
/// variable. λ = 1 recovers a flat connection, λ = 0 a Higgs chart.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LambdaConnectionChart {
    lambda: String,
    coord_vars: Vec<String>,
    rank: usize,
    matrices: BTreeMap<String, RationalFunctionMatrix>,
}

impl LambdaConnectionChart {
    pub fn new(
        lambda: String,
        coord_vars: Vec<String>,
        matrices: BTreeMap<String, RationalFunctionMatrix>,
    ) -> Result<LambdaConnectionChart, Error> {
        if coord_vars.is_empty() {
            return Err(Error::InvalidInput("no chart coordinates".into()));
        }
        if coord_vars.contains(&lambda) {
            return Err(Error::InvalidInput(
                "deformation variable cannot be a chart coordinate".into(),
            ));
        }
        let first = matrices
            .get(&coord_vars[0])
            .ok_or_else(|| Error::InvalidInput("missing family matrix".into()))?;
        let rank = first.size();
        if !first.vars().iter().any(|x| x == &lambda) {
            return Err(Error::InvalidInput(format!(
                "deformation variable {lambda} missing from the ambient list"
            )));
        }
        if matrices.len() != coord_vars.len() {
            return Err(Error::InvalidInput(
                "need exactly one family matrix per coordinate".into(),
            ));
        }
        for v in &coord_vars {
            let m = matrices
                .get(v)
                .ok_or_else(|| Error::InvalidInput(format!("missing family matrix for {v}")))?;
            if m.size() != rank {
                return Err(Error::InvalidInput("family rank mismatch".into()));
            }
            if !m.vars().iter().any(|x| x == v) {
                return Err(Error::InvalidInput(format!(
                    "coordinate {v} missing from the ambient list"
                )));
            }
        }
        let lam = RationalFunction::variable(first.domain(), first.vars(), &lambda);
        for (i, vi) in coord_vars.iter().enumerate() {
            for vj in &coord_vars[i + 1..] {
                let gi = &matrices[vi];
                let gj = &matrices[vj];
                let skew = gj.derive(vi).sub(&gi.derive(vj));
                let defect = skew.scale(&lam).add(&gi.commutator(gj));
                if !defect.is_zero() {
                    return Err(Error::InvalidInput(format!(
                        "family is not λ-flat in the pair ({vi}, {vj})"
                    )));
                }
            }
        }
        Ok(LambdaConnectionChart {
            lambda,
            coord_vars,
            rank,
            matrices,
        })
    }

    pub fn lambda(&self) -> &str {
        &self.lambda
    }

    pub fn coord_vars(&self) -> &[String] {
        &self.coord_vars
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn matrix(&self, var: &str) -> &RationalFunctionMatrix {
        self.matrices
            .get(var)
            .unwrap_or_else(|| panic!("{var} is not a chart coordinate"))
    }

    pub fn domain(&self) -> Domain {
        self.matrices.values().next().expect("nonempty").domain()
    }

    pub fn ambient_vars(&self) -> &Arc<[String]> {
        self.matrices.values().next().expect("nonempty").vars()
    }
}

/// Fiber of a λ-connection family at a scalar value of λ.
#[derive(Clone, Debug)]
pub enum ReesFiber {
    /// Nonzero λ = c: the matrices Γ_i(c)/c form a flat connection.
    Connection(FlatConnection),
    /// λ = 0: the matrices form a commuting Higgs chart.
    Higgs(HiggsChart),
}

/// Specializes the family at λ = value; the defining equation degenerates
/// to flatness (after dividing by the value) or to commutation.
pub fn rees_specialize(
    chart: &LambdaConnectionChart,
    value: &Scalar,
) -> Result<ReesFiber, Error> {
    let domain = chart.domain();
    let vars = chart.ambient_vars();
    let mut assign = BTreeMap::new();
    assign.insert(
        chart.lambda().to_string(),
        RationalFunction::constant(domain, vars, value.clone()),
    );
    let mut fibers = BTreeMap::new();
    for v in chart.coord_vars() {
        fibers.insert(v.clone(), chart.matrix(v).substitute(&assign)?);
    }
    if value.is_zero() {
        let trace_zero = fibers.values().all(|m| m.trace().is_zero());
        return Ok(ReesFiber::Higgs(HiggsChart::new(
            chart.coord_vars().to_vec(),
            fibers,
            trace_zero,
        )?));
    }
    let inv = value.clone().inv()?;
    let scaled: BTreeMap<String, RationalFunctionMatrix> = fibers
        .into_iter()
        .map(|(k, m)| (k, m.scale_scalar(&inv)))
        .collect();
    let trace_zero = scaled.values().all(|m| m.trace().is_zero());
    Ok(ReesFiber::Connection(FlatConnection::new(
        chart.coord_vars().to_vec(),
        scaled,
        trace_zero,
    )?))
}

/// Coefficients [h_2, ..., h_r] of det(t·I − θ) = t^r + h_2 t^{r−2} + ... +
/// h_r for a trace-free θ.
pub fn hitchin_map(theta: &RationalFunctionMatrix) -> Result<Vec<RationalFunction>, Error> {
    if !theta.trace().is_zero() {
        return Err(Error::InvalidInput(
            "spectral coefficients require a trace-free field".into(),
        ));
    }
    let coeffs = theta.char_poly_coeffs();
    Ok(coeffs[2..].to_vec())
}

/// The quadratic invariant −tr(θ²)/2; for trace-free θ this equals the
/// first spectral coefficient h_2. Undefined in characteristic 2.
pub fn quadratic_hitchin(theta: &RationalFunctionMatrix) -> Result<RationalFunction, Error> {
    if theta.domain().characteristic() == 2 {
        return Err(Error::InvalidInput(
            "quadratic invariant undefined in characteristic 2".into(),
        ));
    }
    let half = match theta.domain() {
        Domain::Q => Scalar::rational(-1, 2),
        d => d.from_i64(2).inv()?.neg(),
    };
    Ok(theta.mul(theta).trace().scale(&half))
}

/// Nilpotence order of a Higgs field, bounded by the rank.
pub fn nilpotence_order(theta: &RationalFunctionMatrix) -> Nilpotency {
    crate::connection::nilpotency_order(theta)
}
