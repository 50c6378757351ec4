//! Derivations on coordinate charts, p-th powers, the p-closedness test for
//! horizontal foliations, leaf restriction, the Schlesinger system, and the
//! Lie–Poisson model of its Hamiltonian structure.
//!
//! A vector field is stored by its coordinate images v(x_i); application to
//! a rational function extends by the Leibniz rule. In characteristic p the
//! p-th power of a derivation is again a derivation (Jacobson), so v^p is
//! determined by p-fold application to the coordinates.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::algebra::{Domain, RationalFunction, RationalFunctionMatrix, Scalar};
#[cfg(test)]
use crate::connection::DEFAULT_DEGREE_CAP;
use crate::error::Error;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VectorField {
    domain: Domain,
    vars: Arc<[String]>,
    /// Nonzero coordinate images only.
    images: BTreeMap<String, RationalFunction>,
}

impl VectorField {
    pub fn new(
        domain: Domain,
        vars: &Arc<[String]>,
        images: BTreeMap<String, RationalFunction>,
    ) -> VectorField {
        let mut clean = BTreeMap::new();
        for (k, v) in images {
            assert!(vars.iter().any(|x| x == &k), "image for unknown variable {k}");
            assert_eq!(v.domain(), domain, "image domain mismatch");
            if !v.is_zero() {
                clean.insert(k, v);
            }
        }
        VectorField {
            domain,
            vars: vars.clone(),
            images: clean,
        }
    }

    pub fn zero(domain: Domain, vars: &Arc<[String]>) -> VectorField {
        VectorField {
            domain,
            vars: vars.clone(),
            images: BTreeMap::new(),
        }
    }

    /// The coordinate derivation ∂_var.
    pub fn coordinate(domain: Domain, vars: &Arc<[String]>, var: &str) -> VectorField {
        let mut images = BTreeMap::new();
        images.insert(var.to_string(), RationalFunction::one(domain, vars));
        Self::new(domain, vars, images)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn vars(&self) -> &Arc<[String]> {
        &self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.images.is_empty()
    }

    /// v(var); zero when no image is stored.
    pub fn image(&self, var: &str) -> RationalFunction {
        self.images
            .get(var)
            .cloned()
            .unwrap_or_else(|| RationalFunction::zero(self.domain, &self.vars))
    }

    pub fn images(&self) -> &BTreeMap<String, RationalFunction> {
        &self.images
    }

    /// v(f) = Σ v(x_i) ∂f/∂x_i.
    pub fn apply(&self, f: &RationalFunction) -> RationalFunction {
        let mut acc = RationalFunction::zero(self.domain, &self.vars);
        for (x, img) in &self.images {
            let df = f.derive(x);
            if !df.is_zero() {
                acc = acc.add(&img.mul(&df));
            }
        }
        acc
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        assert_eq!(*self.vars, *other.vars, "vector field variable mismatch");
        let mut images = self.images.clone();
        for (k, v) in &other.images {
            let entry = images
                .entry(k.clone())
                .or_insert_with(|| RationalFunction::zero(self.domain, &self.vars));
            *entry = entry.add(v);
        }
        Self::new(self.domain, &self.vars, images)
    }

    pub fn neg(&self) -> VectorField {
        VectorField {
            domain: self.domain,
            vars: self.vars.clone(),
            images: self
                .images
                .iter()
                .map(|(k, v)| (k.clone(), v.neg()))
                .collect(),
        }
    }

    pub fn scale(&self, f: &RationalFunction) -> VectorField {
        let images = self
            .images
            .iter()
            .map(|(k, v)| (k.clone(), v.mul(f)))
            .collect();
        Self::new(self.domain, &self.vars, images)
    }

    /// [v, w](x) = v(w(x)) − w(v(x)).
    pub fn bracket(&self, other: &VectorField) -> VectorField {
        assert_eq!(*self.vars, *other.vars, "vector field variable mismatch");
        let mut images = BTreeMap::new();
        for x in self.images.keys().chain(other.images.keys()) {
            let val = self.apply(&other.image(x)).sub(&other.apply(&self.image(x)));
            if !val.is_zero() {
                images.insert(x.clone(), val);
            }
        }
        Self::new(self.domain, &self.vars, images)
    }

    /// v^p by p-fold application to each coordinate, with a degree cap on
    /// the intermediate images. Characteristic must equal p.
    pub fn pth_power(&self, p: u64, cap: usize) -> Result<VectorField, Error> {
        let ch = self.domain.characteristic();
        if ch != p {
            return Err(Error::CharacteristicMismatch {
                expected: p,
                found: ch,
            });
        }
        let mut images = BTreeMap::new();
        for x in self.images.keys() {
            let mut f = self.image(x);
            for _ in 1..p {
                f = self.apply(&f);
                let deg = f.max_degree() as usize;
                if deg > cap {
                    return Err(Error::DegreeCapExceeded { cap, reached: deg });
                }
            }
            if !f.is_zero() {
                images.insert(x.clone(), f);
            }
        }
        Ok(Self::new(self.domain, &self.vars, images))
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.images.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (x, img) in &self.images {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({img})*d/d{x}")?;
        }
        Ok(())
    }
}

/// A foliation transverse to the fibers of (t, y) ↦ t, spanned by lifts
/// D_j = ∂_{t_j} + Σ_i R_{ij} ∂_{y_i}. Ambient variables beyond base and
/// fiber act as constants.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HorizontalFoliation {
    base: Vec<String>,
    fiber: Vec<String>,
    lifts: BTreeMap<String, VectorField>,
    flat: bool,
}

impl HorizontalFoliation {
    /// `r[j][i]` gives D_j(y_i); omitted entries are zero. When `claim_flat`
    /// is set, all brackets [D_i, D_j] are verified to vanish.
    pub fn new(
        domain: Domain,
        vars: &Arc<[String]>,
        base: Vec<String>,
        fiber: Vec<String>,
        r: &BTreeMap<String, BTreeMap<String, RationalFunction>>,
        claim_flat: bool,
    ) -> Result<HorizontalFoliation, Error> {
        for v in base.iter().chain(&fiber) {
            if !vars.iter().any(|x| x == v) {
                return Err(Error::InvalidInput(format!(
                    "variable {v} missing from the ambient list"
                )));
            }
        }
        if base.iter().any(|b| fiber.contains(b)) {
            return Err(Error::InvalidInput("base and fiber overlap".into()));
        }
        let mut lifts = BTreeMap::new();
        for tj in &base {
            let mut images = BTreeMap::new();
            images.insert(tj.clone(), RationalFunction::one(domain, vars));
            if let Some(row) = r.get(tj) {
                for (yi, img) in row {
                    if !fiber.contains(yi) {
                        return Err(Error::InvalidInput(format!(
                            "lift image for {yi}, which is not a fiber variable"
                        )));
                    }
                    images.insert(yi.clone(), img.clone());
                }
            }
            lifts.insert(tj.clone(), VectorField::new(domain, vars, images));
        }
        for key in r.keys() {
            if !base.contains(key) {
                return Err(Error::InvalidInput(format!(
                    "lift given for {key}, which is not a base variable"
                )));
            }
        }
        let fol = HorizontalFoliation {
            base,
            fiber,
            lifts,
            flat: claim_flat,
        };
        if claim_flat {
            for (i, ti) in fol.base.iter().enumerate() {
                for tj in &fol.base[i + 1..] {
                    let br = fol.lifts[ti].bracket(&fol.lifts[tj]);
                    if !br.is_zero() {
                        return Err(Error::InvalidInput(format!(
                            "foliation is not flat: [D_{ti}, D_{tj}] = {br}"
                        )));
                    }
                }
            }
        }
        Ok(fol)
    }

    pub fn base(&self) -> &[String] {
        &self.base
    }

    pub fn fiber(&self) -> &[String] {
        &self.fiber
    }

    pub fn flat(&self) -> bool {
        self.flat
    }

    pub fn lift(&self, tj: &str) -> &VectorField {
        self.lifts
            .get(tj)
            .unwrap_or_else(|| panic!("{tj} is not a base variable"))
    }

    pub fn domain(&self) -> Domain {
        self.lifts.values().next().expect("nonempty base").domain()
    }

    pub fn vars(&self) -> &Arc<[String]> {
        self.lifts.values().next().expect("nonempty base").vars()
    }
}

/// Verdict of the p-closedness test. A nonzero residual D_j^p(y_i) is the
/// certificate that the foliation is not closed under p-th powers.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum PClosedOutcome {
    Closed,
    Certificate {
        base_var: String,
        fiber_var: String,
        residual: RationalFunction,
    },
}

/// Computes D_j^p coordinate by coordinate and reports the first nonzero
/// fiber residual, in declared variable order. Because the lifts are
/// horizontal, D_j^p has zero base components (asserted), so membership in
/// the foliation is equivalent to vanishing. Residuals after the first
/// nonzero one are never computed.
pub fn p_closed_test(
    fol: &HorizontalFoliation,
    p: u64,
    cap: usize,
) -> Result<PClosedOutcome, Error> {
    if !fol.flat() {
        return Err(Error::InvalidInput(
            "p-closedness requires a verified flat foliation".into(),
        ));
    }
    for tj in fol.base() {
        let d = fol.lift(tj);
        for tk in fol.base() {
            assert!(
                iterated_image(d, tk, p, cap)?.is_zero(),
                "D_{tj}^{p} has nonzero base component along {tk}"
            );
        }
        for yi in fol.fiber() {
            let residual = iterated_image(d, yi, p, cap)?;
            if !residual.is_zero() {
                return Ok(PClosedOutcome::Certificate {
                    base_var: tj.clone(),
                    fiber_var: yi.clone(),
                    residual,
                });
            }
        }
    }
    Ok(PClosedOutcome::Closed)
}

/// D^p(x) by p-fold application, with the cap discipline of `pth_power`.
fn iterated_image(d: &VectorField, x: &str, p: u64, cap: usize) -> Result<RationalFunction, Error> {
    let ch = d.domain().characteristic();
    if ch != p {
        return Err(Error::CharacteristicMismatch {
            expected: p,
            found: ch,
        });
    }
    let mut f = d.image(x);
    for _ in 1..p {
        f = d.apply(&f);
        let deg = f.max_degree() as usize;
        if deg > cap {
            return Err(Error::DegreeCapExceeded { cap, reached: deg });
        }
    }
    Ok(f)
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum LeafOutcome {
    NotALeaf {
        base_var: String,
        fiber_var: String,
        residual: RationalFunction,
    },
    Leaf {
        /// D_j^p(y_i) evaluated along the leaf, per (base, fiber) pair;
        /// empty in characteristic zero.
        pcurvature_values: Vec<((String, String), RationalFunction)>,
        all_vanish: bool,
    },
}

/// Checks ∂_{t_j}φ_i = R_{ij}(t, φ) for the candidate leaf y_i = φ_i(t) and,
/// in characteristic p, evaluates every p-curvature residual D_j^p(y_i)
/// along it.
pub fn leaf_restrict(
    fol: &HorizontalFoliation,
    phi: &BTreeMap<String, RationalFunction>,
    cap: usize,
) -> Result<LeafOutcome, Error> {
    let vars = fol.vars();
    for yi in fol.fiber() {
        let img = phi.get(yi).ok_or_else(|| {
            Error::InvalidInput(format!("leaf candidate misses fiber variable {yi}"))
        })?;
        for idx in img.num().occurring_vars() {
            let v = &vars[idx];
            if fol.fiber().contains(v) {
                return Err(Error::InvalidInput(format!(
                    "leaf image for {yi} involves fiber variable {v}"
                )));
            }
        }
        for idx in img.den().occurring_vars() {
            let v = &vars[idx];
            if fol.fiber().contains(v) {
                return Err(Error::InvalidInput(format!(
                    "leaf image for {yi} involves fiber variable {v}"
                )));
            }
        }
    }
    for tj in fol.base() {
        for yi in fol.fiber() {
            let lhs = phi[yi].derive(tj);
            let rhs = fol.lift(tj).image(yi).substitute(phi)?;
            let residual = lhs.sub(&rhs);
            if !residual.is_zero() {
                return Ok(LeafOutcome::NotALeaf {
                    base_var: tj.clone(),
                    fiber_var: yi.clone(),
                    residual,
                });
            }
        }
    }
    let p = fol.domain().characteristic();
    let mut values = Vec::new();
    let mut all_vanish = true;
    if p > 0 {
        for tj in fol.base() {
            let dp = fol.lift(tj).pth_power(p, cap)?;
            for yi in fol.fiber() {
                let along = dp.image(yi).substitute(phi)?;
                all_vanish &= along.is_zero();
                values.push(((tj.clone(), yi.clone()), along));
            }
        }
    }
    Ok(LeafOutcome::Leaf {
        pcurvature_values: values,
        all_vanish,
    })
}

/// Residue-chart model: poles t_1..t_n and n rank-r residue matrices whose
/// entries are independent fiber variables a{i}_{row}{col}.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ResidueChart {
    n: usize,
    rank: usize,
    domain: Domain,
    vars: Arc<[String]>,
    base: Vec<String>,
    entry_names: Vec<Vec<Vec<String>>>,
}

impl ResidueChart {
    pub fn new(domain: Domain, n: usize, rank: usize) -> Result<ResidueChart, Error> {
        if n < 2 || rank < 2 {
            return Err(Error::InvalidInput(
                "residue chart needs n >= 2 poles and rank >= 2".into(),
            ));
        }
        if rank > 9 {
            return Err(Error::InvalidInput("rank capped at 9 in entry naming".into()));
        }
        let base: Vec<String> = (1..=n).map(|j| format!("t{j}")).collect();
        let mut names = Vec::new();
        let mut entry_names = Vec::new();
        for i in 1..=n {
            let mut rows = Vec::new();
            for a in 1..=rank {
                let mut cols = Vec::new();
                for b in 1..=rank {
                    cols.push(format!("a{i}_{a}{b}"));
                }
                rows.push(cols);
            }
            entry_names.push(rows);
        }
        names.extend(base.iter().cloned());
        for m in &entry_names {
            for row in m {
                names.extend(row.iter().cloned());
            }
        }
        let vars: Arc<[String]> = names.into();
        Ok(ResidueChart {
            n,
            rank,
            domain,
            vars,
            base,
            entry_names,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn vars(&self) -> &Arc<[String]> {
        &self.vars
    }

    pub fn base(&self) -> &[String] {
        &self.base
    }

    pub fn fiber(&self) -> Vec<String> {
        self.entry_names
            .iter()
            .flat_map(|m| m.iter().flat_map(|row| row.iter().cloned()))
            .collect()
    }

    /// Name of the (row, col) entry variable of the i-th residue (0-based
    /// indices).
    pub fn entry_name(&self, i: usize, row: usize, col: usize) -> &str {
        &self.entry_names[i][row][col]
    }

    pub fn pole(&self, i: usize) -> RationalFunction {
        RationalFunction::variable(self.domain, &self.vars, &self.base[i])
    }

    /// The i-th residue matrix with indeterminate entries.
    pub fn residue(&self, i: usize) -> RationalFunctionMatrix {
        RationalFunctionMatrix::from_fn(self.rank, |a, b| {
            RationalFunction::variable(self.domain, &self.vars, self.entry_name(i, a, b))
        })
    }
}

/// Images of the Schlesinger lift D_j on the entries of every residue
/// matrix: D_j(A_i) = [A_i, A_j]/(t_i − t_j) for i ≠ j and
/// D_j(A_j) = −Σ_{i≠j} [A_j, A_i]/(t_j − t_i).
fn schlesinger_images(
    chart: &ResidueChart,
    j: usize,
) -> Result<BTreeMap<String, RationalFunction>, Error> {
    let r = chart.rank();
    let aj = chart.residue(j);
    let tj = chart.pole(j);
    let mut images = BTreeMap::new();
    let mut diag = RationalFunctionMatrix::zeros(chart.domain(), chart.vars(), r);
    for i in 0..chart.n() {
        if i == j {
            continue;
        }
        let ai = chart.residue(i);
        let ti = chart.pole(i);
        let comm = ai.commutator(&aj);
        let dt = ti.sub(&tj);
        let m = comm.scale(&dt.inv()?);
        for a in 0..r {
            for b in 0..r {
                images.insert(
                    chart.entry_name(i, a, b).to_string(),
                    m.get(a, b).clone(),
                );
            }
        }
        // [A_j, A_i]/(t_j - t_i) = [A_i, A_j]/(t_i - t_j), accumulated for
        // the diagonal term
        diag = diag.add(&m);
    }
    let diag = diag.neg();
    for a in 0..r {
        for b in 0..r {
            images.insert(
                chart.entry_name(j, a, b).to_string(),
                diag.get(a, b).clone(),
            );
        }
    }
    Ok(images)
}

/// The Schlesinger isomonodromy foliation on a residue chart: n poles, rank
/// r, and its flatness verified symbolically with all entries indeterminate.
pub fn build_schlesinger(
    domain: Domain,
    n: usize,
    rank: usize,
) -> Result<HorizontalFoliation, Error> {
    let chart = ResidueChart::new(domain, n, rank)?;
    build_schlesinger_on(&chart)
}

pub fn build_schlesinger_on(chart: &ResidueChart) -> Result<HorizontalFoliation, Error> {
    let mut r = BTreeMap::new();
    for j in 0..chart.n() {
        r.insert(chart.base()[j].clone(), schlesinger_images(chart, j)?);
    }
    HorizontalFoliation::new(
        chart.domain(),
        chart.vars(),
        chart.base().to_vec(),
        chart.fiber(),
        &r,
        true,
    )
}

/// Hamiltonian vector field of H under the product Lie–Poisson bracket
/// {(A_i)_{ab}, (A_j)_{cd}} = δ_{ij}(δ_{cb}(A_i)_{ad} − δ_{ad}(A_i)_{cb}),
/// i.e. X_H(F) = {H, F}. Pole positions are Casimirs (zero images).
pub fn lie_poisson_field(h: &RationalFunction, chart: &ResidueChart) -> VectorField {
    let r = chart.rank();
    let domain = chart.domain();
    let vars = chart.vars();
    let mut images = BTreeMap::new();
    for j in 0..chart.n() {
        // partial derivatives of H in the entries of A_j
        let mut dh = vec![vec![RationalFunction::zero(domain, vars); r]; r];
        let mut any = false;
        for a in 0..r {
            for b in 0..r {
                let d = h.derive(chart.entry_name(j, a, b));
                any |= !d.is_zero();
                dh[a][b] = d;
            }
        }
        if !any {
            continue;
        }
        for c in 0..r {
            for d in 0..r {
                // {H, (A_j)_{cd}} = Σ_{a,b} ∂H/∂(A_j)_{ab} ·
                //                   (δ_{cb}(A_j)_{ad} − δ_{ad}(A_j)_{cb})
                let mut acc = RationalFunction::zero(domain, vars);
                for a in 0..r {
                    let e_ad = RationalFunction::variable(domain, vars, chart.entry_name(j, a, d));
                    acc = acc.add(&dh[a][c].mul(&e_ad));
                }
                for b in 0..r {
                    let e_cb = RationalFunction::variable(domain, vars, chart.entry_name(j, c, b));
                    acc = acc.sub(&dh[d][b].mul(&e_cb));
                }
                if !acc.is_zero() {
                    images.insert(chart.entry_name(j, c, d).to_string(), acc);
                }
            }
        }
    }
    VectorField::new(domain, vars, images)
}

/// The residue Hamiltonian H_j = Σ_{i≠j} tr(A_i A_j)/(t_j − t_i).
pub fn schlesinger_hamiltonian(chart: &ResidueChart, j: usize) -> Result<RationalFunction, Error> {
    let aj = chart.residue(j);
    let tj = chart.pole(j);
    let mut h = RationalFunction::zero(chart.domain(), chart.vars());
    for i in 0..chart.n() {
        if i == j {
            continue;
        }
        let num = chart.residue(i).mul(&aj).trace();
        let dt = tj.sub(&chart.pole(i));
        h = h.add(&num.mul(&dt.inv()?));
    }
    Ok(h)
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ChenOutcome {
    /// Every Hamiltonian field equals c times the vertical part of the
    /// corresponding Schlesinger lift, with one global constant c.
    Match { c: Scalar },
    /// Both families of fields vanish identically (degenerate chart).
    AllZero,
    Mismatch {
        base_var: String,
        fiber_var: String,
        hamiltonian_image: RationalFunction,
        lift_image: RationalFunction,
    },
}

/// Compares the Lie–Poisson field of H_j with the vertical part of D_j for
/// every j, fitting the single proportionality constant.
pub fn chen_check(chart: &ResidueChart) -> Result<ChenOutcome, Error> {
    let fol = build_schlesinger_on(chart)?;
    let fiber = chart.fiber();
    let mut c: Option<Scalar> = None;
    for j in 0..chart.n() {
        let h = schlesinger_hamiltonian(chart, j)?;
        let xh = lie_poisson_field(&h, chart);
        let dj = fol.lift(&chart.base()[j]);
        for y in &fiber {
            let lhs = xh.image(y);
            let rhs = dj.image(y);
            let mismatch = |l: &RationalFunction, r: &RationalFunction| ChenOutcome::Mismatch {
                base_var: chart.base()[j].clone(),
                fiber_var: y.clone(),
                hamiltonian_image: l.clone(),
                lift_image: r.clone(),
            };
            match (lhs.is_zero(), rhs.is_zero()) {
                (true, true) => continue,
                (true, false) | (false, true) => return Ok(mismatch(&lhs, &rhs)),
                (false, false) => {
                    let ratio = lhs.div(&rhs)?;
                    let Some(k) = ratio.as_constant() else {
                        return Ok(mismatch(&lhs, &rhs));
                    };
                    match &c {
                        None => c = Some(k),
                        Some(c0) if *c0 == k => {}
                        Some(_) => return Ok(mismatch(&lhs, &rhs)),
                    }
                }
            }
        }
    }
    Ok(match c {
        Some(c) => ChenOutcome::Match { c },
        None => ChenOutcome::AllZero,
    })
}
