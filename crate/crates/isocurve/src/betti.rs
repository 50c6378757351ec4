//! Trace-coordinate dynamics on the Fricke cubic x^2 + y^2 + z^2 - xyz - 2.
//!
//! Points live in an order Z[a]/(m) of a number ring with exact `BigInt`
//! arithmetic; the move set is the six coordinate permutations together with
//! the Vieta involution (x, y, z) -> (x, y, xy - z), all of which preserve
//! the cubic. `orbit_search` closes a point under the moves and detects
//! finiteness by pairing exact dedup with rigorous archimedean bounds.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, Sign};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use crate::algebra::{gcd::uni_gcd, MultiPolynomial, Scalar};
use crate::error::Error;

/// Largest integer magnitude whose f64 image is exact.
const EXACT_DOUBLE: i64 = 1 << 53;

/// The order Z[a]/(m(a)) for a monic squarefree integer polynomial m.
///
/// Every `RingElement` handed out by this type is reduced mod m, so elements
/// are equal iff their coefficient vectors are equal.
#[derive(Debug, PartialEq, Eq)]
pub struct NumberRing {
    var: String,
    /// Little-endian coefficients of m; monic, degree >= 1.
    minpoly: Vec<BigInt>,
}

/// Element of a [`NumberRing`]: little-endian integer coefficients in the
/// generator, trimmed, of degree < deg m. Construct through ring methods
/// only; mixing elements across rings is a programming error.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RingElement(Vec<BigInt>);

/// Coefficientwise from the highest degree down, absent coefficients zero;
/// on rational integers this is the numeric order.
impl Ord for RingElement {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let zero = BigInt::zero();
        for k in (0..self.0.len().max(other.0.len())).rev() {
            let a = self.0.get(k).unwrap_or(&zero);
            let b = other.0.get(k).unwrap_or(&zero);
            match a.cmp(b) {
                std::cmp::Ordering::Equal => continue,
                unequal => return unequal,
            }
        }
        std::cmp::Ordering::Equal
    }
}

impl PartialOrd for RingElement {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl NumberRing {
    /// Monic, degree >= 1, squarefree (so the roots of m are simple and the
    /// archimedean embeddings can be isolated).
    pub fn new(var: &str, mut coeffs: Vec<BigInt>) -> Result<NumberRing, Error> {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        if coeffs.len() < 2 {
            return Err(Error::InvalidInput(
                "minimal polynomial must have degree at least 1".into(),
            ));
        }
        if !coeffs.last().unwrap().is_one() {
            return Err(Error::InvalidInput("minimal polynomial must be monic".into()));
        }
        let m: Vec<Scalar> = coeffs.iter().map(|c| Scalar::Q(BigRational::from(c.clone()))).collect();
        let dm: Vec<Scalar> = m
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.mul(&Scalar::rational(k as i64, 1)))
            .collect();
        if uni_gcd(m, dm).len() != 1 {
            return Err(Error::InvalidInput(
                "minimal polynomial must be squarefree".into(),
            ));
        }
        Ok(NumberRing { var: var.to_string(), minpoly: coeffs })
    }

    /// The rational integers, presented as Z[a]/(a).
    pub fn integers() -> NumberRing {
        NumberRing { var: "a".into(), minpoly: vec![BigInt::zero(), BigInt::one()] }
    }

    /// Parses m from a univariate integer polynomial in `var`.
    pub fn from_poly(m: &MultiPolynomial, var: &str) -> Result<NumberRing, Error> {
        Self::new(var, integer_coeffs(m, var)?)
    }

    pub fn degree(&self) -> usize {
        self.minpoly.len() - 1
    }

    pub fn var(&self) -> &str {
        &self.var
    }

    pub fn minpoly(&self) -> &[BigInt] {
        &self.minpoly
    }

    pub fn zero(&self) -> RingElement {
        RingElement(Vec::new())
    }

    pub fn from_i64(&self, n: i64) -> RingElement {
        self.reduce(vec![BigInt::from(n)])
    }

    /// The class of the generator a.
    pub fn generator(&self) -> RingElement {
        self.reduce(vec![BigInt::zero(), BigInt::one()])
    }

    /// Element from little-endian integer coefficients in a, reduced mod m.
    pub fn element(&self, coeffs: Vec<BigInt>) -> RingElement {
        self.reduce(coeffs)
    }

    /// Element from a univariate integer polynomial in this ring's variable.
    pub fn element_from_poly(&self, f: &MultiPolynomial) -> Result<RingElement, Error> {
        Ok(self.reduce(integer_coeffs(f, &self.var)?))
    }

    pub fn add(&self, a: &RingElement, b: &RingElement) -> RingElement {
        let mut v = vec![BigInt::zero(); a.0.len().max(b.0.len())];
        for (i, c) in a.0.iter().enumerate() {
            v[i] += c;
        }
        for (i, c) in b.0.iter().enumerate() {
            v[i] += c;
        }
        self.reduce(v)
    }

    pub fn neg(&self, a: &RingElement) -> RingElement {
        RingElement(a.0.iter().map(|c| -c).collect())
    }

    pub fn sub(&self, a: &RingElement, b: &RingElement) -> RingElement {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &RingElement, b: &RingElement) -> RingElement {
        if a.0.is_empty() || b.0.is_empty() {
            return self.zero();
        }
        let mut v = vec![BigInt::zero(); a.0.len() + b.0.len() - 1];
        for (i, ca) in a.0.iter().enumerate() {
            for (j, cb) in b.0.iter().enumerate() {
                v[i + j] += ca * cb;
            }
        }
        self.reduce(v)
    }

    /// Reduction mod the monic m: repeatedly rewrites a^k for k >= deg m.
    fn reduce(&self, mut v: Vec<BigInt>) -> RingElement {
        let d = self.degree();
        while v.len() > d {
            let k = v.len() - 1;
            let c = v.pop().unwrap();
            if !c.is_zero() {
                let shift = k - d;
                for (i, mi) in self.minpoly[..d].iter().enumerate() {
                    let t = mi * &c;
                    v[shift + i] -= t;
                }
            }
        }
        while v.last().is_some_and(|c| c.is_zero()) {
            v.pop();
        }
        RingElement(v)
    }

    /// Renders an element as an expression in the generator, e.g. `2*a-3`.
    pub fn render(&self, e: &RingElement) -> String {
        if e.0.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (k, c) in e.0.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if s.is_empty() {
                if c.sign() == Sign::Minus {
                    s.push('-');
                }
            } else {
                s.push(if c.sign() == Sign::Minus { '-' } else { '+' });
            }
            let mag = c.abs();
            if k == 0 {
                s += &mag.to_string();
            } else {
                if !mag.is_one() {
                    s += &mag.to_string();
                    s.push('*');
                }
                s += &self.var;
                if k > 1 {
                    s += &format!("^{k}");
                }
            }
        }
        s
    }
}

/// Converts a univariate polynomial over Q with integral coefficients into a
/// little-endian `BigInt` list.
fn integer_coeffs(f: &MultiPolynomial, var: &str) -> Result<Vec<BigInt>, Error> {
    let coeffs = f.to_univariate(var).ok_or_else(|| {
        Error::InvalidInput(format!("expected a polynomial in {var} alone"))
    })?;
    coeffs
        .into_iter()
        .map(|c| match c {
            Scalar::Q(q) if q.is_integer() => Ok(q.to_integer()),
            Scalar::Q(q) => Err(Error::InvalidInput(format!(
                "coefficient {q} is not an integer"
            ))),
            _ => Err(Error::DomainMismatch(
                "number-ring data must have rational coefficients".into(),
            )),
        })
        .collect()
}

/// A point of the relative character variety in trace coordinates: three
/// ring elements (x, y, z).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NumberRingPoint {
    ring: Arc<NumberRing>,
    coords: [RingElement; 3],
}

impl NumberRingPoint {
    pub fn new(ring: Arc<NumberRing>, coords: [RingElement; 3]) -> NumberRingPoint {
        for c in &coords {
            assert!(c.0.len() <= ring.degree(), "coordinate not reduced in this ring");
        }
        NumberRingPoint { ring, coords }
    }

    /// Integer point over Z presented as Z[a]/(a).
    pub fn from_integers(x: i64, y: i64, z: i64) -> NumberRingPoint {
        let ring = Arc::new(NumberRing::integers());
        let coords = [ring.from_i64(x), ring.from_i64(y), ring.from_i64(z)];
        NumberRingPoint { ring, coords }
    }

    pub fn ring(&self) -> &Arc<NumberRing> {
        &self.ring
    }

    pub fn coords(&self) -> &[RingElement; 3] {
        &self.coords
    }

    /// The Fricke value x^2 + y^2 + z^2 - xyz - 2.
    pub fn kappa(&self) -> RingElement {
        let r = &self.ring;
        let [x, y, z] = &self.coords;
        let mut acc = r.mul(x, x);
        acc = r.add(&acc, &r.mul(y, y));
        acc = r.add(&acc, &r.mul(z, z));
        let xyz = r.mul(&r.mul(x, y), z);
        acc = r.sub(&acc, &xyz);
        r.sub(&acc, &r.from_i64(2))
    }
}

impl fmt::Display for NumberRingPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            self.ring.render(&self.coords[0]),
            self.ring.render(&self.coords[1]),
            self.ring.render(&self.coords[2])
        )
    }
}

/// Level set of the Fricke cubic: all points with a fixed boundary trace
/// invariant k = kappa(x, y, z).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrickeSurface {
    ring: Arc<NumberRing>,
    k: RingElement,
}

impl FrickeSurface {
    /// The level surface through a given point.
    pub fn through(pt: &NumberRingPoint) -> FrickeSurface {
        FrickeSurface { ring: pt.ring.clone(), k: pt.kappa() }
    }

    pub fn level(&self) -> &RingElement {
        &self.k
    }

    pub fn contains(&self, pt: &NumberRingPoint) -> bool {
        *pt.ring == *self.ring && pt.kappa() == self.k
    }
}

/// Generator of the mapping-class action in trace coordinates: one of the
/// six coordinate permutations, or the Vieta involution on the last slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MCGMove {
    /// `coords -> [coords[p[0]], coords[p[1]], coords[p[2]]]`.
    Permute([usize; 3]),
    /// `(x, y, z) -> (x, y, xy - z)`.
    Vieta,
}

impl MCGMove {
    /// The full move set in a fixed order: permutations lexicographically,
    /// then Vieta.
    pub fn all() -> [MCGMove; 7] {
        [
            MCGMove::Permute([0, 1, 2]),
            MCGMove::Permute([0, 2, 1]),
            MCGMove::Permute([1, 0, 2]),
            MCGMove::Permute([1, 2, 0]),
            MCGMove::Permute([2, 0, 1]),
            MCGMove::Permute([2, 1, 0]),
            MCGMove::Vieta,
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            MCGMove::Permute([0, 1, 2]) => "xyz",
            MCGMove::Permute([0, 2, 1]) => "xzy",
            MCGMove::Permute([1, 0, 2]) => "yxz",
            MCGMove::Permute([1, 2, 0]) => "yzx",
            MCGMove::Permute([2, 0, 1]) => "zxy",
            MCGMove::Permute([2, 1, 0]) => "zyx",
            MCGMove::Vieta => "vieta",
            MCGMove::Permute(_) => panic!("not a permutation of 0..3"),
        }
    }
}

/// Applies one move exactly; the Fricke invariant is recomputed and asserted
/// unchanged.
pub fn apply_move(pt: &NumberRingPoint, mv: MCGMove) -> NumberRingPoint {
    let before = pt.kappa();
    let ring = pt.ring.clone();
    let coords = match mv {
        MCGMove::Permute(p) => {
            let mut sorted = p;
            sorted.sort_unstable();
            assert!(sorted == [0, 1, 2], "not a permutation of 0..3");
            [
                pt.coords[p[0]].clone(),
                pt.coords[p[1]].clone(),
                pt.coords[p[2]].clone(),
            ]
        }
        MCGMove::Vieta => {
            let [x, y, z] = &pt.coords;
            let xy = ring.mul(x, y);
            [x.clone(), y.clone(), ring.sub(&xy, z)]
        }
    };
    let image = NumberRingPoint { ring, coords };
    assert!(image.kappa() == before, "move failed to preserve the Fricke invariant");
    image
}

/// Result of closing a point under the move set.
#[derive(Debug)]
pub enum OrbitOutcome {
    /// Closure stabilized with every embedding bound <= B. `orbit` is sorted
    /// by coordinate tuple; `moves[i][k]` is the orbit index of
    /// `MCGMove::all()[k]` applied to `orbit[i]`.
    Finite { orbit: Vec<NumberRingPoint>, moves: Vec<Vec<usize>> },
    /// First point encountered whose rigorous embedding bound exceeds B.
    Exceeded { witness: NumberRingPoint },
    /// The node cap was hit before the closure resolved.
    Capped,
}

/// Breadth-first closure under all moves with exact deduplication.
///
/// A point enters the frontier only after its embedding sup-norm is checked
/// against `height_bound`, so `Exceeded` reports the first escape in BFS
/// order. `Capped` is returned when more than `node_cap` points would have
/// to be stored.
pub fn orbit_search(
    pt: &NumberRingPoint,
    height_bound: f64,
    node_cap: usize,
) -> Result<OrbitOutcome, Error> {
    assert!(height_bound > 0.0, "height bound must be positive");
    assert!(node_cap > 0, "node cap must be positive");

    if embedding_sup_norm(pt)? > height_bound {
        return Ok(OrbitOutcome::Exceeded { witness: pt.clone() });
    }
    let all_moves = MCGMove::all();
    let mut index: BTreeMap<[RingElement; 3], usize> = BTreeMap::new();
    let mut members: Vec<NumberRingPoint> = Vec::new();
    index.insert(pt.coords.clone(), 0);
    members.push(pt.clone());

    let mut head = 0;
    while head < members.len() {
        let current = members[head].clone();
        head += 1;
        for &mv in &all_moves {
            let image = apply_move(&current, mv);
            if index.contains_key(&image.coords) {
                continue;
            }
            if embedding_sup_norm(&image)? > height_bound {
                return Ok(OrbitOutcome::Exceeded { witness: image });
            }
            if members.len() == node_cap {
                return Ok(OrbitOutcome::Capped);
            }
            index.insert(image.coords.clone(), members.len());
            members.push(image);
        }
    }

    members.sort_by(|a, b| a.coords.cmp(&b.coords));
    let rank: BTreeMap<[RingElement; 3], usize> = members
        .iter()
        .enumerate()
        .map(|(i, m)| (m.coords.clone(), i))
        .collect();
    let moves = members
        .iter()
        .map(|m| {
            all_moves
                .iter()
                .map(|&mv| {
                    *rank
                        .get(&apply_move(m, mv).coords)
                        .expect("finite orbit must be closed under every move")
                })
                .collect()
        })
        .collect();

    // Discreteness certificate: reduced coordinate vectors with all
    // embeddings <= B form a lattice box of this cardinality.
    if let Some(floor) = BigInt::from_f64(height_bound.floor()) {
        let side = BigInt::from(2) * floor + BigInt::one();
        let cap = side.pow(3 * pt.ring.degree() as u32);
        assert!(
            BigInt::from(members.len()) <= cap,
            "orbit cardinality exceeds the lattice bound"
        );
    }
    Ok(OrbitOutcome::Finite { orbit: members, moves })
}

/// Rigorous upper bound U on |s(c)| over every coordinate c of `pt` and
/// every archimedean embedding s, within a factor 1.01 of the true maximum.
///
/// Over Z[a]/(a - r) the value is exact integer arithmetic. Otherwise the
/// roots of m are isolated in disjoint a-posteriori disks and each
/// coordinate is enclosed by complex disk arithmetic; failure to separate
/// the roots or to represent the data in exact doubles reports precision
/// exhaustion.
pub fn embedding_sup_norm(pt: &NumberRingPoint) -> Result<f64, Error> {
    let ring = &pt.ring;
    if ring.degree() == 1 {
        let mut best = BigInt::zero();
        for c in &pt.coords {
            if let Some(v) = c.0.first() {
                best = best.max(v.abs());
            }
        }
        let u = best
            .to_f64()
            .filter(|f| f.is_finite())
            .ok_or_else(|| Error::PrecisionExhausted("coordinate exceeds the double range".into()))?;
        return Ok(if best <= BigInt::from(EXACT_DOUBLE) {
            u
        } else {
            // f64 rounding may land below the true value; nudge up one ulp.
            u * (1.0 + 4.0 * f64::EPSILON)
        });
    }

    let disks = isolate_roots(&ring.minpoly)?;
    let mut sup = 0.0f64;
    for c in &pt.coords {
        let coeffs = exact_doubles(&c.0)?;
        for disk in &disks {
            sup = sup.max(enclose_abs(&coeffs, disk));
        }
    }
    Ok(sup)
}

/// Complex disk certified to contain exactly one root of the minimal
/// polynomial.
struct RootDisk {
    center: Complex64,
    radius: f64,
}

fn exact_doubles(coeffs: &[BigInt]) -> Result<Vec<f64>, Error> {
    let limit = BigInt::from(EXACT_DOUBLE);
    coeffs
        .iter()
        .map(|c| {
            if c.abs() > limit {
                Err(Error::PrecisionExhausted(
                    "coefficient exceeds the exact double range".into(),
                ))
            } else {
                Ok(c.to_f64().unwrap())
            }
        })
        .collect()
}

/// Horner evaluation together with a running bound on the f64 rounding
/// error of the computed value.
fn horner_with_bound(coeffs: &[f64], z: Complex64) -> (Complex64, f64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut mag = 0.0f64;
    let az = z.norm();
    for &a in coeffs.iter().rev() {
        v = v * z + a;
        mag = mag * az + a.abs();
    }
    (v, mag * 8.0 * coeffs.len() as f64 * f64::EPSILON)
}

/// Durand-Kerner iteration followed by Weierstrass a-posteriori inclusion
/// disks of radius d*|p(z_i)| / prod |z_i - z_j|; the disks must be pairwise
/// disjoint, so each contains exactly one simple root.
fn isolate_roots(minpoly: &[BigInt]) -> Result<Vec<RootDisk>, Error> {
    let coeffs = exact_doubles(minpoly)?;
    let d = coeffs.len() - 1;
    let scale = 1.0 + coeffs[..d].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let dir = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| {
            let w = dir.powu(k as u32 + 1);
            w * (scale / w.norm())
        })
        .collect();

    for _ in 0..400 {
        let mut worst = 0.0f64;
        for i in 0..d {
            let (num, _) = horner_with_bound(&coeffs, z[i]);
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..d {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() == 0.0 {
                return Err(Error::PrecisionExhausted(
                    "root iterates collided".into(),
                ));
            }
            let step = num / den;
            z[i] -= step;
            if !z[i].is_finite() {
                return Err(Error::PrecisionExhausted("root iteration diverged".into()));
            }
            worst = worst.max(step.norm());
        }
        if worst <= 1e-14 * scale {
            break;
        }
    }

    let mut disks = Vec::with_capacity(d);
    for i in 0..d {
        let (val, err) = horner_with_bound(&coeffs, z[i]);
        let mut den = 1.0f64;
        for j in 0..d {
            if j != i {
                den *= (z[i] - z[j]).norm();
            }
        }
        den *= 1.0 - 1e-12;
        if den <= 0.0 {
            return Err(Error::PrecisionExhausted("root iterates collided".into()));
        }
        let radius = d as f64 * (val.norm() + err) / den * (1.0 + 1e-9);
        disks.push(RootDisk { center: z[i], radius });
    }
    for i in 0..d {
        for j in i + 1..d {
            let gap = (disks[i].center - disks[j].center).norm();
            if gap <= (disks[i].radius + disks[j].radius) * (1.0 + 1e-12) {
                return Err(Error::PrecisionExhausted(
                    "root disks overlap at double precision".into(),
                ));
            }
        }
    }
    Ok(disks)
}

/// Upper bound on |f| over a disk: Horner in complex disk arithmetic with a
/// rounding cushion.
fn enclose_abs(coeffs: &[f64], disk: &RootDisk) -> f64 {
    let mut vc = Complex64::new(0.0, 0.0);
    let mut vr = 0.0f64;
    let mut mag = 0.0f64;
    let ac = disk.center.norm();
    let outer = ac + disk.radius;
    for &a in coeffs.iter().rev() {
        vr = vc.norm() * disk.radius + ac * vr + vr * disk.radius;
        vc = vc * disk.center + a;
        mag = mag * outer + a.abs();
    }
    let slop = mag * 8.0 * (coeffs.len() as f64 + 1.0) * f64::EPSILON;
    (vc.norm() + vr + slop) * (1.0 + 1e-12)
}
