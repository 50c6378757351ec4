//! Square matrices over the rational-function field, with the exact linear
//! algebra the chart computations need: products, commutators, entrywise
//! derivation and substitution, determinants, and characteristic-polynomial
//! coefficients via principal minors.
//!
//! Characteristic coefficients are assembled from principal minors rather
//! than trace recursions, which would divide by small integers and fail in
//! small characteristic.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::algebra::ratfun::RationalFunction;
use crate::algebra::scalar::{Domain, Scalar};
use crate::error::Error;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RationalFunctionMatrix {
    size: usize,
    /// Row-major entries, length size * size.
    entries: Vec<RationalFunction>,
}

impl RationalFunctionMatrix {
    pub fn new(size: usize, entries: Vec<RationalFunction>) -> RationalFunctionMatrix {
        assert!(size > 0, "empty matrix");
        assert_eq!(entries.len(), size * size, "entry count mismatch");
        let d = entries[0].domain();
        let vs = entries[0].vars().clone();
        for e in &entries {
            assert_eq!(e.domain(), d, "matrix entry domain mismatch");
            assert_eq!(**e.vars(), *vs, "matrix entry variable mismatch");
        }
        RationalFunctionMatrix { size, entries }
    }

    pub fn from_fn(
        size: usize,
        mut f: impl FnMut(usize, usize) -> RationalFunction,
    ) -> RationalFunctionMatrix {
        let mut entries = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                entries.push(f(i, j));
            }
        }
        Self::new(size, entries)
    }

    pub fn zeros(domain: Domain, vars: &Arc<[String]>, size: usize) -> RationalFunctionMatrix {
        Self::from_fn(size, |_, _| RationalFunction::zero(domain, vars))
    }

    pub fn identity(domain: Domain, vars: &Arc<[String]>, size: usize) -> RationalFunctionMatrix {
        Self::from_fn(size, |i, j| {
            if i == j {
                RationalFunction::one(domain, vars)
            } else {
                RationalFunction::zero(domain, vars)
            }
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn domain(&self) -> Domain {
        self.entries[0].domain()
    }

    pub fn vars(&self) -> &Arc<[String]> {
        self.entries[0].vars()
    }

    pub fn get(&self, i: usize, j: usize) -> &RationalFunction {
        &self.entries[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: RationalFunction) {
        assert_eq!(v.domain(), self.domain(), "matrix entry domain mismatch");
        self.entries[i * self.size + j] = v;
    }

    pub fn entries(&self) -> &[RationalFunction] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(RationalFunction::is_zero)
    }

    fn check_same_size(&self, other: &RationalFunctionMatrix) {
        assert_eq!(self.size, other.size, "matrix size mismatch");
    }

    pub fn add(&self, other: &RationalFunctionMatrix) -> RationalFunctionMatrix {
        self.check_same_size(other);
        Self::from_fn(self.size, |i, j| self.get(i, j).add(other.get(i, j)))
    }

    pub fn sub(&self, other: &RationalFunctionMatrix) -> RationalFunctionMatrix {
        self.check_same_size(other);
        Self::from_fn(self.size, |i, j| self.get(i, j).sub(other.get(i, j)))
    }

    pub fn neg(&self) -> RationalFunctionMatrix {
        Self::from_fn(self.size, |i, j| self.get(i, j).neg())
    }

    pub fn mul(&self, other: &RationalFunctionMatrix) -> RationalFunctionMatrix {
        self.check_same_size(other);
        Self::from_fn(self.size, |i, j| {
            let mut acc = RationalFunction::zero(self.domain(), self.vars());
            for k in 0..self.size {
                acc = acc.add(&self.get(i, k).mul(other.get(k, j)));
            }
            acc
        })
    }

    pub fn scale(&self, f: &RationalFunction) -> RationalFunctionMatrix {
        Self::from_fn(self.size, |i, j| self.get(i, j).mul(f))
    }

    pub fn scale_scalar(&self, c: &Scalar) -> RationalFunctionMatrix {
        Self::from_fn(self.size, |i, j| self.get(i, j).scale(c))
    }

    pub fn pow(&self, e: u32) -> RationalFunctionMatrix {
        let mut acc = Self::identity(self.domain(), self.vars(), self.size);
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

    pub fn commutator(&self, other: &RationalFunctionMatrix) -> RationalFunctionMatrix {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn transpose(&self) -> RationalFunctionMatrix {
        Self::from_fn(self.size, |i, j| self.get(j, i).clone())
    }

    pub fn trace(&self) -> RationalFunction {
        let mut acc = RationalFunction::zero(self.domain(), self.vars());
        for i in 0..self.size {
            acc = acc.add(self.get(i, i));
        }
        acc
    }

    pub fn derive(&self, var: &str) -> RationalFunctionMatrix {
        Self::from_fn(self.size, |i, j| self.get(i, j).derive(var))
    }

    pub fn substitute(
        &self,
        assignment: &BTreeMap<String, RationalFunction>,
    ) -> Result<RationalFunctionMatrix, Error> {
        let mut entries = Vec::with_capacity(self.size * self.size);
        for e in &self.entries {
            entries.push(e.substitute(assignment)?);
        }
        Ok(Self::new(self.size, entries))
    }

    /// Entrywise re-embedding over a longer variable list.
    pub fn embed(&self, new_vars: &Arc<[String]>) -> RationalFunctionMatrix {
        RationalFunctionMatrix {
            size: self.size,
            entries: self.entries.iter().map(|e| e.embed(new_vars)).collect(),
        }
    }

    pub fn reduce_mod_p(&self, p: u64) -> Result<RationalFunctionMatrix, Error> {
        let mut entries = Vec::with_capacity(self.size * self.size);
        for e in &self.entries {
            entries.push(e.reduce_mod_p(p)?);
        }
        Ok(Self::new(self.size, entries))
    }

    pub fn zp2_to_fp(&self) -> Result<RationalFunctionMatrix, Error> {
        let mut entries = Vec::with_capacity(self.size * self.size);
        for e in &self.entries {
            entries.push(e.zp2_to_fp()?);
        }
        Ok(Self::new(self.size, entries))
    }

    /// Determinant by Laplace expansion along the first row.
    pub fn det(&self) -> RationalFunction {
        det_rows(self, &(0..self.size).collect::<Vec<_>>())
    }

    /// Characteristic coefficients c_0..c_r with
    /// det(t*I - M) = sum_k c_k t^(r-k), via c_k = (-1)^k * (sum of k-by-k
    /// principal minors). Stays exact in any characteristic.
    pub fn char_poly_coeffs(&self) -> Vec<RationalFunction> {
        let r = self.size;
        assert!(r <= 12, "principal-minor enumeration capped at size 12");
        let mut coeffs = vec![RationalFunction::zero(self.domain(), self.vars()); r + 1];
        coeffs[0] = RationalFunction::one(self.domain(), self.vars());
        for mask in 1u32..(1 << r) {
            let subset: Vec<usize> = (0..r).filter(|i| mask & (1 << i) != 0).collect();
            let k = subset.len();
            let minor = det_rows(self, &subset);
            coeffs[k] = coeffs[k].add(&minor);
        }
        for (k, c) in coeffs.iter_mut().enumerate() {
            if k % 2 == 1 {
                *c = c.neg();
            }
        }
        coeffs
    }

    /// Smallest e with M^e = 0, bounded by the size (Cayley-Hamilton);
    /// `None` when M is not nilpotent.
    pub fn nilpotency_order(&self) -> Option<u32> {
        let mut power = Self::identity(self.domain(), self.vars(), self.size);
        for e in 1..=self.size as u32 {
            power = power.mul(self);
            if power.is_zero() {
                return Some(e);
            }
        }
        None
    }

    /// Entries rendered to canonical expression strings, row by row.
    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.get(i, j).to_string()).collect())
            .collect()
    }
}

/// Determinant of the square submatrix on the given row/column index set.
fn det_rows(m: &RationalFunctionMatrix, idx: &[usize]) -> RationalFunction {
    det_cols(m, idx, idx)
}

fn det_cols(m: &RationalFunctionMatrix, rows: &[usize], cols: &[usize]) -> RationalFunction {
    debug_assert_eq!(rows.len(), cols.len());
    match rows.len() {
        0 => RationalFunction::one(m.domain(), m.vars()),
        1 => m.get(rows[0], cols[0]).clone(),
        _ => {
            let row = rows[0];
            let mut acc = RationalFunction::zero(m.domain(), m.vars());
            for (pos, &col) in cols.iter().enumerate() {
                let e = m.get(row, col);
                if e.is_zero() {
                    continue;
                }
                let sub_cols: Vec<usize> = cols
                    .iter()
                    .copied()
                    .filter(|&c| c != col)
                    .collect();
                let minor = det_cols(m, &rows[1..], &sub_cols);
                let term = e.mul(&minor);
                if pos % 2 == 0 {
                    acc = acc.add(&term);
                } else {
                    acc = acc.sub(&term);
                }
            }
            acc
        }
    }
}

impl fmt::Display for RationalFunctionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.size {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.size {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
        }
        write!(f, "]")
    }
}
