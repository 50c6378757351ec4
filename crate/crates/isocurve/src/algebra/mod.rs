//! Exact commutative algebra: scalars, sparse multivariate polynomials,
//! reduced rational functions, matrices over them, and an expression parser.

pub mod gcd;
pub mod matrix;
pub mod parse;
pub mod poly;
pub mod ratfun;
pub mod scalar;

pub use matrix::RationalFunctionMatrix;
pub use parse::parse_expression;
pub use poly::{Monomial, MultiPolynomial};
pub use ratfun::RationalFunction;
pub use scalar::{Domain, Scalar};
