//! Typed errors for data-dependent failures.
//!
//! Programming errors (mixing coefficient domains, mismatched variable
//! orders, non-square matrices) panic instead; the job runner catches the
//! unwind at the job boundary and reports an invariant violation.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("p^2 overflows u64 for p = {0}")]
    ModulusOverflow(u64),

    #[error("division by zero")]
    DivisionByZero,

    #[error("{0} is not a unit modulo {1}")]
    NonUnit(u64, u64),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("denominator vanishes modulo {0}")]
    BadReduction(u64),

    #[error("characteristic mismatch: expected {expected}, found {found}")]
    CharacteristicMismatch { expected: u64, found: u64 },

    #[error("degree cap {cap} exceeded (reached {reached})")]
    DegreeCapExceeded { cap: usize, reached: usize },

    #[error("nilpotence bound violated: {0}")]
    NilpotenceBoundViolated(String),

    #[error("substitution hits a pole of {0}")]
    SubstitutionPole(String),

    #[error("floating-point precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("orbit search exceeded {0} stored points")]
    OrbitCapExceeded(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
