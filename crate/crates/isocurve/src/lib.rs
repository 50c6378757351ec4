//! Exact-arithmetic toolkit for flat connections in positive characteristic:
//! p-curvature and its nilpotence, Higgs data and the Hitchin map, inverse
//! Cartier charts with change-of-lift gluing, horizontal foliations of
//! isomonodromy type, and character-variety dynamics on the Markov cubic.
//!
//! All core computations run over exact coefficient domains (`F_p`, `Z/p^2`,
//! `Q`) with sparse multivariate rational functions; floating point enters
//! only in rigorous-enclosure form for archimedean embeddings of number
//! rings.

pub mod algebra;
pub mod betti;
pub mod cartier;
pub mod connection;
pub mod error;
pub mod foliation;
pub mod higgs;
pub mod job;

pub use error::Error;
