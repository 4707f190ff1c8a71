//! Numerical laboratory for weak average-case analysis.
//!
//! Conic condition numbers, power iteration on random Hermitian matrices and
//! Renegar's condition number for biconic feasibility, together with the
//! truncated-expectation toolkit and seeded Monte Carlo drivers used to
//! probe them empirically.

pub mod cones;
pub mod linalg;
pub mod power;
pub mod quadrature;
pub mod renegar;
pub mod sampling;
pub mod stats;
pub mod weak;
