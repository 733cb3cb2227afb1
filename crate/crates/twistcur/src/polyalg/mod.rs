//! Exact polynomial linear algebra over the Gaussian rationals, plus the
//! complex floating-point matrices produced by evaluation.
//!
//! Everything symbolic in the crate bottoms out here: coefficients are exact
//! `Q(i)` scalars, polynomials are sparse with a graded-lex term order, and
//! matrices are dense (desk scale: ranks stay in single digits).

mod matrix;
mod poly;
mod rational;

pub use matrix::{
    pinv_fixed_rank, CMatrix, MinorGauge, PolyMatrix, RANK_PROBE_RELATIVE_THRESHOLD,
};
pub use poly::{monomials_up_to, Monomial, Polynomial};
pub use rational::{parse_rational, rational_to_string, GaussianRational};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("dimension mismatch in {op}: {lhs} vs {rhs}")]
    DimMismatch {
        op: &'static str,
        lhs: String,
        rhs: String,
    },
    #[error("variable count mismatch: {0} vs {1}")]
    VarMismatch(usize, usize),
    #[error("empty trial set for generic rank probe")]
    EmptyTrialSet,
    #[error("evaluation point has {got} coordinates, expected {expected}")]
    BadPoint { got: usize, expected: usize },
    #[error("minor order {r} exceeds matrix dimensions {rows}x{cols}")]
    RankOutOfRange { r: usize, rows: usize, cols: usize },
    #[error("rank-{r} pseudoinverse requested but singular value {index} vanishes")]
    RankDeficient { r: usize, index: usize },
    #[error("cannot parse rational literal {0:?}")]
    BadRational(String),
}
