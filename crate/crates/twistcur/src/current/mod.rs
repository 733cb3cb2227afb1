//! Numeric side of the algebra: smooth fields, gauges and cutoffs,
//! pseudoinverse assembly, and the regularized pairings that evaluate
//! residue currents against test forms.

mod cutoff;
mod field;
mod gauge;
mod pairing;
mod quad;
mod residue;
mod sigma;
mod testform;

use num::complex::Complex64;
use thiserror::Error;

use crate::cochain::CochainError;
use crate::polyalg::PolyError;

#[derive(Debug, Error)]
pub enum CurrentError {
    #[error("gauge vanishes at the requested point on chart {chart}: {point:?}")]
    SingularPoint { chart: usize, point: Vec<Complex64> },
    #[error("chart {chart} has no differential block into degree {degree}")]
    MissingBlock { chart: usize, degree: i64 },
    #[error("differential on chart {chart} has non-polynomial entries")]
    DifferentialNotPolynomial { chart: usize },
    #[error("shape mismatch: {a:?} vs {b:?}")]
    ShapeMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("test form support is not contained in the tuple domain")]
    SupportOutsideDomain,
    #[error(transparent)]
    Cochain(#[from] CochainError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Twist(#[from] Box<crate::twist::TwistError>),
}

impl From<crate::twist::TwistError> for CurrentError {
    fn from(e: crate::twist::TwistError) -> Self {
        CurrentError::Twist(Box::new(e))
    }
}

pub use cutoff::CutoffProfile;
pub use field::{add_fields, compose_entries_numeric, dbar_field, FieldEval, NumericField};
pub use gauge::{chart_gauge_from_blocks, Gauge, SingularGauge};
pub use pairing::{
    default_grid, gauge_scale, pair_schedule, regularized_pairing, shell_resolution,
    PairingEvaluation, PairingMode, RegularizationSchedule, ResidueReport,
    SCHEDULE_DEFAULT_RATIO, SCHEDULE_DEFAULT_STEPS, SCHEDULE_DEFAULT_TOL, SCHEDULE_EPS0_FACTOR,
};
pub use quad::{integrate_adaptive, QuadBudget, QuadResult};
pub use residue::{
    component_schedule, matching_blocks, residue_action, ComponentReport, PairingConfig,
    ResidueActionReport, ResidueCurrent,
};
pub use sigma::{
    generically_exact_probe, pseudoinverse_field, sample_points_off_gauge, sigma_cochain,
    split_differential, u_cochain, ExactnessProbe, Sigma0, EXACTNESS_TOL, FD_STEP,
};
pub use testform::{KForm, TestForm};
