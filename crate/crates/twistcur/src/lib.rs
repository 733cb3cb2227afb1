//! Exact and numeric machinery for twisted complexes over polydisc covers.
//!
//! The crate is layered bottom-up:
//!
//! * [`polyalg`]: Gaussian-rational scalars, multivariate polynomials, and
//!   polynomial/complex matrices with rank and minor-gauge probes.
//! * [`cochain`]: covers, graded bundle families, and the Cech-Hom cochain
//!   algebra (product, Cech differential, antiholomorphic differential).
//! * [`twist`]: twisting cochains, the twisted differential `D`, exact lifting
//!   of obstructions, morphism extension, and gluing completion.
//! * [`current`]: pseudoinverse fields, cutoff regularization, tensor-grid
//!   quadrature, and residue/principal-value pairings.
//! * [`homotopy`]: duality, vanishing, comparison, and homotopy verdicts built
//!   from schedules of regularized pairings.
//! * [`problem`] / [`fixtures`]: the JSON problem format and fixture
//!   generators backing the `twistcur` binary.

pub mod cochain;
pub mod current;
pub mod fixtures;
pub mod homotopy;
pub mod polyalg;
pub mod problem;
pub mod twist;
