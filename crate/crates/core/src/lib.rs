//! Monic orthogonal polynomials for the singularly perturbed Airy weight
//!
//! The weight is w(x; t) = x^λ exp(−x³ − t/x) on (0, ∞) with λ > −1 and
//! t ≥ 0; the factor exp(−t/x) gives the weight an infinitely strong zero
//! at the origin. This crate constructs the associated monic orthogonal
//! polynomial system at extended precision and verifies, as numerical
//! residuals, the structure the system carries:
//!
//! * the three-term recurrence coefficients α_n, β_n, built from moments,
//! * ladder operators with rational coefficient functions A_n(x), B_n(x)
//!   and their compatibility conditions,
//! * a pair of nonlinear difference equations for α_n, β_n,
//! * a second-order linear ODE satisfied by each P_n,
//! * differential-difference equations in the deformation parameter t and
//!   two routes to the logarithmic t-derivative of the Hankel determinant,
//! * Coulomb-fluid asymptotics α_n ∼ (4n/15)^{1/3}, β_n ∼ (n²/900)^{1/3}.
//!
//! All arithmetic runs on MPFR floats at a caller-chosen decimal precision
//! (see [`numeric::PrecisionSpec`]); results serialize as decimal strings.

pub mod asymptotics;
pub mod error;
pub mod evolution;
pub mod ladder;
pub mod numeric;
pub mod recurrence;
pub mod report;
pub mod systems;
pub mod weight;

pub use error::{Error, Result};
pub use numeric::{PrecisionSpec, QuadratureResult};
pub use recurrence::RecurrenceTable;
pub use report::{ResidualRecord, ResidualReport};
pub use weight::{MomentTable, WeightParams};

/// Extended-precision scalar used throughout the crate.
pub type Real = rug::Float;

/// Exact rational scalar; weight parameters and t-grid points are kept
/// rational so shifted-t rebuilds stay exact at any float precision.
pub type Rat = rug::Rational;
