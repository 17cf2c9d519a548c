//! Characteristic initial value problems for constant-coefficient linear
//! first-order hyperbolic systems `A^a ∂_a v + D v = 0`.
//!
//! The pipeline reduces a system to characteristic canonical form for a
//! chosen chart `(u, x, y, ...)` with `u = const` characteristic
//! ([`canonical`]), decides well-posedness from the algebraic criteria on the
//! canonical blocks ([`wellposed`]), marches the problem on the triangle
//! `u + x ≤ X` with data on `u = 0` and `x = 0` ([`charsolve`]) and checks the
//! energy estimate on the result ([`energymon`]).
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`.
//!
//! ```
//! use charprob::{load_system, reduce, check_criteria, Tolerances, Verdict};
//!
//! let (sys, chart) = load_system(charprob::cli::WAVE3D).unwrap();
//! let tol = Tolerances::default();
//! let red = reduce(&sys, &chart, &tol).unwrap();
//! assert_eq!(red.multiplicity, 1);
//! assert_eq!(check_criteria(&red.compact, &tol).verdict, Verdict::WellPosed);
//! ```

pub mod canonical;
pub mod charsolve;
pub mod cli;
pub mod energymon;
pub mod error;
pub mod matkit;
pub mod scalar;
pub mod sysmodel;
pub mod wellposed;

pub use canonical::{compact_form, reduce};
pub use charsolve::{march, parse_presets, MarchOptions, Mode, Profile};
pub use energymon::{balance_residual, data_norms, sigma_norm, verify_estimate};
pub use error::{Error, Result};
pub use matkit::Definiteness;
pub use scalar::{Scalar, Tolerances};
pub use sysmodel::{load_system, side_matrices, verify_characteristic};
pub use wellposed::{check_criteria, growth_parameters, Verdict};

pub type Matrix = matkit::Matrix<f64>;
pub type FirstOrderSystem = sysmodel::FirstOrderSystem<f64>;
pub type Chart = sysmodel::Chart<f64>;
pub type SideMatrices = sysmodel::SideMatrices<f64>;
pub type CharacteristicStructure = canonical::CharacteristicStructure<f64>;
pub type CanonicalSystem = canonical::CanonicalSystem<f64>;
pub type CompactSystem = canonical::CompactSystem<f64>;
pub type Reduction = canonical::Reduction<f64>;
pub type WellPosednessReport = wellposed::WellPosednessReport<f64>;
pub type GrowthParameters = wellposed::GrowthParameters<f64>;
pub type GridSpec = charsolve::GridSpec<f64>;
pub type TransverseGrid = charsolve::TransverseGrid<f64>;
pub type DataSpec = charsolve::DataSpec<f64>;
pub type SolutionTrace = charsolve::SolutionTrace<f64>;
pub type EnergyReport = energymon::EnergyReport<f64>;
