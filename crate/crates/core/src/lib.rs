//! Exact distances between finite metric measure spaces, and measure trees
//! coded by excursions.
//!
//! - [`mm_core`]: finite mm-spaces, validation, canonical form, polynomials.
//! - [`prohorov`]: Prohorov distance on a common finite space, by subset
//!   enumeration and by max-flow feasibility of couplings.
//! - [`gp_box`]: Gromov's box metrics and the Gromov–Prohorov distance via
//!   optimal sub-couplings, explicit parametrizations and gluings.
//! - [`excursion`]: piecewise excursions, the coded tree, and the excursion
//!   metrics (Ky Fan, epigraph Hausdorff, and their sum).
//! - [`harness`]: seeded experiments producing reproducible JSON reports.
//!
//! All exact computations use [`Rational`]; the metric-space algorithms are
//! generic over [`Scalar`] so they also run on `f64`.

pub mod error;
pub mod excursion;
pub mod flow;
pub mod gp_box;
pub mod harness;
pub mod io;
pub mod mm_core;
pub mod prohorov;
pub mod rational;

pub use error::{Error, Result};
pub use mm_core::FiniteMMSpace;
pub use rational::{Rational, Scalar};
