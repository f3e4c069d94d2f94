//! Numerical realization of the projective dual CR structure on strongly
//! C-convex real hypersurfaces of C^n, and pointwise tests for whether a
//! function decomposes as CR plus dual-CR.

// `!(x < tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decompose;
pub mod error;
pub mod expr;
pub mod fields;
pub mod forms;
pub mod hypersurface;
pub mod incidence;
pub mod jets;
pub mod linalg;
pub mod report;
pub mod sampling;
pub mod sphere_plh;

pub use error::{Error, Result};
pub use jets::{Jet, C64};
