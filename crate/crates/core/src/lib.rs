//! Symplectic differential systems, curves in the Lagrangian Grassmannian and
//! the construction of semi-Riemannian geodesic data whose conjugate instants
//! form a prescribed compact set.
//!
//! Conventions used throughout the crate:
//!
//! - vectors of `ℝⁿ ⊕ ℝⁿ*` are stored as `(v, α)` stacked into a `2n` column;
//! - `J = [[0, I], [-I, 0]]`, so `ω(z1, z2) = z1ᵀ J z2 = α2(v1) - α1(v2)`;
//! - `L₀ = {0} ⊕ ℝⁿ*`, spanned by the columns of `[0; I]`.

pub mod abstract_sys;
pub mod error;
pub mod fd;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod jet;
pub mod linalg;
pub mod prescribe;
pub mod sds;
pub mod symform;
pub mod symplectic;

pub use error::{Error, Result};
pub use grid::Grid;
pub use symform::SymmetricForm;
pub use symplectic::LagrangianFrame;

/// Dense matrix type used for every block, frame and form.
pub type Mat = nalgebra::DMatrix<f64>;
