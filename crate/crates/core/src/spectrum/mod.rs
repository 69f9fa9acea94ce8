//! Characteristic roots by spectral discretization and Newton correction.

pub mod cheb;
mod newton;
mod pencil;
mod roots;

pub use newton::{newton_correct, CorrectedRoot, NewtonFailure};
pub use pencil::{discretize, Pencil, INFINITE_EIGENVALUE};
pub use roots::{compute_roots, default_n_points, rightmost_roots, spectral_abscissa, Root, RootOptions, RootSet};
