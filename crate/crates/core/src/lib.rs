//! Spectral stability analysis of delay differential-algebraic equations and
//! fixed-order controller synthesis by nonsmooth spectral abscissa
//! minimization.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod document;
pub mod error;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod sensitivity;
pub mod spectrum;

pub use asymptotic::{strong_stability, AnalysisOptions, StrongStabilityReport, ThetaGrid};
pub use document::SystemDocument;
pub use error::{Error, Result};
pub use model::{
    create_plant, decompose, interconnect, make_controller_family, neutral_to_ddae, ControllerFamily, ControllerIo,
    DdaeSystem, Decomposition, DelayTerm, DelayedTerms, IoSystem, PlantIo,
};
pub use spectrum::{compute_roots, spectral_abscissa, Root, RootOptions, RootSet};
