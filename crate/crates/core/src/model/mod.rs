//! DDAE systems, plant/controller interconnections and the nullspace
//! decomposition into differential and difference parts.

mod decompose;
mod family;
mod io;
mod system;

pub use decompose::{decompose, Decomposition, TermBlocks, DEFAULT_RANK_TOL};
pub use family::{make_controller_family, AffineFamily, ControllerFamily, FixedMask};
pub use io::{create_plant, interconnect, neutral_to_ddae, ControllerIo, DelayedTerms, IoSystem, PlantIo};
pub use system::{DdaeSystem, DelayTerm, DELAY_MERGE_TOL};
