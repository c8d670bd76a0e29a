//! Mining stable, frequent patterns from annotated EEG segments.
//!
//! The crate covers the whole path from raw multichannel recordings to a
//! ranked list of interval patterns:
//!
//! 1. [`signal`]: cut annotated segments out of a [`signal::Recording`] and
//!    compute amplitude and spectral features per segment.
//! 2. [`context`]: assemble feature rows into a [`context::NumericContext`]
//!    and select attributes (correlation pruning, optional information-gain
//!    ranking).
//! 3. [`pattern`] and [`fca`]: build concept lattices over interval pattern
//!    structures or binary formal contexts; both share the Close-by-One
//!    machinery in [`lattice`].
//! 4. [`stability`]: exact and bound-based stability, and filtering by
//!    support and stability.
//!
//! [`pipeline`] strings the stages together and produces a
//! [`pipeline::PatternReport`].

pub mod bitset;
pub mod context;
pub mod error;
pub mod fca;
pub mod lattice;
pub mod pattern;
pub mod pipeline;
pub mod signal;
pub mod stability;
pub mod synthetic;

pub use bitset::BitSet;
pub use error::{Error, Result};
pub use fca::{ConceptLattice, FormalContext};
pub use lattice::{BuildOptions, Concept, GaloisConnection, Lattice};
pub use pattern::{Interval, IntervalDescription, IntervalPatternStructure, PatternIntent, PatternLattice};
pub use stability::{BoundPolicy, LStab, StabilityMethod, StabilityScore};
