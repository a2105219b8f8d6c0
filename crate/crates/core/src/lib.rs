//! Sets of integers whose pairwise differences avoid the values of an
//! intersective polynomial, and the machinery of the density increment
//! argument that bounds their size: auxiliary polynomial towers, local
//! sieves, Fourier audits, level-d estimates and exact search.

pub mod arith;
pub mod error;
pub mod harmonic;
pub mod increment;
pub mod intersective;
pub mod leveld;
pub mod poly;
pub mod search;
pub mod sieve;

pub use error::{Error, Result};
pub use harmonic::{ArcParams, Freq, SmoothWeight, Spectrum, WeightedImage};
pub use increment::{IncrementConfig, IterationTrace, Progression, StepOption, StepOutcome};
pub use intersective::{AuxBuilder, AuxiliaryContext, LocalRootData, Verdict};
pub use leveld::{FactoredInt, FamilyKind, ModulusFamily};
pub use poly::IntPoly;
pub use search::{AvoidingSet, BitSet, ForbiddenMode};
pub use sieve::{LocalSieve, SieveTable};
