//! Numerics for the continuity of conditional entropy.
//!
//! The crate evaluates the dimension-free bound
//! `|S(ρ¹²|ρ²) - S(σ¹²|σ²)| ≤ 4ε log d₁ + 2η(1-ε) + 2η(ε)`, runs the
//! auxiliary-state construction that proves it as a set of checkable
//! identities, verifies the bound on seeded random ensembles, and estimates
//! squashed entanglement by minimizing conditional mutual information over
//! finite-dimensional extensions.
//!
//! Modules, bottom-up:
//!
//! - [`qmat`]: Hermitian operators, density matrices, partial trace, trace norm.
//! - [`entropy`]: entropies, trace distance and the closed-form bounds.
//! - [`thales`]: the auxiliary-state decomposition and the mixing-estimate chain.
//! - [`ensembles`]: seeded random states and perturbation pairs.
//! - [`verify`]: property harnesses and their JSON/CSV reports.
//! - [`squashed`]: extension search for squashed entanglement.

pub mod ensembles;
pub mod entropy;
pub mod qmat;
pub mod simplex;
pub mod squashed;
pub mod statefile;
pub mod states;
pub mod thales;
pub mod verify;

pub use entropy::{EntropyValue, LogBase};
pub use qmat::{DensityMatrix, HermitianOperator, Spectrum};
