//! Partial-trace quadratic forms over multipartite operator spaces.
//!
//! The library evaluates signed sums of Schatten norms of partial traces,
//! relates them to Werner-state witness expectations, and searches for
//! low-rank operators that push the forms negative.  Modules:
//!
//! - [`tensorspace`]: dense multipartite operators, subsystem subsets,
//!   partial traces, partial transposes, embeddings and permutations.
//! - [`spectral`]: singular values, Schatten norms and rank profiles.
//! - [`forms`]: the quadratic forms themselves, inversion operators,
//!   creation/annihilation pairs and the exact closed-form families.
//! - [`werner`]: Werner states, their spectra, and the form/witness
//!   correspondence.
//! - [`search`]: seeded random ensembles, projected gradient descent for
//!   minimizing forms over fixed-rank operators, boundary bisection and
//!   parameter sweeps.
//! - [`suites`]: the named verification suites behind `verify`.

pub mod error;
pub mod forms;
pub mod search;
pub mod spectral;
pub mod suites;
pub mod tensorspace;
pub mod werner;

pub use error::{Error, Result};
