//! Numerical laboratory for convex reaction-diffusion (FKPP-type)
//! equations driven by Lévy noise.
//!
//! The crate cross-verifies one object — the solution `u(t, x)` of
//! `∂_t u = A u + f(u)` with convex `f(u) = G(u) − u` — through four
//! independent routes:
//!
//! - [`semigroup`]: two-sided Trotter splitting brackets and a Picard
//!   mild-solution oracle;
//! - [`control`]: Monte Carlo evaluation of the pathwise control
//!   functional whose supremum over policies equals `u`;
//! - [`branching`]: direct simulation of the branching Lévy process and
//!   the Skorokhod–McKean product identity;
//! - [`levy`] + [`reaction`]: closed-form front speeds and reaction
//!   flows that the other routes must reproduce.
//!
//! Everything is seeded and deterministic: the same inputs produce the
//! same numbers regardless of thread count.

// `!(x > 0.0)` is used deliberately throughout as a NaN-rejecting guard:
// it fails for NaN where `x <= 0.0` would pass.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branching;
pub mod config;
pub mod control;
pub mod error;
pub mod grid;
pub mod levy;
pub mod normal;
pub mod opt;
pub mod reaction;
pub mod seeding;
pub mod semigroup;

pub use error::{Error, Result};

/// The guide chapters from `book/`, embedded so every code snippet in the
/// book compiles and runs as a doc-test.
pub mod guide {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub mod intro {}
    #[doc = include_str!("../../../book/src/levy.md")]
    pub mod levy {}
    #[doc = include_str!("../../../book/src/reaction.md")]
    pub mod reaction {}
    #[doc = include_str!("../../../book/src/splitting.md")]
    pub mod splitting {}
    #[doc = include_str!("../../../book/src/control.md")]
    pub mod control {}
    #[doc = include_str!("../../../book/src/branching.md")]
    pub mod branching {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
