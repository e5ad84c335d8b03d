//! Simulation and numerical verification of branching random walks whose spine
//! lies in the domain of attraction of a strictly α-stable law.
//!
//! The crate is organised bottom-up:
//!
//! * [`stable`]: the stable-law parameter algebra, an exact sampler and the
//!   closed-form constants (κ, c₁, the scale function, E[X⁺]).
//! * [`walk`]: the spine random walk: ladder heights, the renewal function,
//!   survival probabilities, conditioned paths and the meander functional.
//! * [`offspring`]: boundary-case offspring laws and their spine projection.
//! * [`brw`]: generation-by-generation branching random walk simulation with
//!   truncation accounting and all martingale functionals.
//! * [`spinal`]: the size-biased measure with an explicit spine and the
//!   many-to-one check.
//!
//! Everything random takes an explicit RNG; replica-parallel routines derive
//! one stream per replica from [`rng::RngStreams`] and reduce in replica
//! order, so results depend only on the seed and the replica count.

pub mod brw;
pub mod error;
pub mod golden;
pub mod offspring;
pub mod quadrature;
pub mod rng;
pub mod rootfind;
pub mod special;
pub mod spinal;
pub mod stable;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
