//! Exact optimal stopping over Meyer sigma-fields on finite filtered lattices.
//!
//! A [`lattice::MeyerSpace`] holds a finite path space with a filtration
//! `F_k` and a Meyer structure `G_k` (`F_{k-1} <= G_k <= F_k`). Processes
//! live on the instants `(k,AT) < (k,INT) < ... < TERMINAL`. All arithmetic
//! is exact rational.

pub mod commands;
pub mod divided;
pub mod enumerate;
pub mod error;
pub mod generate;
pub mod lattice;
pub mod par;
pub mod projection;
pub mod representation;
pub mod scenario;
pub mod snell;

pub use error::{Error, Result};
pub use lattice::{FieldKind, Instant, LatticeProcess, MeyerSpace, PathSet, RandomInstant, Q};
