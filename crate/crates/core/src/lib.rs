//! Verification toolkit for contact squeezing, positive loops of
//! contactomorphisms, Conley–Zehnder index conventions and the invariant-cone
//! orderability test for PU(2,1).
//!
//! Numerical checks sample deterministic grids and report sampled lower
//! bounds; index and Lie-theoretic computations are exact.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distinguished;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod index;
pub mod maps;
pub mod olshanskii;
pub mod report;
pub mod squeeze;
pub mod verify;

pub use error::{Error, Result};
