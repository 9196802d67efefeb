//! Harmonic analysis on quantum Euclidean space in radial form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fischer;
pub mod lattice;
pub mod oscillator;
pub mod par;
pub mod qbessel;
pub mod qcore;
pub mod qhankel;
pub mod qpolys;
pub mod sphere;
pub mod verify;

pub use error::{QError, Result};
pub use qcore::{JacksonSpec, QContext, SeriesPolicy};
