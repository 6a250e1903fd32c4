//! Completely positive unital maps with a prescribed fixed-point observable,
//! their Kraus forms, quantum-battery charging under a swap collision, and
//! time-dilation profiles built from environment states.

pub mod battery;
pub mod choi;
pub mod cpu_map;
pub mod error;
pub mod io;
pub mod matcore;
pub mod metric;
pub mod random;
pub mod selftest;

pub use error::{Error, Result};
pub use matcore::{ComplexMatrix, HermitianObservable, C64};
