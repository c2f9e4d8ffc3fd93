//! Stabilizer decompositions of magic states and Clifford+T simulation.

pub mod chains;
pub mod codes;
pub mod decomp;
pub mod denseoracle;
pub mod f2linalg;
pub mod simulator;
pub mod spectrum;
pub mod stabstate;

pub use f2linalg::{F2Matrix, F2Vector};
pub use stabstate::{Gate, Scalar, StabilizerState};
