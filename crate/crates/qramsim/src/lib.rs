//! Numerical simulator for fault-tolerant QRAM via adaptive distillation and
//! teleportation of noisy resource states.
//!
//! Address convention used everywhere: bit `i` (0-based) of an address index
//! is the variable `x_{i+1}`, and qubit `i` of a register is that same bit.

pub mod boolfn;
pub mod classical;
pub mod device;
pub mod distill;
pub mod error;
pub mod qcore;
pub mod rng;
pub mod teleport;
pub mod twirlset;

pub use error::{Error, Result};
