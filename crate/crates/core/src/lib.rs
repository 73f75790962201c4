//! Reservoir computing with quantization, sensitivity-guided pruning and
//! direct-logic hardware lowering.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the command
//! line and thread pools live in the `esnq` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod data;
pub mod dse;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod metrics;
pub mod quant;
pub mod reservoir;
pub mod rtl;
pub mod search;
pub mod sensitivity;

pub use error::{Error, Result};
