//! Simulation core for two bidirectional quantum direct communication
//! protocols: a controlled three-party scheme and a controller-independent
//! two-party scheme.
//!
//! Everything here is `no_std` with `alloc`. File formats, the CLI and
//! parallel sweeps live in the companion `bqdc-cli` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adversary;
pub mod codebook;
pub mod protocol;
pub mod qstate;
pub mod reference;
pub mod streams;
