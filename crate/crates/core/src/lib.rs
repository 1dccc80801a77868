//! Numerics for DMRS-aware aperiodic SRS triggering and asynchronous
//! sub-band CSI stitching, plus the emulation loop that drives them.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! anything touching the filesystem live in the `carts` crate.

#![no_std]

extern crate alloc;

pub mod channel;
pub mod dsp;
pub mod harness;
pub mod metrics;
pub mod scheduler;
pub mod sensing;
pub mod spline;
pub mod stitcher;
pub mod trace;
pub mod types;

pub use types::*;
