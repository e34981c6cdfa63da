//! Learning-to-optimize building blocks for wireless resource management.
//!
//! The crate is `no_std` with `alloc`: every routine is a deterministic
//! function of its inputs and a [`SeedKey`]. File formats, parallel sweeps
//! and the command-line runner live in the `rrm-lab` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

/// `f64` math methods for builds without `std`.
mod float {
    #[cfg(not(feature = "std"))]
    pub use num_traits::Float as _;
}

pub mod error;
pub mod gapbench;
pub mod layers;
pub mod models;
pub mod netgen;
pub mod oamp;
pub mod oracles;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use netgen::{ChannelModel, Dataset, Graph, NetworkInstance};
pub use rng::{SeedKey, Stream};
pub use tensor::Tensor;
