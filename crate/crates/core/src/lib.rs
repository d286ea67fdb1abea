#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("lvchoice-core requires either the `std` or the `libm` feature");

pub mod crbm;
pub mod data;
pub mod error;
pub mod latent;
pub mod linalg;
pub mod math;
pub mod mnl;
pub mod opt;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
