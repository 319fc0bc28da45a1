//! Numerical routes to the fractional correlation functions of the massless
//! sine-Gordon model at the free-fermion point.
//!
//! Everything here is `no_std` with `alloc`; the `std` feature only adds
//! `std::error::Error` for [`Error`].

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// NaN must fail range checks, hence `!(x < y)`
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod dirac;
pub mod error;
pub mod fredholm;
pub mod free_field;
pub mod gmc;
pub mod numerics;
pub mod painleve;
pub mod specfun;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
