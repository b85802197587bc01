//! Langevin samplers with position-dependent geometry and irreversible
//! perturbations, plus the diagnostics and closed forms used to compare them.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod appendix;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod rng;
pub mod sampler;
pub mod target;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
