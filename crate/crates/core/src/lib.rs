//! Fractional calculus with respect to another function.

pub mod decomposition;
pub mod error;
pub mod fitting;
pub mod fde;
pub mod function;
pub mod kernels;
pub mod operators;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
