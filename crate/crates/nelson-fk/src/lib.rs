//! Feynman-Kac path-integral engine for the renormalized Nelson model.

pub mod action;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod fiber;
pub mod fieldstate;
pub mod fock;
pub mod kernel;
pub mod mc;
pub mod nonfock;
pub mod paths;
pub mod semigroup;

pub use error::{Error, Result};
