//! Finite-element toolkit for the Lame system in a disk containing two
//! nearly-touching rigid inclusions, with an experiment harness for the
//! gradient blow-up between them.

pub mod auxiliary;
pub mod config;
pub mod constants;
pub mod elastic;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod report;

pub use error::{Error, Result};
