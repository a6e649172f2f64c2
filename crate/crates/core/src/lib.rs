//! Ginzburg-Landau energy minimization with a localized orthogonal
//! decomposition for the order parameter and Lagrange elements for the
//! vector potential.

pub mod check;
pub mod cli;
pub mod config;
pub mod error;
pub mod fem;
pub mod flow;
pub mod io;
pub mod lab;
pub mod lod;
pub mod mesh;
pub mod model;
pub mod plot;
pub mod quadrature;
pub mod solve;
pub mod sparse;

pub use error::{Error, Result};
