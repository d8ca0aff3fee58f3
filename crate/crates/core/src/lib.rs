//! Monte Carlo laboratory for critical planar percolation and FK-Ising clusters.
//!
//! The crate samples critical site percolation on the triangular lattice and the critical
//! FK-Ising random-cluster model on the square lattice, labels clusters, builds normalised
//! counting measures, detects arm events, checks the ε-box cluster approximation sample by
//! sample, and fits the resulting exponents.

pub mod arms;
pub mod boxapprox;
pub mod clusters;
pub mod error;
pub mod geom;
pub mod harness;
pub mod ising;
pub mod lattice;
pub mod measures;
pub mod rng;
pub mod stats;
pub mod unionfind;

pub use error::{Error, Result};
