//! Train track maps for free-group outer automorphisms.
//!
//! The crate works with whole-edge combinatorics on finite graphs: edge
//! paths are sequences of oriented edges, partial edge segments are realized
//! by subdividing. Numerical data (Perron–Frobenius eigenvalues and metrics)
//! is always carried together with an explicit tolerance.

pub mod cli;
pub mod folds;
pub mod graphs;
pub mod maps;
pub mod nielsen;
pub mod spectral;
pub mod wedge;
pub mod words;
