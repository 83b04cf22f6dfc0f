//! Protograph-based QC-MDPC McEliece workbench.
//!
//! Polynomial arithmetic in `F2[X]/(X^Q - 1)`, protograph ensembles and their
//! lifted Tanner graphs, scaled sum-product and Algorithm E decoders, density
//! evolution thresholds, Monte Carlo block error rates and information-set
//! decoding work factors.

pub mod combinatorics;
pub mod cryptosystem;
pub mod decoders;
pub mod density_evolution;
pub mod error;
pub mod parallel;
pub mod protograph;
pub mod ring;
pub mod security;
pub mod simulation;
pub mod tanner;

#[cfg(test)]
mod testutil;

pub use decoders::{Algorithm, DecodeResult, Decoder, DecoderConfig};
pub use error::{Error, Result};
pub use parallel::Exec;
pub use protograph::{ensemble, BaseMatrix, EnsembleSpec, PolyMatrix, Shape};
pub use ring::{DensePoly, SparsePoly};
pub use tanner::TannerGraph;
