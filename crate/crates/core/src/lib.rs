//! Interacting Pólya-urn particle system for market-share dynamics across
//! several dependent markets.
//!
//! Each market holds `n` share units, each labelled by the firm that owns
//! it. At every step one unit loses its share and the vacant share is
//! reallocated to a new firm, to a firm of another market, or to a firm of
//! the same market, according to a weighted Pólya-urn full conditional. The
//! chain is a random-scan Gibbs sampler; [`oracle`] checks it against exact
//! joint laws and transition matrices on small finite instances.

pub mod dynamics;
pub mod engine;
pub mod error;
pub mod io;
pub mod measures;
pub mod oracle;
pub mod state;

pub use error::{Error, Result};
