//! Transport densities for Monge–Kantorovich problems on a degenerate triangle.

pub mod cli;
pub mod config;
pub mod densities;
pub mod error;
pub mod eta;
pub mod geometry;
pub mod numerics;
pub mod output;
pub mod regularity;
pub mod transport;
pub mod verify;

pub use config::GammaConfig;
pub use error::{Result, TdError};
