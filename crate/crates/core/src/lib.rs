//! Spectroscopy models for thermal rubidium vapor in micrometer-scale cells.

pub mod atomic;
pub mod constants;
pub mod eit;
pub mod error;
pub mod fit;
pub mod lineshape;
pub mod quadrature;
pub mod scan;
pub mod spectrum;
pub mod vapor;
pub mod wigner;

pub use error::{Error, Result};

/// Boltzmann constant, J/K (exact in SI).
pub const BOLTZMANN: f64 = 1.380_649e-23;

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/strengths.md")]
    mod strengths {}
    #[doc = include_str!("../../../book/src/vapor.md")]
    mod vapor {}
    #[doc = include_str!("../../../book/src/lineshape.md")]
    mod lineshape {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/scan.md")]
    mod scan {}
    #[doc = include_str!("../../../book/src/eit.md")]
    mod eit {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
