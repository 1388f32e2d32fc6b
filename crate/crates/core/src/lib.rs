//! Anisotropic harmonic analysis on periodic sample grids.
//!
//! The crate works with a one-parameter dilation group
//! `A_t = diag(t^{a_1}, ..., t^{a_n})` and its homogeneous quasi-norm `rho`,
//! and builds on top of them the Poisson-type semigroup, fractional
//! integration `I_alpha`, Littlewood-Paley pieces, Marcinkiewicz-type square
//! functions, the Hardy-Littlewood maximal function over `rho`-balls and a
//! discrete Calderon-Zygmund decomposition.
//!
//! Fields are sampled on a [`GridSpec`], a periodic box centred at the
//! origin. See the guide in `book/` for the conventions.

pub mod decomposition;
pub mod dilation;
pub mod error;
pub mod experiments;
mod fft;
pub mod field;
pub mod grid;
pub mod kernels;
pub mod operators;
pub mod quad;
pub mod report;

pub use dilation::{DilationGroup, RhoBall};
pub use error::{Error, Result};
pub use field::{dilated_annulus_bump, make_band_limited, SampledField, SpectralField};
pub use grid::{GridSpec, Mask};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/dilation.md")]
    mod dilation {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/decomposition.md")]
    mod decomposition {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
