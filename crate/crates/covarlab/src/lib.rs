//! Locally covariant Klein–Gordon theory on 1+1 dimensional lattice spacetimes.

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod lct;
pub mod localization;
pub mod rce;
pub mod solver;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/spacetimes.md")]
    mod spacetimes {}
    #[doc = include_str!("../../../book/src/evolution.md")]
    mod evolution {}
    #[doc = include_str!("../../../book/src/rce.md")]
    mod rce {}
    #[doc = include_str!("../../../book/src/localization.md")]
    mod localization {}
    #[doc = include_str!("../../../book/src/theories.md")]
    mod theories {}
}
