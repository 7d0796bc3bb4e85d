pub mod analysis;
pub mod dist;
pub mod error;
pub mod garch;
pub mod io;
pub mod lattice;
mod regression;
pub mod seeds;
pub mod series;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/criticality.md")]
    mod criticality {}
    #[doc = include_str!("../../../book/src/market_series.md")]
    mod market_series {}
    #[doc = include_str!("../../../book/src/gains.md")]
    mod gains {}
    #[doc = include_str!("../../../book/src/garch.md")]
    mod garch {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
