pub mod annuli;
pub mod certify;
pub mod disjointness;
pub mod error;
pub mod expansion;
pub mod graph;
pub mod graphmap;
pub mod lamination;
pub mod pullback;
pub mod stallings;
pub mod words;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/words.md")]
    mod words {}
    #[doc = include_str!("../../../book/src/stallings.md")]
    mod stallings {}
    #[doc = include_str!("../../../book/src/graphmaps.md")]
    mod graphmaps {}
    #[doc = include_str!("../../../book/src/pullbacks.md")]
    mod pullbacks {}
    #[doc = include_str!("../../../book/src/disjointness.md")]
    mod disjointness {}
    #[doc = include_str!("../../../book/src/expansion.md")]
    mod expansion {}
    #[doc = include_str!("../../../book/src/annuli.md")]
    mod annuli {}
    #[doc = include_str!("../../../book/src/laminations.md")]
    mod laminations {}
    #[doc = include_str!("../../../book/src/certify.md")]
    mod certify {}
}
