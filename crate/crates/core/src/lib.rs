//! Hamming-ball search over binary codes where the server sees only
//! randomised Montgomery residues.
//!
//! Records are cut into substrings, each substring is expanded into one-bit
//! variants, and the variants are keyed through two layers of `xR mod N`
//! maps held by different parties. A query learns, per record, how many
//! substrings collided; [`calibration`] turns that count into neighbour
//! decisions. [`protocol`] wires the parties together and [`privacy`]
//! measures what the published index reveals.

pub mod calibration;
pub mod code;
pub mod distance;
pub mod error;
pub mod montgomery;
pub mod privacy;
pub mod protocol;
pub mod variants;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/codes.md")]
    mod codes {}
    #[doc = include_str!("../../../book/src/distance.md")]
    mod distance {}
    #[doc = include_str!("../../../book/src/montgomery.md")]
    mod montgomery {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/privacy.md")]
    mod privacy {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
