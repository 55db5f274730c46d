//! The guide in `book/` compiled as doc-tests.
//!
//! mdbook cannot test snippets that depend on workspace crates, so each
//! chapter is pulled in as the documentation of an empty module and
//! `cargo test --doc` runs its code blocks against `eqcentre`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/walkthrough.md")]
pub mod walkthrough {}
#[doc = include_str!("../../../book/src/configuration.md")]
pub mod configuration {}
#[doc = include_str!("../../../book/src/outputs.md")]
pub mod outputs {}
#[doc = include_str!("../../../book/src/kepler.md")]
pub mod kepler {}
#[doc = include_str!("../../../book/src/ingest.md")]
pub mod ingest {}
#[doc = include_str!("../../../book/src/preprocessing.md")]
pub mod preprocessing {}
#[doc = include_str!("../../../book/src/regression.md")]
pub mod regression {}
#[doc = include_str!("../../../book/src/frames.md")]
pub mod frames {}
