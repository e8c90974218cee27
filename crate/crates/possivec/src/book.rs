//! Doc-test bridge for the guide in `book/`.
//!
//! Every chapter is attached verbatim to a module here, so `cargo test`
//! compiles and runs each of the book's Rust snippets and the prose can
//! never drift from the library. Shell blocks in the CLI chapter are not
//! Rust code fences and are skipped by rustdoc.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/areas-of-interest.md")]
pub mod areas_of_interest {}

#[doc = include_str!("../../../book/src/possibility-measures.md")]
pub mod possibility_measures {}

#[doc = include_str!("../../../book/src/vectorization.md")]
pub mod vectorization {}

#[doc = include_str!("../../../book/src/hmm.md")]
pub mod hmm {}

#[doc = include_str!("../../../book/src/crf.md")]
pub mod crf {}

#[doc = include_str!("../../../book/src/synthetic-data.md")]
pub mod synthetic_data {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
