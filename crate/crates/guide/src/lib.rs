//! Compiles the guide's chapters as doc comments so `cargo test` runs every
//! code block in the book against the current crate.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/datasets.md")]
pub mod datasets {}
#[doc = include_str!("../../../book/src/imputation.md")]
pub mod imputation {}
#[doc = include_str!("../../../book/src/engines.md")]
pub mod engines {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/mixtures.md")]
pub mod mixtures {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
