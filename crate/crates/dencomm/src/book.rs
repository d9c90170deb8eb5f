//! Runs the guide's code snippets as doc-tests so `book/` and the crate
//! cannot drift apart. Only compiled when collecting doc-tests.

#[doc = include_str!("../../../book/src/neurons.md")]
mod neurons {}

#[doc = include_str!("../../../book/src/complexity.md")]
mod complexity {}

#[doc = include_str!("../../../book/src/wiring.md")]
mod wiring {}

#[doc = include_str!("../../../book/src/mesh.md")]
mod mesh {}

#[doc = include_str!("../../../book/src/gemm.md")]
mod gemm {}

#[doc = include_str!("../../../book/src/entropy.md")]
mod entropy {}
