//! A desk-scale workbench for studying how dendritic neurons change the
//! communication costs of neural networks.
//!
//! The crate bundles six independent model families behind one roof:
//!
//! * [`neuron`] — point and dendritic neuron forward/backward math, one-bit
//!   gradient masks, and activation-memory accounting.
//! * [`arch`] — architecture descriptors, equal-complexity channel scaling,
//!   parameter/MAC counting, and the Ψ communication ratio.
//! * [`wiring`] — Euclidean minimum spanning tree estimates of biological
//!   wiring length and power-law scaling fits.
//! * [`mesh`] — closed-form and sampled communication costs on a unit-square
//!   mesh of processing elements.
//! * [`gemm`] — global-memory traffic models for block-wise GEMM, validated
//!   by a block-granular cache simulator.
//! * [`entropy`] — discrete entropy identities for sums of dendritic outputs.
//!
//! Everything is deterministic given a seed: random streams are counter-based
//! ChaCha streams derived from `(seed, stream_index)` (see [`rng`]).
//!
//! The `book/` directory of the repository walks through each model with
//! runnable snippets; those snippets compile and run as part of `cargo test`.

pub mod arch;
pub mod entropy;
pub mod fit;
pub mod gemm;
pub mod mesh;
pub mod neuron;
pub mod rng;
pub mod toy;
pub mod wiring;

#[cfg(doctest)]
mod book;
