//! Context-conditioned bias layers for small dense networks.
//!
//! A dense layer normally computes `f(x W + b)` with one learned bias `b`.
//! When every input comes with a cheap coarse label (a "context"), this crate
//! replaces the single bias with one learned bias per context, stored as the
//! columns of a matrix `B`: the layer computes `f(x W + B[:, ctx])`. The
//! selected column plays the role of the bias, so context steers the layer
//! without adding multiplicative capacity, and a model conditioned on a
//! coarse label can spend its full width on the fine-grained decision.
//!
//! The crate is self-contained: matrices, backpropagation, the Adadelta
//! optimizer, dataset loaders, and the experiment harness are all here, in
//! 64-bit floats, driven by one seeded RNG with named stream splits.
//!
//! Modules:
//! - [`tensor`] — dense matrices and the deterministic RNG
//! - [`nn`] — layers (including the context-bias layer), loss, backprop,
//!   checkpoints
//! - [`optim`] — Adadelta and SGD
//! - [`data`] — Fashion-MNIST IDX and CIFAR-100 loaders, superclass maps,
//!   feature files, context corruption
//! - [`experiment`] — training harness, noise sweeps, statistics, CSV/SVG
//!   reports, gradient checking
//! - [`ca3`] — a small attractor-network simulation where a weak per-context
//!   bias field steers recall between stored patterns
//!
//! The `examples/` directory has one runnable program per capability; the
//! `ctxbias` binary wraps the same entry points as subcommands.

pub mod ca3;
pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod optim;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Matrix, Rng};
