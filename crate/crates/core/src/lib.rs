// SPDX-License-Identifier: Apache-2.0

//! Toolkit for measuring how document chunking affects retrieval-augmented
//! question answering.
//!
//! The pipeline is: [`corpus`] ingestion and tokenization, [`chunking`] into
//! token / sentence / semantic / code chunks, a sparse [`retrieval`] index,
//! fill-to-budget [`context`] assembly, grounded [`generation`] with explicit
//! abstention, and [`metrics`] with bootstrap confidence intervals. The
//! [`runner`] sweeps a grid of chunking and budget parameters over all of it.

pub mod chunking;
pub mod context;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod generation;
mod http;
pub mod metrics;
pub mod retrieval;
pub mod runner;
mod util;

pub use error::{Error, Result};

/// Version string stamped into run reports and config fingerprints.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
