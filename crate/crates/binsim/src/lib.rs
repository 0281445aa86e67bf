//! Cross-architecture binary code similarity comparison.
//!
//! Decides whether two disassembled snippets from different CPU
//! architectures were compiled from the same source code. The pipeline
//! tokenizes and normalizes disassembly, builds a multi-relational
//! instruction association graph over each pair, and scores it with a
//! neural encoder (token/char vectorization, Bi-LSTM sequence encoding,
//! relational graph convolution, fusion classifier).

pub mod checkpoint;
pub mod error;
pub mod graph;
pub mod harness;
pub mod model;
pub mod nn;
pub mod tokenizer;

pub use error::{Error, Result};
