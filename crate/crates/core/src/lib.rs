//! Graph-based fusion of text and image relevance for multimedia retrieval.
//!
//! The pipeline selects the top documents of a text query, restricts every
//! score vector and similarity matrix to them, and runs a parameterized
//! diffusion over the restricted document graph. One-step transmedia
//! pseudo-relevance feedback and random walks with a prior are both
//! special cases of that diffusion. Results are combined by late fusion and
//! scored with MAP.

pub mod error;
pub mod filter;
pub mod fusion;
pub mod eval;
pub mod store;
pub mod pipeline;
pub mod synth;
pub mod text;
pub mod visual;

pub use error::{Error, Result};
