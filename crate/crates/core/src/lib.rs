//! Quantized dot-product kernels for a coarse-grained linear-array accelerator.
//!
//! The crate is organised bottom-up:
//!
//! * [`quant`] encodes and decodes GGML-style quantized blocks (Q8_0, Q3_K,
//!   Q8_K), repacks Q3_K into the accelerator's 5-bit-scale / 3-bit-quant
//!   layout and provides exact reference dot products.
//! * [`isa`] gives bit-exact semantics for the custom 2-way SIMD instructions
//!   (SML8, AD24, CVT53, FMUL32, MOVE).
//! * [`kernels`] expresses the Q8_0 and Q3_K dot products as pipelines of
//!   those instructions laid out over the processing elements of one lane.
//! * [`machine`] is a cycle-approximate model of the multi-lane array with
//!   per-phase timing and host-core contention.
//! * [`perfmodel`] turns timings into energy, power-delay products and
//!   end-to-end latency estimates.

pub mod error;
pub mod isa;
pub mod kernels;
pub mod machine;
pub mod perfmodel;
pub mod quant;

pub use error::{Error, Result};
