//! Analysis and optimization of protograph LDPC codes for higher-order
//! modulation with quantized sum-product decoding.
//!
//! The crate covers the full workflow:
//!
//! - [`protosys`]: base matrices, quasi-cyclic lifting, girth checks and
//!   systematic GF(2) encoding;
//! - [`signaling`]: ASK constellations with Gray labeling, uniform and
//!   Maxwell-Boltzmann inputs, constant-composition distribution matching,
//!   shaped frame assembly, soft demapping and rate functionals;
//! - [`quantize`]: the clipped uniform LLR quantizer, quantized bit-channel
//!   densities and the shared two-input check-node table;
//! - [`dde`]: discretized density evolution, threshold search and clipping
//!   sweeps;
//! - [`pexit`]: protograph EXIT analysis on entropy-matched binary-input
//!   AWGN surrogates, the optimizer's fast objective;
//! - [`bitmap`]: the bit-mapping matrix, pattern search and the successive
//!   per-level optimization;
//! - [`mcsim`]: finite-length Monte-Carlo simulation with floating-point
//!   and quantized decoders.

pub mod bitmap;
pub mod dde;
pub mod mcsim;
pub mod pexit;
pub mod protosys;
pub mod quantize;
pub mod signaling;
pub mod util;
