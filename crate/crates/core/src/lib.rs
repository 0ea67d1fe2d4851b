//! Asymmetrically-relaxed distribution alignment for unsupervised domain
//! adaptation under label shift.
//!
//! The crate provides
//!
//! * [`divergences`]: partially linearized f-divergences with closed-form
//!   duals, and reweighting distances with the sorting optimizer;
//! * [`transport`]: the relaxed Wasserstein distance, solved exactly as a
//!   capacitated transportation problem and through its dual LP;
//! * [`autodiff`]: a small reverse-mode engine for dense networks, with the
//!   input-gradient penalty and Adam;
//! * [`align`]: the domain-adversarial trainer and its eight variants;
//! * [`theory`]: executable checks of the label-shift propositions, the
//!   target-error decomposition and the target-error bound audit.
//!
//! The `relaxalign` binary wraps [`cli`].

// `!(x >= 0.0)` style checks reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod autodiff;
pub mod cli;
pub mod distributions;
pub mod divergences;
pub mod error;
pub mod lp;
pub mod theory;
pub mod transport;

pub use error::{Error, Result};
