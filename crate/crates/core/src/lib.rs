//! Two-stage indifference-zone selection of the Gaussian population with the
//! largest mean when variances are unknown and unequal.
//!
//! The crate covers the Dudewicz–Dalal and Rinott procedures end to end:
//! Student-t primitives ([`distributions`]), the defining h-constant
//! equations ([`hconst`]), simulation of both procedures under a random
//! variance model ([`procedures`]), expected-sample-size efficiency studies
//! ([`efficiency`]) and extreme-value diagnostics for maxima of t arrays
//! ([`extremes`]).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod efficiency;
pub mod error;
pub mod extremes;
pub mod hconst;
pub mod parallel;
pub mod procedures;
pub mod quadrature;
pub mod root;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
