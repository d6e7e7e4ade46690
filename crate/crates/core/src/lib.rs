//! Attainable Cramér-Rao type bounds for finite-dimensional quantum
//! statistical models.
//!
//! Two independent routes to the bound are provided: the closed-form optimum
//! over random measurements ([`randbound`]) and a cutting-plane solution of the
//! Lagrange dual over all locally unbiased measurements ([`duallp`]).
//! [`randcheck`] decides when the two must agree, and [`sim`] evaluates
//! measurement plans exactly and by Monte Carlo.

// `!(x > y)` is used on purpose so that NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod duallp;
pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod randbound;
pub mod randcheck;
pub mod sim;

pub use error::{Error, ModelDefect, Result};
pub use linalg::{EigenDecomp, HermMat};
pub use model::{FisherData, QuantumModel, WeightForm};
