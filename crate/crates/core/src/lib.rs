//! Ground-roll separation for 2-D seismic gathers.
//!
//! The crate is organised around a small set of grid types ([`Gather`],
//! [`Mask`], [`Spectrum`]) and the processing stages built on them:
//!
//! - [`synth`] builds synthetic gathers with known clean signal, ground roll and noise.
//! - [`maskgen`] estimates where ground roll dominates and turns that into a binary mask.
//! - [`solver`] runs the mask-guided dual low-rank ADMM decomposition.
//! - [`baselines`] holds the F-K fan filter and the mask-guided local SVD filter.
//! - [`evalmetrics`] scores a separation (SNR, local similarity).
//!
//! All grids are `nt x nx` with time along rows and traces along columns.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod config;
mod error;
pub mod evalmetrics;
pub mod filters;
pub mod maskgen;
pub mod numerics;
pub mod render;
pub mod seisdata;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use seisdata::{Gather, Mask, Spectrum};
