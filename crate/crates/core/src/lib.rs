//! Calibration of epistemic model parameters from output-only data.
//!
//! Raw output trajectories are collapsed to a 12-slot spectral summary
//! ([`summary`]). For every sampled epistemic value the toolkit asks whether
//! some reweighting of simulated aleatory samples keeps every summary's
//! weighted CDF inside a Bonferroni-corrected Kolmogorov-Smirnov band around
//! the data ECDF ([`empirical`], [`eligibility`]); that is a linear program
//! solved by [`lp`]. The surviving weight polytopes then bound failure
//! probabilities ([`reliability`]) and drive a Kiefer-Wolfowitz design search
//! ([`design`]). [`cli`] wires the stages to files and the `drocal` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod design;
pub mod eligibility;
pub mod empirical;
pub mod error;
pub mod lp;
pub mod model;
pub mod reliability;
pub mod seed;
pub mod summary;

pub use error::{Error, Result};
