//! Denoising DNA-encoded library selections with a mixture-of-products
//! count model.
//!
//! Tags are enumerated into the products their synthesis could yield
//! ([`library`]), a predictor scores each product's enrichment
//! ([`predictors`]), and a negative-binomial model ties the proportion-weighted
//! enrichments to observed counts ([`countmodel`]).

pub mod cli;
pub mod countmodel;
pub mod datapipeline;
pub mod diffengine;
pub mod evaluation;
pub mod library;
pub mod molgraph;
pub mod predictors;
pub mod simulator;
