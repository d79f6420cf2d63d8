//! Lasserre hierarchy relaxations for graph labeling problems, solved with a
//! small dense SDP solver and rounded by seed-set conditioning followed by
//! independent or threshold rounding.
//!
//! The pipeline is: encode a [`problems::ProblemSpec`] as a
//! [`relaxation::LabelingInstance`], build and solve its level-`r` moment SDP,
//! factorize the moments into vectors ([`embed`]), pick seed variables by
//! column selection ([`seeds`]), then sample, condition and round
//! ([`rounding`]). [`pipeline::run_pipeline`] ties the phases together.

pub mod embed;
pub mod error;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod problems;
pub mod relaxation;
pub mod rounding;
pub mod sdpsolve;
pub mod seeds;

pub use error::{Error, Result};
