//! Bayesian estimation of two-state Markov-switching count-data and
//! multinomial logit models.

// negated float comparisons are deliberate: they route NaN to the reject branch
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod data;
pub mod datagen;
pub mod error;
pub mod io;
pub mod mle;
pub mod model;
pub mod priors;
pub mod sampler;
pub mod special;
pub mod switching;

pub use data::{Dataset, Observation, Panel};
pub use error::{Error, Result};
pub use model::{Family, ModelSpec, Obs, Restriction, StateKernel, StateParams};
pub use switching::{StateVector, SwitchingLayout, TransitionCounts, TransitionProbs};
