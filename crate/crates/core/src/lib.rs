//! Identification of NARX network models whose lag structure is searched by one
//! nature-inspired optimiser while a second trains the weights.

pub mod benchmarks;
pub mod data;
pub mod error;
pub mod io;
pub mod narx;
pub mod optim;
pub mod seed;
pub mod two_tier;

pub use data::{Channel, Dataset, NormParams, Schema};
pub use error::{Error, Result};
pub use narx::{LagSpec, NarxNetwork, PredictionMode};
pub use optim::{AbcParams, AisParams, Bounds, Objective, OptResult, OptimizerParams, PsoParams, Termination};
pub use two_tier::{evolve_order, FitnessSplit, IdentifiedModel, TierConfig, Variant};
