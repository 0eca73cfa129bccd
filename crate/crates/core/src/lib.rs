//! Simulation and inference for generalized r-Pareto processes.

pub mod angular;
pub mod depmodel;
pub mod error;
pub mod gpd;
pub mod infer;
pub mod linalg;
pub mod optim;
pub mod riskfunc;
pub mod simulate;
pub mod sites;
pub mod special;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
