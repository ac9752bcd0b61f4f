//! Socially concomitant navigation by role-playing in replayed crowds.
//!
//! The crate contains a trajectory-replay simulator with field-of-view and
//! range-noise sensing ([`world`], [`episode`]), a recurrent Gaussian policy
//! and a state-value network with hand-written gradients ([`policy`]), the
//! partially-observable trust-region update ([`trpo`], [`train`]) and a
//! reciprocal-velocity-obstacle baseline ([`rvo`]).

pub mod checkpoint;
pub mod episode;
pub mod error;
pub mod export;
pub mod fsio;
pub mod geom;
mod par;
pub mod policy;
pub mod report;
pub mod rvo;
pub mod train;
pub mod trpo;
pub mod world;

pub use error::{Error, Result};
