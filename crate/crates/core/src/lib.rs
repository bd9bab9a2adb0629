//! Dirichlet-process mixture clustering of replicated time-course data
//! with a random-effects covariance per cluster.
//!
//! The pipeline: [`simulate`] or load a [`Dataset`], run a chain with
//! [`sampler::run_chain`], turn the [`Trace`] into allocation
//! probabilities with [`posterior::infer`], and score against a known
//! partition with [`metrics::corrected_rand`].

pub mod data;
pub mod dp;
pub mod error;
pub mod labels;
pub mod metrics;
pub mod model;
pub mod partition;
pub mod posterior;
pub mod sampler;
pub mod simulate;

pub use data::{Dataset, TimeGrid};
pub use dp::AlphaPrior;
pub use error::{Error, Result};
pub use labels::Labeling;
pub use model::{log_likelihood, ClusterParams};
pub use partition::{ChainState, MixtureState, Partition};
pub use posterior::{infer, AllocationMatrix, Posterior, PosteriorOptions};
pub use sampler::{run_chain, Chain, ChainConfig, Trace};
pub use simulate::{generate_dataset, Scenario, Simulated};
