//! Simulation and Monte Carlo maximum likelihood estimation for
//! exponential-family random graph models with multilevel structure.
//!
//! Edges are modeled only inside the blocks ("neighborhoods") of an observed
//! node partition, so every likelihood computation factorizes over
//! neighborhoods and runs as a parallel map.

pub mod config;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod gof;
pub mod graph;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod sampler;
pub mod statistics;

pub use config::RunConfig;
pub use error::{Error, ErrorClass, Result};
pub use estimator::{mcmle, mple, EstimateResult, EstimatorConfig, Status};
pub use gof::{gof, GofConfig, GofReport};
pub use graph::{hamming_distance, toggle_edge, Adjacency, MultilevelGraph};
pub use model::{conditional_edge_logit, log_unnormalized, Model, ParameterVector, SizeBuckets, TermMap};
pub use sampler::{SampleBatch, SamplerConfig};
pub use statistics::{change_stat, compute_stats, gof_summaries, StatisticVector, Term, TermSet};
