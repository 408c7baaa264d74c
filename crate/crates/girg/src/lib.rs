//! Simulation and prediction toolkit for geometric inhomogeneous random
//! graphs in the subcritical regime.
//!
//! The crate samples finite-window realisations of the marked Poisson graph,
//! decides annulus-crossing and ball-escape events, estimates their
//! probabilities by seeded parallel Monte Carlo, and compares the measured
//! decay against closed-form asymptotic exponents and exact
//! Poisson-functional oracles.

pub mod analytics;
pub mod connectivity;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sampler;

pub use connectivity::{EdgeBudget, EventSource, EventSpec};
pub use error::{Error, Result};
pub use estimator::{BernoulliEstimate, EstimateOptions, SlopeFit};
pub use model::{ModelParams, Profile, RegimeClass, TheoremRegime};
pub use sampler::{EdgeStrategy, SampledGraph, Vertex, VertexSet};
