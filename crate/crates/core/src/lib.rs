//! Optimal stopping for the number of connected components of a graph
//! whose vertices become active in uniformly random order.
//!
//! A player watches vertices of a known graph arrive one at a time and may
//! stop at any moment, scoring the number of connected components induced
//! by the active vertices. Blind players see only how many vertices have
//! arrived; full-information players see which.

pub mod activation;
pub mod exact;
pub mod generate;
pub mod graph;
pub mod io;
pub mod metagame;
pub mod montecarlo;
pub mod rational;
pub mod strategy;

pub use activation::{ActivationError, ActivationState, WitnessIndex};
pub use exact::{ExactError, ValueTable};
pub use generate::{Family, GenerateError, Instance};
pub use graph::{ConstructionEntry, ConstructionSequence, Graph, GraphError, KSystem};
pub use montecarlo::{Estimate, EstimatorConfig, MonteCarloError};
pub use rational::Rational;
pub use strategy::{StopOutcome, StrategyError, StrategySpec};
