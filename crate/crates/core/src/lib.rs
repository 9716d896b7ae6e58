//! Reversible Markov chains on finite state spaces and the functional
//! inequalities that control their entropy decay.
//!
//! The crate builds move-form generators for birth-death chains, zero-range
//! processes and Bernoulli-Laplace (exclusion) models on the complete graph,
//! evaluates entropy and Dirichlet functionals, checks Bochner-type
//! certificates that give lower bounds on modified log-Sobolev constants, and
//! estimates the best constants numerically (upper bounds) for comparison.

pub mod bochner;
pub mod chain;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod evolution;
pub mod functionals;
pub mod models;
pub mod perturbation;
pub mod spectral;

pub use chain::{
    apply_generator, build_generator, check_reversibility, enumerate_states, log_stationary_weights,
    stationary_measure,
    Chain, Generator, Measure, Move, StateFunction, StateSpace,
};
pub use error::{Error, Result};
pub use models::{ModelSpec, Preset, RatePreset};
