//! Structural causal models, causal-graph queries, and feature attribution
//! via observational Shapley and causal-context (interventional) Shapley
//! values.
//!
//! The crate is organized as:
//! - [`graph`]: DAGs and purely structural queries (paths, blocking,
//!   d-separation, backdoor paths, graph surgery, collider impact).
//! - [`scm`]: structural causal models, ancestral sampling, atomic and
//!   stochastic interventions, the random linear SCM generator, fitting
//!   mechanisms from data.
//! - [`dataset`]: columnar samples with CSV I/O and an optional per-row
//!   intervention indicator.
//! - [`estimator`]: pluggable conditional-expectation learners (linear
//!   least squares, discrete conditional tables, binned nonparametric).
//! - [`attribution`]: Shapley weights, observational and interventional
//!   importance, Shapley and cc-Shapley values, the structural shortcut
//!   lemmas and the backdoor estimator.
//! - [`experiments`]: built-in reproductions of the reference studies with
//!   analytic oracles where available.
//! - [`render`]: static SVG beeswarm output.

pub mod attribution;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod graph;
pub mod render;
pub mod scm;
pub mod seed;

pub use error::{Error, Result};
pub use graph::{CausalGraph, NodeId, Path, WeightedGraph};
pub use scm::Scm;
