//! RuleSHAP: rule-ensemble regression with Bayesian uncertainty on local
//! feature attributions.
//!
//! The pipeline turns a tabular regression problem into an interpretable
//! linear model over decision rules and linear terms, fits it with a
//! split-shrinkage horseshoe Gibbs sampler, and computes exact interventional
//! Shapley values (marginal and pairwise-interaction) for every posterior
//! draw, so that per-observation effects come with credible intervals.
//!
//! Modules follow the pipeline order:
//! - [`dataset`]: CSV ingestion, winsorization/standardization, dummy coding,
//!   and the correlated Friedman benchmark generator.
//! - [`rulegen`]: regression trees, the smoothing random forest, rule
//!   disaggregation, and structured shrinkage scales.
//! - [`horseshoe`]: the Gibbs sampler over rule and linear coefficients.
//! - [`shapley`]: closed-form attribution estimators plus the brute-force
//!   subset-enumeration oracle they are verified against.
//! - [`inference`]: posterior aggregation into reports and rejection rates.
//! - [`model`]: the fitted-model bundle and its persistence format.

pub mod dataset;
pub mod error;
pub mod horseshoe;
pub mod inference;
pub mod model;
pub mod rng;
pub mod rulegen;
pub mod shapley;
pub mod stats;

pub use dataset::{Dataset, FriedmanConfig, Preprocessing};
pub use error::{Error, Result};
pub use horseshoe::{DesignMatrices, GibbsConfig, PosteriorDraws};
pub use inference::{effect_report, interaction_report, EffectReport, InteractionReport};
pub use model::FittedModel;
pub use rulegen::{Forest, Rule, SmoothingConfig, Tree};
pub use shapley::{model_shapley, ShapleyCube};
