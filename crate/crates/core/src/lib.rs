//! Online logistic regression under norm constraints: Bayesian grid mixtures,
//! exact regret accounting, lower-bound constructions and a bound calculator.

pub mod adversary;
pub mod baselines;
pub mod bounds;
pub mod comparator;
pub mod error;
pub mod harness;
pub mod logistic;
pub mod mixture;
pub mod online;

pub use comparator::{best_comparator, project, ComparatorResult, Norm, NormConstraint};
pub use error::{Error, Result};
pub use logistic::{cumulative_loss, example_loss, label_probability, ComparatorRef, Label, LabeledExample, ParamVector, RegretTrace};
pub use mixture::{build_grid, default_spacing, run_online, LogPosterior, ParamGrid, PriorSpec};
pub use online::{run_predictor, OnlinePredictor};
