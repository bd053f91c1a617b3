//! Estimating how many data errors remain undetected after fallible,
//! crowd-style cleaning passes.
//!
//! Worker votes are collected into a [`VoteLog`]. From a prefix of the log we
//! derive frequency-of-frequency fingerprints ([`FStatistics`]) and feed them
//! to species estimators:
//!
//! - [`estimators`]: nominal / majority / extrapolation baselines, Chao92 and
//!   the shifted, majority-based vChao92.
//! - [`switch`]: treats every change of an item's majority consensus as a
//!   species and estimates how many consensus switches are still to come.
//! - [`priority`]: heuristic-gated sampling with epsilon exploration.
//! - [`pairs`]: candidate-pair generation for entity resolution.
//! - [`sim`]: a seeded synthetic crowd and the SRMSE metric.
//! - [`trajectory`]: per-task replay of every estimator.

pub mod cli;
pub mod csvio;
pub mod error;
pub mod estimators;
pub mod pairs;
pub mod priority;
pub mod sim;
pub mod switch;
pub mod trajectory;
pub mod votes;

pub use error::{Error, Result};
pub use estimators::EstimatorOutput;
pub use switch::{Direction, SwitchEvent, SwitchStats};
pub use votes::{FStatistics, Label, TallyState, Vote, VoteLog};
