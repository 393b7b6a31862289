//! Active node classification on graphs with a Gaussian-Markov-random-field
//! relaxation of the label field.
//!
//! * [`graph`]: weighted graphs, regularized Laplacians, generators, loaders.
//! * [`gmrf`]: conditional-mean model with incremental observe/shrink updates.
//! * [`strategies`]: expected-model-change utilities and query selection.
//! * [`bench`]: seeded Monte-Carlo experiments and CSV output.
//! * [`checks`]: self-contained property suites run by the `check` command.

pub mod bench;
pub mod checks;
pub mod error;
pub mod gmrf;
pub mod graph;
pub mod strategies;

pub use error::{Error, Result};
