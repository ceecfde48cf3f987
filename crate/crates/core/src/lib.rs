//! Language histories under reinforcement-learning production algorithms.
//!
//! Speakers pick a message, try to express it as a phrasal sign, and
//! reinforce the propensity behind a successful utterance. Repeating this
//! generates a language history; running many histories shows which
//! conventions (phrasal composition, grammatical relations, word order, case
//! marking) emerge.
//!
//! ```
//! use syntax_emergence::engine::{derive_stream, ForgettingPolicy, LearningState, MessageDistribution};
//! use syntax_emergence::fundamental::FundamentalScenario;
//! use syntax_emergence::history::run_history;
//!
//! let mut scenario = FundamentalScenario::new(
//!     MessageDistribution::new(vec![0.6, 0.3, 0.1]).unwrap(),
//!     LearningState::new(vec![1.0, 1.0, 1.0], 0.0).unwrap(),
//!     ForgettingPolicy::none(),
//! )
//! .unwrap();
//! let history = run_history(&mut scenario, &mut derive_stream(42, 0), 1000, &[10, 100, 1000]).unwrap();
//! assert_eq!(history.utterances.len(), 1000);
//! assert_eq!(history.trajectory.checkpoints, vec![10, 100, 1000]);
//! ```

pub mod analysis;
pub mod cli;
pub mod competition;
pub mod config;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod forms;
pub mod fundamental;
pub mod hearer;
pub mod history;
pub mod output;
pub mod recursion;
pub mod sequential;
pub mod similarity;

pub use error::{Error, Result};

/// Version recorded in output manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
