//! End-to-end task-oriented dialog modeling at desk scale.
//!
//! The crate implements the full cascaded pipeline: dialog corpora are
//! linearized into context/target token sequences, a shared-encoder /
//! dual-decoder transformer generates dialog states, action states, and
//! delexicalized responses, and two semantic-aware contrastive objectives
//! (point-wise and group-wise) shape the encoder representation space during
//! training. Evaluation (inform/success/BLEU/combined, act F1, joint goal
//! accuracy), low-resource protocols, hyperparameter sweeps, and
//! representation diagnostics round out the toolkit.

pub mod analysis;
pub mod corpus;
pub mod dbkit;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod runs;
pub mod schema;
pub mod synth;
pub mod tokenizer;
pub mod trainer;

pub use error::{Error, Result};

/// Version string stamped into run manifests and checkpoints.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
