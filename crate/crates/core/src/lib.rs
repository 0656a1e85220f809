//! Vector-space speaker anonymization toolkit.
//!
//! Operates on pre-extracted speaker embeddings:
//!
//! * [`anonymizer`]: pseudo-speaker vectors averaged from a random subset of
//!   the cosine-farthest pool vectors.
//! * [`coral`]: correlation alignment of anonymized vectors to a target domain.
//! * [`asv`]: cosine trial scoring and equal error rate.
//! * [`harness`]: unprotected / ignorant / lazy-informed attack experiments
//!   and CORAL fit-size sweeps.
//! * [`synth`]: synthetic multi-domain corpora for desk-scale experiments.
//! * [`store`], [`trials`]: the text dataset and trial-list formats.

pub mod anonymizer;
pub mod asv;
pub mod coral;
mod error;
pub mod harness;
pub mod io;
pub mod kv;
pub mod projection;
pub mod seed;
pub mod stats;
pub mod store;
pub mod synth;
pub mod trials;

pub use error::{Error, Result};

pub use anonymizer::{anonymize, anonymize_set, cosine_distance, select_farthest, AnonymizationPolicy, SeedScope};
pub use asv::{compute_eer, score_trials, ScoreReport, ScoredTrial};
pub use coral::{coral_apply, coral_fit, CoralTransform, DenormMode};
pub use harness::{ExperimentReport, Scenario, ScenarioConfig};
pub use projection::project_2d;
pub use stats::{fit_stats, sym_power, DomainStats, Exponent};
pub use store::{load_vector_set, save_vector_set, SpeakerVector, VectorSet};
pub use synth::SynthSpec;
pub use trials::{generate_trials, ImpostorPolicy, Label, TrialSet};

/// Version tag of every text format written by this crate.
pub const FORMAT_VERSION: u32 = 1;

/// Re-exported linear algebra types used in public signatures.
pub use nalgebra::{DMatrix, DVector};
