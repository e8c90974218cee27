//! Task recognition from mouse trajectories over screen areas of interest.
//!
//! The crate turns raw cursor trajectories into discrete observation
//! sequences — either by strict kernel membership or by possibilistic
//! reasoning about fixations that fall close to an area without entering
//! it — and classifies those sequences with a discrete hidden Markov model
//! or a linear-chain conditional random field. A synthetic trajectory
//! generator, a leave-one-out evaluation harness and an `omega` sweep close
//! the loop for end-to-end experiments.
//!
//! The narrative guide lives in the `book/` directory of the repository;
//! its code snippets double as doc-tests of this crate.
//!
//! ```
//! use possivec::{builtin_layout, builtin_scripts, generate_trajectory,
//!                vectorize_classical, GeneratorConfig};
//!
//! let layout = builtin_layout();
//! let scripts = builtin_scripts();
//! let config = GeneratorConfig::default();
//! let trajectory = generate_trajectory(&scripts[0], &layout, &config, 7);
//! let sequence = vectorize_classical(&trajectory, &layout);
//! assert!(!sequence.is_empty());
//! ```

pub mod aoi;
pub mod crf;
pub mod eval;
pub mod hmm;
pub mod io;
pub mod possibility;
pub mod seed;
pub mod synth;
pub mod vectorize;

mod error;
mod optim;

#[cfg(doctest)]
mod book;

pub use aoi::{
    compute_attraction_stats, kernel_distance, AreaOfInterest, AttractionStats, Fixation,
    InterfaceLayout, KernelRect, Region, Trajectory,
};
pub use crf::{train_crf, CrfModel, CrfTrainConfig, FeatureSpace, LabeledPath};
pub use error::{Error, Result};
pub use eval::{
    omega_sweep, run_loocv, sweep_to_csv, AccuracyReport, ClassifierKind, ConfusionMatrix,
    FoldFailure, LoocvOutcome, PipelineConfig, SweepPoint, VectorizerKind,
};
pub use hmm::{baum_welch_train, baum_welch_train_traced, classify_hmm, HmmModel, HmmTrainConfig};
pub use possibility::{
    assess_fixation, attachment_degree, bezdek_membership, necessity_near, possibility_far,
    MembershipAssessment, PossibilityDistribution,
};
pub use synth::{
    builtin_layout, builtin_scripts, generate_dataset, generate_dataset_with, generate_trajectory,
    DatasetEntry, GeneratorConfig, TaskScript,
};
pub use vectorize::{
    classical_emission, possibilistic_emission, vectorize_classical, vectorize_possibilistic,
    ObservationSequence, VectorizerParams,
};
