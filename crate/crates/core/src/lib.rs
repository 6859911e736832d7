//! Majority-vote ensembles of fairness-constrained members.
//!
//! Each member post-processes a task score with per-group weights fitted on
//! its own fold so that a fairness constraint (minimum group recall or an
//! equal-opportunity gap) holds on that fold. The ensemble predicts by
//! majority vote. The crate also measures whether the ensemble is
//! *competent* on a set of points, checks the error-improvement bounds that
//! competence implies, and summarises fairness-accuracy trade-offs as FairAUC.
//!
//! ```
//! use fairvote::dataio::{stratified_kfold, synthesize, SynthConfig};
//! use fairvote::ensemble::{build_ensemble, predict, TieBreak};
//! use fairvote::fairfit::{FairnessConstraint, GridSpec};
//!
//! let table = synthesize(&SynthConfig::small_example(5, 42)).unwrap();
//! let folds = stratified_kfold(&table, 5, 42).unwrap();
//! let constraint = FairnessConstraint::min_recall(0.7).unwrap();
//! let ensemble =
//!     build_ensemble(&table, &folds, &constraint, &GridSpec::default(), TieBreak::Positive).unwrap();
//! let out = predict(&ensemble, &table, None).unwrap();
//! assert_eq!(out.predictions.len(), table.len());
//! ```

pub mod competence;
pub mod dataio;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod fairfit;
pub mod metrics;
pub mod theory;

pub use error::{Error, ErrorClass, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/fairfit.md")]
    mod fairfit {}
    #[doc = include_str!("../../../book/src/ensemble.md")]
    mod ensemble {}
    #[doc = include_str!("../../../book/src/competence.md")]
    mod competence {}
    #[doc = include_str!("../../../book/src/theory.md")]
    mod theory {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
