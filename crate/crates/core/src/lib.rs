//! Design-based causal inference under interference.
//!
//! A [`Design`] is a known distribution over assignment vectors, an
//! [`ExposureMapping`] collapses each vector into per-unit exposure labels,
//! and an [`OutcomeSchedule`] holds the raw potential outcomes y_i(z). From
//! these the crate computes exact expected potential outcomes and their
//! contrasts, checks NURVA and SUTVA, and estimates the targets from one
//! realization with Horvitz–Thompson weighting and conservative variances.
//!
//! Exact work runs on `BigRational`; the replication harness uses `f64`.
//! Supports larger than the enumeration cap (default 2·10⁶ points, override
//! with `EXPOSURE_ENGINE_CAP`) fall back to closed forms or, on request,
//! Monte Carlo exposure probabilities.
//!
//! The `examples/` directory walks through each capability:
//!
//! | example | shows |
//! |---|---|
//! | `household_turnout` | estimands that move with the design |
//! | `design_dependence` | the same schedule under alternative designs and mappings |
//! | `general_equilibrium` | job-training and campaign-ad reversals |
//! | `voter_carryover` | carryover exposures and their probabilities |
//! | `rebel_survey` | ordered sampling and placeholder outcomes |
//! | `network_exposure` | four-level network exposures with positivity trimming |
//! | `hidden_variation` | NURVA without SUTVA |
//! | `conservative_variance` | V̂_C against the exact variance |
//! | `covariate_adjustment` | regression-adjusted estimation |
//! | `consistency_sweep` | RMSE and regularity ratios as N grows |
//! | `coverage_study` | Wald interval coverage |

pub mod assumptions;
pub mod cli;
pub mod corpus;
pub mod design;
pub mod error;
pub mod estimands;
pub mod estimation;
pub mod exposure;
pub mod montecarlo;
pub mod normal;
pub mod outcomes;
pub mod scalar;

pub use assumptions::{
    check_nurva, check_sutva, regularity_diagnostics, AssumptionVerdict, Counterexample,
};
pub use corpus::{load_corpus, Generator, Instance, CORPUS_NAMES};
pub use design::{split_seed, AssignmentVector, Design, DesignSpace, EnumerationCap};
pub use error::{Error, Result};
pub use estimands::{
    aeed, aepo, compute_estimands, eed, epo, exposure_probabilities, EstimandReport,
    EstimandRequest, ExposureProbabilities, Provenance,
};
pub use estimation::{estimate, wald_ci, EstimateReport, Estimator, Prediction, Target};
pub use exposure::{ExposureMapping, Label};
pub use montecarlo::{
    consistency_sweep, coverage_study, exact_expectation, replicate, EstimatorConfig, Statistic,
};
pub use outcomes::{ObservedData, OutcomeRule, OutcomeSchedule};
pub use scalar::{Exact, Scalar};
