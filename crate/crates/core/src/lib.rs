//! Random-parameters multinomial logit estimation by simulated maximum
//! likelihood.
//!
//! The crate covers the whole inferential pipeline for discrete-outcome
//! models whose coefficients vary across observations under a normal mixing
//! distribution, with the means (and optionally variances) of the random
//! coefficients shifted by observation covariates:
//!
//! - declarative model specifications mapping dataset columns into
//!   alternative-specific utilities ([`model`]),
//! - CSV ingestion, validation, interaction columns, and summary statistics
//!   ([`data`]),
//! - Halton quasi-random draws transformed to normals ([`draws`]),
//! - the simulated log-likelihood and its gradients ([`likelihood`]),
//! - BFGS maximization, covariance / t-statistics, fit statistics, and
//!   distribution shares ([`estimate`]),
//! - average discrete-change marginal effects ([`effects`]),
//! - synthetic data generation and parameter-recovery experiments
//!   ([`synth`]),
//! - the results document and its table rendering ([`report`]).

pub mod bfgs;
pub mod data;
pub mod draws;
pub mod effects;
pub mod error;
pub mod estimate;
pub mod likelihood;
pub mod model;
pub mod parallel;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synth;

pub use bfgs::{maximize, Maximization, OptimizerConfig, StopReason};
pub use data::{ColumnSummary, Dataset, LoadOptions, Observation, SummaryTable};
pub use draws::{generate_draw_block, halton_value, DrawBlock, DrawConfig};
pub use effects::{
    average_discrete_effects, default_effect_variables, effects_table, EffectsScope,
    MarginalEffectsTable,
};
pub use error::{Error, Result};
pub use estimate::{
    covariance_and_tstats, estimate, fit_statistics, maximize_loglik, numerical_hessian,
    share_above_zero, CovarianceMethod, EstimationResult, FitStatistics, RandomShare,
};
pub use likelihood::{
    choice_probabilities, LikelihoodValue, ModelContext, ParameterVector, PROBABILITY_FLOOR,
};
pub use model::{
    AlternativeSet, CoefficientKind, Distribution, ModelSpec, ParamDescriptor, ParamRole,
    ParameterLayout, UtilityEntry,
};
pub use report::{render_report, ParameterRecord, ReportOptions, ResultsDocument};
pub use stats::{chi_square_upper_tail, inv_normal_cdf, normal_cdf, normal_pdf};
pub use synth::{
    recovery_experiment, simulate_dataset, CovariateGenConfig, RecoveryReport, Replication,
};
