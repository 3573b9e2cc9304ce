//! Simulation library for contrasting treatment-effect estimation quality
//! with treatment-rule quality.
//!
//! The pieces, bottom up:
//!
//! - [`scenario`]: synthetic two-arm trial distributions with analytic ground
//!   truth, and reproducible sampling from them.
//! - [`learners`]: the univariate regression primitives (OLS, LOESS).
//! - [`meta`]: CATE estimators built from those primitives — the standard
//!   arm-difference estimator and the X-learner.
//! - [`policy`]: treatment rules (the sign rule) and their evaluation: EMSE,
//!   misclassification against the optimal rule, inverse-propensity value,
//!   regret.
//! - [`diagnostics`]: pointwise decision comparison and Monte Carlo
//!   membership evidence for the nested comparison criteria.
//! - [`harness`]: the experiment grid, CSV outputs, and plot-panel data.

// Negated float comparisons (`!(x > 0.0)`) are deliberate throughout: they
// treat NaN as a validation failure instead of silently passing it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod learners;
pub mod meta;
pub mod policy;
pub mod scenario;
pub mod seed;

/// An evaluable estimate of the conditional average treatment effect.
///
/// Implemented by fitted estimators and by the true effect function, so rules
/// and metrics accept either interchangeably.
pub trait TauEstimate: Send + Sync {
    /// The estimated treatment effect at covariate `x`.
    fn tau_at(&self, x: f64) -> f64;
}

impl<T: TauEstimate + ?Sized> TauEstimate for Box<T> {
    fn tau_at(&self, x: f64) -> f64 {
        (**self).tau_at(x)
    }
}

impl<T: TauEstimate + ?Sized> TauEstimate for std::sync::Arc<T> {
    fn tau_at(&self, x: f64) -> f64 {
        (**self).tau_at(x)
    }
}

impl<T: TauEstimate + ?Sized> TauEstimate for &T {
    fn tau_at(&self, x: f64) -> f64 {
        (**self).tau_at(x)
    }
}

pub use error::{Error, Result};
pub use harness::{
    emit_plot_data, ingest_csv, run_experiment, ExperimentConfig, ExperimentOutput,
    FailureRecord, MetricsRecord,
};
pub use learners::{fit_loess, fit_ols, CurveMethod, FittedCurve, LoessConfig};
pub use meta::{
    evaluate_cate, fit_standard, fit_standard_with, fit_xlearner, fit_xlearner_with,
    CateEstimate, CateMethodTag, LearnerChoice, StandardConfig, WeightMode, XLearnerConfig,
};
pub use policy::{
    emse, ipw_value, misclassification, regret_report, sign_rule, EvalGrid, GridSource,
    RegretReport, RuleProvenance, TreatmentRule,
};
pub use scenario::{Arm, ScenarioSpec, TrialDataset, TrueCate};
pub use seed::derive_seed;
