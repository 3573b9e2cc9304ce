//! Treatment rules and their evaluation: the sign rule, squared-error loss of
//! effect estimates, misclassification against the optimal rule, the
//! inverse-propensity value estimate, and the regret/error diagnostic.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::meta::{CateEstimate, CateMethodTag};
use crate::scenario::{Arm, ScenarioSpec, TrialDataset};
use crate::TauEstimate;

/// Where a rule came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleProvenance {
    /// Sign of the true effect function.
    Optimal,
    /// Sign of a fitted estimate.
    FromCate(CateMethodTag),
    Constant,
    Custom,
}

#[derive(Clone)]
enum RuleKind {
    Constant(Arm),
    /// Half-open intervals, like the scenario response functions.
    Piecewise { cuts: Vec<f64>, arms: Vec<Arm> },
    /// Sign of an effect function, ties assigned to treatment.
    Sign(Arc<dyn TauEstimate>),
}

/// A deterministic, total map from covariate to arm.
#[derive(Clone)]
pub struct TreatmentRule {
    provenance: RuleProvenance,
    kind: RuleKind,
}

impl std::fmt::Debug for TreatmentRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TreatmentRule")
            .field("provenance", &self.provenance)
            .finish_non_exhaustive()
    }
}

impl TreatmentRule {
    pub fn provenance(&self) -> RuleProvenance {
        self.provenance
    }

    /// The rule that always assigns one arm.
    pub fn constant(arm: Arm) -> Self {
        Self {
            provenance: RuleProvenance::Constant,
            kind: RuleKind::Constant(arm),
        }
    }

    /// A piecewise-constant rule: `arms[i]` on the i-th half-open interval.
    pub fn piecewise(cuts: Vec<f64>, arms: Vec<Arm>) -> Result<Self> {
        if arms.len() != cuts.len() + 1 {
            return Err(Error::InvalidConfig(format!(
                "piecewise rule needs cuts + 1 = {} arms, got {}",
                cuts.len() + 1,
                arms.len()
            )));
        }
        for w in cuts.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidConfig(
                    "piecewise rule cuts must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self {
            provenance: RuleProvenance::Custom,
            kind: RuleKind::Piecewise { cuts, arms },
        })
    }

    /// The sign rule of an arbitrary effect function.
    pub fn from_tau<T: TauEstimate + 'static>(tau: T, provenance: RuleProvenance) -> Self {
        Self {
            provenance,
            kind: RuleKind::Sign(Arc::new(tau)),
        }
    }

    /// The optimal rule of a scenario: the sign of its true effect.
    pub fn optimal(spec: &ScenarioSpec) -> Self {
        Self::from_tau(spec.true_cate_fn(), RuleProvenance::Optimal)
    }

    /// The assigned arm at `x`. For sign rules, a zero effect assigns treatment.
    pub fn decide(&self, x: f64) -> Arm {
        match &self.kind {
            RuleKind::Constant(arm) => *arm,
            RuleKind::Piecewise { cuts, arms } => arms[cuts.partition_point(|&c| c <= x)],
            RuleKind::Sign(tau) => {
                if tau.tau_at(x) >= 0.0 {
                    Arm::Treated
                } else {
                    Arm::Control
                }
            }
        }
    }
}

/// The sign rule of a fitted estimate.
pub fn sign_rule(est: &CateEstimate) -> TreatmentRule {
    TreatmentRule::from_tau(est.clone(), RuleProvenance::FromCate(est.method()))
}

/// Where evaluation points came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSource {
    TestDataset,
    UniformGrid,
}

/// Covariate points over which estimates and rules are scored.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    points: Vec<f64>,
    source: GridSource,
}

impl EvalGrid {
    /// The pooled covariates of a dataset.
    pub fn from_dataset(data: &TrialDataset) -> Self {
        Self {
            points: data.x().to_vec(),
            source: GridSource::TestDataset,
        }
    }

    /// `count` evenly spaced points spanning `[lo, hi]` inclusive.
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 || !(lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "uniform grid needs count > 0 and lo < hi, got count={count}, [{lo}, {hi}]"
            )));
        }
        let points = if count == 1 {
            vec![(lo + hi) / 2.0]
        } else {
            (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect()
        };
        Ok(Self {
            points,
            source: GridSource::UniformGrid,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn source(&self) -> GridSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Mean squared error of an effect estimate against the true effect,
/// averaged over the grid.
pub fn emse<T: TauEstimate + ?Sized>(
    est: &T,
    spec: &ScenarioSpec,
    grid: &EvalGrid,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("evaluation grid is empty".into()));
    }
    let mut sum = 0.0;
    for &x in grid.points() {
        let err = est.tau_at(x) - spec.true_cate(x)?;
        sum += err * err;
    }
    Ok(sum / grid.len() as f64)
}

/// Fraction of grid points where `rule` disagrees with the scenario's
/// optimal rule.
pub fn misclassification(
    rule: &TreatmentRule,
    spec: &ScenarioSpec,
    grid: &EvalGrid,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("evaluation grid is empty".into()));
    }
    let optimal = TreatmentRule::optimal(spec);
    let mut disagree = 0usize;
    for &x in grid.points() {
        spec.true_cate(x)?;
        if rule.decide(x) != optimal.decide(x) {
            disagree += 1;
        }
    }
    Ok(disagree as f64 / grid.len() as f64)
}

/// Normalized (ratio-form) inverse-propensity estimate of a rule's value on
/// observed trial data. `propensity` is the design probability of treatment.
pub fn ipw_value(rule: &TreatmentRule, data: &TrialDataset, propensity: f64) -> Result<f64> {
    if !(propensity > 0.0 && propensity < 1.0) {
        return Err(Error::BadPropensity(propensity));
    }
    let mut sum_w = 0.0;
    let mut sum_wy = 0.0;
    for i in 0..data.len() {
        let arm = data.arms()[i];
        if rule.decide(data.x()[i]) == arm {
            let p = match arm {
                Arm::Treated => propensity,
                Arm::Control => 1.0 - propensity,
            };
            let w = 1.0 / p;
            sum_w += w;
            sum_wy += w * data.y()[i];
        }
    }
    if sum_w == 0.0 {
        return Err(Error::NoOverlap);
    }
    Ok(sum_wy / sum_w)
}

/// Regret of a rule against the optimal one, with the estimate's root mean
/// squared error for scale. The ratio is diagnostic only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretReport {
    /// `V(optimal) - V(rule)`, in response units; nonnegative up to
    /// quadrature resolution.
    pub regret: f64,
    /// Root of the estimate's grid EMSE.
    pub rmse: f64,
    /// `regret / rmse`; `None` when the estimate is exact on the grid.
    pub ratio: Option<f64>,
}

/// Compares a rule's exact value to the optimal rule's and reports the
/// regret alongside the estimate's RMSE.
pub fn regret_report<T: TauEstimate + ?Sized>(
    rule: &TreatmentRule,
    est: &T,
    spec: &ScenarioSpec,
    grid: &EvalGrid,
) -> Result<RegretReport> {
    let optimal = TreatmentRule::optimal(spec);
    let regret = spec.analytic_value(&optimal) - spec.analytic_value(rule);
    let rmse = emse(est, spec, grid)?.sqrt();
    let ratio = if rmse > 0.0 { Some(regret / rmse) } else { None };
    Ok(RegretReport { regret, rmse, ratio })
}
