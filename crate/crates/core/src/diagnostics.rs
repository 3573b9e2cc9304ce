//! Empirical diagnostics for the relationship between estimation error and
//! rule quality: a pointwise three-case classifier comparing two estimates'
//! decisions, a strict pointwise-dominance check, and a Monte Carlo membership
//! report for the three nested comparison criteria (mean squared error,
//! pointwise dominance, misclassification).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::meta::{fit_standard_with, fit_xlearner_with, StandardConfig, XLearnerConfig};
use crate::policy::EvalGrid;
use crate::scenario::{ScenarioSpec, TrialDataset};
use crate::seed::derive_seed;
use crate::TauEstimate;

/// How one estimate's decision at a point compares to another's.
/// "Improved"/"worsened" describe estimate one relative to estimate two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointwiseCase {
    /// Both decisions are right, or both are wrong.
    SameError,
    /// Estimate one decides correctly where estimate two does not.
    Improved,
    /// Estimate one decides incorrectly where estimate two is correct.
    Worsened,
}

fn sign_is_positive(v: f64) -> bool {
    // Module-wide tie convention: a zero effect counts as positive.
    v >= 0.0
}

/// Classifies a point by the decisions the two estimates imply.
pub fn classify_point(tau: f64, t1: f64, t2: f64) -> PointwiseCase {
    let d0 = sign_is_positive(tau);
    let wrong1 = sign_is_positive(t1) != d0;
    let wrong2 = sign_is_positive(t2) != d0;
    match (wrong1, wrong2) {
        (false, true) => PointwiseCase::Improved,
        (true, false) => PointwiseCase::Worsened,
        _ => PointwiseCase::SameError,
    }
}

/// Result of the strict pointwise-dominance check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct S1Check {
    /// Whether `(t1 - tau)^2 < (t2 - tau)^2` held at every grid point.
    pub holds: bool,
    /// Number of grid points where it failed.
    pub violations: usize,
}

/// Checks strict pointwise squared-error dominance of `est1` over `est2`.
pub fn s1_check<A, B>(est1: &A, est2: &B, spec: &ScenarioSpec, grid: &EvalGrid) -> Result<S1Check>
where
    A: TauEstimate + ?Sized,
    B: TauEstimate + ?Sized,
{
    let mut violations = 0usize;
    for &x in grid.points() {
        let tau = spec.true_cate(x)?;
        let e1 = est1.tau_at(x) - tau;
        let e2 = est2.tau_at(x) - tau;
        if !(e1 * e1 < e2 * e2) {
            violations += 1;
        }
    }
    Ok(S1Check {
        holds: violations == 0,
        violations,
    })
}

/// An estimation strategy the membership report can compare.
#[derive(Debug, Clone, PartialEq)]
pub enum CateMethod {
    /// The identity oracle: returns the true effect function.
    TrueTau,
    Standard(StandardConfig),
    XLearner(XLearnerConfig),
}

impl CateMethod {
    pub fn label(&self) -> &'static str {
        match self {
            CateMethod::TrueTau => "oracle",
            CateMethod::Standard(_) => "standard",
            CateMethod::XLearner(_) => "xlearner",
        }
    }

    /// Fits the strategy on one dataset.
    pub fn fit(&self, spec: &ScenarioSpec, data: &TrialDataset) -> Result<Box<dyn TauEstimate>> {
        Ok(match self {
            CateMethod::TrueTau => Box::new(spec.true_cate_fn()),
            CateMethod::Standard(cfg) => Box::new(fit_standard_with(data, cfg)?),
            CateMethod::XLearner(cfg) => Box::new(fit_xlearner_with(data, cfg)?),
        })
    }
}

/// Monte Carlo evidence for the three comparison criteria between two
/// estimation strategies on one distribution.
///
/// Gaps are oriented so that positive favors method one; "strict membership"
/// requires the gap to exceed twice its Monte Carlo standard error. The
/// pointwise criterion is summarized by the fraction of replications where
/// dominance held across the whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub scenario: String,
    pub method1: String,
    pub method2: String,
    pub m: usize,
    pub n: usize,
    pub replications: usize,
    pub failed_replications: usize,
    pub grid_size: usize,
    /// Mean of `emse2 - emse1` over replications and its standard error.
    pub emse_gap: f64,
    pub emse_gap_se: f64,
    pub in_s0: bool,
    /// Fraction of replications with full-grid pointwise dominance.
    pub s1_fraction: f64,
    /// Pointwise failures summed over all replications and grid points.
    pub s1_violations: u64,
    pub in_s1: bool,
    /// Mean of `misclass2 - misclass1` and its standard error.
    pub misclass_gap: f64,
    pub misclass_gap_se: f64,
    pub in_s2: bool,
    /// Replications where dominance held but the grid EMSE inequality did
    /// not. Zero by construction; reported as a sanity check.
    pub nesting_violations: usize,
}

impl MembershipReport {
    pub fn csv_header() -> &'static str {
        "scenario,method1,method2,m,n,replications,failed,grid_size,\
         emse_gap,emse_gap_se,in_s0,s1_fraction,s1_violations,in_s1,\
         misclass_gap,misclass_gap_se,in_s2,nesting_violations"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.method1,
            self.method2,
            self.m,
            self.n,
            self.replications,
            self.failed_replications,
            self.grid_size,
            self.emse_gap,
            self.emse_gap_se,
            self.in_s0,
            self.s1_fraction,
            self.s1_violations,
            self.in_s1,
            self.misclass_gap,
            self.misclass_gap_se,
            self.in_s2,
            self.nesting_violations
        )
    }
}

impl std::fmt::Display for MembershipReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "membership report: {} vs {} on {} (m={}, n={}, {} replications, {} failed, grid {})",
            self.method1,
            self.method2,
            self.scenario,
            self.m,
            self.n,
            self.replications,
            self.failed_replications,
            self.grid_size
        )?;
        writeln!(
            f,
            "  S0 (mean squared error):    gap {:>12.6e} +- {:.3e}  strict: {}",
            self.emse_gap, self.emse_gap_se, self.in_s0
        )?;
        writeln!(
            f,
            "  S1 (pointwise dominance):   held in {:.1}% of replications ({} pointwise failures)  strict: {}",
            100.0 * self.s1_fraction,
            self.s1_violations,
            self.in_s1
        )?;
        writeln!(
            f,
            "  S2 (misclassification):     gap {:>12.6e} +- {:.3e}  strict: {}",
            self.misclass_gap, self.misclass_gap_se, self.in_s2
        )?;
        write!(f, "  nesting violations: {}", self.nesting_violations)
    }
}

struct RepOutcome {
    emse1: f64,
    emse2: f64,
    mis1: f64,
    mis2: f64,
    s1_holds: bool,
    s1_violations: usize,
}

/// Runs the full fit-and-evaluate pipeline `replications` times and
/// aggregates the three comparison criteria with Monte Carlo standard errors.
///
/// Replication seeds derive from `(base_seed, m, n, rep)`, so runs are
/// deterministic and individual replications reproducible in isolation.
#[allow(clippy::too_many_arguments)]
pub fn membership_report(
    method1: &CateMethod,
    method2: &CateMethod,
    spec: &ScenarioSpec,
    m: usize,
    n: usize,
    replications: usize,
    base_seed: u64,
    grid_size: usize,
) -> Result<MembershipReport> {
    if replications < 2 {
        return Err(Error::InvalidConfig(format!(
            "membership report needs at least 2 replications, got {replications}"
        )));
    }
    if grid_size == 0 {
        return Err(Error::InvalidConfig("grid_size must be positive".into()));
    }
    // Points with a zero true effect have no defined optimal decision and are
    // excluded; the built-in scenarios have none.
    let full = EvalGrid::uniform(spec.x_low(), spec.x_high(), grid_size)?;
    let grid: Vec<f64> = full
        .points()
        .iter()
        .copied()
        .filter(|&x| spec.true_cate(x).expect("grid point in range") != 0.0)
        .collect();
    if grid.is_empty() {
        return Err(Error::InvalidConfig(
            "every grid point has a zero true effect; nothing to classify".into(),
        ));
    }
    let taus: Vec<f64> = grid
        .iter()
        .map(|&x| spec.true_cate(x).expect("grid point in range"))
        .collect();

    let outcomes: Vec<Option<RepOutcome>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let seed = derive_seed(base_seed, &[m as u64, n as u64, rep as u64]);
            let data = spec.generate(m, n, seed).ok()?;
            let est1 = method1.fit(spec, &data).ok()?;
            let est2 = method2.fit(spec, &data).ok()?;
            let mut sq1 = 0.0;
            let mut sq2 = 0.0;
            let mut wrong1 = 0usize;
            let mut wrong2 = 0usize;
            let mut violations = 0usize;
            for (&x, &tau) in grid.iter().zip(&taus) {
                let t1 = est1.tau_at(x);
                let t2 = est2.tau_at(x);
                let e1 = t1 - tau;
                let e2 = t2 - tau;
                sq1 += e1 * e1;
                sq2 += e2 * e2;
                if !(e1 * e1 < e2 * e2) {
                    violations += 1;
                }
                let d0 = sign_is_positive(tau);
                if sign_is_positive(t1) != d0 {
                    wrong1 += 1;
                }
                if sign_is_positive(t2) != d0 {
                    wrong2 += 1;
                }
            }
            let count = grid.len() as f64;
            Some(RepOutcome {
                emse1: sq1 / count,
                emse2: sq2 / count,
                mis1: wrong1 as f64 / count,
                mis2: wrong2 as f64 / count,
                s1_holds: violations == 0,
                s1_violations: violations,
            })
        })
        .collect();

    let completed: Vec<&RepOutcome> = outcomes.iter().flatten().collect();
    let failed = replications - completed.len();
    if completed.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} of {replications} replications completed",
            completed.len()
        )));
    }

    let r = completed.len() as f64;
    let mean_se = |diffs: &[f64]| -> (f64, f64) {
        let mean = diffs.iter().sum::<f64>() / r;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (r - 1.0);
        (mean, (var / r).sqrt())
    };
    let emse_diffs: Vec<f64> = completed.iter().map(|o| o.emse2 - o.emse1).collect();
    let mis_diffs: Vec<f64> = completed.iter().map(|o| o.mis2 - o.mis1).collect();
    let (emse_gap, emse_gap_se) = mean_se(&emse_diffs);
    let (misclass_gap, misclass_gap_se) = mean_se(&mis_diffs);

    let s1_count = completed.iter().filter(|o| o.s1_holds).count();
    let s1_fraction = s1_count as f64 / r;
    let s1_violations: u64 = completed.iter().map(|o| o.s1_violations as u64).sum();
    let s1_se = (s1_fraction * (1.0 - s1_fraction) / r).sqrt();

    // Pointwise dominance on the grid forces the grid EMSE inequality; any
    // replication violating that indicates a defect in this module.
    let nesting_violations = completed
        .iter()
        .filter(|o| o.s1_holds && !(o.emse1 < o.emse2))
        .count();

    Ok(MembershipReport {
        scenario: spec.name().to_string(),
        method1: method1.label().to_string(),
        method2: method2.label().to_string(),
        m,
        n,
        replications,
        failed_replications: failed,
        grid_size: grid.len(),
        emse_gap,
        emse_gap_se,
        in_s0: emse_gap > 0.0 && emse_gap > 2.0 * emse_gap_se,
        s1_fraction,
        s1_violations,
        in_s1: s1_fraction - 0.5 > 2.0 * s1_se,
        misclass_gap,
        misclass_gap_se,
        in_s2: misclass_gap > 0.0 && misclass_gap > 2.0 * misclass_gap_se,
        nesting_violations,
    })
}
