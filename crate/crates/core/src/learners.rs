//! Univariate regression primitives: ordinary least squares and LOESS
//! (locally weighted local-polynomial regression with the tricube kernel).
//!
//! Both produce a [`FittedCurve`], an immutable evaluable estimate of a
//! response function. OLS fits eagerly; LOESS retains its training points and
//! solves a small weighted least-squares problem per query.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Which primitive produced a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMethod {
    Ols,
    Loess,
}

/// LOESS hyperparameters: neighborhood fraction and local polynomial degree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoessConfig {
    span: f64,
    degree: usize,
}

impl LoessConfig {
    /// `span` must lie in (0, 1]; `degree` is 0 (local mean) or 1 (local line).
    pub fn new(span: f64, degree: usize) -> Result<Self> {
        if !(span > 0.0 && span <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "loess span must be in (0, 1], got {span}"
            )));
        }
        if degree > 1 {
            return Err(Error::InvalidConfig(format!(
                "loess degree must be 0 or 1, got {degree}"
            )));
        }
        Ok(Self { span, degree })
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

impl Default for LoessConfig {
    /// Cleveland's classical defaults.
    fn default() -> Self {
        Self { span: 0.75, degree: 1 }
    }
}

#[derive(Debug)]
enum CurveModel {
    Ols {
        intercept: f64,
        slope: f64,
    },
    /// Training points sorted by x; each evaluation solves its local problem.
    Loess {
        xs: Vec<f64>,
        ys: Vec<f64>,
        cfg: LoessConfig,
        neighborhood: usize,
    },
}

/// An immutable fitted regression curve.
///
/// Evaluation is deterministic and thread-safe. OLS extends its global line
/// beyond the training range; LOESS clamps queries to the training range.
#[derive(Debug)]
pub struct FittedCurve {
    model: CurveModel,
    train_min: f64,
    train_max: f64,
    // Queries whose local design was degenerate and fell back to a weighted mean.
    fallbacks: AtomicU64,
}

impl Clone for FittedCurve {
    fn clone(&self) -> Self {
        let model = match &self.model {
            CurveModel::Ols { intercept, slope } => CurveModel::Ols {
                intercept: *intercept,
                slope: *slope,
            },
            CurveModel::Loess { xs, ys, cfg, neighborhood } => CurveModel::Loess {
                xs: xs.clone(),
                ys: ys.clone(),
                cfg: *cfg,
                neighborhood: *neighborhood,
            },
        };
        Self {
            model,
            train_min: self.train_min,
            train_max: self.train_max,
            fallbacks: AtomicU64::new(self.fallbacks.load(Ordering::Relaxed)),
        }
    }
}

impl FittedCurve {
    pub fn method(&self) -> CurveMethod {
        match self.model {
            CurveModel::Ols { .. } => CurveMethod::Ols,
            CurveModel::Loess { .. } => CurveMethod::Loess,
        }
    }

    /// Training covariate range.
    pub fn train_range(&self) -> (f64, f64) {
        (self.train_min, self.train_max)
    }

    /// Intercept and slope, for OLS curves.
    pub fn ols_coefficients(&self) -> Option<(f64, f64)> {
        match self.model {
            CurveModel::Ols { intercept, slope } => Some((intercept, slope)),
            CurveModel::Loess { .. } => None,
        }
    }

    /// How many evaluations hit the degenerate-design fallback so far.
    pub fn fallback_count(&self) -> u64 {
        self.fallbacks.load(Ordering::Relaxed)
    }

    /// Predicts the response at `x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        match &self.model {
            CurveModel::Ols { intercept, slope } => intercept + slope * x,
            CurveModel::Loess { xs, ys, cfg, neighborhood } => {
                let x0 = x.clamp(self.train_min, self.train_max);
                self.evaluate_loess(xs, ys, *cfg, *neighborhood, x0)
            }
        }
    }

    fn evaluate_loess(
        &self,
        xs: &[f64],
        ys: &[f64],
        cfg: LoessConfig,
        k: usize,
        x0: f64,
    ) -> f64 {
        let n = xs.len();
        // Two-pointer window of the k nearest points around x0.
        let mut hi = xs.partition_point(|&v| v < x0);
        let mut lo = hi;
        for _ in 0..k {
            let left = if lo > 0 { x0 - xs[lo - 1] } else { f64::INFINITY };
            let right = if hi < n { xs[hi] - x0 } else { f64::INFINITY };
            if left <= right {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        let mut d_max = 0.0f64;
        for &v in &xs[lo..hi] {
            d_max = d_max.max((v - x0).abs());
        }
        // Points tied with the k-th distance join the neighborhood; d_max is unchanged.
        while lo > 0 && x0 - xs[lo - 1] == d_max {
            lo -= 1;
        }
        while hi < n && xs[hi] - x0 == d_max {
            hi += 1;
        }

        if d_max == 0.0 {
            // Entire neighborhood sits at the query point.
            let mean = ys[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            if cfg.degree == 1 {
                self.fallbacks.fetch_add(1, Ordering::Relaxed);
            }
            return mean;
        }

        let inv_d_max = 1.0 / d_max;
        let mut s_w = 0.0;
        let mut s_wt = 0.0;
        let mut s_wtt = 0.0;
        let mut s_wy = 0.0;
        let mut s_wty = 0.0;
        for i in lo..hi {
            let t = xs[i] - x0;
            let w = tricube(t.abs() * inv_d_max);
            s_w += w;
            s_wt += w * t;
            s_wtt += w * t * t;
            s_wy += w * ys[i];
            s_wty += w * t * ys[i];
        }
        if s_w <= 0.0 {
            // All weight fell on the boundary (every point tied at d_max).
            self.fallbacks.fetch_add(1, Ordering::Relaxed);
            return ys[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        }
        if cfg.degree == 0 {
            return s_wy / s_w;
        }
        let denom = s_w * s_wtt - s_wt * s_wt;
        if !(denom > 1e-12 * s_w * s_wtt) {
            // Degenerate local design (e.g. all neighborhood x equal): weighted mean.
            self.fallbacks.fetch_add(1, Ordering::Relaxed);
            return s_wy / s_w;
        }
        let slope = (s_w * s_wty - s_wt * s_wy) / denom;
        // Centered at x0, so the intercept is the prediction.
        (s_wy - slope * s_wt) / s_w
    }
}

/// Tricube kernel on normalized distance `u` in [0, 1]: `(1 - u^3)^3`.
/// Weight 1 at distance 0, weight 0 at the neighborhood edge.
pub(crate) fn tricube(u: f64) -> f64 {
    let c = 1.0 - u * u * u;
    c * c * c
}

fn check_xy(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::InsufficientData(format!(
            "covariate/response lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    Ok(())
}

fn train_range(xs: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        min = min.min(x);
        max = max.max(x);
    }
    (min, max)
}

/// Fits a global least-squares line.
pub fn fit_ols(xs: &[f64], ys: &[f64]) -> Result<FittedCurve> {
    check_xy(xs, ys)?;
    if xs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "ordinary least squares needs at least 2 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::SingularDesign(
            "all covariate values are identical; a line is not identified".into(),
        ));
    }
    let n = xs.len() as f64;
    let x_bar = xs.iter().sum::<f64>() / n;
    let y_bar = ys.iter().sum::<f64>() / n;
    let mut s_xx = 0.0;
    let mut s_xy = 0.0;
    for i in 0..xs.len() {
        let dx = xs[i] - x_bar;
        s_xx += dx * dx;
        s_xy += dx * (ys[i] - y_bar);
    }
    let slope = s_xy / s_xx;
    let intercept = y_bar - slope * x_bar;
    let (train_min, train_max) = train_range(xs);
    Ok(FittedCurve {
        model: CurveModel::Ols { intercept, slope },
        train_min,
        train_max,
        fallbacks: AtomicU64::new(0),
    })
}

/// Fits a LOESS curve lazily: training points are retained (sorted by x) and
/// each later evaluation solves a tricube-weighted local polynomial over the
/// `ceil(span * len)` nearest points.
pub fn fit_loess(xs: &[f64], ys: &[f64], cfg: LoessConfig) -> Result<FittedCurve> {
    check_xy(xs, ys)?;
    if xs.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "loess needs at least 4 points, got {}",
            xs.len()
        )));
    }
    let k = (cfg.span * xs.len() as f64).ceil() as usize;
    let k = k.clamp(1, xs.len());
    if k < cfg.degree + 2 {
        return Err(Error::InvalidConfig(format!(
            "span {} over {} points selects {} neighbors; degree {} needs at least {}",
            cfg.span,
            xs.len(),
            k,
            cfg.degree,
            cfg.degree + 2
        )));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).expect("finite covariates"));
    let sorted_x: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
    let sorted_y: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
    let (train_min, train_max) = (sorted_x[0], sorted_x[sorted_x.len() - 1]);
    Ok(FittedCurve {
        model: CurveModel::Loess {
            xs: sorted_x,
            ys: sorted_y,
            cfg,
            neighborhood: k,
        },
        train_min,
        train_max,
        fallbacks: AtomicU64::new(0),
    })
}
