//! Synthetic two-arm trial distributions: piecewise-constant response levels
//! per arm over a bounded covariate range, with Gaussian response noise.
//!
//! A [`ScenarioSpec`] fully describes one distribution and provides analytic
//! ground truth (true response functions, true treatment effect, exact value
//! of any treatment rule). [`ScenarioSpec::generate`] samples reproducible
//! trial datasets from it.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::policy::TreatmentRule;
use crate::TauEstimate;

/// Number of midpoint cells used by [`ScenarioSpec::analytic_value`].
/// Exact for piecewise-constant integrands away from a measure-zero set.
pub const ANALYTIC_GRID_CELLS: usize = 10_001;

/// Treatment arm label. Serializes as -1 (control) / +1 (treated).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub fn label(self) -> i32 {
        match self {
            Arm::Control => -1,
            Arm::Treated => 1,
        }
    }

    pub fn from_label(v: f64) -> Option<Arm> {
        if v == -1.0 {
            Some(Arm::Control)
        } else if v == 1.0 {
            Some(Arm::Treated)
        } else {
            None
        }
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Generative description of one trial distribution.
///
/// Responses are piecewise constant in the covariate: `breakpoints` cut
/// `[x_low, x_high]` into `breakpoints.len() + 1` intervals, each with one
/// response level per arm. Intervals are half-open `[lo, hi)`; the final
/// interval is closed at `x_high`. Covariates are uniform on the range and
/// noise is additive Gaussian with standard deviation `noise_sd`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    name: String,
    breakpoints: Vec<f64>,
    mu0_levels: Vec<f64>,
    mu1_levels: Vec<f64>,
    x_low: f64,
    x_high: f64,
    noise_sd: f64,
}

impl ScenarioSpec {
    pub fn new(
        name: impl Into<String>,
        breakpoints: Vec<f64>,
        mu0_levels: Vec<f64>,
        mu1_levels: Vec<f64>,
        x_low: f64,
        x_high: f64,
        noise_sd: f64,
    ) -> Result<Self> {
        let name = name.into();
        if !(x_low < x_high) {
            return Err(Error::InvalidSpec(format!(
                "x_low ({x_low}) must be strictly below x_high ({x_high})"
            )));
        }
        if !(noise_sd >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "noise_sd must be nonnegative, got {noise_sd}"
            )));
        }
        if mu0_levels.len() != breakpoints.len() + 1 || mu1_levels.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidSpec(format!(
                "need breakpoints + 1 = {} levels per arm, got {} control / {} treated",
                breakpoints.len() + 1,
                mu0_levels.len(),
                mu1_levels.len()
            )));
        }
        for w in breakpoints.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidSpec(format!(
                    "breakpoints must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let (Some(&first), Some(&last)) = (breakpoints.first(), breakpoints.last()) {
            if !(first > x_low && last < x_high) {
                return Err(Error::InvalidSpec(format!(
                    "breakpoints must lie strictly inside ({x_low}, {x_high})"
                )));
            }
        }
        let all_finite = breakpoints.iter().chain(&mu0_levels).chain(&mu1_levels).all(|v| v.is_finite())
            && x_low.is_finite()
            && x_high.is_finite()
            && noise_sd.is_finite();
        if !all_finite {
            return Err(Error::InvalidSpec("all numeric fields must be finite".into()));
        }
        Ok(Self {
            name,
            breakpoints,
            mu0_levels,
            mu1_levels,
            x_low,
            x_high,
            noise_sd,
        })
    }

    /// Looks up a built-in scenario by name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "scenario1" => Self::scenario1(),
            "scenario2" => Self::scenario2(),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }

    /// Small constant treatment effect (0.1) on top of a bump response.
    pub fn scenario1() -> Result<Self> {
        Self::new(
            "scenario1",
            vec![-0.4, 0.5],
            vec![1.0, 1.5, 1.0],
            vec![1.1, 1.6, 1.1],
            -1.0,
            1.0,
            0.01,
        )
    }

    /// Large constant treatment effect (0.6), same control response as scenario 1.
    pub fn scenario2() -> Result<Self> {
        Self::new(
            "scenario2",
            vec![-0.4, 0.5],
            vec![1.0, 1.5, 1.0],
            vec![1.6, 2.1, 1.6],
            -1.0,
            1.0,
            0.01,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn mu0_levels(&self) -> &[f64] {
        &self.mu0_levels
    }

    pub fn mu1_levels(&self) -> &[f64] {
        &self.mu1_levels
    }

    pub fn x_low(&self) -> f64 {
        self.x_low
    }

    pub fn x_high(&self) -> f64 {
        self.x_high
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    /// Index of the half-open interval containing `x`. The last interval is
    /// closed at `x_high`, so every in-range point has exactly one interval.
    fn interval_index(&self, x: f64) -> Result<usize> {
        if !(x >= self.x_low && x <= self.x_high) {
            return Err(Error::OutOfRange {
                x,
                lo: self.x_low,
                hi: self.x_high,
            });
        }
        Ok(self.breakpoints.partition_point(|&b| b <= x))
    }

    /// True response level `E[Y | X = x, A = arm]`.
    pub fn true_mu(&self, arm: Arm, x: f64) -> Result<f64> {
        let idx = self.interval_index(x)?;
        Ok(match arm {
            Arm::Control => self.mu0_levels[idx],
            Arm::Treated => self.mu1_levels[idx],
        })
    }

    /// True treatment effect `mu1(x) - mu0(x)`.
    pub fn true_cate(&self, x: f64) -> Result<f64> {
        let idx = self.interval_index(x)?;
        Ok(self.mu1_levels[idx] - self.mu0_levels[idx])
    }

    /// The true effect function as an evaluable estimate (the identity oracle).
    pub fn true_cate_fn(&self) -> TrueCate {
        TrueCate { spec: self.clone() }
    }

    /// Samples a trial with exactly `m` control and `n` treated units.
    ///
    /// Covariates for the two arms are drawn independently, control block
    /// first; the same `(spec, m, n, seed)` always yields bit-identical data.
    pub fn generate(&self, m: usize, n: usize, seed: u64) -> Result<TrialDataset> {
        if m < 2 || n < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 units per arm, got m={m}, n={n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = m + n;
        let mut x = Vec::with_capacity(total);
        let mut a = Vec::with_capacity(total);
        let mut y = Vec::with_capacity(total);
        for (arm, count) in [(Arm::Control, m), (Arm::Treated, n)] {
            for _ in 0..count {
                let xi = self.x_low + (self.x_high - self.x_low) * rng.random::<f64>();
                let eps: f64 = rng.sample(StandardNormal);
                let yi = self.true_mu(arm, xi)? + self.noise_sd * eps;
                x.push(xi);
                a.push(arm);
                y.push(yi);
            }
        }
        TrialDataset::from_parts(x, a, y)
    }

    /// Exact expected response under `rule`: the integral of the chosen arm's
    /// response level against the uniform covariate density, computed by the
    /// midpoint rule on a fixed [`ANALYTIC_GRID_CELLS`]-cell grid.
    pub fn analytic_value(&self, rule: &TreatmentRule) -> f64 {
        let cells = ANALYTIC_GRID_CELLS;
        let width = (self.x_high - self.x_low) / cells as f64;
        let mut sum = 0.0;
        for i in 0..cells {
            let x = self.x_low + (i as f64 + 0.5) * width;
            let idx = self.breakpoints.partition_point(|&b| b <= x);
            sum += match rule.decide(x) {
                Arm::Control => self.mu0_levels[idx],
                Arm::Treated => self.mu1_levels[idx],
            };
        }
        sum / cells as f64
    }

    /// Serializes to the flat `key = value` config format.
    pub fn to_config_string(&self) -> String {
        fn join(vs: &[f64]) -> String {
            vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "breakpoints = {}", join(&self.breakpoints));
        let _ = writeln!(s, "mu0_levels = {}", join(&self.mu0_levels));
        let _ = writeln!(s, "mu1_levels = {}", join(&self.mu1_levels));
        let _ = writeln!(s, "x_low = {}", self.x_low);
        let _ = writeln!(s, "x_high = {}", self.x_high);
        let _ = writeln!(s, "noise_sd = {}", self.noise_sd);
        s
    }

    /// Parses the flat `key = value` config format produced by
    /// [`ScenarioSpec::to_config_string`]. Lines starting with `#` are ignored.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut name = None;
        let mut breakpoints = None;
        let mut mu0 = None;
        let mut mu1 = None;
        let mut x_low = None;
        let mut x_high = None;
        let mut noise_sd = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{raw}`", i + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "name" => name = Some(value.to_string()),
                "breakpoints" => breakpoints = Some(parse_f64_list(value, key)?),
                "mu0_levels" => mu0 = Some(parse_f64_list(value, key)?),
                "mu1_levels" => mu1 = Some(parse_f64_list(value, key)?),
                "x_low" => x_low = Some(parse_f64(value, key)?),
                "x_high" => x_high = Some(parse_f64(value, key)?),
                "noise_sd" => noise_sd = Some(parse_f64(value, key)?),
                other => {
                    return Err(Error::Config(format!("unknown scenario key `{other}`")));
                }
            }
        }
        let missing = |field: &str| Error::Config(format!("missing scenario key `{field}`"));
        Self::new(
            name.ok_or_else(|| missing("name"))?,
            breakpoints.ok_or_else(|| missing("breakpoints"))?,
            mu0.ok_or_else(|| missing("mu0_levels"))?,
            mu1.ok_or_else(|| missing("mu1_levels"))?,
            x_low.ok_or_else(|| missing("x_low"))?,
            x_high.ok_or_else(|| missing("x_high"))?,
            noise_sd.ok_or_else(|| missing("noise_sd"))?,
        )
    }

    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config_str(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn parse_f64(value: &str, key: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("key `{key}`: `{value}` is not a number")))
}

pub(crate) fn parse_f64_list(value: &str, key: &str) -> Result<Vec<f64>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_f64(v.trim(), key)).collect()
}

/// The true CATE of a scenario, usable wherever a fitted estimate is.
/// Queries outside the covariate range clamp to the nearest endpoint.
#[derive(Debug, Clone)]
pub struct TrueCate {
    spec: ScenarioSpec,
}

impl TauEstimate for TrueCate {
    fn tau_at(&self, x: f64) -> f64 {
        let x = x.clamp(self.spec.x_low, self.spec.x_high);
        self.spec.true_cate(x).expect("clamped into range")
    }
}

/// Observed two-arm trial: aligned covariate, arm, and response vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    x: Vec<f64>,
    a: Vec<Arm>,
    y: Vec<f64>,
    m: usize,
    n: usize,
}

impl TrialDataset {
    /// Validates and assembles a dataset; `m`/`n` are counted from the labels.
    pub fn from_parts(x: Vec<f64>, a: Vec<Arm>, y: Vec<f64>) -> Result<Self> {
        if x.len() != a.len() || x.len() != y.len() {
            return Err(Error::InsufficientData(format!(
                "column lengths differ: x={}, a={}, y={}",
                x.len(),
                a.len(),
                y.len()
            )));
        }
        let n = a.iter().filter(|&&arm| arm == Arm::Treated).count();
        let m = a.len() - n;
        if m < 2 || n < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 units per arm, got m={m}, n={n}"
            )));
        }
        Ok(Self { x, a, y, m, n })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn arms(&self) -> &[Arm] {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Control-arm unit count.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Treated-arm unit count.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// The covariate/response pairs of one arm.
    pub fn arm_xy(&self, arm: Arm) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..self.len() {
            if self.a[i] == arm {
                xs.push(self.x[i]);
                ys.push(self.y[i]);
            }
        }
        (xs, ys)
    }

    /// Writes the `x,a,y` CSV representation.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,a,y")?;
        for i in 0..self.len() {
            writeln!(w, "{},{},{}", self.x[i], self.a[i], self.y[i])?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    /// Parses the `x,a,y` CSV format. Errors name the offending line
    /// (1-based, counting the header).
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Csv { line: 1, msg: "empty file".into() })?;
        if header.trim() != "x,a,y" {
            return Err(Error::Csv {
                line: 1,
                msg: format!("expected header `x,a,y`, got `{}`", header.trim()),
            });
        }
        let mut x = Vec::new();
        let mut a = Vec::new();
        let mut y = Vec::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            let row = line.trim();
            if row.is_empty() {
                continue;
            }
            let fields: Vec<&str> = row.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Csv {
                    line: line_no,
                    msg: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str, col: &str| -> Result<f64> {
                let v: f64 = s.parse().map_err(|_| Error::Csv {
                    line: line_no,
                    msg: format!("column `{col}`: `{s}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Csv {
                        line: line_no,
                        msg: format!("column `{col}`: `{s}` is not finite"),
                    });
                }
                Ok(v)
            };
            let xi = parse(fields[0], "x")?;
            let ai = parse(fields[1], "a")?;
            let yi = parse(fields[2], "y")?;
            let arm = Arm::from_label(ai).ok_or_else(|| Error::Csv {
                line: line_no,
                msg: format!("column `a`: `{}` is not -1 or 1", fields[1]),
            })?;
            x.push(xi);
            a.push(arm);
            y.push(yi);
        }
        Self::from_parts(x, a, y)
    }
}
