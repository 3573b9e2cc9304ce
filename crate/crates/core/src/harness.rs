//! Experiment orchestration: the Monte Carlo grid over scenarios, arm sizes,
//! and estimators, with per-replication metrics written to `records.csv`,
//! per-cell aggregates to `summary.csv`, and per-panel plot data as TSV.
//!
//! All randomness derives from `(base_seed, scenario index, m, n, rep)`, so a
//! run is deterministic up to wall-clock timing and replications may execute
//! in parallel.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::meta::{
    fit_standard_with, fit_xlearner_with, CateMethodTag, StandardConfig, WeightMode,
    XLearnerConfig,
};
use crate::policy::{emse, ipw_value, misclassification, sign_rule, EvalGrid, TreatmentRule};
use crate::scenario::{parse_f64, ScenarioSpec, TrialDataset};
use crate::seed::derive_seed;

/// Environment variable consulted for the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CATELAB_OUT";

/// Full description of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenarios: Vec<ScenarioSpec>,
    /// Control-arm training sizes; paired index-wise with `n_list` unless
    /// `cartesian` is set.
    pub m_list: Vec<usize>,
    pub n_list: Vec<usize>,
    pub cartesian: bool,
    pub test_m: usize,
    pub test_n: usize,
    pub replications: usize,
    pub base_seed: u64,
    pub estimators: Vec<CateMethodTag>,
    pub loess_span: f64,
    pub weight_mode: WeightMode,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let output_dir = std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"));
        Self {
            scenarios: vec![
                ScenarioSpec::scenario1().expect("built-in spec is valid"),
                ScenarioSpec::scenario2().expect("built-in spec is valid"),
            ],
            m_list: vec![200, 400, 600, 800],
            n_list: vec![10, 20, 30, 40],
            cartesian: false,
            test_m: 1000,
            test_n: 50,
            replications: 1000,
            base_seed: 1,
            estimators: vec![CateMethodTag::Standard, CateMethodTag::XLearner],
            loess_span: 0.75,
            weight_mode: WeightMode::Propensity,
            output_dir,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Config("no scenarios configured".into()));
        }
        let mut names: Vec<&str> = self.scenarios.iter().map(|s| s.name()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.scenarios.len() {
            return Err(Error::Config("scenario names must be unique".into()));
        }
        if self.m_list.is_empty() || self.n_list.is_empty() {
            return Err(Error::Config("m_list and n_list must be nonempty".into()));
        }
        if !self.cartesian && self.m_list.len() != self.n_list.len() {
            return Err(Error::Config(format!(
                "m_list has {} entries but n_list has {}; they pair index-wise \
                 (set cartesian = true for the full product)",
                self.m_list.len(),
                self.n_list.len()
            )));
        }
        for &c in self.m_list.iter().chain(&self.n_list) {
            if c < 2 {
                return Err(Error::Config(format!("arm sizes must be at least 2, got {c}")));
            }
        }
        if self.test_m < 2 || self.test_n < 2 {
            return Err(Error::Config("test arm sizes must be at least 2".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators configured".into()));
        }
        if !(self.loess_span > 0.0 && self.loess_span <= 1.0) {
            return Err(Error::Config(format!(
                "loess_span must be in (0, 1], got {}",
                self.loess_span
            )));
        }
        if let WeightMode::Fixed(g) = self.weight_mode {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::Config(format!(
                    "fixed x-learner weight must be in [0, 1], got {g}"
                )));
            }
        }
        Ok(())
    }

    /// The `(m, n)` cells this config runs: index-wise pairs, or the full
    /// product when `cartesian` is set (m-major order).
    pub fn grid_cells(&self) -> Vec<(usize, usize)> {
        if self.cartesian {
            let mut cells = Vec::with_capacity(self.m_list.len() * self.n_list.len());
            for &m in &self.m_list {
                for &n in &self.n_list {
                    cells.push((m, n));
                }
            }
            cells
        } else {
            self.m_list.iter().copied().zip(self.n_list.iter().copied()).collect()
        }
    }

    /// Parses the flat `key = value` config format. Scenario list entries are
    /// built-in names or paths to scenario spec files, resolved against
    /// `base_dir` when relative. Unlisted keys keep their defaults.
    pub fn from_config_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
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
                "scenarios" => {
                    let mut scenarios = Vec::new();
                    for entry in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        scenarios.push(resolve_scenario(entry, base_dir)?);
                    }
                    cfg.scenarios = scenarios;
                }
                "m_list" => cfg.m_list = parse_usize_list(value, key)?,
                "n_list" => cfg.n_list = parse_usize_list(value, key)?,
                "cartesian" => cfg.cartesian = parse_bool(value, key)?,
                "test_m" => cfg.test_m = parse_usize(value, key)?,
                "test_n" => cfg.test_n = parse_usize(value, key)?,
                "replications" => cfg.replications = parse_usize(value, key)?,
                "base_seed" => {
                    cfg.base_seed = value.parse::<u64>().map_err(|_| {
                        Error::Config(format!("key `{key}`: `{value}` is not an integer seed"))
                    })?;
                }
                "estimators" => {
                    let mut estimators = Vec::new();
                    for entry in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        estimators.push(match entry {
                            "standard" => CateMethodTag::Standard,
                            "xlearner" => CateMethodTag::XLearner,
                            other => {
                                return Err(Error::Config(format!(
                                    "unknown estimator `{other}` (use standard, xlearner)"
                                )))
                            }
                        });
                    }
                    cfg.estimators = estimators;
                }
                "loess_span" => cfg.loess_span = parse_f64(value, key)?,
                "xlearner_weight_mode" => cfg.weight_mode = parse_weight_mode(value)?,
                "output_dir" => {
                    let p = PathBuf::from(value);
                    cfg.output_dir = match (p.is_relative(), base_dir) {
                        (true, Some(dir)) => dir.join(p),
                        _ => p,
                    };
                }
                other => return Err(Error::Config(format!("unknown config key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_config_str(&text, path.parent())
    }

    fn standard_config(&self) -> Result<StandardConfig> {
        StandardConfig::with_span(self.loess_span)
    }

    fn xlearner_config(&self) -> Result<XLearnerConfig> {
        let mut cfg = XLearnerConfig::with_span(self.loess_span)?;
        cfg.weight_mode = self.weight_mode;
        Ok(cfg)
    }
}

fn resolve_scenario(entry: &str, base_dir: Option<&Path>) -> Result<ScenarioSpec> {
    if let Ok(spec) = ScenarioSpec::builtin(entry) {
        return Ok(spec);
    }
    let path = PathBuf::from(entry);
    let path = match (path.is_relative(), base_dir) {
        (true, Some(dir)) => dir.join(path),
        _ => path,
    };
    if path.exists() {
        ScenarioSpec::from_config_file(path)
    } else {
        Err(Error::UnknownScenario(format!(
            "{entry} (not a built-in name and no spec file at {})",
            path.display()
        )))
    }
}

fn parse_usize(value: &str, key: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("key `{key}`: `{value}` is not a count")))
}

fn parse_usize_list(value: &str, key: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_usize(s, key))
        .collect()
}

fn parse_bool(value: &str, key: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("key `{key}`: `{other}` is not a bool"))),
    }
}

fn parse_weight_mode(value: &str) -> Result<WeightMode> {
    if value.eq_ignore_ascii_case("propensity") {
        return Ok(WeightMode::Propensity);
    }
    if let Some(g) = value
        .strip_prefix("fixed:")
        .or_else(|| value.strip_prefix("FIXED:"))
    {
        let g = parse_f64(g.trim(), "xlearner_weight_mode")?;
        return Ok(WeightMode::Fixed(g));
    }
    Err(Error::Config(format!(
        "xlearner_weight_mode must be `propensity` or `fixed:<g>`, got `{value}`"
    )))
}

/// One replication's metrics for one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub scenario: String,
    pub m: usize,
    pub n: usize,
    pub rep: usize,
    pub estimator: CateMethodTag,
    pub emse: f64,
    pub misclass: f64,
    pub ipw_value: f64,
    /// Exact value of the fitted rule under the generating distribution.
    pub analytic_value: f64,
    pub regret: f64,
    pub fit_seconds: f64,
}

pub const RECORDS_HEADER: &str =
    "scenario,m,n,rep,estimator,emse,misclass,ipw_value,analytic_value,regret,fit_seconds";

impl MetricsRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.m,
            self.n,
            self.rep,
            self.estimator,
            self.emse,
            self.misclass,
            self.ipw_value,
            self.analytic_value,
            self.regret,
            self.fit_seconds
        )
    }
}

/// A replication that could not be completed, with the cell it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureRecord {
    pub scenario: String,
    pub m: usize,
    pub n: usize,
    pub rep: usize,
    pub estimator: CateMethodTag,
    pub message: String,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<MetricsRecord>,
    pub failures: Vec<FailureRecord>,
    pub records_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Runs the full grid and writes `records.csv` and `summary.csv` (plus
/// `failures.csv` when any replication failed) into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let standard_cfg = cfg.standard_config()?;
    let xlearner_cfg = cfg.xlearner_config()?;
    let cells = cfg.grid_cells();
    let propensity = cfg.test_n as f64 / (cfg.test_m + cfg.test_n) as f64;

    // Exact value of the optimal rule, once per scenario.
    let optimal_values: Vec<f64> = cfg
        .scenarios
        .iter()
        .map(|spec| spec.analytic_value(&TreatmentRule::optimal(spec)))
        .collect();

    let mut tasks = Vec::new();
    for (si, _) in cfg.scenarios.iter().enumerate() {
        for (gi, _) in cells.iter().enumerate() {
            for rep in 0..cfg.replications {
                tasks.push((si, gi, rep));
            }
        }
    }

    type KeyedOutcomes = (Vec<(usize, MetricsRecord)>, Vec<(usize, FailureRecord)>);
    let results: Vec<KeyedOutcomes> = tasks
        .par_iter()
        .map(|&(si, gi, rep)| {
            let spec = &cfg.scenarios[si];
            let (m, n) = cells[gi];
            let mut records = Vec::new();
            let mut failures = Vec::new();
            let key_base = ((si * cells.len() + gi) * cfg.replications + rep)
                * cfg.estimators.len();

            let train_seed =
                derive_seed(cfg.base_seed, &[si as u64, m as u64, n as u64, rep as u64, 0]);
            let test_seed =
                derive_seed(cfg.base_seed, &[si as u64, m as u64, n as u64, rep as u64, 1]);
            let prepared = spec
                .generate(m, n, train_seed)
                .and_then(|train| Ok((train, spec.generate(cfg.test_m, cfg.test_n, test_seed)?)));
            let (train, test) = match prepared {
                Ok(pair) => pair,
                Err(e) => {
                    for (ei, &estimator) in cfg.estimators.iter().enumerate() {
                        failures.push((
                            key_base + ei,
                            FailureRecord {
                                scenario: spec.name().to_string(),
                                m,
                                n,
                                rep,
                                estimator,
                                message: e.to_string(),
                            },
                        ));
                    }
                    return (records, failures);
                }
            };
            let grid = EvalGrid::from_dataset(&test);

            for (ei, &estimator) in cfg.estimators.iter().enumerate() {
                let fitted = match estimator {
                    CateMethodTag::Standard => fit_standard_with(&train, &standard_cfg),
                    CateMethodTag::XLearner => fit_xlearner_with(&train, &xlearner_cfg),
                };
                let outcome = fitted.and_then(|est| {
                    let emse_v = emse(&est, spec, &grid)?;
                    let rule = sign_rule(&est);
                    let mis = misclassification(&rule, spec, &grid)?;
                    let ipw = ipw_value(&rule, &test, propensity)?;
                    let analytic = spec.analytic_value(&rule);
                    Ok(MetricsRecord {
                        scenario: spec.name().to_string(),
                        m,
                        n,
                        rep,
                        estimator,
                        emse: emse_v,
                        misclass: mis,
                        ipw_value: ipw,
                        analytic_value: analytic,
                        regret: optimal_values[si] - analytic,
                        fit_seconds: est.fit_seconds(),
                    })
                });
                match outcome {
                    Ok(record) => records.push((key_base + ei, record)),
                    Err(e) => failures.push((
                        key_base + ei,
                        FailureRecord {
                            scenario: spec.name().to_string(),
                            m,
                            n,
                            rep,
                            estimator,
                            message: e.to_string(),
                        },
                    )),
                }
            }
            (records, failures)
        })
        .collect();

    let mut keyed_records = Vec::new();
    let mut keyed_failures = Vec::new();
    for (recs, fails) in results {
        keyed_records.extend(recs);
        keyed_failures.extend(fails);
    }
    // Deterministic order: scenario, grid cell, replication, estimator.
    keyed_records.sort_by_key(|(k, _)| *k);
    keyed_failures.sort_by_key(|(k, _)| *k);
    let records: Vec<MetricsRecord> = keyed_records.into_iter().map(|(_, r)| r).collect();
    let failures: Vec<FailureRecord> = keyed_failures.into_iter().map(|(_, f)| f).collect();

    fs::create_dir_all(&cfg.output_dir)?;
    let records_path = cfg.output_dir.join("records.csv");
    let summary_path = cfg.output_dir.join("summary.csv");
    write_records_csv(&records, &records_path)?;
    write_summary_csv(&records, &summary_path)?;
    if !failures.is_empty() {
        let mut out = String::from("scenario,m,n,rep,estimator,error\n");
        for f in &failures {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                f.scenario,
                f.m,
                f.n,
                f.rep,
                f.estimator,
                f.message.replace(',', ";")
            );
        }
        fs::write(cfg.output_dir.join("failures.csv"), out)?;
    }

    Ok(ExperimentOutput {
        records,
        failures,
        records_path,
        summary_path,
    })
}

/// Reads and validates an `x,a,y` dataset file.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<TrialDataset> {
    let file = fs::File::open(path)?;
    TrialDataset::read_csv(BufReader::new(file))
}

pub fn write_records_csv(records: &[MetricsRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(file, "{}", r.to_csv_row())?;
    }
    Ok(())
}

/// Per-(scenario, cell, estimator) means and standard errors of every metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub m: usize,
    pub n: usize,
    pub estimator: CateMethodTag,
    pub reps: usize,
    pub means: [f64; 6],
    pub ses: [f64; 6],
}

pub const SUMMARY_METRICS: [&str; 6] = [
    "emse",
    "misclass",
    "ipw_value",
    "analytic_value",
    "regret",
    "fit_seconds",
];

/// Aggregates records per (scenario, cell, estimator), preserving first-appearance order.
pub fn summarize(records: &[MetricsRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, usize, usize, CateMethodTag)> = Vec::new();
    let mut groups: Vec<Vec<&MetricsRecord>> = Vec::new();
    for r in records {
        let key = (r.scenario.clone(), r.m, r.n, r.estimator);
        match order.iter().position(|k| *k == key) {
            Some(idx) => groups[idx].push(r),
            None => {
                order.push(key);
                groups.push(vec![r]);
            }
        }
    }
    order
        .into_iter()
        .zip(groups)
        .map(|((scenario, m, n, estimator), group)| {
            let reps = group.len();
            let values = |f: fn(&MetricsRecord) -> f64| -> (f64, f64) {
                let k = group.len() as f64;
                let mean = group.iter().map(|r| f(r)).sum::<f64>() / k;
                let se = if group.len() > 1 {
                    let var = group
                        .iter()
                        .map(|r| (f(r) - mean) * (f(r) - mean))
                        .sum::<f64>()
                        / (k - 1.0);
                    (var / k).sqrt()
                } else {
                    0.0
                };
                (mean, se)
            };
            let stats = [
                values(|r| r.emse),
                values(|r| r.misclass),
                values(|r| r.ipw_value),
                values(|r| r.analytic_value),
                values(|r| r.regret),
                values(|r| r.fit_seconds),
            ];
            SummaryRow {
                scenario,
                m,
                n,
                estimator,
                reps,
                means: stats.map(|(mean, _)| mean),
                ses: stats.map(|(_, se)| se),
            }
        })
        .collect()
}

pub fn write_summary_csv(records: &[MetricsRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut header = String::from("scenario,m,n,estimator,reps");
    for metric in SUMMARY_METRICS {
        let _ = write!(header, ",{metric}_mean,{metric}_se");
    }
    let mut file = fs::File::create(path)?;
    writeln!(file, "{header}")?;
    for row in summarize(records) {
        let mut line = format!(
            "{},{},{},{},{}",
            row.scenario, row.m, row.n, row.estimator, row.reps
        );
        for i in 0..SUMMARY_METRICS.len() {
            let _ = write!(line, ",{},{}", row.means[i], row.ses[i]);
        }
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// The four per-scenario comparison panels.
const PANEL_METRICS: [(&str, usize); 4] = [
    ("emse", 0),
    ("misclass", 1),
    ("value", 2),
    ("time", 5),
];

/// Writes one TSV per (metric, scenario) panel: rows are grid cells, columns
/// are per-estimator mean and standard error. Returns the written paths.
pub fn emit_plot_data(records: &[MetricsRecord], output_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::Config("no records to plot".into()));
    }
    let output_dir = output_dir.as_ref();
    fs::create_dir_all(output_dir)?;
    let summary = summarize(records);

    let mut scenarios: Vec<String> = Vec::new();
    let mut cells: Vec<(usize, usize)> = Vec::new();
    let mut estimators: Vec<CateMethodTag> = Vec::new();
    for row in &summary {
        if !scenarios.contains(&row.scenario) {
            scenarios.push(row.scenario.clone());
        }
        if !cells.contains(&(row.m, row.n)) {
            cells.push((row.m, row.n));
        }
        if !estimators.contains(&row.estimator) {
            estimators.push(row.estimator);
        }
    }

    let mut paths = Vec::new();
    for scenario in &scenarios {
        for (metric_name, metric_idx) in PANEL_METRICS {
            let mut out = String::new();
            for (i, (m, n)) in cells.iter().enumerate() {
                let _ = writeln!(out, "# cell {} = (m={m}, n={n})", i + 1);
            }
            let mut header = String::from("cell");
            for est in &estimators {
                let _ = write!(header, "\t{est}_mean\t{est}_se");
            }
            let _ = writeln!(out, "{header}");
            for (i, (m, n)) in cells.iter().enumerate() {
                let mut line = format!("{}", i + 1);
                for est in &estimators {
                    let row = summary.iter().find(|r| {
                        r.scenario == *scenario && r.m == *m && r.n == *n && r.estimator == *est
                    });
                    match row {
                        Some(r) => {
                            let _ =
                                write!(line, "\t{}\t{}", r.means[metric_idx], r.ses[metric_idx]);
                        }
                        None => line.push_str("\tnan\tnan"),
                    }
                }
                let _ = writeln!(out, "{line}");
            }
            let path = output_dir.join(format!("panel_{metric_name}_{scenario}.tsv"));
            fs::write(&path, out)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Arm;

    fn tiny_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            scenarios: vec![ScenarioSpec::scenario1().unwrap()],
            m_list: vec![40],
            n_list: vec![8],
            test_m: 60,
            test_n: 10,
            replications: 2,
            base_seed: 9,
            output_dir: dir.to_path_buf(),
            ..ExperimentConfig::default()
        }
    }

    fn strip_timing(r: &MetricsRecord) -> MetricsRecord {
        let mut r = r.clone();
        r.fit_seconds = 0.0;
        r
    }

    #[test]
    fn record_count_matches_the_grid() {
        let dir = std::env::temp_dir().join("catelab_harness_count");
        let out = run_experiment(&tiny_config(&dir)).unwrap();
        // 1 scenario x 1 cell x 2 reps x 2 estimators.
        assert_eq!(out.records.len(), 4);
        assert!(out.failures.is_empty());
        assert!(out.records_path.exists());
        assert!(out.summary_path.exists());
    }

    #[test]
    fn runs_are_deterministic_up_to_timing() {
        let dir_a = std::env::temp_dir().join("catelab_harness_det_a");
        let dir_b = std::env::temp_dir().join("catelab_harness_det_b");
        let mut cfg_a = tiny_config(&dir_a);
        cfg_a.replications = 3;
        let mut cfg_b = cfg_a.clone();
        cfg_b.output_dir = dir_b;
        let a = run_experiment(&cfg_a).unwrap();
        let b = run_experiment(&cfg_b).unwrap();
        let a_stripped: Vec<_> = a.records.iter().map(strip_timing).collect();
        let b_stripped: Vec<_> = b.records.iter().map(strip_timing).collect();
        assert_eq!(a_stripped, b_stripped);
    }

    #[test]
    fn records_satisfy_their_invariants() {
        let dir = std::env::temp_dir().join("catelab_harness_inv");
        let mut cfg = tiny_config(&dir);
        cfg.scenarios = vec![
            ScenarioSpec::scenario1().unwrap(),
            ScenarioSpec::scenario2().unwrap(),
        ];
        cfg.replications = 3;
        let out = run_experiment(&cfg).unwrap();
        // 2 scenarios, 1 cell, 3 replications, 2 estimators.
        assert_eq!(out.records.len(), 12);
        for r in &out.records {
            assert!(r.emse >= 0.0);
            assert!((0.0..=1.0).contains(&r.misclass));
            assert!(r.regret >= -1e-6);
            assert!(r.fit_seconds >= 0.0);
            assert!(r.ipw_value.is_finite());
        }
    }

    #[test]
    fn summary_means_match_record_means() {
        let dir = std::env::temp_dir().join("catelab_harness_summary");
        let mut cfg = tiny_config(&dir);
        cfg.replications = 4;
        let out = run_experiment(&cfg).unwrap();
        for row in summarize(&out.records) {
            let group: Vec<&MetricsRecord> = out
                .records
                .iter()
                .filter(|r| {
                    r.scenario == row.scenario
                        && r.m == row.m
                        && r.n == row.n
                        && r.estimator == row.estimator
                })
                .collect();
            assert_eq!(group.len(), row.reps);
            let mean = group.iter().map(|r| r.emse).sum::<f64>() / group.len() as f64;
            assert!((mean - row.means[0]).abs() < 1e-12);
            let mean = group.iter().map(|r| r.regret).sum::<f64>() / group.len() as f64;
            assert!((mean - row.means[4]).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_cells_zip_or_cross() {
        let mut cfg = ExperimentConfig {
            m_list: vec![10, 20],
            n_list: vec![3, 4],
            ..ExperimentConfig::default()
        };
        assert_eq!(cfg.grid_cells(), vec![(10, 3), (20, 4)]);
        cfg.cartesian = true;
        assert_eq!(cfg.grid_cells(), vec![(10, 3), (10, 4), (20, 3), (20, 4)]);
    }

    #[test]
    fn config_text_round_trip_and_errors() {
        let text = "\
# comment
scenarios = scenario1
m_list = 30, 40
n_list = 5, 6
test_m = 50
test_n = 8
replications = 2
base_seed = 123
estimators = standard, xlearner
loess_span = 0.6
xlearner_weight_mode = fixed:0.25
output_dir = results
";
        let cfg = ExperimentConfig::from_config_str(text, Some(Path::new("/tmp/base"))).unwrap();
        assert_eq!(cfg.m_list, vec![30, 40]);
        assert_eq!(cfg.base_seed, 123);
        assert_eq!(cfg.weight_mode, WeightMode::Fixed(0.25));
        assert_eq!(cfg.output_dir, Path::new("/tmp/base/results"));
        assert_eq!(cfg.scenarios[0].name(), "scenario1");

        assert!(ExperimentConfig::from_config_str("bogus = 1\n", None).is_err());
        assert!(ExperimentConfig::from_config_str("m_list = 10\nn_list = 2,3\n", None).is_err());
        assert!(
            ExperimentConfig::from_config_str("xlearner_weight_mode = sometimes\n", None).is_err()
        );
        assert!(ExperimentConfig::from_config_str("scenarios = scenario9\n", None).is_err());
    }

    #[test]
    fn config_loads_scenario_spec_files() {
        let dir = std::env::temp_dir().join("catelab_cfg_scenarios");
        fs::create_dir_all(&dir).unwrap();
        let custom = ScenarioSpec::new(
            "custom_flat",
            vec![],
            vec![1.0],
            vec![1.3],
            -1.0,
            1.0,
            0.02,
        )
        .unwrap();
        fs::write(dir.join("custom.scenario"), custom.to_config_string()).unwrap();
        let text = "scenarios = scenario2, custom.scenario\nreplications = 1\n";
        let cfg = ExperimentConfig::from_config_str(text, Some(&dir)).unwrap();
        assert_eq!(cfg.scenarios.len(), 2);
        assert_eq!(cfg.scenarios[1], custom);
    }

    #[test]
    fn ingest_csv_round_trips_generated_data() {
        let dir = std::env::temp_dir().join("catelab_ingest");
        fs::create_dir_all(&dir).unwrap();
        let spec = ScenarioSpec::scenario2().unwrap();
        let data = spec.generate(12, 5, 44).unwrap();
        let path = dir.join("trial.csv");
        let mut file = fs::File::create(&path).unwrap();
        data.write_csv(&mut file).unwrap();
        drop(file);
        let back = ingest_csv(&path).unwrap();
        assert_eq!(data, back);
    }

    #[test]
    fn plot_panels_have_the_documented_shape() {
        let dir = std::env::temp_dir().join("catelab_panels");
        let mut records = Vec::new();
        for (m, n) in [(200, 10), (400, 20), (600, 30), (800, 40)] {
            for rep in 0..2 {
                for est in [CateMethodTag::Standard, CateMethodTag::XLearner] {
                    records.push(MetricsRecord {
                        scenario: "scenario1".into(),
                        m,
                        n,
                        rep,
                        estimator: est,
                        emse: 0.0,
                        misclass: 0.25,
                        ipw_value: 1.3,
                        analytic_value: 1.32,
                        regret: 0.005,
                        fit_seconds: 0.001,
                    });
                }
            }
        }
        let paths = emit_plot_data(&records, &dir).unwrap();
        // One scenario: four panels.
        assert_eq!(paths.len(), 4);
        for path in &paths {
            let text = fs::read_to_string(path).unwrap();
            let data_lines: Vec<&str> = text
                .lines()
                .filter(|l| !l.starts_with('#') && !l.starts_with("cell"))
                .collect();
            assert_eq!(data_lines.len(), 4, "{path:?}");
            for line in data_lines {
                assert_eq!(line.split('\t').count(), 1 + 2 * 2, "{path:?}: {line}");
            }
        }
        // A perfect-estimator EMSE panel is all zeros.
        let emse_panel = paths
            .iter()
            .find(|p| p.file_name().unwrap().to_str().unwrap().contains("emse"))
            .unwrap();
        let text = fs::read_to_string(emse_panel).unwrap();
        for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("cell")) {
            for field in line.split('\t').skip(1) {
                assert_eq!(field.parse::<f64>().unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn failures_are_tagged_and_the_run_continues() {
        // span 0.05 over 40 control points selects two neighbors, below the
        // local-line minimum, so every fit errors out; the run itself must not.
        let dir = std::env::temp_dir().join("catelab_failures");
        let mut cfg = tiny_config(&dir);
        cfg.loess_span = 0.05;
        cfg.replications = 2;
        let out = run_experiment(&cfg).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.failures.len(), 4);
        assert!(out.failures.iter().all(|f| !f.message.is_empty()));
        assert!(dir.join("failures.csv").exists());
        assert!(out.records_path.exists());
    }

    #[test]
    fn default_output_dir_reads_the_environment() {
        // Just the fallback: the variable is unlikely to be set under test.
        let cfg = ExperimentConfig::default();
        assert!(!cfg.output_dir.as_os_str().is_empty());
    }

    #[test]
    fn arm_labels_survive_records(){
        // Sanity on the Display impls the CSV layer leans on.
        assert_eq!(Arm::Control.to_string(), "-1");
        assert_eq!(CateMethodTag::XLearner.to_string(), "xlearner");
    }
}
