//! Command-line front end: run the Monte Carlo grid, probe the membership
//! diagnostics, or evaluate both estimators on a dataset file.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use catelab_core::diagnostics::{membership_report, CateMethod};
use catelab_core::{
    emit_plot_data, fit_standard_with, fit_xlearner_with, ingest_csv, run_experiment,
    sign_rule, Arm, ExperimentConfig, ScenarioSpec, StandardConfig, TauEstimate,
    XLearnerConfig,
};

#[derive(Parser)]
#[command(name = "catelab", version, about = "CATE estimators versus treatment rules: simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment grid from a config file and write CSV/plot data.
    Run(RunArgs),
    /// Monte Carlo membership diagnostics comparing two estimation methods.
    Membership(MembershipArgs),
    /// Fit both estimators on a dataset file and print the effect grid.
    Eval(EvalArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (flat key = value).
    #[arg(long)]
    config: PathBuf,
    /// Replace the config's scenario list (built-in name or spec file path).
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
    /// Override the replication count.
    #[arg(long)]
    reps: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the LOESS span.
    #[arg(long)]
    span: Option<f64>,
    /// Run the full m x n product instead of index-wise pairs.
    #[arg(long)]
    cartesian: bool,
}

#[derive(Args)]
struct MembershipArgs {
    /// Scenario: built-in name or spec file path.
    #[arg(long, default_value = "scenario1")]
    scenario: String,
    /// Training control-arm size.
    #[arg(long, default_value_t = 800)]
    m: usize,
    /// Training treated-arm size.
    #[arg(long, default_value_t = 40)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// First method: oracle, standard, or xlearner.
    #[arg(long, default_value = "xlearner")]
    method1: String,
    /// Second method: oracle, standard, or xlearner.
    #[arg(long, default_value = "standard")]
    method2: String,
    /// Uniform evaluation grid size.
    #[arg(long, default_value_t = 1001)]
    grid_size: usize,
    /// LOESS span used by both methods.
    #[arg(long, default_value_t = 0.75)]
    span: f64,
    /// Also write the report as CSV to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset CSV with header `x,a,y` and a in {-1, 1}.
    #[arg(long)]
    data: PathBuf,
    /// Number of evenly spaced covariate points to print.
    #[arg(long, default_value_t = 21)]
    grid_points: usize,
    /// LOESS span for the control-arm and effect regressions.
    #[arg(long, default_value_t = 0.75)]
    span: f64,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Membership(args) => cmd_membership(args),
        Command::Eval(args) => cmd_eval(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::from_config_file(&args.config)
        .with_context(|| format!("loading config {}", args.config.display()))?;
    if !args.scenarios.is_empty() {
        let base = args.config.parent().map(PathBuf::from);
        cfg.scenarios = args
            .scenarios
            .iter()
            .map(|entry| resolve_scenario(entry, base.as_deref()))
            .collect::<anyhow::Result<_>>()?;
    }
    if let Some(reps) = args.reps {
        cfg.replications = reps;
    }
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(span) = args.span {
        cfg.loess_span = span;
    }
    if args.cartesian {
        cfg.cartesian = true;
    }
    cfg.validate()?;

    let cells = cfg.grid_cells().len();
    eprintln!(
        "running {} scenario(s) x {} cell(s) x {} replication(s) x {} estimator(s), seed {}",
        cfg.scenarios.len(),
        cells,
        cfg.replications,
        cfg.estimators.len(),
        cfg.base_seed
    );
    let output = run_experiment(&cfg)?;
    let panels = emit_plot_data(&output.records, &cfg.output_dir)?;
    println!("records: {}", output.records_path.display());
    println!("summary: {}", output.summary_path.display());
    for p in panels {
        println!("panel:   {}", p.display());
    }
    if !output.failures.is_empty() {
        eprintln!(
            "warning: {} replication(s) failed; see failures.csv",
            output.failures.len()
        );
    }
    Ok(())
}

fn resolve_scenario(entry: &str, base_dir: Option<&std::path::Path>) -> anyhow::Result<ScenarioSpec> {
    if let Ok(spec) = ScenarioSpec::builtin(entry) {
        return Ok(spec);
    }
    let path = PathBuf::from(entry);
    let path = match (path.is_relative(), base_dir) {
        (true, Some(dir)) if !path.exists() => dir.join(path),
        _ => path,
    };
    ScenarioSpec::from_config_file(&path)
        .with_context(|| format!("scenario `{entry}` is not built-in and `{}` did not parse", path.display()))
}

fn parse_method(name: &str, span: f64) -> anyhow::Result<CateMethod> {
    Ok(match name {
        "oracle" => CateMethod::TrueTau,
        "standard" => CateMethod::Standard(StandardConfig::with_span(span)?),
        "xlearner" => CateMethod::XLearner(XLearnerConfig::with_span(span)?),
        other => bail!("unknown method `{other}` (use oracle, standard, xlearner)"),
    })
}

fn cmd_membership(args: MembershipArgs) -> anyhow::Result<()> {
    let spec = resolve_scenario(&args.scenario, None)?;
    let method1 = parse_method(&args.method1, args.span)?;
    let method2 = parse_method(&args.method2, args.span)?;
    let report = membership_report(
        &method1,
        &method2,
        &spec,
        args.m,
        args.n,
        args.reps,
        args.seed,
        args.grid_size,
    )?;
    println!("{report}");
    if let Some(path) = args.out {
        let text = format!(
            "{}\n{}\n",
            catelab_core::diagnostics::MembershipReport::csv_header(),
            report.to_csv_row()
        );
        std::fs::write(&path, text)?;
        println!("csv: {}", path.display());
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    if args.grid_points == 0 {
        bail!("--grid-points must be positive");
    }
    let data = ingest_csv(&args.data)
        .with_context(|| format!("reading {}", args.data.display()))?;
    println!(
        "dataset: {} units ({} control, {} treated)",
        data.len(),
        data.m(),
        data.n()
    );
    let standard = fit_standard_with(&data, &StandardConfig::with_span(args.span)?)?;
    let xlearner = fit_xlearner_with(&data, &XLearnerConfig::with_span(args.span)?)?;
    let std_rule = sign_rule(&standard);
    let x_rule = sign_rule(&xlearner);

    let lo = data.x().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = data.x().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "{:>10}  {:>14} {:>6}  {:>14} {:>6}",
        "x", "tau_standard", "rule", "tau_xlearner", "rule"
    );
    for i in 0..args.grid_points {
        let x = if args.grid_points == 1 {
            (lo + hi) / 2.0
        } else {
            lo + (hi - lo) * i as f64 / (args.grid_points - 1) as f64
        };
        let arm = |a: Arm| if a == Arm::Treated { "+1" } else { "-1" };
        println!(
            "{:>10.4}  {:>14.6} {:>6}  {:>14.6} {:>6}",
            x,
            standard.tau_at(x),
            arm(std_rule.decide(x)),
            xlearner.tau_at(x),
            arm(x_rule.decide(x))
        );
    }
    println!(
        "fit seconds: standard {:.6}, xlearner {:.6}",
        standard.fit_seconds(),
        xlearner.fit_seconds()
    );
    Ok(())
}
