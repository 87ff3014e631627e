//! Command-line front end and the analysis configuration file.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::advisor::{self, Advice, CovariateRole};
use crate::analytic::{self, ConditionalParams, GridParam, Sweep};
use crate::data::{ColumnMap, MainStudy, Table, ValidationStudy};
use crate::error::{Error, Result};
use crate::harness::{self, CatalogFilter, TableFormat};
use crate::regress::Family;
use crate::rsw::{self, AdjustmentPlan, AdjustmentStrategy, RswEstimate};
use crate::scenario::{self, DagId, OutcomeKind, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "recal", version, about = "Regression calibration for a mismeasured exposure")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corrected effect estimate from main-study and validation-study CSV files.
    Estimate(EstimateArgs),
    /// Monte Carlo simulation of a scenario file or catalog entries.
    Simulate(SimulateArgs),
    /// Analytic relative-efficiency grid as CSV.
    AreGrid(AreGridArgs),
    /// Adjustment advice from declared covariate roles.
    Advise(AdviseArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub main: PathBuf,
    #[arg(long)]
    pub validation: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with_all = ["catalog", "scenario"])]
    pub config: Option<PathBuf>,
    /// Run catalog entries whose name contains this text ("all" for every entry).
    #[arg(long)]
    pub catalog: Option<String>,
    /// Run catalog entries by exact name.
    #[arg(long)]
    pub scenario: Vec<String>,
    /// Restrict catalog runs to one outcome type.
    #[arg(long, value_parser = parse_outcome)]
    pub outcome: Option<OutcomeKind>,
    #[arg(long, env = "RECAL_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = "markdown")]
    pub format: TableFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print catalog names and exit.
    #[arg(long)]
    pub list: bool,
}

#[derive(Debug, Args)]
pub struct AreGridArgs {
    /// DAG number 1..=8.
    #[arg(long)]
    pub dag: u8,
    /// `param=start:stop:step` or `param=v1,v2,...`; repeatable.
    #[arg(long)]
    pub sweep: Vec<String>,
    /// `param=value` for correlations held fixed; repeatable.
    #[arg(long)]
    pub fixed: Vec<String>,
    #[arg(long, default_value_t = 5000)]
    pub n_ms: usize,
    #[arg(long, default_value_t = 400)]
    pub n_vs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdviseArgs {
    /// Role file (TOML with `[[covariate]]` entries).
    pub roles: PathBuf,
    #[arg(long, default_value = "linear", value_parser = parse_family)]
    pub family: Family,
    /// Print the machine-readable table instead of prose.
    #[arg(long)]
    pub table: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_outcome(s: &str) -> std::result::Result<OutcomeKind, String> {
    match s {
        "continuous" => Ok(OutcomeKind::Continuous),
        "binary" => Ok(OutcomeKind::Binary),
        _ => Err(format!("expected 'continuous' or 'binary', got '{s}'")),
    }
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    match s {
        "linear" => Ok(Family::Linear),
        "logistic" => Ok(Family::Logistic),
        _ => Err(format!("expected 'linear' or 'logistic', got '{s}'")),
    }
}

fn d_z() -> String {
    "z".into()
}
fn d_x() -> String {
    "x".into()
}
fn d_y() -> String {
    "y".into()
}
fn d_unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnsSection {
    #[serde(default = "d_z")]
    pub z: String,
    #[serde(default = "d_x")]
    pub x: String,
    #[serde(default = "d_y")]
    pub y: String,
}

impl Default for ColumnsSection {
    fn default() -> Self {
        Self { z: d_z(), x: d_x(), y: d_y() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSection {
    pub family: Family,
    /// Exposure increment for odds-ratio reporting.
    #[serde(default = "d_unit")]
    pub exposure_unit: f64,
}

impl Default for OutcomeSection {
    fn default() -> Self {
        Self { family: Family::Linear, exposure_unit: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    /// Strategies applied to every declared covariate, reported next to the recommended plan.
    #[serde(default)]
    pub force: Vec<AdjustmentStrategy>,
}

/// One analysis: column names, outcome family, covariate roles and extra strategies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub columns: ColumnsSection,
    #[serde(default)]
    pub outcome: OutcomeSection,
    #[serde(default, rename = "covariate")]
    pub covariates: Vec<CovariateRole>,
    #[serde(default)]
    pub strategy: StrategySection,
}

impl AnalysisConfig {
    pub fn from_toml(text: &str, source: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{source}: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?, &path.display().to_string())
    }

    pub fn column_map(&self) -> ColumnMap {
        ColumnMap {
            z: self.columns.z.clone(),
            x: self.columns.x.clone(),
            y: self.columns.y.clone(),
        }
    }

    pub fn covariate_names(&self) -> Vec<String> {
        self.covariates.iter().map(|c| c.name.clone()).collect()
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io { path: p.to_owned(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabeledEstimate {
    pub label: String,
    pub plan: AdjustmentPlan,
    pub estimate: RswEstimate,
    pub warnings: Vec<String>,
}

/// Result of `estimate`: the advice, the corrected estimates and the uncorrected slope.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub advice: Advice,
    pub estimates: Vec<LabeledEstimate>,
    pub naive_beta: f64,
    pub naive_se: f64,
    pub family: Family,
    pub exposure_unit: f64,
}

impl EstimateReport {
    pub fn recommended(&self) -> &RswEstimate {
        &self.estimates[0].estimate
    }
}

/// Advise from the declared roles, fit the recommended plan and any forced strategies.
pub fn run_estimate(main: &MainStudy, valid: &ValidationStudy, config: &AnalysisConfig) -> Result<EstimateReport> {
    let family = config.outcome.family;
    let mut roles = config.covariates.clone();
    let mut notes = Vec::new();
    for r in &mut roles {
        if main.covariate(&r.name).is_none() {
            return Err(Error::Schema(format!("covariate '{}' missing from main study", r.name)));
        }
        if r.available_in_validation && valid.covariate(&r.name).is_none() {
            r.available_in_validation = false;
            notes.push(format!("'{}' is not in the validation file; treated as unavailable there", r.name));
        }
    }
    let mut advice = advisor::advise_for(&roles, family)?;
    advice.warnings.splice(0..0, notes);

    let plan = advice.plan();
    let mut estimates = vec![LabeledEstimate {
        label: "recommended".into(),
        estimate: rsw::estimate_plan(main, valid, &plan, family)?,
        plan,
        warnings: Vec::new(),
    }];
    let names = config.covariate_names();
    for &s in &config.strategy.force {
        let plan = AdjustmentPlan::uniform(s, &names);
        let estimate = rsw::estimate_plan(main, valid, &plan, family)?;
        let mut warnings = advice.strategy_warnings(s);
        if estimate.small_me.warn {
            warnings.push("small measurement error approximation is doubtful".into());
        }
        estimates.push(LabeledEstimate { label: format!("forced {s}"), plan, estimate, warnings });
    }
    if estimates[0].estimate.small_me.warn {
        estimates[0]
            .warnings
            .push("small measurement error approximation is doubtful (var(X|Z,V)·β² ≥ 0.5 and prevalence ≥ 5%)".into());
    }
    let naive = rsw::fit_outcome(main, &estimates[0].plan.outcome, family)?;
    Ok(EstimateReport {
        advice,
        estimates,
        naive_beta: naive.coef(1),
        naive_se: naive.se(1),
        family,
        exposure_unit: config.outcome.exposure_unit,
    })
}

impl fmt::Display for EstimateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.advice)?;
        writeln!(f)?;
        for e in &self.estimates {
            let r = &e.estimate;
            writeln!(
                f,
                "{} [{}; outcome: {}; calibration: {}]",
                e.label,
                r.strategy,
                list_or_none(&e.plan.outcome),
                list_or_none(&e.plan.mem)
            )?;
            writeln!(
                f,
                "  beta = {:.6}  se = {:.6}  95% CI [{:.6}, {:.6}]",
                r.beta_hat, r.se, r.ci_low, r.ci_high
            )?;
            writeln!(
                f,
                "  gamma = {:.6} ({:.6})  alpha = {:.6} ({:.6})  var(X|Z,V)·beta² = {:.4}",
                r.gamma_hat, r.gamma_se, r.alpha_hat, r.alpha_se, r.small_me_stat
            )?;
            if let Some(or) = r.odds_ratio(self.exposure_unit) {
                writeln!(
                    f,
                    "  OR per {} = {:.4}  95% CI [{:.4}, {:.4}]",
                    or.unit, or.or, or.ci_low, or.ci_high
                )?;
            }
            for w in &e.warnings {
                writeln!(f, "  warning: {w}")?;
            }
        }
        writeln!(f, "uncorrected: beta = {:.6}  se = {:.6}", self.naive_beta, self.naive_se)
    }
}

fn list_or_none(v: &[String]) -> String {
    if v.is_empty() {
        "none".into()
    } else {
        v.join(", ")
    }
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<EstimateReport> {
    let config = AnalysisConfig::read(&args.config)?;
    let map = config.column_map();
    let names = config.covariate_names();
    let main = MainStudy::from_table(Table::read(&args.main)?, &map, &names, &args.main.display().to_string())?;
    let valid = ValidationStudy::from_table(
        Table::read(&args.validation)?,
        &map,
        &names,
        &args.validation.display().to_string(),
    )?;
    let report = run_estimate(&main, &valid, &config)?;
    write_or_print(args.out.as_deref(), &report.to_string())?;
    Ok(report)
}

/// Scenarios selected by the simulate flags, with overrides applied.
pub fn simulate_configs(args: &SimulateArgs) -> Result<Vec<ScenarioConfig>> {
    let mut configs = if let Some(path) = &args.config {
        let text = read_text(path)?;
        let mut c: ScenarioConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if c.name.is_empty() {
            c.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        vec![c]
    } else if !args.scenario.is_empty() {
        args.scenario.iter().map(|n| scenario::catalog_entry(n)).collect::<Result<_>>()?
    } else if args.catalog.is_some() {
        CatalogFilter {
            name_contains: args.catalog.clone(),
            outcome: args.outcome,
            ..Default::default()
        }
        .select()?
    } else {
        return Err(Error::InvalidConfig("give --config, --scenario or --catalog".into()));
    };
    for c in &mut configs {
        if let Some(s) = args.seed {
            c.seed = s;
        }
        if let Some(r) = args.replicates {
            c.replicates = r;
        }
    }
    Ok(configs)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<String> {
    if args.list {
        let names: Vec<String> = scenario::catalog().into_iter().map(|s| s.config.name).collect();
        let text = names.join("\n") + "\n";
        write_or_print(args.out.as_deref(), &text)?;
        return Ok(text);
    }
    let configs = simulate_configs(args)?;
    let run = || -> Result<Vec<harness::SimResult>> {
        configs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                eprintln!("[{}/{}] {} ({} replicates)", i + 1, configs.len(), c.name, c.replicates);
                harness::run_scenario(c, &AdjustmentStrategy::ALL)
            })
            .collect()
    };
    let results = match args.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let text = harness::summary_table(&results, args.format);
    write_or_print(args.out.as_deref(), &text)?;
    Ok(text)
}

fn parse_assignment(s: &str) -> Result<(GridParam, &str)> {
    let (name, rhs) = s
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("expected param=value, got '{s}'")))?;
    Ok((name.trim().parse()?, rhs.trim()))
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("'{s}' is not a number")))
}

/// Parse `param=start:stop:step` or `param=v1,v2,...`.
pub fn parse_sweep(s: &str) -> Result<Sweep> {
    let (param, rhs) = parse_assignment(s)?;
    let values = if rhs.contains(':') {
        let parts: Vec<f64> = rhs.split(':').map(parse_number).collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(Error::InvalidConfig(format!("range '{rhs}' must be start:stop:step")));
        };
        if !(step > 0.0) || stop < start {
            return Err(Error::InvalidConfig(format!("range '{rhs}' is empty")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| ((start + step * i as f64) * 1e10).round() / 1e10).collect()
    } else {
        rhs.split(',').map(parse_number).collect::<Result<_>>()?
    };
    Ok(Sweep { param, values })
}

pub fn cmd_are_grid(args: &AreGridArgs) -> Result<String> {
    let dag = DagId::from_index(args.dag)?;
    let sweeps = if args.sweep.is_empty() {
        analytic::default_sweeps(dag)
    } else {
        args.sweep.iter().map(|s| parse_sweep(s)).collect::<Result<Vec<_>>>()?
    };
    let mut fixed = ConditionalParams::default();
    for f in &args.fixed {
        let (p, rhs) = parse_assignment(f)?;
        fixed.set(p, parse_number(rhs)?);
    }
    let cells = analytic::are_grid(dag, &sweeps, &fixed, args.n_ms, args.n_vs)?;
    let text = analytic::grid_to_csv(dag, &sweeps, &cells);
    write_or_print(args.out.as_deref(), &text)?;
    Ok(text)
}

pub fn cmd_advise(args: &AdviseArgs) -> Result<Advice> {
    let config = AnalysisConfig::read(&args.roles)?;
    let advice = advisor::advise_for(&config.covariates, args.family)?;
    let text = if args.table { advice.to_table() } else { advice.to_string() };
    write_or_print(args.out.as_deref(), &text)?;
    Ok(advice)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(a) => cmd_estimate(&a).map(drop),
        Command::Simulate(a) => cmd_simulate(&a).map(drop),
        Command::AreGrid(a) => cmd_are_grid(&a).map(drop),
        Command::Advise(a) => cmd_advise(&a).map(drop),
    }
}
