//! Monte Carlo replication of the scenario catalog.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::analytic;
use crate::error::{Error, Result};
use crate::rsw::{AdjustmentStrategy, StrategyFits};
use crate::scenario::{self, NamedScenario, OutcomeKind, ScenarioConfig, COVARIATE};

/// Fraction of failed replicates above which a warning is printed.
pub const WARN_FAILURE_RATE: f64 = 0.01;
/// Fraction of failed replicates above which the scenario is an error.
pub const MAX_FAILURE_RATE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySummary {
    pub strategy: AdjustmentStrategy,
    pub mean: f64,
    pub mean_se: f64,
    pub percent_bias: f64,
    pub percent_bias_se: f64,
    pub variance: f64,
    /// Normal-theory standard error of the empirical variance.
    pub variance_se: f64,
    /// Empirical Var(OM)/Var(strategy); `None` when OM was not run.
    pub ere: Option<f64>,
    pub analytic_variance: Option<f64>,
    pub are: Option<f64>,
    /// Mean small-measurement-error statistic over replicates.
    pub mean_small_me: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub scenario: String,
    pub outcome: OutcomeKind,
    pub beta_x: f64,
    pub replicates: usize,
    pub failures: usize,
    pub strategies: Vec<StrategySummary>,
    /// Mean main-study outcome prevalence (binary outcomes).
    pub prevalence: Option<f64>,
}

impl SimResult {
    pub fn get(&self, strategy: AdjustmentStrategy) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.strategy == strategy)
    }

    pub fn succeeded(&self) -> usize {
        self.replicates - self.failures
    }
}

struct Replicate {
    betas: Vec<f64>,
    small_me: Vec<f64>,
    prevalence: Option<f64>,
}

fn one_replicate(config: &ScenarioConfig, k: u64, strategies: &[AdjustmentStrategy]) -> Result<Replicate> {
    let s = scenario::generate(config, k)?;
    let covs = [COVARIATE.to_string()];
    let fits = StrategyFits::new(&s.main, &s.validation, &covs, config.family(), strategies)?;
    let mut betas = Vec::with_capacity(strategies.len());
    let mut small_me = Vec::with_capacity(strategies.len());
    for &st in strategies {
        let e = fits.estimate(st)?;
        betas.push(e.beta_hat);
        small_me.push(e.small_me_stat);
    }
    Ok(Replicate {
        betas,
        small_me,
        prevalence: s.main.prevalence(),
    })
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Run every replicate of a scenario for the given strategies.
///
/// Replicates run in parallel on the current rayon pool; results are folded
/// in replicate order, so the output does not depend on scheduling.
pub fn run_scenario(config: &ScenarioConfig, strategies: &[AdjustmentStrategy]) -> Result<SimResult> {
    config.validate()?;
    if strategies.is_empty() {
        return Err(Error::InvalidConfig("no strategies requested".into()));
    }
    let outcomes: Vec<Result<Replicate>> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|k| one_replicate(config, k, strategies))
        .collect();
    let mut ok = Vec::with_capacity(outcomes.len());
    let mut failures = 0usize;
    let mut first_error = None;
    for r in outcomes {
        match r {
            Ok(r) => ok.push(r),
            Err(e) => {
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    let total = config.replicates;
    let rate = failures as f64 / total as f64;
    if rate > MAX_FAILURE_RATE || ok.len() < 2 {
        return Err(Error::TooManyFailures {
            scenario: config.name.clone(),
            failed: failures,
            total,
        });
    }
    if rate > WARN_FAILURE_RATE {
        eprintln!(
            "warning: {failures} of {total} replicates failed in '{}' and were excluded (first: {})",
            config.name,
            first_error.map(|e| e.to_string()).unwrap_or_default()
        );
    }

    let analytic_params = if config.outcome == OutcomeKind::Continuous && config.beta_xv == 0.0 {
        scenario::implied_correlations(config).ok()
    } else {
        None
    };
    let om_index = strategies.iter().position(|&s| s == AdjustmentStrategy::OM);
    let n = ok.len() as f64;
    let columns: Vec<Vec<f64>> = (0..strategies.len())
        .map(|j| ok.iter().map(|r| r.betas[j]).collect())
        .collect();
    let om_var = om_index.map(|j| mean_var(&columns[j]).1);
    let summaries = strategies
        .iter()
        .enumerate()
        .map(|(j, &st)| {
            let (mean, var) = mean_var(&columns[j]);
            let mean_se = (var / n).sqrt();
            let analytic_variance = analytic_params
                .as_ref()
                .and_then(|p| analytic::analytic_variance(p, st).ok());
            let are = analytic_params.as_ref().and_then(|p| analytic::are(p, st).ok());
            StrategySummary {
                strategy: st,
                mean,
                mean_se,
                percent_bias: 100.0 * (mean - config.beta_x) / config.beta_x,
                percent_bias_se: 100.0 * mean_se / config.beta_x.abs(),
                variance: var,
                variance_se: var * (2.0 / (n - 1.0)).sqrt(),
                ere: om_var.map(|v| v / var),
                analytic_variance,
                are,
                mean_small_me: ok.iter().map(|r| r.small_me[j]).sum::<f64>() / n,
            }
        })
        .collect();
    let prevalence = (config.outcome == OutcomeKind::Binary)
        .then(|| ok.iter().filter_map(|r| r.prevalence).sum::<f64>() / n);
    Ok(SimResult {
        scenario: config.name.clone(),
        outcome: config.outcome,
        beta_x: config.beta_x,
        replicates: total,
        failures,
        strategies: summaries,
        prevalence,
    })
}

/// Selects catalog entries.
#[derive(Debug, Clone, Default)]
pub struct CatalogFilter {
    /// Substring of the scenario name; `None` or "all" matches everything.
    pub name_contains: Option<String>,
    pub outcome: Option<OutcomeKind>,
    /// Overrides each entry's replicate count.
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
}

impl CatalogFilter {
    pub fn matches(&self, s: &NamedScenario) -> bool {
        let name_ok = match self.name_contains.as_deref() {
            None | Some("all") => true,
            Some(f) => s.config.name.contains(f),
        };
        name_ok && self.outcome.is_none_or(|o| o == s.config.outcome)
    }

    pub fn select(&self) -> Result<Vec<ScenarioConfig>> {
        let all = scenario::catalog();
        let picked: Vec<ScenarioConfig> = all
            .iter()
            .filter(|s| self.matches(s))
            .map(|s| {
                let mut c = s.config.clone();
                if let Some(r) = self.replicates {
                    c.replicates = r;
                }
                if let Some(seed) = self.seed {
                    c.seed = seed;
                }
                c
            })
            .collect();
        if picked.is_empty() {
            return Err(Error::UnknownScenario {
                name: self.name_contains.clone().unwrap_or_default(),
                valid: all.iter().map(|s| s.config.name.as_str()).collect::<Vec<_>>().join(", "),
            });
        }
        Ok(picked)
    }
}

/// Analytic versus empirical efficiency for one scenario and strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub scenario: String,
    pub strategy: AdjustmentStrategy,
    pub are: f64,
    pub ere: f64,
}

#[derive(Debug, Clone)]
pub struct CatalogRun {
    pub results: Vec<SimResult>,
    pub comparison: Vec<Comparison>,
}

/// Run all matching catalog scenarios with every strategy.
pub fn run_catalog(filter: &CatalogFilter) -> Result<CatalogRun> {
    let configs = filter.select()?;
    let mut results = Vec::with_capacity(configs.len());
    for (i, c) in configs.iter().enumerate() {
        eprintln!("[{}/{}] {} ({} replicates)", i + 1, configs.len(), c.name, c.replicates);
        results.push(run_scenario(c, &AdjustmentStrategy::ALL)?);
    }
    let comparison = results
        .iter()
        .flat_map(|r| {
            r.strategies.iter().filter_map(move |s| {
                Some(Comparison {
                    scenario: r.scenario.clone(),
                    strategy: s.strategy,
                    are: s.are?,
                    ere: s.ere?,
                })
            })
        })
        .collect();
    Ok(CatalogRun { results, comparison })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            _ => Err(Error::InvalidConfig(format!("unknown table format '{s}' (csv or markdown)"))),
        }
    }
}

/// Variances are printed in units of 1e-3 for continuous and 1e-2 for binary outcomes.
fn format_variance(v: f64, outcome: OutcomeKind) -> String {
    match outcome {
        OutcomeKind::Continuous => format!("{:.2}e-3", v * 1e3),
        OutcomeKind::Binary => format!("{:.2}e-2", v * 1e2),
    }
}

fn round_bias(b: f64) -> String {
    let r = b.round();
    format!("{}", if r == 0.0 { 0.0 } else { r })
}

fn opt2(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.2}"))
}

/// Summary with columns scenario, strategy, bias (%), var, ERE, ARE.
pub fn summary_table(results: &[SimResult], format: TableFormat) -> String {
    let header = ["scenario", "strategy", "bias", "var", "ERE", "ARE"];
    let mut rows = Vec::new();
    for r in results {
        for s in &r.strategies {
            rows.push([
                r.scenario.clone(),
                s.strategy.tag().to_string(),
                round_bias(s.percent_bias),
                format_variance(s.variance, r.outcome),
                opt2(s.ere),
                opt2(s.are),
            ]);
        }
    }
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(&header.join(","));
            out.push('\n');
            for row in rows {
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for row in rows {
                let _ = writeln!(out, "| {} |", row.join(" | "));
            }
        }
    }
    out
}
