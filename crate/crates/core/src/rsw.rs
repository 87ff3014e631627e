//! Ratio (regression-calibration) estimators β̂ = γ̂₁/α̂₁.
//!
//! γ̂₁ is the Z slope of the outcome model fitted on the main study and α̂₁
//! the Z slope of the calibration model (X on Z) fitted on the validation
//! study. The four strategies differ only in which of the two models carries
//! the covariates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{MainStudy, ValidationStudy};
use crate::error::{Error, Result};
use crate::regress::{self, DesignSpec, Family, ModelFit, ResponseRole};

pub const Z_SCORE_95: f64 = 1.959963984540054;

/// Smallest |α̂₁|/se(α̂₁) for which the ratio is reported.
pub const MIN_SLOPE_Z: f64 = 2.0;

pub const SMALL_ME_THRESHOLD: f64 = 0.5;
pub const RARE_DISEASE_PREVALENCE: f64 = 0.05;

/// Which models include the covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AdjustmentStrategy {
    /// Outcome model and calibration model.
    OM,
    /// Neither model.
    NoneNone,
    /// Calibration model only.
    NoneM,
    /// Outcome model only.
    ONone,
}

impl AdjustmentStrategy {
    pub const ALL: [AdjustmentStrategy; 4] = [
        AdjustmentStrategy::OM,
        AdjustmentStrategy::NoneNone,
        AdjustmentStrategy::NoneM,
        AdjustmentStrategy::ONone,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            AdjustmentStrategy::OM => "OM",
            AdjustmentStrategy::NoneNone => "NoneNone",
            AdjustmentStrategy::NoneM => "NoneM",
            AdjustmentStrategy::ONone => "ONone",
        }
    }

    /// Compact two-character label: O/- for the outcome model, M/- for the calibration model.
    pub fn short(self) -> &'static str {
        match self {
            AdjustmentStrategy::OM => "OM",
            AdjustmentStrategy::NoneNone => "--",
            AdjustmentStrategy::NoneM => "-M",
            AdjustmentStrategy::ONone => "O-",
        }
    }

    pub fn adjusts_outcome(self) -> bool {
        matches!(self, AdjustmentStrategy::OM | AdjustmentStrategy::ONone)
    }

    pub fn adjusts_mem(self) -> bool {
        matches!(self, AdjustmentStrategy::OM | AdjustmentStrategy::NoneM)
    }

    pub fn from_flags(outcome: bool, mem: bool) -> Self {
        match (outcome, mem) {
            (true, true) => AdjustmentStrategy::OM,
            (false, false) => AdjustmentStrategy::NoneNone,
            (false, true) => AdjustmentStrategy::NoneM,
            (true, false) => AdjustmentStrategy::ONone,
        }
    }
}

impl fmt::Display for AdjustmentStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for AdjustmentStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        AdjustmentStrategy::ALL
            .into_iter()
            .find(|k| k.tag().eq_ignore_ascii_case(s) || k.short().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown strategy '{s}' (expected OM, NoneNone, NoneM or ONone)"
                ))
            })
    }
}

/// Covariates entering each model. Covariates may differ between the two lists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdjustmentPlan {
    pub outcome: Vec<String>,
    pub mem: Vec<String>,
}

impl AdjustmentPlan {
    /// Every covariate placed the same way.
    pub fn uniform(strategy: AdjustmentStrategy, covariates: &[String]) -> Self {
        Self {
            outcome: if strategy.adjusts_outcome() { covariates.to_vec() } else { Vec::new() },
            mem: if strategy.adjusts_mem() { covariates.to_vec() } else { Vec::new() },
        }
    }

    /// Label describing which models are adjusted at all.
    pub fn strategy(&self) -> AdjustmentStrategy {
        AdjustmentStrategy::from_flags(!self.outcome.is_empty(), !self.mem.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallMeDiagnostic {
    /// Calibration-model MSE × β̂².
    pub stat: f64,
    /// Outcome prevalence below 5%; always true for continuous outcomes, where the approximation is exact.
    pub rare_disease_ok: bool,
    pub warn: bool,
}

/// Check whether the logistic regression-calibration approximation is trustworthy.
pub fn small_me_diagnostic(fit_mem: &ModelFit, beta_hat: f64, prevalence: Option<f64>) -> SmallMeDiagnostic {
    let stat = fit_mem.residual_variance * beta_hat * beta_hat;
    let rare_disease_ok = prevalence.is_none_or(|p| p < RARE_DISEASE_PREVALENCE);
    SmallMeDiagnostic {
        stat,
        rare_disease_ok,
        warn: stat >= SMALL_ME_THRESHOLD && !rare_disease_ok,
    }
}

/// Var(γ̂/α̂) ≈ Var(γ̂)/α̂² + γ̂²Var(α̂)/α̂⁴. The two slopes come from disjoint samples,
/// so there is no covariance term.
pub fn delta_variance(gamma_hat: f64, var_gamma: f64, alpha_hat: f64, var_alpha: f64) -> Result<f64> {
    let (g, a) = delta_terms(gamma_hat, var_gamma, alpha_hat, var_alpha)?;
    Ok(g + a)
}

fn delta_terms(gamma_hat: f64, var_gamma: f64, alpha_hat: f64, var_alpha: f64) -> Result<(f64, f64)> {
    if alpha_hat == 0.0 || !alpha_hat.is_finite() {
        return Err(Error::ZeroSlope);
    }
    if !(var_gamma >= 0.0 && var_alpha >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "variances must be nonnegative (got {var_gamma}, {var_alpha})"
        )));
    }
    let a2 = alpha_hat * alpha_hat;
    Ok((var_gamma / a2, gamma_hat * gamma_hat * var_alpha / (a2 * a2)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RswEstimate {
    pub beta_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub strategy: AdjustmentStrategy,
    pub gamma_hat: f64,
    pub gamma_se: f64,
    pub alpha_hat: f64,
    pub alpha_se: f64,
    /// Var(γ̂)/α̂² part of se².
    pub gamma_term: f64,
    /// γ̂²Var(α̂)/α̂⁴ part of se².
    pub alpha_term: f64,
    pub small_me_stat: f64,
    pub small_me: SmallMeDiagnostic,
    pub outcome_family: Family,
}

/// Odds ratio for a change of `unit` in X with its Wald interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddsRatio {
    pub unit: f64,
    pub or: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RswEstimate {
    pub fn odds_ratio(&self, unit: f64) -> Option<OddsRatio> {
        if self.outcome_family != Family::Logistic {
            return None;
        }
        let (lo, hi) = if unit >= 0.0 {
            (self.ci_low, self.ci_high)
        } else {
            (self.ci_high, self.ci_low)
        };
        Some(OddsRatio {
            unit,
            or: (self.beta_hat * unit).exp(),
            ci_low: (lo * unit).exp(),
            ci_high: (hi * unit).exp(),
        })
    }
}

fn fit_on<'a>(
    family: Family,
    role: ResponseRole,
    y: &[f64],
    n: usize,
    covariates: &[String],
    lookup: impl FnMut(&str) -> Option<&'a [f64]>,
) -> Result<ModelFit> {
    let names = std::iter::once("z".to_string()).chain(covariates.iter().cloned());
    let spec = DesignSpec::new(role, names)?;
    let x = spec.build(n, lookup)?;
    regress::fit(family, y, &x)
}

/// Outcome model Y ~ Z + covariates on the main study.
pub fn fit_outcome(main: &MainStudy, covariates: &[String], family: Family) -> Result<ModelFit> {
    main.validate()?;
    if covariates.iter().any(|c| c == "z" || c == "y") {
        return Err(Error::InvalidConfig("covariate names 'z' and 'y' are reserved".into()));
    }
    fit_on(family, ResponseRole::Outcome, &main.y, main.len(), covariates, |n| main.column(n))
}

/// Calibration model X ~ Z + covariates on the validation study.
pub fn fit_mem(valid: &ValidationStudy, covariates: &[String]) -> Result<ModelFit> {
    valid.validate()?;
    if covariates.iter().any(|c| c == "z" || c == "x") {
        return Err(Error::InvalidConfig("covariate names 'z' and 'x' are reserved".into()));
    }
    fit_on(
        Family::Linear,
        ResponseRole::TrueExposure,
        &valid.x,
        valid.len(),
        covariates,
        |n| valid.column(n),
    )
}

/// Assemble the corrected estimate from an outcome fit and a calibration fit (Z in column 1 of both).
pub fn combine(
    outcome_fit: &ModelFit,
    mem_fit: &ModelFit,
    strategy: AdjustmentStrategy,
    prevalence: Option<f64>,
) -> Result<RswEstimate> {
    let gamma_hat = outcome_fit.coef(1);
    let alpha_hat = mem_fit.coef(1);
    let alpha_se = mem_fit.se(1);
    let z = if alpha_se > 0.0 { alpha_hat.abs() / alpha_se } else { f64::INFINITY };
    if alpha_hat.abs() < 1e-8 || z < MIN_SLOPE_Z {
        return Err(Error::NearZeroCalibrationSlope { alpha: alpha_hat, z });
    }
    let (gamma_term, alpha_term) = delta_terms(gamma_hat, outcome_fit.var(1), alpha_hat, mem_fit.var(1))?;
    let beta_hat = gamma_hat / alpha_hat;
    let se = (gamma_term + alpha_term).sqrt();
    let small_me = small_me_diagnostic(
        mem_fit,
        beta_hat,
        if outcome_fit.family == Family::Logistic { prevalence } else { None },
    );
    Ok(RswEstimate {
        beta_hat,
        se,
        ci_low: beta_hat - Z_SCORE_95 * se,
        ci_high: beta_hat + Z_SCORE_95 * se,
        strategy,
        gamma_hat,
        gamma_se: outcome_fit.se(1),
        alpha_hat,
        alpha_se,
        gamma_term,
        alpha_term,
        small_me_stat: small_me.stat,
        small_me,
        outcome_family: outcome_fit.family,
    })
}

/// Estimate with an explicit strategy; the covariate lists must agree with it.
pub fn estimate(
    main: &MainStudy,
    valid: &ValidationStudy,
    strategy: AdjustmentStrategy,
    covariates_outcome: &[String],
    covariates_mem: &[String],
    family: Family,
) -> Result<RswEstimate> {
    let plan = AdjustmentPlan {
        outcome: covariates_outcome.to_vec(),
        mem: covariates_mem.to_vec(),
    };
    if plan.strategy() != strategy {
        let reason = match strategy {
            AdjustmentStrategy::OM => "both covariate sets must be nonempty",
            AdjustmentStrategy::NoneNone => "both covariate sets must be empty",
            AdjustmentStrategy::NoneM => "outcome set must be empty and calibration set nonempty",
            AdjustmentStrategy::ONone => "outcome set must be nonempty and calibration set empty",
        };
        return Err(Error::StrategyMismatch {
            strategy: strategy.tag().into(),
            reason: reason.into(),
        });
    }
    estimate_plan(main, valid, &plan, family)
}

/// Estimate for an arbitrary plan (covariates can be placed differently one by one).
pub fn estimate_plan(
    main: &MainStudy,
    valid: &ValidationStudy,
    plan: &AdjustmentPlan,
    family: Family,
) -> Result<RswEstimate> {
    for c in &plan.outcome {
        if main.covariate(c).is_none() {
            return Err(Error::Schema(format!("outcome-model covariate '{c}' missing from main study")));
        }
    }
    for c in &plan.mem {
        if valid.covariate(c).is_none() {
            return Err(Error::Schema(format!(
                "calibration-model covariate '{c}' missing from validation study"
            )));
        }
    }
    let outcome_fit = fit_outcome(main, &plan.outcome, family)?;
    let mem_fit = fit_mem(valid, &plan.mem)?;
    combine(&outcome_fit, &mem_fit, plan.strategy(), main.prevalence())
}

/// The four fits behind all strategies for one covariate set, computed once.
#[derive(Debug, Clone)]
pub struct StrategyFits {
    outcome_plain: Option<ModelFit>,
    outcome_adjusted: Option<ModelFit>,
    mem_plain: Option<ModelFit>,
    mem_adjusted: Option<ModelFit>,
    prevalence: Option<f64>,
}

impl StrategyFits {
    /// Fit only the models that `strategies` need.
    pub fn new(
        main: &MainStudy,
        valid: &ValidationStudy,
        covariates: &[String],
        family: Family,
        strategies: &[AdjustmentStrategy],
    ) -> Result<Self> {
        let need = |f: fn(AdjustmentStrategy) -> bool, want: bool| strategies.iter().any(|&s| f(s) == want);
        let outcome_plain = need(AdjustmentStrategy::adjusts_outcome, false)
            .then(|| fit_outcome(main, &[], family))
            .transpose()?;
        let outcome_adjusted = need(AdjustmentStrategy::adjusts_outcome, true)
            .then(|| fit_outcome(main, covariates, family))
            .transpose()?;
        let mem_plain = need(AdjustmentStrategy::adjusts_mem, false)
            .then(|| fit_mem(valid, &[]))
            .transpose()?;
        let mem_adjusted = need(AdjustmentStrategy::adjusts_mem, true)
            .then(|| fit_mem(valid, covariates))
            .transpose()?;
        Ok(Self {
            outcome_plain,
            outcome_adjusted,
            mem_plain,
            mem_adjusted,
            prevalence: main.prevalence(),
        })
    }

    pub fn estimate(&self, strategy: AdjustmentStrategy) -> Result<RswEstimate> {
        let missing = || Error::InvalidConfig(format!("strategy {strategy} was not requested when fitting"));
        let o = if strategy.adjusts_outcome() { &self.outcome_adjusted } else { &self.outcome_plain };
        let m = if strategy.adjusts_mem() { &self.mem_adjusted } else { &self.mem_plain };
        combine(
            o.as_ref().ok_or_else(missing)?,
            m.as_ref().ok_or_else(missing)?,
            strategy,
            self.prevalence,
        )
    }
}

/// Covariate-specific effect from an outcome model with Z·V and V² terms.
#[derive(Debug, Clone)]
pub struct EffectModEstimate {
    pub beta_z_star: f64,
    pub beta_v_star: f64,
    pub beta_zv_star: f64,
    pub beta_v2_star: f64,
    pub alpha_z: f64,
    pub alpha_v: f64,
    pub outcome_fit: ModelFit,
    pub mem_fit: ModelFit,
}

impl EffectModEstimate {
    /// β̂(v) = (β̂_z* + β̂_zv* v)/α̂_z.
    pub fn evaluate(&self, v: f64) -> f64 {
        (self.beta_z_star + self.beta_zv_star * v) / self.alpha_z
    }
}

/// Parametric effect modification by one covariate (continuous outcome).
pub fn estimate_effect_mod_parametric(
    main: &MainStudy,
    valid: &ValidationStudy,
    covariate: &str,
) -> Result<EffectModEstimate> {
    main.validate()?;
    let v = main
        .covariate(covariate)
        .ok_or_else(|| Error::UnknownCovariate(covariate.to_string()))?;
    if valid.covariate(covariate).is_none() {
        return Err(Error::UnknownCovariate(covariate.to_string()));
    }
    let zv: Vec<f64> = main.z.iter().zip(v).map(|(z, v)| z * v).collect();
    let v2: Vec<f64> = v.iter().map(|v| v * v).collect();
    let x = regress::design_matrix(main.len(), &[&main.z, v, &zv, &v2]);
    let outcome_fit = regress::fit_ols(&main.y, &x)?;
    let mem_fit = fit_mem(valid, &[covariate.to_string()])?;
    let alpha_z = mem_fit.coef(1);
    if alpha_z == 0.0 {
        return Err(Error::ZeroSlope);
    }
    Ok(EffectModEstimate {
        beta_z_star: outcome_fit.coef(1),
        beta_v_star: outcome_fit.coef(2),
        beta_zv_star: outcome_fit.coef(3),
        beta_v2_star: outcome_fit.coef(4),
        alpha_z,
        alpha_v: mem_fit.coef(2),
        outcome_fit,
        mem_fit,
    })
}

/// Bin counts for the nonparametric estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinSpec {
    pub z_bins: usize,
    pub v_bins: usize,
    pub min_count: usize,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self {
            z_bins: 5,
            v_bins: 3,
            min_count: 30,
        }
    }
}

/// Equal-frequency cut points.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBins {
    edges: Vec<f64>,
}

impl QuantileBins {
    pub fn new(values: impl IntoIterator<Item = f64>, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidConfig("need at least one bin".into()));
        }
        let mut v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Err(Error::InvalidConfig("cannot bin an empty sample".into()));
        }
        v.sort_by(f64::total_cmp);
        let edges = (1..bins).map(|k| v[k * v.len() / bins]).collect();
        Ok(Self { edges })
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn assign(&self, value: f64) -> usize {
        self.edges.partition_point(|&e| e <= value)
    }
}

/// Quantile bins of Z and V built from the pooled main and validation samples.
#[derive(Debug, Clone)]
pub struct NonparametricBins {
    pub z: QuantileBins,
    pub v: QuantileBins,
    covariate: String,
    min_count: usize,
}

impl NonparametricBins {
    pub fn new(main: &MainStudy, valid: &ValidationStudy, covariate: &str, spec: BinSpec) -> Result<Self> {
        let vm = main
            .covariate(covariate)
            .ok_or_else(|| Error::UnknownCovariate(covariate.to_string()))?;
        let vv = valid
            .covariate(covariate)
            .ok_or_else(|| Error::UnknownCovariate(covariate.to_string()))?;
        Ok(Self {
            z: QuantileBins::new(main.z.iter().chain(&valid.z).copied(), spec.z_bins)?,
            v: QuantileBins::new(vm.iter().chain(vv).copied(), spec.v_bins)?,
            covariate: covariate.to_string(),
            min_count: spec.min_count,
        })
    }

    /// Mean of the covariate within a V bin, pooled over both samples.
    pub fn v_bin_mean(&self, main: &MainStudy, valid: &ValidationStudy, v_bin: usize) -> Option<f64> {
        let vm = main.covariate(&self.covariate)?;
        let vv = valid.covariate(&self.covariate)?;
        let (s, n) = vm
            .iter()
            .chain(vv)
            .filter(|&&v| self.v.assign(v) == v_bin)
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        (n > 0).then(|| s / n as f64)
    }

    fn cell_mean(
        &self,
        resp: &[f64],
        z: &[f64],
        v: &[f64],
        z_bin: usize,
        v_bin: Option<usize>,
        sample: &'static str,
    ) -> Result<f64> {
        let (mut s, mut n) = (0.0, 0usize);
        for i in 0..resp.len() {
            if self.z.assign(z[i]) == z_bin && v_bin.is_none_or(|b| self.v.assign(v[i]) == b) {
                s += resp[i];
                n += 1;
            }
        }
        if n < self.min_count {
            let bin = match v_bin {
                Some(b) => format!("(z {z_bin}, v {b})"),
                None => format!("(z {z_bin})"),
            };
            return Err(Error::EmptyBin {
                bin,
                sample,
                count: n,
                min: self.min_count,
            });
        }
        Ok(s / n as f64)
    }

    /// Ratio of binned mean differences between Z bins `z_hi` and `z_lo`. The
    /// outcome side conditions on V bin `v_bin` when the strategy adjusts the
    /// outcome model, the calibration side when it adjusts the calibration model.
    pub fn estimate(
        &self,
        main: &MainStudy,
        valid: &ValidationStudy,
        strategy: AdjustmentStrategy,
        z_lo: usize,
        z_hi: usize,
        v_bin: usize,
    ) -> Result<f64> {
        if z_lo == z_hi {
            return Err(Error::InvalidConfig("z_lo and z_hi must differ".into()));
        }
        let nz = self.z.n_bins();
        if z_lo >= nz || z_hi >= nz {
            return Err(Error::InvalidConfig(format!("Z bins must be below {nz}")));
        }
        if v_bin >= self.v.n_bins() {
            return Err(Error::InvalidConfig(format!("V bin must be below {}", self.v.n_bins())));
        }
        let vm = main
            .covariate(&self.covariate)
            .ok_or_else(|| Error::UnknownCovariate(self.covariate.clone()))?;
        let vv = valid
            .covariate(&self.covariate)
            .ok_or_else(|| Error::UnknownCovariate(self.covariate.clone()))?;
        let vo = strategy.adjusts_outcome().then_some(v_bin);
        let vmem = strategy.adjusts_mem().then_some(v_bin);
        let num = self.cell_mean(&main.y, &main.z, vm, z_hi, vo, "main")?
            - self.cell_mean(&main.y, &main.z, vm, z_lo, vo, "main")?;
        let den = self.cell_mean(&valid.x, &valid.z, vv, z_hi, vmem, "validation")?
            - self.cell_mean(&valid.x, &valid.z, vv, z_lo, vmem, "validation")?;
        if den == 0.0 {
            return Err(Error::ZeroDenominator);
        }
        Ok(num / den)
    }
}

/// Nonparametric estimate with default bins (5 for Z, 3 for V).
pub fn estimate_nonparametric(
    main: &MainStudy,
    valid: &ValidationStudy,
    strategy: AdjustmentStrategy,
    covariate: &str,
    z_lo: usize,
    z_hi: usize,
    v_bin: usize,
) -> Result<f64> {
    NonparametricBins::new(main, valid, covariate, BinSpec::default())?
        .estimate(main, valid, strategy, z_lo, z_hi, v_bin)
}
