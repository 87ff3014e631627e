//! Covariate roles, the validity/efficiency table, and adjustment advice.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, PopulationParams};
use crate::error::{Error, Result};
use crate::regress::Family;
use crate::rsw::{AdjustmentPlan, AdjustmentStrategy};
use crate::scenario::DagId;

/// Causal type of a covariate relative to X, Z and Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CovariateType {
    /// Affects Y only.
    V1,
    /// Affects Z (given X) and Y.
    V2,
    /// Affects X and Y: a confounder.
    V3,
    /// Affects X, Z and Y.
    V4,
    /// Affects none of them.
    V5,
    /// Affects Z only.
    V6,
    /// Affects X only.
    V7,
    /// Affects X and Z.
    V8,
}

impl CovariateType {
    pub const ALL: [CovariateType; 8] = [
        CovariateType::V1,
        CovariateType::V2,
        CovariateType::V3,
        CovariateType::V4,
        CovariateType::V5,
        CovariateType::V6,
        CovariateType::V7,
        CovariateType::V8,
    ];

    pub fn arrows(self) -> (bool, bool, bool) {
        DagId::from(self).v_arrows()
    }

    /// Needed in both models for any strategy to be valid.
    pub fn in_minimal_set(self) -> bool {
        matches!(self, CovariateType::V2 | CovariateType::V3 | CovariateType::V4)
    }
}

impl From<DagId> for CovariateType {
    fn from(d: DagId) -> Self {
        CovariateType::ALL[usize::from(d.index()) - 1]
    }
}

impl From<CovariateType> for DagId {
    fn from(t: CovariateType) -> Self {
        DagId::ALL[t as usize]
    }
}

impl fmt::Display for CovariateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", *self as u8 + 1)
    }
}

impl FromStr for CovariateType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t.strip_prefix(['V', 'v']).unwrap_or(t);
        digits
            .parse::<u8>()
            .ok()
            .and_then(|i| DagId::from_index(i).ok())
            .map(CovariateType::from)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown covariate role '{s}' (expected V1..V8)")))
    }
}

/// Map arrow flags to the covariate type.
pub fn classify(affects_x: bool, affects_z: bool, affects_y: bool) -> CovariateType {
    DagId::from_arrows(affects_x, affects_z, affects_y).into()
}

/// One cell of the validity/efficiency table (linear outcome).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Validity {
    /// Valid and the most efficient choice.
    Efficient,
    Valid,
    /// Valid; which one is more efficient depends on the correlations.
    ValidDepends,
    Biased,
}

impl Validity {
    pub fn is_valid(self) -> bool {
        self != Validity::Biased
    }

    pub fn label(self) -> &'static str {
        match self {
            Validity::Efficient => "valid (efficient)",
            Validity::Valid => "valid",
            Validity::ValidDepends => "valid (efficiency depends on correlations)",
            Validity::Biased => "biased",
        }
    }
}

/// Validity and efficiency of each strategy for a single covariate of the given type.
pub fn validity_of(ty: CovariateType, strategy: AdjustmentStrategy) -> Validity {
    use AdjustmentStrategy::*;
    use CovariateType::*;
    use Validity::*;
    match (ty, strategy) {
        (V1, OM | ONone) => Efficient,
        (V1, NoneNone | NoneM) => Valid,
        (V2 | V3 | V4, OM) => Valid,
        (V2 | V3 | V4, _) => Biased,
        (V5, _) => Valid,
        (V6, OM) => Efficient,
        (V6, NoneNone) => Valid,
        (V7, OM) => Valid,
        (V7, NoneNone) => Efficient,
        (V8, OM | NoneNone) => ValidDepends,
        (V6 | V7 | V8, NoneM | ONone) => Biased,
    }
}

fn d_true() -> bool {
    true
}

/// A user-declared covariate. Either `role` or the three arrow flags describe it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateRole {
    pub name: String,
    #[serde(default)]
    pub role: Option<CovariateType>,
    #[serde(default)]
    pub affects_x: bool,
    #[serde(default)]
    pub affects_z: bool,
    #[serde(default)]
    pub affects_y: bool,
    #[serde(default = "d_true")]
    pub available_in_validation: bool,
    /// X causes this covariate (a mediator). Such structures are not handled.
    #[serde(default)]
    pub caused_by_x: bool,
}

impl CovariateRole {
    pub fn new(name: impl Into<String>, ty: CovariateType) -> Self {
        let (x, z, y) = ty.arrows();
        Self {
            name: name.into(),
            role: None,
            affects_x: x,
            affects_z: z,
            affects_y: y,
            available_in_validation: true,
            caused_by_x: false,
        }
    }

    pub fn unavailable_in_validation(mut self) -> Self {
        self.available_in_validation = false;
        self
    }

    pub fn covariate_type(&self) -> Result<CovariateType> {
        if self.caused_by_x {
            return Err(Error::InvalidConfig(format!(
                "covariate '{}' is caused by the exposure; mediator structures are out of scope",
                self.name
            )));
        }
        let flagged = classify(self.affects_x, self.affects_z, self.affects_y);
        match &self.role {
            None => Ok(flagged),
            Some(ty) => {
                let ty = *ty;
                let any_flag = self.affects_x || self.affects_z || self.affects_y;
                if any_flag && ty != flagged {
                    return Err(Error::InvalidConfig(format!(
                        "covariate '{}': role {ty} contradicts its arrow flags ({flagged})",
                        self.name
                    )));
                }
                Ok(ty)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateAdvice {
    pub name: String,
    pub ty: CovariateType,
    pub recommended: AdjustmentStrategy,
    pub rationale: String,
    pub validity: Vec<(AdjustmentStrategy, Validity)>,
    /// Analytic AREs for valid strategies, when correlations were supplied.
    pub are: Option<Vec<(AdjustmentStrategy, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Advice {
    pub minimal_set: Vec<String>,
    pub covariates: Vec<CovariateAdvice>,
    pub warnings: Vec<String>,
    pub family: Family,
}

const FALLBACK_WARNING: &str = "is needed in both models but is not measured in the validation study; \
it should still be adjusted for at least in the outcome model, provided it is not strongly correlated \
with the measurement error. The estimate may remain biased.";

const NON_COLLAPSIBILITY: &str = "Efficiency labels come from linear-outcome theory. With a logistic \
outcome the estimators adjusting and not adjusting the outcome model target different (non-collapsible) \
odds ratios, so the efficiency comparisons need not hold.";

/// Advice for a linear outcome.
pub fn advise(roles: &[CovariateRole]) -> Result<Advice> {
    advise_for(roles, Family::Linear)
}

/// Advice for the given outcome family. Duplicate names keep the first declaration.
pub fn advise_for(roles: &[CovariateRole], family: Family) -> Result<Advice> {
    let mut seen: IndexMap<&str, &CovariateRole> = IndexMap::new();
    for r in roles {
        seen.entry(r.name.as_str()).or_insert(r);
    }
    let mut covariates = Vec::new();
    let mut warnings = Vec::new();
    let mut minimal_set = Vec::new();
    for (name, role) in seen {
        let ty = role.covariate_type()?;
        let validity: Vec<_> = AdjustmentStrategy::ALL
            .iter()
            .map(|&s| {
                let v = validity_of(ty, s);
                let v = match (family, v) {
                    (Family::Logistic, Validity::Efficient | Validity::ValidDepends) => Validity::Valid,
                    _ => v,
                };
                (s, v)
            })
            .collect();
        if ty.in_minimal_set() {
            minimal_set.push(name.to_string());
        }
        let (recommended, rationale) = recommend(ty, role.available_in_validation, family);
        if ty.in_minimal_set() && !role.available_in_validation {
            warnings.push(format!("'{name}' ({ty}) {FALLBACK_WARNING}"));
        }
        if ty == CovariateType::V8 && family == Family::Linear {
            warnings.push(format!(
                "'{name}' (V8): adjusting both models and adjusting neither are valid; which is more \
                 efficient depends on the correlations (supply them to quantify)."
            ));
        }
        covariates.push(CovariateAdvice {
            name: name.to_string(),
            ty,
            recommended,
            rationale,
            validity,
            are: None,
        });
    }
    minimal_set.sort();
    if family == Family::Logistic && !covariates.is_empty() {
        warnings.push(NON_COLLAPSIBILITY.to_string());
    }
    Ok(Advice {
        minimal_set,
        covariates,
        warnings,
        family,
    })
}

fn recommend(ty: CovariateType, available: bool, family: Family) -> (AdjustmentStrategy, String) {
    use AdjustmentStrategy::*;
    use CovariateType::*;
    let linear = family == Family::Linear;
    match ty {
        V2 | V3 | V4 if available => (OM, "required in both models for validity".into()),
        V2 | V3 | V4 => (
            ONone,
            "required in both models but missing from the validation study; outcome model only, possibly biased".into(),
        ),
        V1 if linear => (ONone, "affects only the outcome; including it in the outcome model improves efficiency".into()),
        V1 => (ONone, "affects only the outcome; every strategy is valid".into()),
        V5 => (NoneNone, "unrelated to exposure, surrogate and outcome; adjustment is unnecessary".into()),
        V6 if available && linear => (OM, "affects only the surrogate; adjusting both models is most efficient".into()),
        V6 | V7 => (NoneNone, "adjusting neither model is valid and avoids needless variance".into()),
        V8 if available => (OM, "both-model and no adjustment are valid; efficiency depends on correlations".into()),
        V8 => (NoneNone, "not measured in the validation study; adjusting neither model is valid".into()),
    }
}

/// Replace qualitative efficiency labels with analytic AREs where correlations are given.
///
/// `params` maps covariate names to the population correlations for that
/// covariate. Covariates of types V1, V6, V7 and V8 with an entry get the ARE
/// of every valid strategy, and the recommendation becomes the strategy with
/// the largest ARE (ties favour adjusting both models).
pub fn quantify(roles: &[CovariateRole], params: &IndexMap<String, PopulationParams>) -> Result<Advice> {
    let mut advice = advise(roles)?;
    for c in &mut advice.covariates {
        let Some(p) = params.get(&c.name) else { continue };
        if c.ty.in_minimal_set() {
            continue;
        }
        let mut ares = Vec::new();
        for (s, v) in &c.validity {
            if v.is_valid() {
                ares.push((*s, analytic::are(p, *s)?));
            }
        }
        if matches!(c.ty, CovariateType::V1 | CovariateType::V6 | CovariateType::V7 | CovariateType::V8) {
            let best = ares
                .iter()
                .copied()
                .fold(None::<(AdjustmentStrategy, f64)>, |acc, (s, a)| match acc {
                    Some((_, b)) if a <= b + 1e-12 => acc,
                    _ => Some((s, a)),
                })
                .expect("OM is always valid");
            c.recommended = best.0;
            c.rationale = format!("largest analytic ARE ({:.2}) among valid strategies", best.1);
        }
        c.are = Some(ares);
    }
    Ok(advice)
}

impl Advice {
    /// Per-model covariate lists implied by the recommendations.
    pub fn plan(&self) -> AdjustmentPlan {
        let mut plan = AdjustmentPlan::default();
        for c in &self.covariates {
            if c.recommended.adjusts_outcome() {
                plan.outcome.push(c.name.clone());
            }
            if c.recommended.adjusts_mem() {
                plan.mem.push(c.name.clone());
            }
        }
        plan
    }

    /// Warnings for forcing one strategy on every covariate.
    pub fn strategy_warnings(&self, strategy: AdjustmentStrategy) -> Vec<String> {
        self.covariates
            .iter()
            .filter(|c| validity_of(c.ty, strategy) == Validity::Biased)
            .map(|c| {
                let hint = if c.ty.in_minimal_set() { "it belongs in both models" } else { "adjust both models or neither" };
                format!("strategy {strategy} is biased for '{}' ({}); {hint}", c.name, c.ty)
            })
            .collect()
    }

    /// Tab-separated table: name, type, recommendation, then one column per strategy.
    pub fn to_table(&self) -> String {
        let mut out = String::from("covariate\ttype\trecommended");
        for s in AdjustmentStrategy::ALL {
            out.push('\t');
            out.push_str(s.tag());
        }
        out.push('\n');
        for c in &self.covariates {
            out.push_str(&format!("{}\t{}\t{}", c.name, c.ty, c.recommended));
            for (s, v) in &c.validity {
                let are = c
                    .are
                    .as_ref()
                    .and_then(|a| a.iter().find(|(t, _)| t == s))
                    .map(|(_, a)| format!(" ARE={a:.2}"))
                    .unwrap_or_default();
                out.push_str(&format!("\t{}{are}", v.label()));
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Advice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.minimal_set.is_empty() {
            writeln!(f, "Minimal adjustment set: (none)")?;
        } else {
            writeln!(f, "Minimal adjustment set: {}", self.minimal_set.join(", "))?;
        }
        for c in &self.covariates {
            writeln!(f, "  {} [{}]: {} ({})", c.name, c.ty, c.recommended, c.rationale)?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}
