//! The eight single-covariate measurement-error structures and their data-generating process.
//!
//! One unit is drawn as
//!
//! ```text
//! V ~ N(0, 1) or Bernoulli(p)
//! X = η_v V + ε_x
//! Z = θ_x X + θ_v V + ε_z
//! Y = β_x X + β_v V + β_xv X V + ε_y              (continuous)
//! logit P(Y = 1) = c + β_x X + β_v V + β_xv X V   (binary)
//! ```
//!
//! with independent Gaussian noises whose standard deviations are the
//! `noise_sd_*` fields. The first `n_vs` units form the validation study and
//! the remaining `n_ms` the main study.

use std::fmt;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analytic::{PopulationParams, Sem};
use crate::data::{MainStudy, ValidationStudy};
use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 20_251_016;

/// Name of the covariate column in generated samples.
pub const COVARIATE: &str = "v";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum DagId {
    Dag1,
    Dag2,
    Dag3,
    Dag4,
    Dag5,
    Dag6,
    Dag7,
    Dag8,
}

impl DagId {
    pub const ALL: [DagId; 8] = [
        DagId::Dag1,
        DagId::Dag2,
        DagId::Dag3,
        DagId::Dag4,
        DagId::Dag5,
        DagId::Dag6,
        DagId::Dag7,
        DagId::Dag8,
    ];

    pub fn index(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_index(i: u8) -> Result<Self> {
        Self::ALL
            .get(usize::from(i).wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::InvalidConfig(format!("DAG index must be 1..=8, got {i}")))
    }

    /// Whether V has an arrow into X, into Z (given X), and into Y (given X).
    pub fn v_arrows(self) -> (bool, bool, bool) {
        match self {
            DagId::Dag1 => (false, false, true),
            DagId::Dag2 => (false, true, true),
            DagId::Dag3 => (true, false, true),
            DagId::Dag4 => (true, true, true),
            DagId::Dag5 => (false, false, false),
            DagId::Dag6 => (false, true, false),
            DagId::Dag7 => (true, false, false),
            DagId::Dag8 => (true, true, false),
        }
    }

    pub fn from_arrows(x: bool, z: bool, y: bool) -> Self {
        *Self::ALL
            .iter()
            .find(|d| d.v_arrows() == (x, z, y))
            .expect("every arrow pattern is one of the eight DAGs")
    }
}

impl TryFrom<u8> for DagId {
    type Error = Error;

    fn try_from(i: u8) -> Result<Self> {
        Self::from_index(i)
    }
}

impl From<DagId> for u8 {
    fn from(d: DagId) -> u8 {
        d.index()
    }
}

impl fmt::Display for DagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DAG {}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VDist {
    Normal,
    Bernoulli(f64),
}

impl VDist {
    pub fn variance(self) -> f64 {
        match self {
            VDist::Normal => 1.0,
            VDist::Bernoulli(p) => p * (1.0 - p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Continuous,
    Binary,
}

impl OutcomeKind {
    pub fn family(self) -> crate::regress::Family {
        match self {
            OutcomeKind::Continuous => crate::regress::Family::Linear,
            OutcomeKind::Binary => crate::regress::Family::Logistic,
        }
    }
}

fn d_intercept() -> f64 {
    -5.0
}
fn d_one() -> f64 {
    1.0
}
fn d_half() -> f64 {
    0.5
}
fn d_vdist() -> VDist {
    VDist::Normal
}
fn d_reps() -> usize {
    1000
}
fn d_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub dag: DagId,
    pub eta_v: f64,
    pub theta_x: f64,
    pub theta_v: f64,
    pub beta_x: f64,
    pub beta_v: f64,
    /// X·V interaction in the outcome model; zero outside effect-modification studies.
    #[serde(default)]
    pub beta_xv: f64,
    #[serde(default = "d_intercept")]
    pub logistic_intercept: f64,
    #[serde(default = "d_one")]
    pub noise_sd_x: f64,
    #[serde(default = "d_half")]
    pub noise_sd_z: f64,
    #[serde(default = "d_one")]
    pub noise_sd_y: f64,
    #[serde(default = "d_vdist")]
    pub v_dist: VDist,
    pub outcome: OutcomeKind,
    pub n_ms: usize,
    pub n_vs: usize,
    #[serde(default = "d_reps")]
    pub replicates: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
}

/// One simulated main/validation pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    pub main: MainStudy,
    pub validation: ValidationStudy,
    pub truth: f64,
}

impl ScenarioConfig {
    /// Base-case structural coefficients for a DAG with default noise and sizes.
    pub fn new(dag: DagId, outcome: OutcomeKind) -> Self {
        let (x, z, y) = dag.v_arrows();
        let (n_ms, n_vs) = match outcome {
            OutcomeKind::Continuous => (4600, 400),
            OutcomeKind::Binary => (9600, 400),
        };
        Self {
            name: String::new(),
            dag,
            eta_v: if x { 0.4 } else { 0.0 },
            theta_x: 0.5,
            theta_v: if z { 0.1 } else { 0.0 },
            beta_x: 0.5,
            beta_v: if y { 0.8 } else { 0.0 },
            beta_xv: 0.0,
            logistic_intercept: d_intercept(),
            noise_sd_x: 1.0,
            noise_sd_z: 0.5,
            noise_sd_y: 1.0,
            v_dist: VDist::Normal,
            outcome,
            n_ms,
            n_vs,
            replicates: 1000,
            seed: DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("scenario '{}': {msg}", self.name)));
        let coefs = [
            ("eta_v", self.eta_v),
            ("theta_x", self.theta_x),
            ("theta_v", self.theta_v),
            ("beta_x", self.beta_x),
            ("beta_v", self.beta_v),
            ("beta_xv", self.beta_xv),
            ("logistic_intercept", self.logistic_intercept),
        ];
        if let Some((n, v)) = coefs.iter().find(|(_, v)| !v.is_finite()) {
            return bad(format!("{n} = {v} is not finite"));
        }
        for (n, v) in [
            ("noise_sd_x", self.noise_sd_x),
            ("noise_sd_z", self.noise_sd_z),
            ("noise_sd_y", self.noise_sd_y),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{n} must be positive, got {v}"));
            }
        }
        if let VDist::Bernoulli(p) = self.v_dist {
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("Bernoulli probability must lie in (0, 1), got {p}"));
            }
        }
        if self.theta_x == 0.0 {
            return bad("theta_x = 0 leaves Z uninformative about X".into());
        }
        let (x, z, y) = self.dag.v_arrows();
        let y_arrow = self.beta_v != 0.0 || self.beta_xv != 0.0;
        for (arrow, present, name) in [
            (x, self.eta_v != 0.0, "eta_v"),
            (z, self.theta_v != 0.0, "theta_v"),
            (y, y_arrow, "beta_v"),
        ] {
            if arrow != present {
                let want = if arrow { "nonzero" } else { "zero" };
                return bad(format!("{} requires {name} to be {want}", self.dag));
            }
        }
        if self.n_ms < 8 || self.n_vs < 8 {
            return bad("n_ms and n_vs must be at least 8".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        Ok(())
    }

    pub fn family(&self) -> crate::regress::Family {
        self.outcome.family()
    }

    fn sem(&self) -> Sem {
        Sem {
            var_v: self.v_dist.variance(),
            eta_v: self.eta_v,
            theta_x: self.theta_x,
            theta_v: self.theta_v,
            beta_x: self.beta_x,
            beta_v: self.beta_v,
            sd_x: self.noise_sd_x,
            sd_z: self.noise_sd_z,
            sd_y: self.noise_sd_y,
        }
    }

    /// Copy with different sample sizes.
    pub fn with_sizes(mut self, n_ms: usize, n_vs: usize) -> Self {
        self.n_ms = n_ms;
        self.n_vs = n_vs;
        self
    }
}

/// Draw replicate `replicate_index` of a scenario. The stream depends only on
/// `(seed, replicate_index)`.
pub fn generate(config: &ScenarioConfig, replicate_index: u64) -> Result<GeneratedSample> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    rng.set_stream(replicate_index);

    let n = config.n_ms + config.n_vs;
    let mut validation = ValidationStudy {
        x: Vec::with_capacity(config.n_vs),
        z: Vec::with_capacity(config.n_vs),
        covariates: IndexMap::new(),
    };
    let mut v_valid = Vec::with_capacity(config.n_vs);
    let mut main = MainStudy {
        z: Vec::with_capacity(config.n_ms),
        y: Vec::with_capacity(config.n_ms),
        covariates: IndexMap::new(),
    };
    let mut v_main = Vec::with_capacity(config.n_ms);

    for i in 0..n {
        let v = match config.v_dist {
            VDist::Normal => rng.sample::<f64, _>(StandardNormal),
            VDist::Bernoulli(p) => f64::from(u8::from(rng.random::<f64>() < p)),
        };
        let e_x: f64 = rng.sample(StandardNormal);
        let e_z: f64 = rng.sample(StandardNormal);
        let x = config.eta_v * v + config.noise_sd_x * e_x;
        let z = config.theta_x * x + config.theta_v * v + config.noise_sd_z * e_z;
        let lin = config.beta_x * x + config.beta_v * v + config.beta_xv * x * v;
        let y = match config.outcome {
            OutcomeKind::Continuous => lin + config.noise_sd_y * rng.sample::<f64, _>(StandardNormal),
            OutcomeKind::Binary => {
                let eta = config.logistic_intercept + lin;
                let p = 1.0 / (1.0 + (-eta).exp());
                f64::from(u8::from(rng.random::<f64>() < p))
            }
        };
        if i < config.n_vs {
            validation.x.push(x);
            validation.z.push(z);
            v_valid.push(v);
        } else {
            main.z.push(z);
            main.y.push(y);
            v_main.push(v);
        }
    }
    validation.covariates.insert(COVARIATE.to_string(), v_valid);
    main.covariates.insert(COVARIATE.to_string(), v_main);
    Ok(GeneratedSample {
        main,
        validation,
        truth: config.beta_x,
    })
}

/// Marginal correlations and SDs implied by a continuous-outcome scenario.
pub fn implied_correlations(config: &ScenarioConfig) -> Result<PopulationParams> {
    config.validate()?;
    if config.outcome != OutcomeKind::Continuous {
        return Err(Error::InvalidConfig(
            "implied correlations are defined for continuous outcomes only".into(),
        ));
    }
    if config.beta_xv != 0.0 {
        return Err(Error::InvalidConfig(
            "implied correlations assume no X-V interaction".into(),
        ));
    }
    Ok(config.sem().population(config.n_ms, config.n_vs))
}

/// Conditional correlations (ρ(V,X), ρ(X,Z|V), ...) implied by a scenario's structure.
pub fn implied_conditional(config: &ScenarioConfig) -> Result<crate::analytic::ConditionalParams> {
    implied_correlations(config)?;
    config.sem().conditional()
}

/// Structural variants run for each DAG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Base,
    SmallRhoXzV,
    SmallEffect,
    WeakRisk,
    LargeMe,
    NegativeRhoVx,
    SmallRhoVx,
    BinaryV,
    ReducedMain,
    ReducedValidation,
}

impl Variant {
    pub fn slug(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::SmallRhoXzV => "small-rho-xz-v",
            Variant::SmallEffect => "small-effect",
            Variant::WeakRisk => "weak-risk",
            Variant::LargeMe => "large-me",
            Variant::NegativeRhoVx => "negative-rho-vx",
            Variant::SmallRhoVx => "small-rho-vx",
            Variant::BinaryV => "binary-v",
            Variant::ReducedMain => "reduced-n-ms",
            Variant::ReducedValidation => "reduced-n-vs",
        }
    }

    /// Variants defined for a DAG, in catalog order.
    pub fn for_dag(dag: DagId) -> Vec<Variant> {
        use Variant::*;
        let (x, z, y) = dag.v_arrows();
        let mut out = vec![Base, SmallRhoXzV, SmallEffect];
        if x {
            out.push(NegativeRhoVx);
            out.push(SmallRhoVx);
        }
        if z {
            out.push(LargeMe);
        }
        if y {
            out.push(WeakRisk);
        }
        out.extend([BinaryV, ReducedMain, ReducedValidation]);
        out
    }

    pub fn apply(self, mut c: ScenarioConfig) -> ScenarioConfig {
        match self {
            Variant::Base => {}
            Variant::SmallRhoXzV => c.theta_x = 0.2,
            Variant::SmallEffect => c.beta_x = 0.1,
            Variant::WeakRisk => c.beta_v = 0.2,
            Variant::LargeMe => c.theta_v = 2.0,
            Variant::NegativeRhoVx => c.eta_v = -0.4,
            Variant::SmallRhoVx => c.eta_v = 0.2,
            Variant::BinaryV => c.v_dist = VDist::Bernoulli(0.4),
            Variant::ReducedMain => {
                c.n_ms = match c.outcome {
                    OutcomeKind::Continuous => 2000,
                    OutcomeKind::Binary => 5000,
                }
            }
            Variant::ReducedValidation => c.n_vs = 150,
        }
        c
    }
}

/// A catalog entry.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedScenario {
    pub dag: DagId,
    pub variant: Variant,
    pub config: ScenarioConfig,
}

/// Every simulation scenario, for both outcome families, named `dag<k>-<variant>-<cont|bin>`.
pub fn catalog() -> Vec<NamedScenario> {
    let mut out = Vec::new();
    for outcome in [OutcomeKind::Continuous, OutcomeKind::Binary] {
        for dag in DagId::ALL {
            for variant in Variant::for_dag(dag) {
                let mut config = variant.apply(ScenarioConfig::new(dag, outcome));
                let suffix = match outcome {
                    OutcomeKind::Continuous => "cont",
                    OutcomeKind::Binary => "bin",
                };
                config.name = format!("dag{}-{}-{}", dag.index(), variant.slug(), suffix);
                out.push(NamedScenario { dag, variant, config });
            }
        }
    }
    out
}

/// Look up one catalog entry by exact name.
pub fn catalog_entry(name: &str) -> Result<ScenarioConfig> {
    let all = catalog();
    all.iter()
        .find(|s| s.config.name == name)
        .map(|s| s.config.clone())
        .ok_or_else(|| Error::UnknownScenario {
            name: name.to_string(),
            valid: all.iter().map(|s| s.config.name.as_str()).collect::<Vec<_>>().join(", "),
        })
}
