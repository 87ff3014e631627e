//! Closed-form asymptotics for jointly Gaussian (X, Z, V, Y).
//!
//! Everything here is written in terms of marginal correlations and standard
//! deviations ([`PopulationParams`]). Scenario-style inputs, where the
//! structure is described by conditional correlations such as ρ(X,Z|V), are
//! converted through the linear structural model in [`Sem`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::advisor::{validity_of, CovariateType, Validity};
use crate::error::{Error, Result};
use crate::rsw::AdjustmentStrategy;
use crate::scenario::DagId;

const FEASIBILITY_TOL: f64 = 1e-12;

/// ρ(A,B|C) for a trivariate Gaussian.
pub fn partial_correlation(rho_ab: f64, rho_ac: f64, rho_bc: f64) -> Result<f64> {
    for (name, r) in [("rho_ab", rho_ab), ("rho_ac", rho_ac), ("rho_bc", rho_bc)] {
        if !(r.abs() < 1.0) {
            return Err(Error::InconsistentCorrelations(format!(
                "{name} = {r} is outside (-1, 1)"
            )));
        }
    }
    let r = (rho_ab - rho_ac * rho_bc) / ((1.0 - rho_ac * rho_ac).sqrt() * (1.0 - rho_bc * rho_bc).sqrt());
    if r.abs() > 1.0 {
        return Err(Error::InconsistentCorrelations(format!(
            "partial correlation {r:.6} exceeds 1 in magnitude"
        )));
    }
    Ok(r)
}

fn det3(r12: f64, r13: f64, r23: f64) -> f64 {
    1.0 + 2.0 * r12 * r13 * r23 - r12 * r12 - r13 * r13 - r23 * r23
}

/// Marginal correlations, standard deviations and sample sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationParams {
    pub rho_xz: f64,
    pub rho_vx: f64,
    pub rho_vz: f64,
    pub rho_yz: f64,
    pub rho_vy: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_z: f64,
    /// Only the V-coefficients γ₂, α₂, λ₁ depend on it; every β′ limit and variance is free of it.
    #[serde(default = "one")]
    pub sigma_v: f64,
    pub n_ms: usize,
    pub n_vs: usize,
}

fn one() -> f64 {
    1.0
}

impl PopulationParams {
    pub fn validate(&self) -> Result<()> {
        let rhos = [
            ("rho_xz", self.rho_xz),
            ("rho_vx", self.rho_vx),
            ("rho_vz", self.rho_vz),
            ("rho_yz", self.rho_yz),
            ("rho_vy", self.rho_vy),
        ];
        for (name, r) in rhos {
            if !(r.abs() < 1.0) {
                return Err(Error::InconsistentCorrelations(format!(
                    "{name} = {r} is outside (-1, 1)"
                )));
            }
        }
        for (name, s) in [
            ("sigma_x", self.sigma_x),
            ("sigma_y", self.sigma_y),
            ("sigma_z", self.sigma_z),
            ("sigma_v", self.sigma_v),
        ] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {s}")));
            }
        }
        if self.n_ms == 0 || self.n_vs == 0 {
            return Err(Error::InvalidConfig("sample sizes must be positive".into()));
        }
        let dx = det3(self.rho_xz, self.rho_vx, self.rho_vz);
        if dx <= FEASIBILITY_TOL {
            return Err(Error::InconsistentCorrelations(format!(
                "correlation matrix of (X, Z, V) is not positive definite (det = {dx:.3e})"
            )));
        }
        let dy = det3(self.rho_yz, self.rho_vy, self.rho_vz);
        if dy <= FEASIBILITY_TOL {
            return Err(Error::InconsistentCorrelations(format!(
                "correlation matrix of (Y, Z, V) is not positive definite (det = {dy:.3e})"
            )));
        }
        Ok(())
    }

    pub fn with_sizes(mut self, n_ms: usize, n_vs: usize) -> Self {
        self.n_ms = n_ms;
        self.n_vs = n_vs;
        self
    }
}

/// Population regression coefficients and the probability limits of every strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticLimits {
    pub gamma1: f64,
    pub gamma1_star: f64,
    pub gamma2: f64,
    pub alpha1: f64,
    pub alpha1_star: f64,
    pub alpha2: f64,
    pub lambda1: f64,
    pub beta_prime_nn: f64,
    pub beta_prime_nm: f64,
    pub beta_prime_on: f64,
}

impl AnalyticLimits {
    /// The V-adjusted ratio γ₁/α₁, which is the limit of the OM estimator.
    pub fn beta_om(&self) -> f64 {
        self.gamma1 / self.alpha1
    }

    pub fn limit(&self, strategy: AdjustmentStrategy) -> f64 {
        match strategy {
            AdjustmentStrategy::OM => self.beta_om(),
            AdjustmentStrategy::NoneNone => self.beta_prime_nn,
            AdjustmentStrategy::NoneM => self.beta_prime_nm,
            AdjustmentStrategy::ONone => self.beta_prime_on,
        }
    }

    /// (γ, α) pair whose ratio the strategy estimates.
    pub fn ratio_terms(&self, strategy: AdjustmentStrategy) -> (f64, f64) {
        match strategy {
            AdjustmentStrategy::OM => (self.gamma1, self.alpha1),
            AdjustmentStrategy::NoneNone => (self.gamma1_star, self.alpha1_star),
            AdjustmentStrategy::NoneM => (self.gamma1_star, self.alpha1),
            AdjustmentStrategy::ONone => (self.gamma1, self.alpha1_star),
        }
    }
}

pub fn population_coefficients(p: &PopulationParams) -> Result<AnalyticLimits> {
    p.validate()?;
    let PopulationParams {
        rho_xz,
        rho_vx,
        rho_vz,
        rho_yz,
        rho_vy,
        sigma_x,
        sigma_y,
        sigma_z,
        sigma_v,
        ..
    } = *p;
    let one_m = 1.0 - rho_vz * rho_vz;
    let gamma1_star = rho_yz * sigma_y / sigma_z;
    let alpha1_star = rho_xz * sigma_x / sigma_z;
    let gamma1 = (rho_yz - rho_vy * rho_vz) * sigma_y / (one_m * sigma_z);
    let alpha1 = (rho_xz - rho_vx * rho_vz) * sigma_x / (one_m * sigma_z);
    let gamma2 = (rho_vy - rho_yz * rho_vz) * sigma_y / (one_m * sigma_v);
    let alpha2 = (rho_vx - rho_xz * rho_vz) * sigma_x / (one_m * sigma_v);
    let lambda1 = rho_vz * sigma_v / sigma_z;
    let num_marg = gamma1 + gamma2 * lambda1;
    let den_marg = alpha1 + alpha2 * lambda1;
    Ok(AnalyticLimits {
        gamma1,
        gamma1_star,
        gamma2,
        alpha1,
        alpha1_star,
        alpha2,
        lambda1,
        beta_prime_nn: num_marg / den_marg,
        beta_prime_nm: num_marg / alpha1,
        beta_prime_on: gamma1 / den_marg,
    })
}

/// Asymptotic sampling variances of the four slope estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingVariances {
    pub var_gamma1: f64,
    pub var_gamma1_star: f64,
    pub var_alpha1: f64,
    pub var_alpha1_star: f64,
}

pub fn sampling_variances(p: &PopulationParams) -> Result<SamplingVariances> {
    p.validate()?;
    let PopulationParams {
        rho_xz,
        rho_vx,
        rho_vz,
        rho_yz,
        rho_vy,
        sigma_x,
        sigma_y,
        sigma_z,
        n_ms,
        n_vs,
        ..
    } = *p;
    let n_ms = n_ms as f64;
    let n_vs = n_vs as f64;
    let sz2 = sigma_z * sigma_z;
    let one_m2 = (1.0 - rho_vz * rho_vz).powi(2);
    Ok(SamplingVariances {
        var_gamma1_star: (1.0 - rho_yz * rho_yz) * sigma_y * sigma_y / (sz2 * n_ms),
        var_alpha1_star: (1.0 - rho_xz * rho_xz) * sigma_x * sigma_x / (sz2 * n_vs),
        var_gamma1: sigma_y * sigma_y * det3(rho_vy, rho_vz, rho_yz) / (n_ms * sz2 * one_m2),
        var_alpha1: sigma_x * sigma_x * det3(rho_xz, rho_vz, rho_vx) / (n_vs * sz2 * one_m2),
    })
}

/// Delta-method asymptotic variance of a strategy's ratio estimator.
pub fn analytic_variance(p: &PopulationParams, strategy: AdjustmentStrategy) -> Result<f64> {
    let lim = population_coefficients(p)?;
    let sv = sampling_variances(p)?;
    let (gamma, alpha) = lim.ratio_terms(strategy);
    let (var_g, var_a) = match strategy {
        AdjustmentStrategy::OM => (sv.var_gamma1, sv.var_alpha1),
        AdjustmentStrategy::NoneNone => (sv.var_gamma1_star, sv.var_alpha1_star),
        AdjustmentStrategy::NoneM => (sv.var_gamma1_star, sv.var_alpha1),
        AdjustmentStrategy::ONone => (sv.var_gamma1, sv.var_alpha1_star),
    };
    crate::rsw::delta_variance(gamma, var_g, alpha, var_a)
}

/// Asymptotic relative efficiency Var(OM)/Var(strategy).
pub fn are(p: &PopulationParams, strategy: AdjustmentStrategy) -> Result<f64> {
    if strategy == AdjustmentStrategy::OM {
        analytic_variance(p, strategy)?;
        return Ok(1.0);
    }
    Ok(analytic_variance(p, AdjustmentStrategy::OM)? / analytic_variance(p, strategy)?)
}

/// Linear structural model
/// `X = η V + ε_x`, `Z = θ_x X + θ_v V + ε_z`, `Y = β_x X + β_v V + ε_y`
/// with independent zero-mean noises and Var(V) = `var_v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sem {
    pub var_v: f64,
    pub eta_v: f64,
    pub theta_x: f64,
    pub theta_v: f64,
    pub beta_x: f64,
    pub beta_v: f64,
    pub sd_x: f64,
    pub sd_z: f64,
    pub sd_y: f64,
}

/// Covariance matrix of (V, X, Z, Y) in that order.
pub type Cov4 = [[f64; 4]; 4];

impl Sem {
    pub fn covariance(&self) -> Cov4 {
        let Sem {
            var_v: vv,
            eta_v: eta,
            theta_x: tx,
            theta_v: tv,
            beta_x: bx,
            beta_v: bv,
            sd_x,
            sd_z,
            sd_y,
        } = *self;
        let vx = eta * vv;
        let xx = eta * eta * vv + sd_x * sd_x;
        let vz = tx * vx + tv * vv;
        let xz = tx * xx + tv * vx;
        let zz = tx * tx * xx + tv * tv * vv + 2.0 * tx * tv * vx + sd_z * sd_z;
        let vy = bx * vx + bv * vv;
        let xy = bx * xx + bv * vx;
        let zy = bx * xz + bv * vz;
        let yy = bx * bx * xx + bv * bv * vv + 2.0 * bx * bv * vx + sd_y * sd_y;
        [
            [vv, vx, vz, vy],
            [vx, xx, xz, xy],
            [vz, xz, zz, zy],
            [vy, xy, zy, yy],
        ]
    }

    pub fn population(&self, n_ms: usize, n_vs: usize) -> PopulationParams {
        let c = self.covariance();
        let sd: Vec<f64> = (0..4).map(|i| c[i][i].sqrt()).collect();
        let r = |i: usize, j: usize| c[i][j] / (sd[i] * sd[j]);
        PopulationParams {
            rho_xz: r(1, 2),
            rho_vx: r(0, 1),
            rho_vz: r(0, 2),
            rho_yz: r(3, 2),
            rho_vy: r(0, 3),
            sigma_x: sd[1],
            sigma_y: sd[3],
            sigma_z: sd[2],
            sigma_v: sd[0],
            n_ms,
            n_vs,
        }
    }

    /// Conditional correlations implied by the model.
    pub fn conditional(&self) -> Result<ConditionalParams> {
        let c = self.covariance();
        let sd: Vec<f64> = (0..4).map(|i| c[i][i].sqrt()).collect();
        let r = |i: usize, j: usize| c[i][j] / (sd[i] * sd[j]);
        Ok(ConditionalParams {
            rho_vx: r(0, 1),
            rho_xz_v: partial_correlation(r(1, 2), r(0, 1), r(0, 2))?,
            rho_vz_x: partial_correlation(r(0, 2), r(0, 1), r(1, 2))?,
            rho_xy_v: partial_correlation(r(1, 3), r(0, 1), r(0, 3))?,
            rho_vy_x: partial_correlation(r(0, 3), r(0, 1), r(1, 3))?,
        })
    }
}

/// Scenario description by conditional correlations, the way simulation
/// designs and efficiency grids are usually stated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalParams {
    pub rho_vx: f64,
    pub rho_xz_v: f64,
    pub rho_vz_x: f64,
    pub rho_xy_v: f64,
    pub rho_vy_x: f64,
}

impl Default for ConditionalParams {
    /// The base simulation design: θ_x = 0.5, β_x = 0.5 with unit noises and sd(ε_z) = 0.5.
    fn default() -> Self {
        Self {
            rho_vx: 0.0,
            rho_xz_v: 0.5 / 0.5f64.sqrt(),
            rho_vz_x: 0.0,
            rho_xy_v: 0.5 / 1.25f64.sqrt(),
            rho_vy_x: 0.0,
        }
    }
}

impl ConditionalParams {
    /// Structural coefficients reproducing these correlations with Var(V) = 1,
    /// sd(ε_x) = 1, sd(ε_z) = 0.5 and sd(ε_y) = 1.
    pub fn to_sem(&self) -> Result<Sem> {
        for (name, r) in self.named() {
            if !(r.abs() < 1.0) {
                return Err(Error::InconsistentCorrelations(format!(
                    "{name} = {r} is outside (-1, 1)"
                )));
            }
        }
        let odds = |r: f64| r / (1.0 - r * r).sqrt();
        let (sd_x, sd_z, sd_y) = (1.0, 0.5, 1.0);
        let eta = odds(self.rho_vx) * sd_x;
        let sd_x_given_v = sd_x;
        let sd_v_given_x = (sd_x * sd_x / (eta * eta + sd_x * sd_x)).sqrt();
        Ok(Sem {
            var_v: 1.0,
            eta_v: eta,
            theta_x: sd_z * odds(self.rho_xz_v) / sd_x_given_v,
            theta_v: sd_z * odds(self.rho_vz_x) / sd_v_given_x,
            beta_x: sd_y * odds(self.rho_xy_v) / sd_x_given_v,
            beta_v: sd_y * odds(self.rho_vy_x) / sd_v_given_x,
            sd_x,
            sd_z,
            sd_y,
        })
    }

    pub fn population(&self, n_ms: usize, n_vs: usize) -> Result<PopulationParams> {
        let p = self.to_sem()?.population(n_ms, n_vs);
        p.validate()?;
        Ok(p)
    }

    fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("rho_vx", self.rho_vx),
            ("rho_xz_v", self.rho_xz_v),
            ("rho_vz_x", self.rho_vz_x),
            ("rho_xy_v", self.rho_xy_v),
            ("rho_vy_x", self.rho_vy_x),
        ]
    }

    pub fn get(&self, param: GridParam) -> f64 {
        match param {
            GridParam::RhoVx => self.rho_vx,
            GridParam::RhoXzV => self.rho_xz_v,
            GridParam::RhoVzX => self.rho_vz_x,
            GridParam::RhoXyV => self.rho_xy_v,
            GridParam::RhoVyX => self.rho_vy_x,
        }
    }

    pub fn set(&mut self, param: GridParam, value: f64) {
        match param {
            GridParam::RhoVx => self.rho_vx = value,
            GridParam::RhoXzV => self.rho_xz_v = value,
            GridParam::RhoVzX => self.rho_vz_x = value,
            GridParam::RhoXyV => self.rho_xy_v = value,
            GridParam::RhoVyX => self.rho_vy_x = value,
        }
    }

    /// Zero the correlations the DAG rules out.
    pub fn constrained(mut self, dag: DagId) -> Self {
        let (x, z, y) = dag.v_arrows();
        if !x {
            self.rho_vx = 0.0;
        }
        if !z {
            self.rho_vz_x = 0.0;
        }
        if !y {
            self.rho_vy_x = 0.0;
        }
        self
    }
}

/// A correlation that can be swept in an efficiency grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridParam {
    RhoVx,
    RhoXzV,
    RhoVzX,
    RhoXyV,
    RhoVyX,
}

impl GridParam {
    pub const ALL: [GridParam; 5] = [
        GridParam::RhoVx,
        GridParam::RhoXzV,
        GridParam::RhoVzX,
        GridParam::RhoXyV,
        GridParam::RhoVyX,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GridParam::RhoVx => "rho_vx",
            GridParam::RhoXzV => "rho_xz_v",
            GridParam::RhoVzX => "rho_vz_x",
            GridParam::RhoXyV => "rho_xy_v",
            GridParam::RhoVyX => "rho_vy_x",
        }
    }

    /// Whether the DAG leaves this correlation free.
    pub fn free_under(self, dag: DagId) -> bool {
        let (x, z, y) = dag.v_arrows();
        match self {
            GridParam::RhoVx => x,
            GridParam::RhoVzX => z,
            GridParam::RhoVyX => y,
            GridParam::RhoXzV | GridParam::RhoXyV => true,
        }
    }
}

impl std::str::FromStr for GridParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GridParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = GridParam::ALL.iter().map(|p| p.name()).collect();
                Error::InvalidConfig(format!("unknown grid parameter '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: GridParam,
    pub values: Vec<f64>,
}

/// Strategies that are valid under the DAG.
pub fn valid_strategies(dag: DagId) -> Vec<AdjustmentStrategy> {
    let ty = CovariateType::from(dag);
    AdjustmentStrategy::ALL
        .into_iter()
        .filter(|&s| validity_of(ty, s) != Validity::Biased)
        .collect()
}

/// One row of a long-format grid. `variance`/`are` are `None` at infeasible points.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub coords: Vec<f64>,
    pub strategy: AdjustmentStrategy,
    pub variance: Option<f64>,
    pub are: Option<f64>,
    pub note: Option<String>,
}

/// ARE of every valid strategy over the cartesian product of the sweeps.
/// Infeasible points are reported per cell rather than failing the grid.
pub fn are_grid(
    dag: DagId,
    sweeps: &[Sweep],
    fixed: &ConditionalParams,
    n_ms: usize,
    n_vs: usize,
) -> Result<Vec<GridCell>> {
    if sweeps.is_empty() {
        return Err(Error::InvalidConfig("a grid needs at least one sweep".into()));
    }
    for (i, s) in sweeps.iter().enumerate() {
        if !s.param.free_under(dag) {
            return Err(Error::InvalidConfig(format!(
                "{} is fixed at zero under {dag}",
                s.param.name()
            )));
        }
        if sweeps[..i].iter().any(|o| o.param == s.param) {
            return Err(Error::InvalidConfig(format!("{} swept twice", s.param.name())));
        }
        if s.values.is_empty() {
            return Err(Error::InvalidConfig(format!("{} has no values", s.param.name())));
        }
    }
    let strategies = valid_strategies(dag);
    let base = fixed.constrained(dag);
    let mut cells = Vec::new();
    let total: usize = sweeps.iter().map(|s| s.values.len()).product();
    for flat in 0..total {
        let mut rem = flat;
        let mut coords = vec![0.0; sweeps.len()];
        for (k, s) in sweeps.iter().enumerate().rev() {
            coords[k] = s.values[rem % s.values.len()];
            rem /= s.values.len();
        }
        let mut point = base;
        for (s, &v) in sweeps.iter().zip(&coords) {
            point.set(s.param, v);
        }
        let pop = point.population(n_ms, n_vs);
        let var_om = pop
            .as_ref()
            .map_err(|e| e.to_string())
            .and_then(|p| analytic_variance(p, AdjustmentStrategy::OM).map_err(|e| e.to_string()));
        for &strategy in &strategies {
            let cell = match (&pop, &var_om) {
                (Ok(p), Ok(v_om)) => match analytic_variance(p, strategy) {
                    Ok(v) => GridCell {
                        coords: coords.clone(),
                        strategy,
                        variance: Some(v),
                        are: Some(if strategy == AdjustmentStrategy::OM { 1.0 } else { v_om / v }),
                        note: None,
                    },
                    Err(e) => na(&coords, strategy, e.to_string()),
                },
                (Err(e), _) => na(&coords, strategy, e.to_string()),
                (_, Err(e)) => na(&coords, strategy, e.clone()),
            };
            cells.push(cell);
        }
    }
    Ok(cells)
}

fn na(coords: &[f64], strategy: AdjustmentStrategy, note: String) -> GridCell {
    GridCell {
        coords: coords.to_vec(),
        strategy,
        variance: None,
        are: None,
        note: Some(note),
    }
}

/// CSV with columns `dag, <swept params>, strategy, variance, are`; infeasible cells read `NA`.
pub fn grid_to_csv(dag: DagId, sweeps: &[Sweep], cells: &[GridCell]) -> String {
    let mut out = String::from("dag");
    for s in sweeps {
        out.push(',');
        out.push_str(s.param.name());
    }
    out.push_str(",strategy,variance,are\n");
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6e}"));
    for c in cells {
        let _ = write!(out, "{}", dag.index());
        for v in &c.coords {
            let _ = write!(out, ",{v}");
        }
        let are = c.are.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
        let _ = writeln!(out, ",{},{},{}", c.strategy.tag(), fmt(c.variance), are);
    }
    out
}

/// Two-parameter sweep used when none is given.
pub fn default_sweeps(dag: DagId) -> Vec<Sweep> {
    let grid = |lo: f64| -> Vec<f64> { (0..10).map(|i| lo + 0.1 * i as f64).map(|v| (v * 10.0).round() / 10.0).collect() };
    let (a, b) = match dag {
        DagId::Dag1 => (GridParam::RhoXzV, GridParam::RhoVyX),
        DagId::Dag2 | DagId::Dag6 => (GridParam::RhoXzV, GridParam::RhoVzX),
        DagId::Dag3 | DagId::Dag7 => (GridParam::RhoXzV, GridParam::RhoVx),
        DagId::Dag4 | DagId::Dag8 => (GridParam::RhoVx, GridParam::RhoVzX),
        DagId::Dag5 => (GridParam::RhoXzV, GridParam::RhoXyV),
    };
    vec![
        Sweep { param: a, values: grid(0.0) },
        Sweep { param: b, values: grid(0.0) },
    ]
}
