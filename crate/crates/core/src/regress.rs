//! Least-squares and logistic fitting with coefficient covariance.
//!
//! Both fitters take a dense design matrix whose first column is the
//! intercept. Linear fits go through a Householder QR factorization; the
//! logistic fit runs iteratively reweighted least squares from zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivots smaller than this fraction of the largest pivot mark a rank deficient design.
pub const RANK_TOLERANCE: f64 = 1e-10;

const IRLS_MAX_ITER: usize = 100;
const IRLS_TOLERANCE: f64 = 1e-9;
const SEPARATION_BOUND: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Logistic,
}

/// Which variable a design explains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseRole {
    Outcome,
    TrueExposure,
    Covariate,
}

/// Named regressor layout for one model. The intercept is always the first column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub response_role: ResponseRole,
    regressors: Vec<String>,
}

impl DesignSpec {
    pub fn new<S: Into<String>>(
        response_role: ResponseRole,
        regressors: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let regressors: Vec<String> = regressors.into_iter().map(Into::into).collect();
        if regressors.is_empty() {
            return Err(Error::DimensionMismatch(
                "a design needs at least one regressor besides the intercept".into(),
            ));
        }
        for (i, name) in regressors.iter().enumerate() {
            if regressors[..i].contains(name) {
                return Err(Error::DimensionMismatch(format!(
                    "regressor '{name}' listed twice"
                )));
            }
        }
        Ok(Self {
            response_role,
            regressors,
        })
    }

    pub fn regressors(&self) -> &[String] {
        &self.regressors
    }

    pub fn include_intercept(&self) -> bool {
        true
    }

    /// Column index of a regressor in the design matrix (intercept is column 0).
    pub fn column_of(&self, name: &str) -> Option<usize> {
        self.regressors.iter().position(|r| r == name).map(|i| i + 1)
    }

    /// Assemble the design matrix, looking each regressor up through `column`.
    pub fn build<'a, F>(&self, n: usize, mut column: F) -> Result<DMatrix<f64>>
    where
        F: FnMut(&str) -> Option<&'a [f64]>,
    {
        let mut cols: Vec<&[f64]> = Vec::with_capacity(self.regressors.len());
        for name in &self.regressors {
            let c = column(name).ok_or_else(|| Error::UnknownCovariate(name.clone()))?;
            if c.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column '{name}' has {} rows, expected {n}",
                    c.len()
                )));
            }
            cols.push(c);
        }
        Ok(design_matrix(n, &cols))
    }
}

/// Intercept column followed by the given columns.
pub fn design_matrix(n: usize, columns: &[&[f64]]) -> DMatrix<f64> {
    let p = columns.len() + 1;
    DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] })
}

/// Coefficients and their covariance from one fitted model.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub coefficients: Vec<f64>,
    pub cov: DMatrix<f64>,
    /// RSS/(n - p) for linear fits, 1 for logistic fits.
    pub residual_variance: f64,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub family: Family,
}

impl ModelFit {
    pub fn coef(&self, j: usize) -> f64 {
        self.coefficients[j]
    }

    pub fn var(&self, j: usize) -> f64 {
        self.cov[(j, j)]
    }

    pub fn se(&self, j: usize) -> f64 {
        self.cov[(j, j)].max(0.0).sqrt()
    }

    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }
}

fn check_dims(y: &[f64], x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows but response has {}",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() <= x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "need more observations ({}) than parameters ({})",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Upper-triangular factor R and Qᵀy from a Householder QR of `x`.
fn householder_qr(x: &DMatrix<f64>, y: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let p = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();
    let largest = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    for j in 0..p {
        let pivot = r[(j, j)].abs();
        if !(pivot > RANK_TOLERANCE * largest) {
            return Err(Error::RankDeficient { column: j, pivot });
        }
    }
    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    Ok((r, qty.rows(0, p).into_owned()))
}

/// R⁻¹ R⁻ᵀ, i.e. (XᵀX)⁻¹ without forming XᵀX.
fn inverse_gram_from_r(r: &DMatrix<f64>) -> DMatrix<f64> {
    let p = r.ncols();
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .expect("triangular factor already checked for zero pivots");
    let g = &r_inv * r_inv.transpose();
    symmetrize(g)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Ordinary least squares by Householder QR.
pub fn fit_ols(y: &[f64], x: &DMatrix<f64>) -> Result<ModelFit> {
    check_dims(y, x)?;
    let (n, p) = x.shape();
    let (r, qty) = householder_qr(x, y)?;
    let beta = r
        .solve_upper_triangular(&qty)
        .expect("triangular factor already checked for zero pivots");
    let fitted = x * &beta;
    let rss: f64 = y
        .iter()
        .zip(fitted.iter())
        .map(|(yi, fi)| (yi - fi) * (yi - fi))
        .sum();
    let residual_variance = rss / (n - p) as f64;
    let cov = inverse_gram_from_r(&r) * residual_variance;
    Ok(ModelFit {
        coefficients: beta.iter().copied().collect(),
        cov,
        residual_variance,
        n_obs: n,
        converged: true,
        iterations: 1,
        family: Family::Linear,
    })
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Fisher information XᵀWX and score Xᵀ(y - μ) at `beta`.
fn logistic_info_and_score(
    y: &[f64],
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>, f64) {
    let (n, p) = x.shape();
    let eta = x * beta;
    let mut info = DMatrix::<f64>::zeros(p, p);
    let mut score = DVector::<f64>::zeros(p);
    let mut max_w = 0.0f64;
    for i in 0..n {
        let mu = sigmoid(eta[i]);
        let w = mu * (1.0 - mu);
        max_w = max_w.max(w);
        let resid = y[i] - mu;
        for a in 0..p {
            let xa = x[(i, a)];
            score[a] += xa * resid;
            let wxa = w * xa;
            for b in 0..=a {
                info[(a, b)] += wxa * x[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            info[(b, a)] = info[(a, b)];
        }
    }
    (info, score, max_w)
}

/// Score vector Xᵀ(y - μ) of the Bernoulli log-likelihood.
pub fn logistic_score(y: &[f64], x: &DMatrix<f64>, beta: &[f64]) -> Vec<f64> {
    let b = DVector::from_column_slice(beta);
    logistic_info_and_score(y, x, &b).1.iter().copied().collect()
}

/// Maximum-likelihood logistic regression by iteratively reweighted least squares.
///
/// Each step solves the Newton system `(XᵀWX) δ = Xᵀ(y - μ)`, which is the IRLS
/// update written in increment form. The returned covariance is the inverse
/// Fisher information at the final coefficients.
pub fn fit_logistic(y: &[f64], x: &DMatrix<f64>) -> Result<ModelFit> {
    check_dims(y, x)?;
    let mut ones = 0usize;
    for (i, &v) in y.iter().enumerate() {
        if v == 1.0 {
            ones += 1;
        } else if v != 0.0 {
            return Err(Error::InvalidResponse(format!(
                "row {i}: logistic response must be 0 or 1, got {v}"
            )));
        }
    }
    if ones == 0 || ones == y.len() {
        return Err(Error::InvalidResponse(
            "logistic response needs both classes present".into(),
        ));
    }

    let (n, p) = x.shape();
    let mut beta = DVector::<f64>::zeros(p);
    for iter in 1..=IRLS_MAX_ITER {
        let (info, score, max_w) = logistic_info_and_score(y, x, &beta);
        if max_w < 1e-12 {
            return Err(Error::Separation("working weights collapsed to zero".into()));
        }
        let chol = info.clone().cholesky().ok_or_else(|| {
            Error::Separation("Fisher information is not positive definite".into())
        })?;
        let step = chol.solve(&score);
        beta += &step;
        if beta.iter().any(|b| !b.is_finite() || b.abs() > SEPARATION_BOUND) {
            return Err(Error::Separation(format!(
                "coefficients diverged beyond |beta| > {SEPARATION_BOUND}"
            )));
        }
        let rel = step
            .iter()
            .zip(beta.iter())
            .map(|(d, b)| d.abs() / (b.abs() + 1.0))
            .fold(0.0, f64::max);
        if rel < IRLS_TOLERANCE {
            let (info, _, _) = logistic_info_and_score(y, x, &beta);
            let cov = info
                .cholesky()
                .ok_or_else(|| Error::Separation("final information is singular".into()))?
                .inverse();
            return Ok(ModelFit {
                coefficients: beta.iter().copied().collect(),
                cov: symmetrize(cov),
                residual_variance: 1.0,
                n_obs: n,
                converged: true,
                iterations: iter,
                family: Family::Logistic,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: IRLS_MAX_ITER,
    })
}

/// Dispatch on family.
pub fn fit(family: Family, y: &[f64], x: &DMatrix<f64>) -> Result<ModelFit> {
    match family {
        Family::Linear => fit_ols(y, x),
        Family::Logistic => fit_logistic(y, x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let y = [0.0, 2.0, 4.0, 6.0];
        let x = design_matrix(4, &[&[0.0, 1.0, 2.0, 3.0]]);
        let f = fit_ols(&y, &x).unwrap();
        assert!(f.coef(0).abs() < 1e-12);
        assert!((f.coef(1) - 2.0).abs() < 1e-12);
        assert!(f.residual_variance.abs() < 1e-20);
    }

    #[test]
    fn intercept_only_is_mean() {
        let y = [5.0, 5.0, 5.0];
        let x = DMatrix::from_element(3, 1, 1.0);
        let f = fit_ols(&y, &x).unwrap();
        assert!((f.coef(0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_design_is_rank_deficient() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let x = design_matrix(5, &[&a, &b]);
        let err = fit_ols(&[1.0, 0.0, 2.0, 1.0, 3.0], &x).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }), "{err}");
    }

    #[test]
    fn dimension_checks() {
        let x = design_matrix(3, &[&[1.0, 2.0, 3.0]]);
        assert!(matches!(
            fit_ols(&[1.0, 2.0], &x),
            Err(Error::DimensionMismatch(_))
        ));
        let x = design_matrix(2, &[&[1.0, 2.0]]);
        assert!(matches!(
            fit_ols(&[1.0, 2.0], &x),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn logistic_intercept_is_logit_of_prevalence() {
        let y: Vec<f64> = (0..400).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let x = DMatrix::from_element(400, 1, 1.0);
        let f = fit_logistic(&y, &x).unwrap();
        assert!((f.coef(0) - (0.25f64 / 0.75).ln()).abs() < 1e-8);
        assert!(f.converged);
    }

    #[test]
    fn logistic_rejects_single_class_and_non_binary() {
        let x = design_matrix(4, &[&[0.1, 0.2, 0.3, 0.4]]);
        assert!(matches!(
            fit_logistic(&[0.0; 4], &x),
            Err(Error::InvalidResponse(_))
        ));
        assert!(matches!(
            fit_logistic(&[0.0, 1.0, 0.5, 0.0], &x),
            Err(Error::InvalidResponse(_))
        ));
    }

    #[test]
    fn perfectly_separated_data_is_reported() {
        let xs = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let x = design_matrix(6, &[&xs]);
        assert!(matches!(fit_logistic(&y, &x), Err(Error::Separation(_))));
    }

    #[test]
    fn design_spec_rejects_duplicates_and_empty() {
        assert!(DesignSpec::new(ResponseRole::Outcome, ["z", "z"]).is_err());
        assert!(DesignSpec::new(ResponseRole::Outcome, Vec::<String>::new()).is_err());
        let d = DesignSpec::new(ResponseRole::TrueExposure, ["z", "v"]).unwrap();
        assert_eq!(d.column_of("v"), Some(2));
        assert!(d.include_intercept());
    }
}
