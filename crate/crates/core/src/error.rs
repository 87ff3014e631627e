use std::path::PathBuf;

use thiserror::Error;

/// Every failure the crate can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("design matrix is rank deficient (column {column} pivot {pivot:.3e} below tolerance)")]
    RankDeficient { column: usize, pivot: f64 },

    #[error("invalid response: {0}")]
    InvalidResponse(String),

    #[error("logistic fit separated: {0}")]
    Separation(String),

    #[error("logistic fit did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("calibration slope {alpha:.4e} is too close to zero (|alpha|/se = {z:.2}); corrected estimate is unstable")]
    NearZeroCalibrationSlope { alpha: f64, z: f64 },

    #[error("calibration slope is zero")]
    ZeroSlope,

    #[error("inconsistent correlations: {0}")]
    InconsistentCorrelations(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("strategy {strategy} is inconsistent with the covariate sets: {reason}")]
    StrategyMismatch { strategy: String, reason: String },

    #[error("unknown covariate '{0}'")]
    UnknownCovariate(String),

    #[error("bin {bin} has {count} observations in the {sample} sample (need at least {min})")]
    EmptyBin {
        bin: String,
        sample: &'static str,
        count: usize,
        min: usize,
    },

    #[error("denominator difference is zero")]
    ZeroDenominator,

    #[error("{failed} of {total} replicates failed in scenario '{scenario}'")]
    TooManyFailures {
        scenario: String,
        failed: usize,
        total: usize,
    },

    #[error("unknown scenario '{name}'; valid names: {valid}")]
    UnknownScenario { name: String, valid: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
