//! Corrected exposure effect from a main study and a validation study.
//!
//! Simulates a covariate that affects the exposure, the surrogate and the
//! outcome, asks the advisor what to do with it, and compares the
//! recommended estimate with a deliberately wrong strategy.
//!
//! ```text
//! cargo run --example estimate
//! ```

use recal::advisor::{CovariateRole, CovariateType};
use recal::cli::{run_estimate, AnalysisConfig};
use recal::rsw::AdjustmentStrategy;
use recal::scenario::{generate, DagId, OutcomeKind, ScenarioConfig};

fn main() -> recal::Result<()> {
    // The surrogate is on the scale of the true exposure, so the uncorrected slope is attenuated.
    let mut scenario = ScenarioConfig::new(DagId::Dag4, OutcomeKind::Continuous);
    scenario.name = "dag4-example".into();
    scenario.theta_x = 1.0;
    let sample = generate(&scenario, 0)?;

    let mut config = AnalysisConfig::default();
    config.covariates.push(CovariateRole::new("v", CovariateType::V4));
    config.strategy.force.push(AdjustmentStrategy::NoneNone);

    let report = run_estimate(&sample.main, &sample.validation, &config)?;
    print!("{report}");
    println!("true effect: {}", scenario.beta_x);
    Ok(())
}
