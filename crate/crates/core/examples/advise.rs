//! Adjustment advice for a set of covariates described by their causal roles.
//!
//! Reads a role file (default `examples/data/fiber_roles.toml`) and prints the
//! advice followed by the tab-separated table.
//!
//! ```text
//! cargo run --example advise -- crates/core/examples/data/fiber_roles.toml
//! ```

use std::path::PathBuf;

use recal::advisor::advise_for;
use recal::cli::AnalysisConfig;
use recal::regress::Family;

fn main() -> recal::Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data/fiber_roles.toml"));
    let config = AnalysisConfig::read(&path)?;

    for family in [Family::Linear, Family::Logistic] {
        let advice = advise_for(&config.covariates, family)?;
        println!("== {family:?} outcome ==");
        print!("{advice}");
        println!();
        print!("{}", advice.to_table());
        println!();
    }
    Ok(())
}
