//! Monte Carlo bias and efficiency of the four strategies.
//!
//! Runs the base continuous scenario of every DAG with a reduced number of
//! replicates and prints the summary table. Pass a replicate count to change it.
//!
//! ```text
//! cargo run --release --example simulate -- 200
//! ```

use recal::harness::{run_scenario, summary_table, TableFormat};
use recal::rsw::AdjustmentStrategy;
use recal::scenario::{catalog_entry, DagId};

fn main() -> recal::Result<()> {
    let replicates = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let mut results = Vec::new();
    for dag in DagId::ALL {
        let mut config = catalog_entry(&format!("dag{}-base-cont", dag.index()))?;
        config.replicates = replicates;
        results.push(run_scenario(&config, &AdjustmentStrategy::ALL)?);
    }
    print!("{}", summary_table(&results, TableFormat::Markdown));
    Ok(())
}
