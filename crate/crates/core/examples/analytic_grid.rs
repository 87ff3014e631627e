//! Closed-form limits, asymptotic variances and relative efficiencies.
//!
//! Prints the population quantities for each catalog base case and a
//! relative-efficiency sweep over the covariate-surrogate correlation.
//!
//! ```text
//! cargo run --example analytic_grid
//! ```

use recal::analytic::{analytic_variance, are, are_grid, grid_to_csv, population_coefficients, ConditionalParams, GridParam, Sweep};
use recal::rsw::AdjustmentStrategy;
use recal::scenario::{catalog_entry, implied_correlations, DagId};

fn main() -> recal::Result<()> {
    println!("limits and variances at n_ms = 5000, n_vs = 400");
    println!("dag  strategy  limit    var(e-3)  ARE");
    for dag in DagId::ALL {
        let config = catalog_entry(&format!("dag{}-base-cont", dag.index()))?.with_sizes(5000, 400);
        let p = implied_correlations(&config)?;
        let limits = population_coefficients(&p)?;
        for s in AdjustmentStrategy::ALL {
            println!(
                "{:<4} {:<9} {:<8.4} {:<9.3} {:.3}",
                dag.index(),
                s.short(),
                limits.limit(s),
                analytic_variance(&p, s)? * 1e3,
                are(&p, s)?
            );
        }
    }

    // Under DAG 8 the better strategy flips as V becomes more strongly tied to Z.
    let dag = DagId::Dag8;
    let fixed = ConditionalParams { rho_vx: 0.4, rho_xz_v: 0.7, ..ConditionalParams::default() };
    let sweeps = [Sweep { param: GridParam::RhoVzX, values: (1..=9).map(|i| f64::from(i) / 10.0).collect() }];
    let cells = are_grid(dag, &sweeps, &fixed, 5000, 400)?;
    println!();
    print!("{}", grid_to_csv(dag, &sweeps, &cells));
    Ok(())
}
