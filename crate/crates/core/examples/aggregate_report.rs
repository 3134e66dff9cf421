//! Averaged model of a bundled scenario: break-even table, equilibria,
//! exclusion case and the strength decomposition.
//!
//! `cargo run --example aggregate_report -- sec52`

use chemostat::aggregated::aggregate;
use chemostat::commands::aggregate_report;
use chemostat::scenario::Scenario;

fn main() -> chemostat::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "sec52".into());
    let path = format!("{}/scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"));
    let scenario = Scenario::load(path)?;
    let model = scenario.build_model()?;
    let agg = aggregate(&model);
    print!("{}", aggregate_report(scenario.label(), &model, &agg));
    Ok(())
}
