//! Simulated survivors of the full system as the migration time scale varies.

use chemostat::analysis::{cep_table, geometric_grid};
use chemostat::scenario::{InitialSpec, Scenario};

fn main() -> chemostat::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");
    let initial = InitialSpec::Uniform {
        uniform: (0.1, 1.0),
        seed: 1,
    };
    for name in ["sec51", "sec52", "sec53"] {
        let scenario = Scenario::load(format!("{dir}/{name}.json"))?;
        let model = scenario.build_model()?;
        let mut cfg = scenario.integrator_config()?;
        cfg.t_end = scenario
            .cep
            .as_ref()
            .and_then(|c| c.t_end)
            .unwrap_or(cfg.t_end);
        cfg.record_every = cfg.t_end;
        let grid = geometric_grid(100.0, 0.1, 6)?;
        let table = cep_table(&model, &grid, &initial.build(&model)?, &cfg)?;
        println!("{name} (t_end = {})", cfg.t_end);
        for row in &table.rows {
            let d: Vec<String> = row
                .verdict
                .densities
                .iter()
                .map(|v| format!("{v:.3e}"))
                .collect();
            println!(
                "  eps {:>8.1e}  survivors {:<10} densities [{}]",
                row.epsilon,
                row.label(),
                d.join(", ")
            );
        }
    }
    Ok(())
}
