//! Distance between continued steady states and the averaged equilibrium
//! over a geometric eps grid; the log-log slope should be close to one.

use chemostat::analysis::{epsilon_sweep, geometric_grid};
use chemostat::scenario::Scenario;

fn main() -> chemostat::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");
    let grid = geometric_grid(0.1, 0.5, 9)?;
    for (name, seed) in [("sec51", 3), ("sec52", 2), ("sec53", 2), ("homogeneous", 1)] {
        let model = Scenario::load(format!("{dir}/{name}.json"))?.build_model()?;
        let sweep = epsilon_sweep(&model, seed, &grid)?;
        println!("{name} (seed {seed})");
        println!(
            "  {:>12} {:>14} {:>14} {:>8}",
            "eps", "error", "slow_error", "newton"
        );
        for p in &sweep.points {
            println!(
                "  {:>12.3e} {:>14.6e} {:>14.6e} {:>8}",
                p.epsilon, p.error, p.slow_error, p.steady.newton_steps
            );
        }
        println!("  slope {:?}, slow slope {:?}", sweep.fit, sweep.slow_fit);
    }
    Ok(())
}
