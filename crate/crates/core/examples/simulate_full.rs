//! Long-horizon integration of the full system; the trajectory CSV goes to
//! the path given as first argument, a summary to stdout.

use chemostat::output::{trajectory_csv, write_atomic};
use chemostat::scenario::{InitialSpec, Scenario};
use chemostat::simulate::{classify_survivors, integrate_full, SurvivalThresholds};

fn main() -> chemostat::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/sec52.json");
    let scenario = Scenario::load(path)?;
    let model = scenario.build_model()?;
    let cfg = scenario.integrator_config()?;
    let initial = InitialSpec::Uniform {
        uniform: (0.1, 1.0),
        seed: 3,
    }
    .build(&model)?;
    let eps = 1e-3;
    let traj = integrate_full(&model, eps, &initial, &cfg)?;
    let verdict = classify_survivors(traj.final_state(), SurvivalThresholds::default());
    println!(
        "t_end {}: {} steps accepted, {} rejected, {} clamps",
        traj.final_time(),
        traj.accepted_steps,
        traj.rejected_steps,
        traj.clamp_count()
    );
    println!(
        "survivors {:?}, extinct {:?}",
        verdict.survivors, verdict.extinct
    );
    println!(
        "final slow state {:?}",
        traj.slow.last().map(|x| x.as_slice().to_vec())
    );
    if let Some(out) = std::env::args().nth(1) {
        let header = vec![format!("epsilon: {eps}"), "seed: 3".into()];
        write_atomic(out.as_ref(), &trajectory_csv(&model, &traj, &header))?;
    }
    Ok(())
}
