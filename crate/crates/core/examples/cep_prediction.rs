//! Exclusion prediction for the averaged model checked against a direct
//! integration of the averaged ODE.

use chemostat::aggregated::{aggregate, predict_cep};
use chemostat::scenario::Scenario;
use chemostat::simulate::{
    classify_survivors, integrate_aggregated, IntegratorConfig, SurvivalThresholds,
};

fn main() -> chemostat::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");
    for name in ["sec51", "sec52", "sec53", "homogeneous", "washout"] {
        let model = Scenario::load(format!("{dir}/{name}.json"))?.build_model()?;
        let agg = aggregate(&model);
        let mut x0 = vec![1.0; agg.species_count() + 1];
        x0[0] = 0.5;
        let prediction = predict_cep(&agg, &x0)?;
        let cfg = IntegratorConfig::default()
            .with_t_end(1e4)
            .with_record_every(1e4);
        let traj = integrate_aggregated(&agg, &x0, &cfg)?;
        let verdict = classify_survivors(traj.final_state(), SurvivalThresholds::default());
        println!(
            "{name:<12} predicted winner {} (r* = {:.4}), simulated survivors {:?}",
            prediction.winner, prediction.r_hat, verdict.survivors
        );
    }
    Ok(())
}
