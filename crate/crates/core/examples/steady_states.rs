//! Continues every averaged equilibrium to a steady state of the full
//! system and classifies it by the eigenvalues of the full Jacobian.

use chemostat::analysis::steady_census;
use chemostat::scenario::Scenario;

fn main() -> chemostat::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");
    for (name, eps) in [("sec51", 1e-3), ("sec52", 1e-2), ("washout", 1e-2)] {
        let model = Scenario::load(format!("{dir}/{name}.json"))?.build_model()?;
        println!("{name}, eps = {eps}");
        for s in steady_census(&model, eps)? {
            let spec = s.spectrum.as_ref().expect("census computes spectra");
            let slow: Vec<String> = s.slow(&model).iter().map(|v| format!("{v:.6}")).collect();
            println!(
                "  seed {}: slow [{}], |fast| {:.3e}, residual {:.1e}, max Re {:+.4e}, {}",
                s.seeded_from,
                slow.join(", "),
                s.fast_norm(&model),
                s.residual,
                spec.max_re,
                if spec.stable { "stable" } else { "unstable" }
            );
        }
    }
    Ok(())
}
