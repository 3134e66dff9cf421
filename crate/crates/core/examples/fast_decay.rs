//! Decay of the zero-mean fluctuation: pure migration on two patches decays
//! at exactly gap / eps; with reactions the fitted rate still scales as 1 / eps.

use chemostat::domain::{build_patch_operator, SpatialDomain};
use chemostat::model::State;
use chemostat::scenario::Scenario;
use chemostat::simulate::{fast_decay_fit, integrate_diffusion, integrate_full, IntegratorConfig};
use nalgebra::DMatrix;

fn main() -> chemostat::Result<()> {
    let edges = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let op = build_patch_operator(&edges, &[1.0])?;
    let domain = SpatialDomain::patches(2)?;
    println!("spectral gap {}", op.spectral_gaps().overall);
    for eps in [0.1, 0.01, 0.001] {
        let cfg = IntegratorConfig::default()
            .with_t_end(5.0 * eps)
            .with_record_every(eps / 50.0);
        let init = State::from_row_slice(1, 2, &[1.0, 0.0]);
        let traj = integrate_diffusion(&op, &domain, eps, &init, &cfg)?;
        println!(
            "  F = 0, eps {eps:>6}: eps * rate = {:.6}",
            fast_decay_fit(&traj, eps)?.scaled_rate
        );
    }

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/sec52.json");
    let model = Scenario::load(path)?.build_model()?;
    let init = State::from_row_slice(3, 2, &[10.0, 0.0, 5.0, 0.0, 0.0, 5.0]);
    for eps in [0.02, 0.01, 0.005] {
        let cfg = IntegratorConfig::default()
            .with_t_end(10.0 * eps)
            .with_record_every(eps / 50.0);
        let traj = integrate_full(&model, eps, &init, &cfg)?;
        let fit = fast_decay_fit(&traj, eps)?;
        println!(
            "  sec52, eps {eps:>6}: rate {:.4}, eps * rate {:.4}, plateau {:.3e}",
            fit.rate, fit.scaled_rate, fit.plateau
        );
    }
    Ok(())
}
