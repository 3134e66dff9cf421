//! Finite-volume migration on an interval: the spectral gap converges to
//! pi^2 a / L^2 from below as the mesh is refined.

use chemostat::domain::{build_interval_operator, interval_matrix};
use std::f64::consts::PI;

fn main() -> chemostat::Result<()> {
    for cells in [4, 8, 16, 32, 64] {
        let op = build_interval_operator(1.0, cells, 1, |_, _| 1.0)?;
        let gap = op.spectral_gaps().overall;
        println!(
            "cells {cells:>3}: gap {gap:.6}, pi^2 - gap {:.3e}",
            PI * PI - gap
        );
    }
    let a = interval_matrix(1.0, 4, |x| 1.0 + x)?;
    println!("variable diffusivity a(x) = 1 + x, 4 cells:\n{a:.3}");
    Ok(())
}
