#![allow(dead_code)]

use chemostat::domain::{build_patch_operator, SpatialDomain};
use chemostat::model::{CompetitionModel, Consumption, Species};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn scenario_path(name: &str) -> String {
    format!("{}/scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

pub fn load(name: &str) -> CompetitionModel {
    chemostat::scenario::Scenario::load(scenario_path(name))
        .unwrap()
        .build_model()
        .unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Uptake {
    Linear,
    Monod,
    /// Monod with one `k` shared by all species.
    MonodCommonK,
    Mixed,
}

/// Connected random graph: a path plus random extra edges.
pub fn random_edges(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(p, p);
    for j in 1..p {
        let v = rng.gen_range(0.5..2.0);
        w[(j - 1, j)] = v;
        w[(j, j - 1)] = v;
    }
    for j in 0..p {
        for k in (j + 2)..p {
            if rng.gen_bool(0.4) {
                let v = rng.gen_range(0.2..1.5);
                w[(j, k)] = v;
                w[(k, j)] = v;
            }
        }
    }
    w
}

fn field(rng: &mut ChaCha8Rng, p: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..p).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Random model on `p` uniform patches. Local break-evens are finite:
/// mortalities stay below the local maximal uptake.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize, p: usize, uptake: Uptake) -> CompetitionModel {
    let edges = random_edges(rng, p);
    let diff = field(rng, n + 1, 0.5, 2.0);
    let op = build_patch_operator(&edges, &diff).unwrap();
    let input = field(rng, p, 0.5, 2.0);
    let m0 = field(rng, p, 0.5, 1.5);
    let common_k = rng.gen_range(0.2..2.0);
    let species = (0..n)
        .map(|_| {
            let kind = match uptake {
                Uptake::Mixed => {
                    if rng.gen_bool(0.5) {
                        Uptake::Linear
                    } else {
                        Uptake::Monod
                    }
                }
                u => u,
            };
            let c = field(rng, p, 0.5, 2.0);
            // below the local and the mean amplitude, so every inverse is finite
            let cap = c.iter().sum::<f64>() / p as f64;
            let m: Vec<f64> = c
                .iter()
                .map(|ci| ci.min(cap) * rng.gen_range(0.1..0.7))
                .collect();
            let consumption = match kind {
                Uptake::Linear => Consumption::linear(c),
                Uptake::Monod => Consumption::monod(c, rng.gen_range(0.2..2.0)),
                Uptake::MonodCommonK => Consumption::monod(c, common_k),
                Uptake::Mixed => unreachable!(),
            };
            Species::new(m, consumption)
        })
        .collect();
    CompetitionModel::new(SpatialDomain::patches(p).unwrap(), op, input, m0, species).unwrap()
}

/// Space-independent coefficients on a random graph.
pub fn random_homogeneous(rng: &mut ChaCha8Rng, n: usize, p: usize) -> CompetitionModel {
    let edges = random_edges(rng, p);
    let diff = field(rng, n + 1, 0.5, 2.0);
    let op = build_patch_operator(&edges, &diff).unwrap();
    let input = rng.gen_range(0.5..2.0);
    let m0 = rng.gen_range(0.5..1.5);
    let species = (0..n)
        .map(|_| {
            let c = rng.gen_range(0.5..2.0);
            let m = c * rng.gen_range(0.1..0.7);
            let consumption = if rng.gen_bool(0.5) {
                Consumption::linear(vec![c; p])
            } else {
                Consumption::monod(vec![c; p], rng.gen_range(0.2..2.0))
            };
            Species::new(vec![m; p], consumption)
        })
        .collect();
    CompetitionModel::new(
        SpatialDomain::patches(p).unwrap(),
        op,
        vec![input; p],
        vec![m0; p],
        species,
    )
    .unwrap()
}
