mod common;

use chemostat::aggregated::{
    aggregate, break_even, decompose_strength, predict_cep, AggregatedModel,
};
use chemostat::domain::{build_interval_operator, project_fast, project_slow, split};
use chemostat::model::{CompetitionModel, State};
use chemostat::simulate::{
    integrate_aggregated, integrate_diffusion, integrate_full, IntegratorConfig, Scheme,
};
use common::{random_homogeneous, random_model, rng, Uptake};
use proptest::prelude::*;
use rand::Rng;

fn random_state(seed: u64, model: &CompetitionModel, zero_rows: &[usize]) -> State {
    let mut r = rng(seed);
    let mut s = State::from_fn(model.species_count() + 1, model.site_count(), |_, _| {
        r.gen_range(0.0..2.0)
    });
    for &i in zero_rows {
        s.row_mut(i).fill(0.0);
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn migration_has_zero_mean(seed in any::<u64>(), n in 1usize..4, p in 1usize..6) {
        let model = random_model(&mut rng(seed), n, p, Uptake::Mixed);
        let state = random_state(seed ^ 1, &model, &[]);
        let flux = model.migration().apply(&state).unwrap();
        let mean = project_slow(&flux, model.domain()).unwrap();
        prop_assert!(mean.amax() <= 1e-12 * (1.0 + flux.amax()));
    }

    #[test]
    fn projections_are_complementary(seed in any::<u64>(), n in 1usize..4, p in 1usize..6) {
        let model = random_model(&mut rng(seed), n, p, Uptake::Linear);
        let state = random_state(seed ^ 2, &model, &[]);
        let parts = split(&state, model.domain()).unwrap();
        prop_assert!((parts.reconstruct() - &state).amax() <= 1e-14 * (1.0 + state.amax()));
        let fast = project_fast(&state, model.domain()).unwrap();
        prop_assert!(project_slow(&fast, model.domain()).unwrap().amax() <= 1e-14 * (1.0 + state.amax()));
        let refast = project_fast(&fast, model.domain()).unwrap();
        prop_assert!((refast - &fast).amax() <= 1e-14 * (1.0 + state.amax()));
    }

    #[test]
    fn jacobian_matches_finite_differences(seed in any::<u64>(), n in 1usize..4, p in 1usize..5, eps in 0.01f64..1.0) {
        let model = random_model(&mut rng(seed), n, p, Uptake::Mixed);
        let state = random_state(seed ^ 3, &model, &[]).add_scalar(0.1);
        let jac = model.full_jacobian(eps, &state).unwrap();
        let h = 1e-6;
        let cols = model.site_count();
        for k in 0..state.len() {
            let (i, j) = (k / cols, k % cols);
            let mut up = state.clone();
            let mut dn = state.clone();
            up[(i, j)] += h;
            dn[(i, j)] -= h;
            let fd = (model.full_vector_field(eps, &up).unwrap() - model.full_vector_field(eps, &dn).unwrap()) / (2.0 * h);
            for q in 0..state.len() {
                let exact = jac[(q, k)];
                let approx = fd[(q / cols, q % cols)];
                prop_assert!((exact - approx).abs() <= 1e-5 * (1.0 + exact.abs()), "entry ({q},{k}): {exact} vs {approx}");
            }
        }
    }

    #[test]
    fn invariant_planes_and_positivity(seed in any::<u64>(), n in 2usize..4, p in 2usize..4, implicit in any::<bool>()) {
        let model = random_model(&mut rng(seed), n, p, Uptake::Mixed);
        let absent = 1 + (seed as usize % n);
        let init = random_state(seed ^ 4, &model, &[absent]);
        let scheme = if implicit { Scheme::FullyImplicit } else { Scheme::ExpImex };
        let cfg = IntegratorConfig::default().with_t_end(5.0).with_scheme(scheme);
        let traj = integrate_full(&model, 0.05, &init, &cfg).unwrap();
        for s in &traj.states {
            prop_assert!(s.row(absent).iter().all(|v| *v == 0.0));
            prop_assert!(s.min() >= 0.0);
        }
        prop_assert!(traj.max_clamped_mass <= cfg.abs_tol);
    }

    #[test]
    fn homogeneous_full_matches_aggregated(seed in any::<u64>(), n in 1usize..4, p in 2usize..5) {
        let model = random_homogeneous(&mut rng(seed), n, p);
        let agg = aggregate(&model);
        let mut r = rng(seed ^ 5);
        let x0: Vec<f64> = (0..=n).map(|_| r.gen_range(0.1..2.0)).collect();
        let cfg = IntegratorConfig::default().with_t_end(10.0).with_record_every(1.0);
        let full = integrate_full(&model, 0.01, &model.constant_state(&x0).unwrap(), &cfg).unwrap();
        let reduced = integrate_aggregated(&agg, &x0, &cfg).unwrap();
        prop_assert_eq!(full.times.len(), reduced.times.len());
        for (a, b) in full.slow.iter().zip(&reduced.states) {
            for k in 0..=n {
                prop_assert!((a[k] - b[(k, 0)]).abs() <= 1e-3 * (1.0 + b[(k, 0)].abs()), "{} vs {}", a[k], b[(k, 0)]);
            }
        }
        for y in &full.fast_norm {
            prop_assert!(*y <= 1e-12);
        }
    }

    #[test]
    fn break_even_solves_uptake_equation(seed in any::<u64>(), n in 1usize..5, p in 1usize..5) {
        let model = random_model(&mut rng(seed), n, p, Uptake::Mixed);
        let agg = aggregate(&model);
        for i in 1..=n {
            let r = break_even(&agg, i);
            prop_assert!(r.is_finite());
            prop_assert!((agg.uptake(i).eval(r) - agg.mortality[i]).abs() <= 1e-12 * (1.0 + agg.mortality[i]));
        }
    }

    #[test]
    fn decomposition_closes(seed in any::<u64>(), n in 1usize..5, p in 1usize..5) {
        let model = random_model(&mut rng(seed), n, p, Uptake::Mixed);
        let agg = aggregate(&model);
        for d in decompose_strength(&model, &agg).unwrap() {
            prop_assert!(d.residual.abs() <= 1e-10);
        }
    }

    #[test]
    fn exclusion_prediction_commutes_with_relabeling(seed in any::<u64>(), n in 2usize..5, shift in 1usize..4) {
        let model = random_model(&mut rng(seed), n, 3, Uptake::Monod);
        let agg = aggregate(&model);
        let mut r = rng(seed ^ 6);
        let x0: Vec<f64> = (0..=n).map(|_| r.gen_range(0.1..2.0)).collect();
        let perm: Vec<usize> = (0..n).map(|k| (k + shift) % n).collect();
        let permuted = AggregatedModel::from_parts(
            agg.input,
            std::iter::once(agg.mortality[0]).chain(perm.iter().map(|&k| agg.mortality[k + 1])).collect(),
            perm.iter().map(|&k| *agg.uptake(k + 1)).collect(),
        ).unwrap();
        let y0: Vec<f64> = std::iter::once(x0[0]).chain(perm.iter().map(|&k| x0[k + 1])).collect();
        match (predict_cep(&agg, &x0), predict_cep(&permuted, &y0)) {
            (Ok(a), Ok(b)) => {
                let mapped = if b.winner == 0 { 0 } else { perm[b.winner - 1] + 1 };
                prop_assert_eq!(a.winner, mapped);
                prop_assert_eq!(a.r_hat, b.r_hat);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn migration_semigroup_contracts_fluctuations(seed in any::<u64>(), p in 2usize..6, eps in 0.01f64..1.0) {
        let model = random_model(&mut rng(seed), 1, p, Uptake::Linear);
        let init = random_state(seed ^ 7, &model, &[]);
        let cfg = IntegratorConfig::default().with_t_end(eps).with_record_every(eps / 10.0);
        let traj = integrate_diffusion(model.migration(), model.domain(), eps, &init, &cfg).unwrap();
        for w in traj.fast_norm.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-14);
        }
        let first = &traj.slow[0];
        for x in &traj.slow {
            prop_assert!((x - first).amax() <= 1e-12 * (1.0 + first.amax()));
        }
    }
}

#[test]
fn interval_gap_increases_towards_limit() {
    let limit = std::f64::consts::PI.powi(2);
    let gaps: Vec<f64> = [4, 8, 16, 32, 64]
        .iter()
        .map(|&c| {
            build_interval_operator(1.0, c, 1, |_, _| 1.0)
                .unwrap()
                .spectral_gaps()
                .overall
        })
        .collect();
    for w in gaps.windows(2) {
        assert!(w[0] < w[1] && w[1] < limit);
    }
    // second-order convergence: error drops by about four per refinement
    for w in gaps.windows(2) {
        let ratio = (limit - w[0]) / (limit - w[1]);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }
}
