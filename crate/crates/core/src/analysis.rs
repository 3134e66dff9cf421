//! Steady states of the full system, their stability, the O(eps) law and
//! survivor tables over eps.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::aggregated::{aggregate, equilibria, AggregatedEquilibrium};
use crate::domain::{fast_sup_norm, slow_unchecked};
use crate::error::{Error, Result};
use crate::model::{check_epsilon, CompetitionModel, State};
use crate::simulate::{
    classify_survivors, flatten, integrate_full, least_squares_slope, unflatten, IntegratorConfig,
    SurvivalThresholds, SurvivorVerdict,
};

/// Residual bound every continued steady state satisfies.
pub const RESIDUAL_TOL: f64 = 1e-10;

const MAX_NEWTON: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub max_re: f64,
    pub stable: bool,
    /// Eigenvalues with `|Re| < 1e-7 gap / eps`.
    pub marginal: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Model units, `(N+1) x P`.
    pub state: State,
    pub epsilon: f64,
    /// `||F(W) + K W / eps||_inf`
    pub residual: f64,
    /// Index of the aggregated equilibrium used as seed (0 = washout).
    pub seeded_from: usize,
    pub newton_steps: usize,
    /// Epsilon values visited before the target, empty when Newton converged directly.
    pub homotopy: Vec<f64>,
    /// Filled by [`stability_of`].
    pub spectrum: Option<Spectrum>,
}

impl SteadyState {
    /// Weighted site averages of the steady state.
    pub fn slow(&self, model: &CompetitionModel) -> DVector<f64> {
        slow_unchecked(&self.state, model.domain().weights())
    }

    /// Sup norm of the fast part; this is identified with `h(p^eps, eps)`.
    pub fn fast_norm(&self, model: &CompetitionModel) -> f64 {
        fast_sup_norm(&self.state, &self.slow(model))
    }

    pub fn stable(&self) -> Option<bool> {
        self.spectrum.as_ref().map(|s| s.stable)
    }
}

fn residual_of(model: &CompetitionModel, eps: f64, w: &State) -> (State, f64) {
    let mut g = State::zeros(w.nrows(), w.ncols());
    model.reaction_into(w, &mut g);
    model.migration().apply_into(w, 1.0 / eps, &mut g);
    let r = g.amax();
    (g, r)
}

struct NewtonOutcome {
    state: State,
    residual: f64,
    steps: usize,
}

/// Damped Newton on `G(W) = 0` over the unpinned rows.
fn newton(
    model: &CompetitionModel,
    eps: f64,
    guess: &State,
    free: &[usize],
    stiff: &DMatrix<f64>,
) -> std::result::Result<NewtonOutcome, String> {
    let (rows, cols) = guess.shape();
    let mut w = guess.clone();
    let (mut g, mut res) = residual_of(model, eps, &w);
    let m = free.len();
    for step in 0..MAX_NEWTON {
        if res <= RESIDUAL_TOL {
            return Ok(NewtonOutcome {
                state: w,
                residual: res,
                steps: step,
            });
        }
        let jac = model.reaction_jacobian_unchecked(&w) + stiff * (1.0 / eps);
        let gf = flatten(&g);
        let mut lhs = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (a, &ka) in free.iter().enumerate() {
            rhs[a] = -gf[ka];
            for (b, &kb) in free.iter().enumerate() {
                lhs[(a, b)] = jac[(ka, kb)];
            }
        }
        let delta = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| format!("singular Jacobian at step {step}"))?;
        let base = flatten(&w);
        let mut lambda = 1.0;
        loop {
            let mut trial = base.clone();
            for (a, &ka) in free.iter().enumerate() {
                trial[ka] += lambda * delta[a];
            }
            let tw = unflatten(&trial, rows, cols);
            let (tg, tres) = residual_of(model, eps, &tw);
            if tres.is_finite() && (tres < res || tres <= RESIDUAL_TOL) {
                w = tw;
                g = tg;
                res = tres;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return Err(format!(
                    "line search failed at step {step}, residual {res:.3e}"
                ));
            }
        }
    }
    if res <= RESIDUAL_TOL {
        Ok(NewtonOutcome {
            state: w,
            residual: res,
            steps: MAX_NEWTON,
        })
    } else {
        Err(format!(
            "no convergence in {MAX_NEWTON} steps, residual {res:.3e}"
        ))
    }
}

/// Continues the aggregated equilibrium `seed` to a steady state of the full system.
///
/// Newton starts from the spatially constant lift of the seed; species
/// absent from the seed stay exactly zero. When the direct solve fails an
/// eps-homotopy from eps = 1, halving each time, is used instead.
pub fn continue_steady(
    model: &CompetitionModel,
    epsilon: f64,
    seed: &AggregatedEquilibrium,
) -> Result<SteadyState> {
    check_epsilon(epsilon)?;
    let n = model.species_count() + 1;
    if seed.point.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n.to_string(),
            got: seed.point.len().to_string(),
            context: "seed equilibrium".into(),
        });
    }
    let p = model.site_count();
    let free: Vec<usize> = (0..n)
        .filter(|&i| i == 0 || seed.point[i] != 0.0)
        .flat_map(|i| (0..p).map(move |j| i * p + j))
        .collect();
    let lift = model.constant_state(&seed.point)?;
    let stiff = model.migration().assembled();

    let mut trace = Vec::new();
    let (outcome, homotopy) = match newton(model, epsilon, &lift, &free, &stiff) {
        Ok(o) => (o, Vec::new()),
        Err(msg) => {
            trace.push(format!("eps={epsilon:e}: {msg}"));
            let mut ladder = Vec::new();
            let mut e = 1.0_f64.max(epsilon);
            while e > epsilon {
                ladder.push(e);
                e *= 0.5;
            }
            ladder.push(epsilon);
            let mut current = lift.clone();
            let mut visited = Vec::new();
            let mut last = None;
            for &e in &ladder {
                match newton(model, e, &current, &free, &stiff) {
                    Ok(o) => {
                        current = o.state.clone();
                        visited.push(e);
                        last = Some(o);
                    }
                    Err(msg) => {
                        trace.push(format!("eps={e:e}: {msg}"));
                        return Err(Error::NewtonDiverged {
                            epsilon: e,
                            trace: trace.join("; "),
                        });
                    }
                }
            }
            visited.pop();
            (last.expect("ladder is nonempty"), visited)
        }
    };

    let slow = slow_unchecked(&outcome.state, model.domain().weights());
    let distance = slow
        .iter()
        .zip(&seed.point)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let limit = 0.5 * seed.point.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if distance > limit {
        return Err(Error::WrongBasin { distance, limit });
    }
    Ok(SteadyState {
        state: outcome.state,
        epsilon,
        residual: outcome.residual,
        seeded_from: seed.surviving_index,
        newton_steps: outcome.steps,
        homotopy,
        spectrum: None,
    })
}

/// Dense eigenvalues of the full Jacobian at the steady state.
pub fn stability_of(model: &CompetitionModel, steady: &SteadyState) -> Result<SteadyState> {
    let jac = model.full_jacobian(steady.epsilon, &steady.state)?;
    let eigenvalues: Vec<Complex64> = jac.complex_eigenvalues().iter().copied().collect();
    let max_re = eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |m, z| m.max(z.re));
    let gap = model.migration().spectral_gaps().overall;
    let threshold = if gap.is_finite() {
        1e-7 * gap / steady.epsilon
    } else {
        1e-7
    };
    let marginal = eigenvalues
        .iter()
        .filter(|z| z.re.abs() < threshold)
        .count();
    let mut out = steady.clone();
    out.spectrum = Some(Spectrum {
        eigenvalues,
        max_re,
        stable: max_re < 0.0,
        marginal,
    });
    Ok(out)
}

/// Continues and classifies every aggregated equilibrium at one `eps`.
pub fn steady_census(model: &CompetitionModel, epsilon: f64) -> Result<Vec<SteadyState>> {
    let agg = aggregate(model);
    equilibria(&agg)
        .iter()
        .map(|eq| continue_steady(model, epsilon, eq).and_then(|s| stability_of(model, &s)))
        .collect()
}

/// Aggregated equilibrium seeded by species `index` (0 = washout).
pub fn seed_equilibrium(model: &CompetitionModel, index: usize) -> Result<AggregatedEquilibrium> {
    if index > model.species_count() {
        return Err(Error::InvalidConfig(format!(
            "seed index {index} exceeds species count {}",
            model.species_count()
        )));
    }
    let agg = aggregate(model);
    equilibria(&agg)
        .into_iter()
        .find(|e| e.surviving_index == index)
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "species {index} has r* >= r_0*; no nonnegative equilibrium to seed from"
            ))
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub epsilon: f64,
    /// `||R - r*||_inf + sum_i ||U_i - u_i*||_inf`
    pub error: f64,
    /// `||Pi_E(W) - p*||_inf`
    pub slow_error: f64,
    pub steady: SteadyState,
}

/// Least-squares slope on log-log axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlopeFit {
    Fitted {
        slope: f64,
        residual: f64,
    },
    /// Errors at or below round-off; no slope exists.
    Degenerate,
}

impl SlopeFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            SlopeFit::Fitted { slope, .. } => Some(*slope),
            SlopeFit::Degenerate => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub seed: usize,
    /// Decreasing in eps.
    pub points: Vec<SweepPoint>,
    pub fit: SlopeFit,
    pub slow_fit: SlopeFit,
    /// Survivors per point when simulated, aligned with `points`.
    pub winners: Option<Vec<CepRow>>,
}

/// Errors below this are treated as exact.
const DEGENERATE_ERROR: f64 = 1e-10;

/// Fits `log(error) = a + slope log(eps)`; `residual` is the RMS misfit.
pub fn fit_loglog(eps: &[f64], errors: &[f64]) -> SlopeFit {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(errors)
        .filter(|(_, e)| **e > DEGENERATE_ERROR)
        .map(|(x, e)| (x.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return SlopeFit::Degenerate;
    }
    let slope = least_squares_slope(&pts);
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let residual = (pts
        .iter()
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    SlopeFit::Fitted { slope, residual }
}

/// Geometric grid `base * factor^k`, `k = 0..count`.
pub fn geometric_grid(base: f64, factor: f64, count: usize) -> Result<Vec<f64>> {
    if !(base > 0.0) || !(factor > 0.0) || factor == 1.0 || count == 0 {
        return Err(Error::InvalidConfig(format!(
            "grid needs base > 0, factor > 0 and != 1, count >= 1; got {base},{factor},{count}"
        )));
    }
    Ok((0..count).map(|k| base * factor.powi(k as i32)).collect())
}

/// Continues the seed over `grid` and measures the distance to the aggregated equilibrium.
pub fn epsilon_sweep(model: &CompetitionModel, seed: usize, grid: &[f64]) -> Result<SweepResult> {
    let eq = seed_equilibrium(model, seed)?;
    let mut grid = grid.to_vec();
    for e in &grid {
        check_epsilon(*e)?;
    }
    grid.sort_by(|a, b| b.total_cmp(a));
    let p = model.site_count();
    let points = with_pool(|| {
        grid.par_iter()
            .map(|&eps| {
                let steady = continue_steady(model, eps, &eq)?;
                let error = (0..steady.state.nrows())
                    .map(|i| {
                        (0..p).fold(0.0_f64, |m, j| {
                            m.max((steady.state[(i, j)] - eq.point[i]).abs())
                        })
                    })
                    .sum();
                let slow_error = steady
                    .slow(model)
                    .iter()
                    .zip(&eq.point)
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                Ok(SweepPoint {
                    epsilon: eps,
                    error,
                    slow_error,
                    steady,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let eps: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    let errs: Vec<f64> = points.iter().map(|p| p.error).collect();
    let slow: Vec<f64> = points.iter().map(|p| p.slow_error).collect();
    Ok(SweepResult {
        seed,
        fit: fit_loglog(&eps, &errs),
        slow_fit: fit_loglog(&eps, &slow),
        points,
        winners: None,
    })
}

/// [`epsilon_sweep`] plus a simulated survivor set at every grid point.
pub fn epsilon_sweep_with_winners(
    model: &CompetitionModel,
    seed: usize,
    grid: &[f64],
    initial: &State,
    cfg: &IntegratorConfig,
) -> Result<SweepResult> {
    let mut sweep = epsilon_sweep(model, seed, grid)?;
    let eps: Vec<f64> = sweep.points.iter().map(|p| p.epsilon).collect();
    sweep.winners = Some(cep_table(model, &eps, initial, cfg)?.rows);
    Ok(sweep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CepStatus {
    Decided,
    /// Some density sits between the thresholds at `t_end`.
    Undecided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CepRow {
    pub epsilon: f64,
    pub verdict: SurvivorVerdict,
    pub status: CepStatus,
    pub t_end: f64,
}

impl CepRow {
    /// `"2"`, `"1;2"`, `"none"` or `"undecided"`.
    pub fn label(&self) -> String {
        match self.status {
            CepStatus::Undecided => "undecided".into(),
            CepStatus::Decided if self.verdict.survivors.is_empty() => "none".into(),
            CepStatus::Decided => self
                .verdict
                .survivors
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        }
    }

    /// Rerun advice for undecided rows.
    pub fn guidance(&self) -> Option<String> {
        (self.status == CepStatus::Undecided).then(|| {
            format!(
                "species {:?} not separated by t_end = {}; rerun with a larger --t-end",
                self.verdict.undecided, self.t_end
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CepTable {
    pub rows: Vec<CepRow>,
}

/// Simulates the full system at each `eps` and classifies survivors at `t_end`.
pub fn cep_table(
    model: &CompetitionModel,
    grid: &[f64],
    initial: &State,
    cfg: &IntegratorConfig,
) -> Result<CepTable> {
    for e in grid {
        check_epsilon(*e)?;
    }
    let rows = with_pool(|| {
        grid.par_iter()
            .map(|&eps| {
                let traj = integrate_full(model, eps, initial, cfg)?;
                let verdict = classify_survivors(traj.final_state(), SurvivalThresholds::default());
                let status = if verdict.is_decided() {
                    CepStatus::Decided
                } else {
                    CepStatus::Undecided
                };
                Ok(CepRow {
                    epsilon: eps,
                    verdict,
                    status,
                    t_end: traj.final_time(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(CepTable { rows })
}

/// Thread cap from `CHEMOSTAT_THREADS`, `None` when unset.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("CHEMOSTAT_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidConfig(format!(
                "CHEMOSTAT_THREADS must be a positive integer, got {v:?}"
            ))),
        },
    }
}

fn with_pool<T: Send>(job: impl FnOnce() -> T + Send) -> Result<T> {
    match thread_cap()? {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}
