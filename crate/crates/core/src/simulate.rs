//! Time integration of the full stiff system and of the averaged ODE.
//!
//! The full system `W' = F(W) + K W / eps` is advanced either by an
//! exponential integrator that treats the migration term exactly
//! (`W <- e^{hL} W + h phi_1(hL) F(W)`, `L = K / eps`) or by backward Euler
//! with Newton. Both keep steady states of the continuous system as exact
//! fixed points. Step sizes are controlled by step doubling.
//!
//! Positivity policy: entries in `(-10 abs_tol, 0)` are clamped to zero and
//! logged, more negative entries or a clamped mass above `abs_tol` reject the
//! step. Species rows that start identically zero never change.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::aggregated::AggregatedModel;
use crate::domain::{fast_sup_norm, slow_unchecked, MigrationOperator, SpatialDomain};
use crate::error::{Error, Result};
use crate::model::{check_epsilon, CompetitionModel, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Exponential Euler: migration solved exactly, reaction explicit.
    ExpImex,
    /// Backward Euler with Newton on the full Jacobian.
    FullyImplicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub record_every: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::ExpImex,
            dt_init: 1e-3,
            dt_min: 1e-12,
            dt_max: 0.25,
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            t_end: 100.0,
            record_every: 1.0,
        }
    }
}

impl IntegratorConfig {
    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_record_every(mut self, every: f64) -> Self {
        self.record_every = every;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (name, v) in [
            ("dt_init", self.dt_init),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
            ("t_end", self.t_end),
            ("record_every", self.record_every),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad(format!(
                "need dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// Small negative entries set to zero; `mass` is the sum of their magnitudes.
    Clamp {
        entries: usize,
        mass: f64,
    },
    Rejection {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub dt: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// Weighted site averages `X(t)` of every recorded state.
    pub slow: Vec<DVector<f64>>,
    /// `||Y(t)||_inf`, sup norm of the zero-mean fluctuation.
    pub fast_norm: Vec<f64>,
    pub events: Vec<Event>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest single-step clamped mass.
    pub max_clamped_mass: f64,
}

impl Trajectory {
    fn new() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            slow: Vec::new(),
            fast_norm: Vec::new(),
            events: Vec::new(),
            accepted_steps: 0,
            rejected_steps: 0,
            max_clamped_mass: 0.0,
        }
    }

    fn record(&mut self, t: f64, w: &State, weights: &[f64]) {
        let slow = slow_unchecked(w, weights);
        self.fast_norm.push(fast_sup_norm(w, &slow));
        self.slow.push(slow);
        self.times.push(t);
        self.states.push(w.clone());
    }

    pub fn final_state(&self) -> &State {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory holds the initial state")
    }

    /// `sup_t ||W(t)||_inf` over recorded states.
    pub fn sup_norm(&self) -> f64 {
        self.states.iter().map(|s| s.amax()).fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.states
            .iter()
            .map(|s| s.min())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn clamp_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Clamp { .. }))
            .count()
    }
}

/// Site-local reaction term of a semilinear system `W' = F(W) + L W`.
pub trait ReactionTerm {
    fn eval_into(&self, w: &State, out: &mut State);
    /// Jacobian in species-major flattening (`i * P + j`).
    fn jacobian(&self, w: &State) -> DMatrix<f64>;
}

impl ReactionTerm for CompetitionModel {
    fn eval_into(&self, w: &State, out: &mut State) {
        self.reaction_into(w, out)
    }

    fn jacobian(&self, w: &State) -> DMatrix<f64> {
        self.reaction_jacobian_unchecked(w)
    }
}

/// `F = 0`: pure migration.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoReaction;

impl ReactionTerm for NoReaction {
    fn eval_into(&self, _w: &State, out: &mut State) {
        out.fill(0.0);
    }

    fn jacobian(&self, w: &State) -> DMatrix<f64> {
        let n = w.len();
        DMatrix::zeros(n, n)
    }
}

pub(crate) fn flatten(w: &State) -> DVector<f64> {
    let p = w.ncols();
    DVector::from_fn(w.len(), |k, _| w[(k / p, k % p)])
}

pub(crate) fn unflatten(v: &DVector<f64>, rows: usize, cols: usize) -> State {
    State::from_fn(rows, cols, |i, j| v[i * cols + j])
}

/// Integrates the full system from `initial` (model units) on `[0, cfg.t_end]`.
pub fn integrate_full(
    model: &CompetitionModel,
    epsilon: f64,
    initial: &State,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_epsilon(epsilon)?;
    model.check_state(initial)?;
    integrate_semilinear(
        model,
        model.migration(),
        model.domain(),
        epsilon,
        initial,
        cfg,
    )
}

/// Integrates pure migration `W' = K W / eps`.
pub fn integrate_diffusion(
    migration: &MigrationOperator,
    domain: &SpatialDomain,
    epsilon: f64,
    initial: &State,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_epsilon(epsilon)?;
    if initial.nrows() != migration.species_count() || initial.ncols() != migration.site_count() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", migration.species_count(), migration.site_count()),
            got: format!("{}x{}", initial.nrows(), initial.ncols()),
            context: "initial state vs migration operator".into(),
        });
    }
    integrate_semilinear(&NoReaction, migration, domain, epsilon, initial, cfg)
}

fn check_initial(initial: &State) -> Result<()> {
    if initial.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: 0.0 });
    }
    if let Some(v) = initial.iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidModel {
            field: "initial".into(),
            reason: format!("initial data must be nonnegative, got {v}"),
        });
    }
    Ok(())
}

/// Generic engine shared by [`integrate_full`] and [`integrate_diffusion`].
pub fn integrate_semilinear<R: ReactionTerm>(
    reaction: &R,
    migration: &MigrationOperator,
    domain: &SpatialDomain,
    epsilon: f64,
    initial: &State,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_initial(initial)?;
    let active: Vec<bool> = initial
        .row_iter()
        .map(|row| row.iter().any(|v| *v != 0.0))
        .collect();
    let mut stepper: Box<dyn Stepper + '_> = match cfg.scheme {
        Scheme::ExpImex => Box::new(ExpEulerStepper::new(reaction, migration, epsilon)),
        Scheme::FullyImplicit => Box::new(BackwardEulerStepper::new(
            reaction, migration, epsilon, active, cfg,
        )),
    };
    run(stepper.as_mut(), domain.weights(), initial, cfg)
}

trait Stepper {
    /// One step of size `h`; `None` when the step itself fails (e.g. Newton).
    fn step(&mut self, w: &State, h: f64) -> Option<State>;
}

enum Attempt {
    Accept {
        state: State,
        err: f64,
        clamp: Option<(usize, f64)>,
    },
    Reject(String, bool),
}

fn error_norm(old: &State, coarse: &State, fine: &State, cfg: &IntegratorConfig) -> f64 {
    let mut e: f64 = 0.0;
    for k in 0..fine.len() {
        let scale = cfg.abs_tol + cfg.rel_tol * old[k].abs().max(fine[k].abs());
        e = e.max((fine[k] - coarse[k]).abs() / scale);
    }
    e
}

/// Applies the positivity policy in place; `Err` carries the rejection reason.
fn enforce_positivity(
    w: &mut State,
    abs_tol: f64,
) -> std::result::Result<Option<(usize, f64)>, String> {
    let floor = -10.0 * abs_tol;
    let mut entries = 0;
    let mut mass = 0.0;
    for v in w.iter() {
        if *v < floor {
            return Err(format!("entry {v} below -10 abs_tol"));
        }
        if *v < 0.0 {
            entries += 1;
            mass -= v;
        }
    }
    if entries == 0 {
        return Ok(None);
    }
    if mass > abs_tol {
        return Err(format!("clamped mass {mass} exceeds abs_tol"));
    }
    w.iter_mut().for_each(|v| {
        if *v < 0.0 {
            *v = 0.0
        }
    });
    Ok(Some((entries, mass)))
}

fn attempt(stepper: &mut dyn Stepper, w: &State, h: f64, cfg: &IntegratorConfig) -> Attempt {
    let Some(coarse) = stepper.step(w, h) else {
        return Attempt::Reject("step solver failed".into(), false);
    };
    let Some(mid) = stepper.step(w, 0.5 * h) else {
        return Attempt::Reject("step solver failed".into(), false);
    };
    let Some(mut fine) = stepper.step(&mid, 0.5 * h) else {
        return Attempt::Reject("step solver failed".into(), false);
    };
    if fine.iter().chain(coarse.iter()).any(|v| !v.is_finite()) {
        return Attempt::Reject("non-finite state".into(), true);
    }
    let err = error_norm(w, &coarse, &fine, cfg);
    if err > 1.0 {
        return Attempt::Reject(format!("error estimate {err:.3e}"), false);
    }
    match enforce_positivity(&mut fine, cfg.abs_tol) {
        Ok(clamp) => Attempt::Accept {
            state: fine,
            err,
            clamp,
        },
        Err(reason) => Attempt::Reject(reason, false),
    }
}

fn run(
    stepper: &mut dyn Stepper,
    weights: &[f64],
    initial: &State,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut traj = Trajectory::new();
    let mut t = 0.0;
    let mut w = initial.clone();
    traj.record(t, &w, weights);
    // power-of-two ladder below dt_max keeps the exponential cache small
    let mut dt = cfg.dt_max;
    while dt > cfg.dt_init {
        dt *= 0.5;
    }
    let mut mark_index = 1usize;
    let next_mark = |k: usize| (k as f64 * cfg.record_every).min(cfg.t_end);
    let end_slack = 1e-12 * cfg.t_end;
    while cfg.t_end - t > end_slack {
        let mark = next_mark(mark_index);
        let clipped = mark - t < dt;
        let h = if clipped { mark - t } else { dt };
        match attempt(stepper, &w, h, cfg) {
            Attempt::Accept { state, err, clamp } => {
                traj.accepted_steps += 1;
                if let Some((entries, mass)) = clamp {
                    traj.max_clamped_mass = traj.max_clamped_mass.max(mass);
                    traj.events.push(Event {
                        t: t + h,
                        dt: h,
                        kind: EventKind::Clamp { entries, mass },
                    });
                }
                w = state;
                t = if clipped { mark } else { t + h };
                if !clipped && err < 0.25 {
                    dt = (2.0 * dt).min(cfg.dt_max);
                }
                if mark - t <= end_slack {
                    t = mark;
                    traj.record(t, &w, weights);
                    mark_index += 1;
                }
            }
            Attempt::Reject(reason, non_finite) => {
                traj.rejected_steps += 1;
                traj.events.push(Event {
                    t,
                    dt: h,
                    kind: EventKind::Rejection { reason },
                });
                dt = h.min(dt) * 0.5;
                if dt < cfg.dt_min {
                    return Err(if non_finite {
                        Error::NonFiniteState { t }
                    } else {
                        Error::StepSizeUnderflow { t, dt }
                    });
                }
            }
        }
    }
    if *traj.times.last().unwrap() < t {
        traj.record(t, &w, weights);
    }
    Ok(traj)
}

/// Per-species propagators `e^{hA/eps}` and `h phi_1(hA/eps)`.
type Propagators = Arc<Vec<(DMatrix<f64>, DMatrix<f64>)>>;

enum Spectral {
    /// `A = Q diag(lambda) Q^T`
    Symmetric {
        q: DMatrix<f64>,
        lambda: DVector<f64>,
    },
    General(DMatrix<f64>),
}

struct ExpEulerStepper<'a, R> {
    reaction: &'a R,
    epsilon: f64,
    spectra: Vec<Spectral>,
    cache: HashMap<u64, Propagators>,
    scratch: State,
}

fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-300 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

impl<'a, R: ReactionTerm> ExpEulerStepper<'a, R> {
    fn new(reaction: &'a R, migration: &MigrationOperator, epsilon: f64) -> Self {
        let spectra = migration
            .matrices()
            .iter()
            .map(|a| {
                let sym = (a - a.transpose()).amax() <= 1e-14 * a.amax().max(1.0);
                if sym {
                    let eig = a.clone().symmetric_eigen();
                    Spectral::Symmetric {
                        q: eig.eigenvectors,
                        lambda: eig.eigenvalues,
                    }
                } else {
                    Spectral::General(a.clone())
                }
            })
            .collect();
        let rows = migration.species_count();
        let cols = migration.site_count();
        Self {
            reaction,
            epsilon,
            spectra,
            cache: HashMap::new(),
            scratch: State::zeros(rows, cols),
        }
    }

    fn propagators(&mut self, h: f64) -> Propagators {
        if let Some(p) = self.cache.get(&h.to_bits()) {
            return p.clone();
        }
        let z = h / self.epsilon;
        let props: Vec<_> = self
            .spectra
            .iter()
            .map(|s| match s {
                Spectral::Symmetric { q, lambda } => {
                    let e =
                        DVector::from_iterator(lambda.len(), lambda.iter().map(|l| (z * l).exp()));
                    let f = DVector::from_iterator(
                        lambda.len(),
                        lambda.iter().map(|l| h * phi1(z * l)),
                    );
                    let qt = q.transpose();
                    (
                        q * DMatrix::from_diagonal(&e) * &qt,
                        q * DMatrix::from_diagonal(&f) * &qt,
                    )
                }
                Spectral::General(a) => {
                    let p = a.nrows();
                    let mut aug = DMatrix::zeros(2 * p, 2 * p);
                    aug.view_mut((0, 0), (p, p)).copy_from(&(a * z));
                    aug.view_mut((0, p), (p, p)).fill_with_identity();
                    let ex = aug.exp();
                    (
                        ex.view((0, 0), (p, p)).into_owned(),
                        ex.view((0, p), (p, p)).into_owned() * h,
                    )
                }
            })
            .collect();
        if self.cache.len() > 256 {
            self.cache.clear();
        }
        let props = Arc::new(props);
        self.cache.insert(h.to_bits(), props.clone());
        props
    }
}

impl<R: ReactionTerm> Stepper for ExpEulerStepper<'_, R> {
    fn step(&mut self, w: &State, h: f64) -> Option<State> {
        let props = self.propagators(h);
        let mut f = std::mem::replace(&mut self.scratch, State::zeros(0, 0));
        self.reaction.eval_into(w, &mut f);
        let p = w.ncols();
        let mut out = State::zeros(w.nrows(), p);
        for (i, (e, phi)) in props.iter().enumerate() {
            for j in 0..p {
                let mut acc = 0.0;
                for k in 0..p {
                    acc += e[(j, k)] * w[(i, k)] + phi[(j, k)] * f[(i, k)];
                }
                out[(i, j)] = acc;
            }
        }
        self.scratch = f;
        Some(out)
    }
}

struct BackwardEulerStepper<'a, R> {
    reaction: &'a R,
    stiff: DMatrix<f64>,
    migration: &'a MigrationOperator,
    epsilon: f64,
    /// Flattened indices of rows that are not pinned at zero.
    free: Vec<usize>,
    abs_tol: f64,
    rel_tol: f64,
}

impl<'a, R: ReactionTerm> BackwardEulerStepper<'a, R> {
    fn new(
        reaction: &'a R,
        migration: &'a MigrationOperator,
        epsilon: f64,
        active: Vec<bool>,
        cfg: &IntegratorConfig,
    ) -> Self {
        let p = migration.site_count();
        let free = active
            .iter()
            .enumerate()
            .filter(|(_, a)| **a)
            .flat_map(|(i, _)| (0..p).map(move |j| i * p + j))
            .collect();
        Self {
            reaction,
            stiff: migration.assembled() / epsilon,
            migration,
            epsilon,
            free,
            abs_tol: cfg.abs_tol,
            rel_tol: cfg.rel_tol,
        }
    }
}

impl<R: ReactionTerm> Stepper for BackwardEulerStepper<'_, R> {
    fn step(&mut self, w: &State, h: f64) -> Option<State> {
        let (rows, cols) = w.shape();
        let old = flatten(w);
        let mut x = w.clone();
        let m = self.free.len();
        let mut f = State::zeros(rows, cols);
        for _ in 0..12 {
            self.reaction.eval_into(&x, &mut f);
            self.migration.apply_into(&x, 1.0 / self.epsilon, &mut f);
            let xf = flatten(&x);
            let ff = flatten(&f);
            let jac = self.reaction.jacobian(&x) + &self.stiff;
            let mut lhs = DMatrix::zeros(m, m);
            let mut rhs = DVector::zeros(m);
            for (a, &ka) in self.free.iter().enumerate() {
                rhs[a] = -(xf[ka] - old[ka] - h * ff[ka]);
                for (b, &kb) in self.free.iter().enumerate() {
                    lhs[(a, b)] = -h * jac[(ka, kb)];
                }
                lhs[(a, a)] += 1.0;
            }
            let delta = lhs.lu().solve(&rhs)?;
            let mut next = xf.clone();
            let mut size: f64 = 0.0;
            for (a, &ka) in self.free.iter().enumerate() {
                next[ka] += delta[a];
                let scale = self.abs_tol + self.rel_tol * next[ka].abs();
                size = size.max(delta[a].abs() / scale);
            }
            x = unflatten(&next, rows, cols);
            if size <= 1e-3 {
                return Some(x);
            }
        }
        None
    }
}

/// Integrates the averaged ODE with an adaptive Dormand-Prince 5(4) pair.
///
/// The trajectory uses a one-site layout: states are `(N+1) x 1`.
pub fn integrate_aggregated(
    agg: &AggregatedModel,
    initial: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = agg.species_count() + 1;
    if initial.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n.to_string(),
            got: initial.len().to_string(),
            context: "initial slow vector".into(),
        });
    }
    let init = State::from_column_slice(n, 1, initial);
    check_initial(&init)?;
    let weights = [1.0];
    let mut traj = Trajectory::new();
    let mut t = 0.0;
    let mut x = initial.to_vec();
    traj.record(t, &init, &weights);
    let mut dt = cfg.dt_init;
    let mut mark_index = 1usize;
    let end_slack = 1e-12 * cfg.t_end;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let f = |x: &[f64], out: &mut [f64]| agg.vector_field_into(x, out);
    f(&x, &mut k[0]);
    while cfg.t_end - t > end_slack {
        let mark = (mark_index as f64 * cfg.record_every).min(cfg.t_end);
        let h = dt.min(mark - t);
        #[allow(clippy::needless_range_loop)]
        for s in 1..7 {
            for c in 0..n {
                let mut acc = x[c];
                for (q, kq) in k.iter().enumerate().take(s) {
                    acc += h * DP_A[s][q] * kq[c];
                }
                tmp[c] = acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            f(&tmp, &mut tail[0]);
        }
        // 5th-order solution is the last stage point (FSAL)
        y5.copy_from_slice(&tmp);
        let mut err: f64 = 0.0;
        for c in 0..n {
            let mut e = 0.0;
            for (q, kq) in k.iter().enumerate() {
                e += h * DP_E[q] * kq[c];
            }
            let scale = cfg.abs_tol + cfg.rel_tol * x[c].abs().max(y5[c].abs());
            err = err.max(e.abs() / scale);
        }
        let mut candidate = State::from_column_slice(n, 1, &y5);
        let finite = y5.iter().all(|v| v.is_finite());
        let verdict = if !finite {
            Err("non-finite state".to_string())
        } else if err > 1.0 {
            Err(format!("error estimate {err:.3e}"))
        } else {
            enforce_positivity(&mut candidate, cfg.abs_tol)
        };
        match verdict {
            Ok(clamp) => {
                traj.accepted_steps += 1;
                if let Some((entries, mass)) = clamp {
                    traj.max_clamped_mass = traj.max_clamped_mass.max(mass);
                    traj.events.push(Event {
                        t: t + h,
                        dt: h,
                        kind: EventKind::Clamp { entries, mass },
                    });
                }
                x.copy_from_slice(candidate.as_slice());
                let last = k[6].clone();
                k[0] = last;
                if clamp.is_some() {
                    f(&x, &mut k[0]);
                }
                t = if mark - (t + h) <= end_slack {
                    mark
                } else {
                    t + h
                };
                if t == mark {
                    traj.record(t, &candidate, &weights);
                    mark_index += 1;
                }
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if h == dt {
                    dt = (dt * factor).min(cfg.dt_max);
                } else {
                    dt = dt.max(h * factor).min(cfg.dt_max);
                }
            }
            Err(reason) => {
                traj.rejected_steps += 1;
                traj.events.push(Event {
                    t,
                    dt: h,
                    kind: EventKind::Rejection { reason },
                });
                let factor = if finite {
                    (0.9 * err.powf(-0.2)).clamp(0.1, 0.5)
                } else {
                    0.25
                };
                dt = h * factor;
                if dt < cfg.dt_min {
                    return Err(if finite {
                        Error::StepSizeUnderflow { t, dt }
                    } else {
                        Error::NonFiniteState { t }
                    });
                }
            }
        }
    }
    Ok(traj)
}

const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Difference between the 5th- and 4th-order weights.
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Density thresholds separating extinct, undecided and surviving species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalThresholds {
    pub extinct_below: f64,
    pub survivor_above: f64,
}

impl Default for SurvivalThresholds {
    fn default() -> Self {
        Self {
            extinct_below: 1e-6,
            survivor_above: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivorVerdict {
    pub survivors: Vec<usize>,
    pub extinct: Vec<usize>,
    pub undecided: Vec<usize>,
    /// `||U_i||_inf` per species, index `i - 1`.
    pub densities: Vec<f64>,
}

impl SurvivorVerdict {
    pub fn is_decided(&self) -> bool {
        self.undecided.is_empty()
    }
}

/// Classifies species rows of `state` by their sup norm.
pub fn classify_survivors(state: &State, thresholds: SurvivalThresholds) -> SurvivorVerdict {
    let mut v = SurvivorVerdict {
        survivors: Vec::new(),
        extinct: Vec::new(),
        undecided: Vec::new(),
        densities: Vec::new(),
    };
    for i in 1..state.nrows() {
        let d = state.row(i).amax();
        v.densities.push(d);
        if d < thresholds.extinct_below {
            v.extinct.push(i);
        } else if d > thresholds.survivor_above {
            v.survivors.push(i);
        } else {
            v.undecided.push(i);
        }
    }
    v
}

/// Exponential fit of the fast-component transient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// `eps * rate`, comparable with the spectral gap.
    pub scaled_rate: f64,
    /// Fitted decay rate of `||Y(t)|| - plateau`.
    pub rate: f64,
    pub plateau: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Fits `log(||Y|| - plateau)` against time over the initial transient.
///
/// The plateau is the median fast norm over the final tenth of the time span;
/// the window is the leading run of samples above ten times the plateau.
pub fn fast_decay_fit(traj: &Trajectory, epsilon: f64) -> Result<DecayFit> {
    check_epsilon(epsilon)?;
    let t0 = traj.times[0];
    let t1 = traj.final_time();
    let cutoff = t1 - 0.1 * (t1 - t0);
    let mut tail: Vec<f64> = traj
        .times
        .iter()
        .zip(&traj.fast_norm)
        .filter(|(t, _)| **t >= cutoff)
        .map(|(_, y)| *y)
        .collect();
    tail.sort_by(f64::total_cmp);
    let plateau = if tail.is_empty() {
        0.0
    } else if tail.len() % 2 == 1 {
        tail[tail.len() / 2]
    } else {
        0.5 * (tail[tail.len() / 2 - 1] + tail[tail.len() / 2])
    };
    let window: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.fast_norm)
        .take_while(|(_, y)| **y > 10.0 * plateau && **y > 0.0)
        .map(|(t, y)| (*t, (y - plateau).ln()))
        .collect();
    if window.len() < 3 {
        return Err(Error::NoTransient);
    }
    let slope = least_squares_slope(&window);
    let rate = -slope;
    Ok(DecayFit {
        scaled_rate: epsilon * rate,
        rate,
        plateau,
        window: (window[0].0, window[window.len() - 1].0),
        points: window.len(),
    })
}

pub(crate) fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
