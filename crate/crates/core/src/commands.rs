//! Scenario-driven commands behind the `chemostat` binary.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::aggregated::{aggregate, decompose_strength, equilibria, predict_cep, AggregatedModel};
use crate::analysis::{
    cep_table, continue_steady, epsilon_sweep_with_winners, geometric_grid, seed_equilibrium,
    stability_of, steady_census,
};
use crate::error::{Error, Result};
use crate::model::{CompetitionModel, State};
use crate::output::{
    cep_csv, fmt, stability_csv, steady_csv, sweep_csv, trajectory_csv, write_atomic,
};
use crate::scenario::{parse_scheme, GridSpec, InitialSpec, Scenario};
use crate::simulate::{classify_survivors, integrate_full, IntegratorConfig, SurvivalThresholds};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const DEFAULT_EPSILON: f64 = 0.01;
const DEFAULT_SWEEP_GRID: GridSpec = GridSpec(0.1, 0.5, 9);
const DEFAULT_CEP_GRID: GridSpec = GridSpec(10.0, 0.1, 6);
const DEFAULT_INITIAL: &str = r#"{"uniform": [0.1, 1.0], "seed": 1}"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Aggregate,
    Simulate,
    Steady,
    Sweep,
    Cep,
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub scenario: PathBuf,
    pub epsilon: Option<f64>,
    pub grid: Option<GridSpec>,
    pub t_end: Option<f64>,
    pub out: Option<PathBuf>,
    /// Inline JSON or a path.
    pub initial: Option<String>,
    pub seed_index: Option<usize>,
    pub scheme: Option<String>,
}

pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => EXIT_OK,
        Err(e) if e.is_validation() || matches!(e, Error::Io(_)) => EXIT_VALIDATION,
        Err(_) => EXIT_NUMERICAL,
    }
}

/// Parses `base,factor,count`.
pub fn parse_grid(text: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || Error::InvalidConfig(format!("--grid expects base,factor,count, got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let base = parts[0].parse().map_err(|_| bad())?;
    let factor = parts[1].parse().map_err(|_| bad())?;
    let count = parts[2].parse().map_err(|_| bad())?;
    geometric_grid(base, factor, count)?;
    Ok(GridSpec(base, factor, count))
}

struct Context {
    scenario: Scenario,
    model: CompetitionModel,
    cfg: IntegratorConfig,
    header: Vec<String>,
}

impl Context {
    fn load(opts: &Options) -> Result<Self> {
        let scenario = Scenario::load(&opts.scenario)?;
        let model = scenario.build_model()?;
        let mut cfg = scenario.integrator_config()?;
        if let Some(s) = &opts.scheme {
            cfg.scheme = parse_scheme(s)?;
        }
        let header = vec![format!("scenario: {}", scenario.label())];
        Ok(Self {
            scenario,
            model,
            cfg,
            header,
        })
    }

    fn epsilon(&self, opts: &Options) -> f64 {
        opts.epsilon
            .or(self.scenario.epsilon)
            .unwrap_or(DEFAULT_EPSILON)
    }

    fn initial(&mut self, opts: &Options) -> Result<State> {
        let spec = match (&opts.initial, &self.scenario.initial) {
            (Some(text), _) => InitialSpec::parse(text)?,
            (None, Some(spec)) => spec.clone(),
            (None, None) => InitialSpec::parse(DEFAULT_INITIAL)?,
        };
        if let Some(seed) = spec.seed() {
            self.header.push(format!("seed: {seed}"));
        }
        spec.build(&self.model)
    }
}

fn emit(out: &Option<PathBuf>, content: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, content),
        None => stdout.write_all(content.as_bytes()).map_err(Error::from),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

pub fn run(cmd: Command, opts: &Options, stdout: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Aggregate => cmd_aggregate(opts, stdout),
        Command::Simulate => cmd_simulate(opts, stdout),
        Command::Steady => cmd_steady(opts, stdout),
        Command::Sweep => cmd_sweep(opts, stdout),
        Command::Cep => cmd_cep(opts, stdout),
    }
}

/// Text report of the averaged model.
pub fn aggregate_report(label: &str, model: &CompetitionModel, agg: &AggregatedModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {label}");
    let _ = writeln!(s, "sites: {}", model.site_count());
    let _ = writeln!(s, "input_mean: {}", fmt(agg.input));
    let _ = writeln!(s, "r_0*: {}", fmt(agg.washout_level()));
    let _ = writeln!(
        s,
        "\n[species]\nspecies,mortality_mean,amplitude,shape,r_star"
    );
    let _ = writeln!(s, "0,{},,,{}", fmt(agg.mortality[0]), fmt(agg.r_star[0]));
    for i in 1..=agg.species_count() {
        let u = agg.uptake(i);
        let shape = match u.shape {
            crate::model::UptakeShape::Linear => "linear".to_string(),
            crate::model::UptakeShape::Monod { k } => format!("monod(k={})", fmt(k)),
        };
        let _ = writeln!(
            s,
            "{i},{},{},{shape},{}",
            fmt(agg.mortality[i]),
            fmt(u.amplitude),
            fmt(agg.r_star[i])
        );
    }
    let _ = writeln!(
        s,
        "\n[equilibria]\nindex,r,{},stable,hyperbolic",
        (1..=agg.species_count())
            .map(|i| format!("u_{i}"))
            .collect::<Vec<_>>()
            .join(",")
    );
    for eq in equilibria(agg) {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            eq.surviving_index,
            eq.point
                .iter()
                .map(|v| fmt(*v))
                .collect::<Vec<_>>()
                .join(","),
            eq.stable,
            eq.hyperbolic
        );
    }
    let _ = writeln!(s, "\n[exclusion]");
    match agg.cep_case {
        Some(c) => {
            let _ = writeln!(s, "case: {}", c.label());
        }
        None => {
            let _ = writeln!(s, "case: none");
        }
    }
    let all_present = vec![1.0; agg.species_count() + 1];
    match predict_cep(agg, &all_present) {
        Ok(p) => {
            let _ = writeln!(s, "winner: {}", p.winner);
            let _ = writeln!(s, "r_hat: {}", fmt(p.r_hat));
        }
        Err(e) => {
            let _ = writeln!(s, "winner: n/a ({e})");
        }
    }
    let _ = writeln!(s, "\n[decomposition]\nspecies,mean_local,nonlinear,heterogeneity,r_star,residual,local_break_even");
    match decompose_strength(model, agg) {
        Ok(rows) => {
            for d in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    d.species,
                    fmt(d.mean_local),
                    fmt(d.nonlinear),
                    fmt(d.heterogeneity),
                    fmt(d.r_star),
                    fmt(d.residual),
                    d.local_break_even
                        .iter()
                        .map(|v| fmt(*v))
                        .collect::<Vec<_>>()
                        .join(";")
                );
            }
        }
        Err(e) => {
            let _ = writeln!(s, "n/a ({e})");
        }
    }
    s
}

fn cmd_aggregate(opts: &Options, stdout: &mut dyn Write) -> Result<()> {
    let ctx = Context::load(opts)?;
    let agg = aggregate(&ctx.model);
    emit(
        &opts.out,
        &aggregate_report(ctx.scenario.label(), &ctx.model, &agg),
        stdout,
    )
}

fn cmd_simulate(opts: &Options, stdout: &mut dyn Write) -> Result<()> {
    let mut ctx = Context::load(opts)?;
    let eps = ctx.epsilon(opts);
    if let Some(t) = opts.t_end {
        ctx.cfg.t_end = t;
    }
    ctx.cfg.validate()?;
    let initial = ctx.initial(opts)?;
    let traj = integrate_full(&ctx.model, eps, &initial, &ctx.cfg)?;
    let verdict = classify_survivors(traj.final_state(), SurvivalThresholds::default());
    let mut header = ctx.header.clone();
    header.push(format!("epsilon: {}", fmt(eps)));
    header.push(format!(
        "steps: {} accepted, {} rejected, {} clamps (max mass {})",
        traj.accepted_steps,
        traj.rejected_steps,
        traj.clamp_count(),
        fmt(traj.max_clamped_mass)
    ));
    header.push(format!(
        "survivors at t_end: {:?}, extinct: {:?}, undecided: {:?}",
        verdict.survivors, verdict.extinct, verdict.undecided
    ));
    emit(
        &opts.out,
        &trajectory_csv(&ctx.model, &traj, &header),
        stdout,
    )
}

fn cmd_steady(opts: &Options, stdout: &mut dyn Write) -> Result<()> {
    let ctx = Context::load(opts)?;
    let eps = ctx.epsilon(opts);
    let states = match opts.seed_index {
        Some(i) => {
            let eq = seed_equilibrium(&ctx.model, i)?;
            vec![stability_of(
                &ctx.model,
                &continue_steady(&ctx.model, eps, &eq)?,
            )?]
        }
        None => steady_census(&ctx.model, eps)?,
    };
    let mut header = ctx.header.clone();
    header.push(format!("epsilon: {}", fmt(eps)));
    let steady = steady_csv(&ctx.model, &states, &header);
    let stability = stability_csv(&states, &header);
    match &opts.out {
        Some(path) => {
            write_atomic(path, &steady)?;
            write_atomic(&sibling(path, "stability"), &stability)
        }
        None => {
            stdout.write_all(steady.as_bytes())?;
            stdout.write_all(b"\n")?;
            stdout.write_all(stability.as_bytes()).map_err(Error::from)
        }
    }
}

fn default_seed(model: &CompetitionModel) -> usize {
    let agg = aggregate(model);
    (0..=agg.species_count())
        .min_by(|&a, &b| agg.r_star[a].total_cmp(&agg.r_star[b]))
        .unwrap_or(0)
}

fn cmd_sweep(opts: &Options, stdout: &mut dyn Write) -> Result<()> {
    let mut ctx = Context::load(opts)?;
    let sweep_spec = ctx.scenario.sweep.clone();
    let GridSpec(base, factor, count) = opts
        .grid
        .or(sweep_spec.as_ref().and_then(|s| s.grid))
        .unwrap_or(DEFAULT_SWEEP_GRID);
    let grid = geometric_grid(base, factor, count)?;
    let seed = opts
        .seed_index
        .or(sweep_spec.as_ref().and_then(|s| s.seed))
        .unwrap_or_else(|| default_seed(&ctx.model));
    if let Some(t) = opts.t_end {
        ctx.cfg.t_end = t;
    }
    ctx.cfg.record_every = ctx.cfg.t_end;
    ctx.cfg.validate()?;
    let initial = ctx.initial(opts)?;
    let sweep = epsilon_sweep_with_winners(&ctx.model, seed, &grid, &initial, &ctx.cfg)?;
    emit(&opts.out, &sweep_csv(&sweep, &ctx.header), stdout)
}

fn cmd_cep(opts: &Options, stdout: &mut dyn Write) -> Result<()> {
    let mut ctx = Context::load(opts)?;
    let cep_spec = ctx.scenario.cep.clone();
    let GridSpec(base, factor, count) = opts
        .grid
        .or(cep_spec.as_ref().and_then(|s| s.grid))
        .unwrap_or(DEFAULT_CEP_GRID);
    let grid = geometric_grid(base, factor, count)?;
    if let Some(t) = opts.t_end.or(cep_spec.as_ref().and_then(|s| s.t_end)) {
        ctx.cfg.t_end = t;
    }
    ctx.cfg.record_every = ctx.cfg.t_end;
    ctx.cfg.validate()?;
    let initial = ctx.initial(opts)?;
    let table = cep_table(&ctx.model, &grid, &initial, &ctx.cfg)?;
    for g in table.rows.iter().filter_map(|r| r.guidance()) {
        eprintln!("warning: {g}");
    }
    emit(
        &opts.out,
        &cep_csv(&table, ctx.model.species_count(), &ctx.header),
        stdout,
    )
}
