//! CSV rendering and atomic file writes.
//!
//! Floats use Rust's shortest round-trip formatting, so identical runs give
//! byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{CepTable, SlopeFit, SteadyState, SweepResult};
use crate::domain::{fast_sup_norm, slow_unchecked};
use crate::error::Result;
use crate::model::CompetitionModel;
use crate::simulate::Trajectory;

/// Note attached to every steady-state export.
pub const MANIFOLD_NOTE: &str =
    "fast part of each steady state is identified with h(p, eps) on the invariant manifold";

pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// Writes `content` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = match dir {
        Some(d) => d.join(format!(".{name}.tmp{}", std::process::id())),
        None => format!(".{name}.tmp{}", std::process::id()).into(),
    };
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        e.into()
    })
}

pub fn comments(lines: &[String]) -> String {
    lines.iter().map(|l| format!("# {l}\n")).collect()
}

/// `t, R_1..R_P, U_1_1..U_N_P, X_0..X_N, fast_norm` with species in output units.
pub fn trajectory_csv(model: &CompetitionModel, traj: &Trajectory, header: &[String]) -> String {
    let p = model.site_count();
    let n = model.species_count();
    let mut out = comments(header);
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=p).map(|j| format!("R_{j}")));
    for i in 1..=n {
        cols.extend((1..=p).map(|j| format!("U_{i}_{j}")));
    }
    cols.extend((0..=n).map(|i| format!("X_{i}")));
    cols.push("fast_norm".into());
    out.push_str(&cols.join(","));
    out.push('\n');
    let weights = model.domain().weights();
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let v = model.to_output_units(state);
        let slow = slow_unchecked(&v, weights);
        let mut row = vec![fmt(*t)];
        for i in 0..=n {
            row.extend((0..p).map(|j| fmt(v[(i, j)])));
        }
        row.extend(slow.iter().map(|x| fmt(*x)));
        row.push(fmt(fast_sup_norm(&v, &slow)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One row per component: `seed, component, x_1..x_P` in output units.
pub fn steady_csv(model: &CompetitionModel, states: &[SteadyState], header: &[String]) -> String {
    let p = model.site_count();
    let mut lines = header.to_vec();
    lines.push(MANIFOLD_NOTE.into());
    let mut out = comments(&lines);
    let mut cols = vec!["seed".to_string(), "epsilon".into(), "component".into()];
    cols.extend((1..=p).map(|j| format!("x_{j}")));
    cols.push("residual".into());
    out.push_str(&cols.join(","));
    out.push('\n');
    for s in states {
        let v = model.to_output_units(&s.state);
        for i in 0..v.nrows() {
            let name = if i == 0 {
                "R".to_string()
            } else {
                format!("U_{i}")
            };
            let mut row = vec![s.seeded_from.to_string(), fmt(s.epsilon), name];
            row.extend((0..p).map(|j| fmt(v[(i, j)])));
            row.push(fmt(s.residual));
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

/// `seed, max_re_eig, stable`
pub fn stability_csv(states: &[SteadyState], header: &[String]) -> String {
    let mut out = comments(header);
    out.push_str("seed,max_re_eig,stable,marginal\n");
    for s in states {
        if let Some(spec) = &s.spectrum {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                s.seeded_from,
                fmt(spec.max_re),
                spec.stable,
                spec.marginal
            );
        }
    }
    out
}

fn fit_text(fit: &SlopeFit) -> (String, String) {
    match fit {
        SlopeFit::Fitted { slope, residual } => (fmt(*slope), fmt(*residual)),
        SlopeFit::Degenerate => ("degenerate".into(), "nan".into()),
    }
}

/// `epsilon, error, slow_error, winner, slope`
pub fn sweep_csv(sweep: &SweepResult, header: &[String]) -> String {
    let (slope, residual) = fit_text(&sweep.fit);
    let (slow_slope, slow_residual) = fit_text(&sweep.slow_fit);
    let mut lines = header.to_vec();
    lines.push(format!("seed: {}", sweep.seed));
    lines.push(format!("slope: {slope} (fit residual {residual})"));
    lines.push(format!(
        "slow slope: {slow_slope} (fit residual {slow_residual})"
    ));
    lines.push(MANIFOLD_NOTE.into());
    let mut out = comments(&lines);
    out.push_str("epsilon,error,slow_error,winner,slope\n");
    for (k, p) in sweep.points.iter().enumerate() {
        let winner = match &sweep.winners {
            Some(rows) => rows[k].label(),
            None => "undecided".into(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt(p.epsilon),
            fmt(p.error),
            fmt(p.slow_error),
            winner,
            slope
        );
    }
    out
}

/// `epsilon, survivors, status, t_end, density_1..density_N`
pub fn cep_csv(table: &CepTable, species: usize, header: &[String]) -> String {
    let mut lines = header.to_vec();
    lines.extend(table.rows.iter().filter_map(|r| r.guidance()));
    let mut out = comments(&lines);
    let mut cols: Vec<String> = ["epsilon", "survivors", "status", "t_end"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((1..=species).map(|i| format!("density_{i}")));
    out.push_str(&cols.join(","));
    out.push('\n');
    for r in &table.rows {
        let status = match r.status {
            crate::analysis::CepStatus::Decided => "decided",
            crate::analysis::CepStatus::Undecided => "undecided",
        };
        let mut row = vec![fmt(r.epsilon), r.label(), status.into(), fmt(r.t_end)];
        row.extend(r.verdict.densities.iter().map(|d| fmt(*d)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
