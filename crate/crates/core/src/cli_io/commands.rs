//! `run`, `converge` and `dispersion`.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{FieldOutput, RunConfig};
use super::output::{self, FieldSnapshot};
use crate::closures::{ClosureKind, ClosureSpec};
use crate::diagnostics::{l2_error, DiagnosticsRecord};
use crate::dispersion::{dispersion_avg_analytic, max_k_index, measured_curve, wavenumber};
use crate::dynamics::RhsEvaluator;
use crate::error::{Error, Result};
use crate::integrators::run_simulation;
use crate::mesh::Mesh;
use crate::testcases::{geostrophic_state, initial_state, Profile, TestCaseConfig};

/// What a run produced.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub dt: f64,
    pub t_end: f64,
    pub samples: usize,
    pub diag_path: PathBuf,
    pub field_paths: Vec<PathBuf>,
    pub meta_path: PathBuf,
    pub records: Vec<DiagnosticsRecord>,
}

/// Integrates the configured case and writes diagnostics, field snapshots and
/// metadata. On a numerical failure everything up to the failure is written
/// before the error is returned.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary> {
    let started = Instant::now();
    let mesh = cfg.mesh()?;
    let time = cfg.time_config(&mesh)?;
    let tc = cfg.testcase.resolve();
    let init = initial_state(cfg.testcase.name, &tc, &cfg.params, &mesh)?;
    let mut ev = RhsEvaluator::new(mesh.clone(), cfg.params, cfg.closure)?;
    let t_end = cfg.t_end();
    let out = run_simulation(&mut ev, &init, &time, t_end, cfg.time.sample_every)?;

    let dir = &cfg.output.dir;
    let prefix = &cfg.output.prefix;
    let records: Vec<DiagnosticsRecord> = out.samples.iter().map(|s| s.diagnostics).collect();
    let diag_path = output::output_path(dir, prefix, "diag.csv");
    output::write_diagnostics(&diag_path, &records)?;

    let mut field_paths = Vec::new();
    let last = out.samples.len().saturating_sub(1);
    for (i, sample) in out.samples.iter().enumerate() {
        let keep = match cfg.output.fields {
            FieldOutput::All => true,
            FieldOutput::Ends => i == 0 || i == last,
            FieldOutput::None => false,
        };
        if !keep {
            continue;
        }
        ev.close(&sample.state)?;
        let (h0, u0, v0, q) = ev.nodal();
        let path = output::output_path(dir, prefix, &format!("fields_{}.csv", output::time_tag(sample.t)));
        output::write_fields(
            &path,
            &FieldSnapshot { mesh: &mesh, h0, u0, v0, q, h: &sample.state.h, u: &sample.state.u, v: &sample.state.v },
        )?;
        field_paths.push(path);
    }

    let meta_path = output::output_path(dir, prefix, "meta.json");
    let meta = serde_json::json!({
        "command": "run",
        "config": cfg.to_json(),
        "resolved": {
            "dt": time.dt,
            "t_end": t_end,
            "steps_planned": crate::integrators::step_count(t_end, time.dt),
            "steps_completed": out.steps,
            "test_case": tc,
        },
        "status": match &out.failure { None => serde_json::json!("ok"), Some(e) => super::error_report(e) },
        "elapsed_seconds": started.elapsed().as_secs_f64(),
        "build": output::build_info(),
    });
    output::write_json(&meta_path, &meta)?;

    if let Some(e) = out.failure {
        return Err(e);
    }
    Ok(RunSummary {
        steps: out.steps,
        dt: time.dt,
        t_end,
        samples: records.len(),
        diag_path,
        field_paths,
        meta_path,
        records,
    })
}

/// L2 errors of one balanced run against the exact steady state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub l2_h_p0: f64,
    pub l2_u_p0: f64,
    pub l2_v_p0: f64,
    pub l2_h_p1: f64,
    pub l2_u_p1: f64,
    pub l2_v_p1: f64,
}

impl ConvergenceRow {
    pub fn errors(&self) -> [f64; 6] {
        [self.l2_h_p0, self.l2_u_p0, self.l2_v_p0, self.l2_h_p1, self.l2_u_p1, self.l2_v_p1]
    }

    pub const NAMES: [&'static str; 6] = ["l2_h_p0", "l2_u_p0", "l2_v_p0", "l2_h_p1", "l2_u_p1", "l2_v_p1"];
}

/// Runs the balanced case on `n` elements for `cycles` and measures the
/// distance of the element coefficients (P0) and their nodal partners (P1)
/// from the exact steady profile.
pub fn steady_state_errors(
    spec: ClosureSpec,
    n: usize,
    cfg: &RunConfig,
    tc: &TestCaseConfig,
    cycles: f64,
) -> Result<ConvergenceRow> {
    let mesh = Mesh::uniform(n, cfg.mesh.length)?;
    spec.check_mesh(&mesh)?;
    let mut time_cfg = cfg.clone();
    time_cfg.closure = spec;
    // A fixed dt is kept proportional to dx across the sweep.
    time_cfg.time.dt = cfg.time.dt.map(|dt| dt * cfg.mesh.n as f64 / n as f64);
    let time = time_cfg.time_config(&mesh)?;
    let init = geostrophic_state(tc, &cfg.params, &mesh)?;
    let mut ev = RhsEvaluator::new(mesh.clone(), cfg.params, spec)?;
    let t_end = cycles * cfg.params.cycle(cfg.mesh.length);
    let out = run_simulation(&mut ev, &init, &time, t_end, usize::MAX)?;
    let out_state = out.last().map(|s| s.state.clone());
    if let Some(e) = out.failure {
        return Err(e);
    }
    let state = out_state.expect("at least the initial sample");
    ev.close(&state)?;
    let (h0, u0, v0, _) = ev.nodal();
    let prof = Profile::new(tc, &cfg.params, mesh.length());
    let nodal = |c: &[f64], f: &dyn Fn(f64) -> f64| l2_error(crate::diagnostics::FieldView::Nodal(c), f, &mesh);
    Ok(ConvergenceRow {
        n,
        l2_h_p0: l2_error(&state.h, |x| prof.h(x), &mesh),
        l2_u_p0: l2_error(&state.u, |x| prof.u(x), &mesh),
        l2_v_p0: l2_error(&state.v, |x| prof.v(x), &mesh),
        l2_h_p1: nodal(h0, &|x| prof.h(x)),
        l2_u_p1: nodal(u0, &|x| prof.u(x)),
        l2_v_p1: nodal(v0, &|x| prof.v(x)),
    })
}

/// Slope of `log e` against `log n` between two rows (positive when errors decrease).
pub fn pairwise_slope(n0: usize, e0: f64, n1: usize, e1: f64) -> f64 {
    -(e1 / e0).ln() / (n1 as f64 / n0 as f64).ln()
}

/// Least-squares slope of `-log e` against `log n`.
pub fn fitted_slope(ns: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| -e.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Resolution the spec can run at: GP0 closures need odd `n`, so an even
/// request is lowered by one.
pub fn admissible_n(spec: ClosureSpec, n: usize) -> usize {
    if spec.needs_odd_n() && n.is_multiple_of(2) {
        n - 1
    } else {
        n
    }
}

pub const DEFAULT_CONVERGE_N: [usize; 5] = [64, 128, 256, 512, 1024];

/// Convergence sweep of the balanced case for the configured closure.
/// Writes `<prefix>_converge.csv` and returns the rows.
pub fn cmd_converge(cfg: &RunConfig, n_list: &[usize], cycles: Option<f64>) -> Result<(PathBuf, Vec<ConvergenceRow>)> {
    if n_list.is_empty() {
        return Err(Error::Config("converge needs at least one resolution".into()));
    }
    let spec = cfg.closure;
    let tc = TestCaseConfig { balance_fraction: 1.0, ..cfg.testcase.resolve() };
    if cfg.params.f == 0.0 {
        return Err(Error::Config("the balanced steady state needs f != 0".into()));
    }
    let cycles = cycles.unwrap_or(cfg.time.t_end_cycles);
    let mut ns: Vec<usize> = n_list.iter().map(|&n| admissible_n(spec, n)).collect();
    ns.sort_unstable();
    ns.dedup();
    if let Some(&bad) = ns.iter().find(|&&n| n < Mesh::MIN_ELEMENTS) {
        return Err(Error::Config(format!("resolution {bad} is below the minimum of {}", Mesh::MIN_ELEMENTS)));
    }
    let rows: Vec<ConvergenceRow> =
        ns.par_iter().map(|&n| steady_state_errors(spec, n, cfg, &tc, cycles)).collect::<Result<_>>()?;

    let mut header: Vec<String> = vec!["n".into()];
    header.extend(ConvergenceRow::NAMES.iter().map(|s| s.to_string()));
    header.extend(ConvergenceRow::NAMES.iter().map(|s| format!("slope_{}", &s[3..])));
    let lines = rows.iter().enumerate().map(|(i, r)| {
        let mut cols = vec![r.n.to_string()];
        cols.extend(r.errors().iter().map(|&e| output::fmt_f64(e)));
        for k in 0..6 {
            cols.push(if i == 0 {
                String::new()
            } else {
                let p = &rows[i - 1];
                output::fmt_f64(pairwise_slope(p.n, p.errors()[k], r.n, r.errors()[k]))
            });
        }
        cols.join(",")
    });
    let path = output::output_path(&cfg.output.dir, &cfg.output.prefix, &format!("converge_{}.csv", spec.label()));
    output::write_csv(&path, &header.join(","), lines)?;
    Ok((path, rows))
}

/// Column name of a measured curve, e.g. `omega_gp1_gp0`.
pub fn omega_column(spec: ClosureSpec) -> String {
    format!("omega_{}_{}", spec.velocity, spec.height)
}

/// Dispersion table for `specs` on the configured uniform mesh. Writes
/// `<prefix>_dispersion.csv`.
pub fn cmd_dispersion(cfg: &RunConfig, specs: &[ClosureSpec]) -> Result<(PathBuf, Vec<Vec<f64>>)> {
    let mesh = cfg.mesh()?;
    let n = mesh.n();
    for s in specs {
        if s.needs_odd_n() && n % 2 == 0 {
            return Err(Error::Config(format!("{} needs an odd mesh.n, got {n}", s.label())));
        }
    }
    let (g, h) = (cfg.params.g, cfg.params.h_mean);
    let c = cfg.params.wave_speed();
    let dx = mesh.dx()[0];
    let curves: Vec<Vec<f64>> = specs
        .par_iter()
        .map(|&s| Ok(measured_curve(s, &mesh, g, h)?.into_iter().map(|d| d.omega).collect()))
        .collect::<Result<_>>()?;

    let mut header =
        vec!["k_index".to_string(), "k".into(), "omega_analytic_continuum".into(), "omega_avg_closed_form".into()];
    header.extend(specs.iter().map(|&s| omega_column(s)));
    let mut table = Vec::new();
    for ki in 0..=max_k_index(n) {
        let k = wavenumber(ki, mesh.length());
        let mut row = vec![ki as f64, k, c * k, dispersion_avg_analytic(k, g, h, dx)];
        row.extend(curves.iter().map(|curve| curve[ki]));
        table.push(row);
    }
    let lines = table.iter().map(|r| {
        let mut cols = vec![(r[0] as usize).to_string()];
        cols.extend(r[1..].iter().map(|&v| output::fmt_f64(v)));
        cols.join(",")
    });
    let path = output::output_path(&cfg.output.dir, &cfg.output.prefix, "dispersion.csv");
    output::write_csv(&path, &header.join(","), lines)?;
    Ok((path, table))
}

/// The five schemes, or those admissible on an even mesh.
pub fn default_dispersion_specs(n: usize) -> Vec<ClosureSpec> {
    ClosureSpec::all_schemes().into_iter().filter(|s| n % 2 == 1 || !s.needs_odd_n()).collect()
}

/// Parses a comma-separated list such as `gp1-gp1,avg-avg`.
pub fn parse_specs(list: &str) -> Result<Vec<ClosureSpec>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse()).collect()
}

/// True when the spec uses the lumped averaging for both fields.
pub fn is_solve_free(spec: ClosureSpec) -> bool {
    spec.height == ClosureKind::Avg && spec.velocity == ClosureKind::Avg
}
