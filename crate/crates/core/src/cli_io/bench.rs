//! Closure-stage and full-step timing at large `n`.

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use super::commands::admissible_n;
use super::config::RunConfig;
use super::output;
use crate::closures::{ClosureKind, ClosureSpec};
use crate::dynamics::RhsEvaluator;
use crate::error::{Error, Result};
use crate::fields::State;
use crate::integrators::Stepper;
use crate::mesh::Mesh;
use crate::solver::{reset_solve_count, solve_count};
use crate::testcases::{geostrophic_state, unbalanced_state, TestCaseConfig};

pub const DEFAULT_BENCH_N: usize = 1 << 17;
pub const DEFAULT_BENCH_STEPS: usize = 1000;
/// Timed blocks; the median block is reported.
pub const BLOCKS: usize = 5;

#[derive(Clone, Debug, Serialize)]
pub struct SchemeTiming {
    pub spec: String,
    pub n: usize,
    pub dt: f64,
    /// Linear solves in one closure stage (all three fields).
    pub closure_solves: u64,
    /// Linear solves in one full time step.
    pub step_solves: u64,
    pub closure_ns_median: f64,
    pub step_ns_median: f64,
    pub closure_ns_blocks: Vec<f64>,
    pub step_ns_blocks: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub n_requested: usize,
    pub steps: usize,
    pub warmup_steps: usize,
    pub blocks: usize,
    pub schemes: Vec<SchemeTiming>,
    /// `t_step(spec) / t_step(avg-avg)` for each Galerkin spec.
    pub step_speedup: Vec<(String, f64)>,
    pub closure_speedup: Vec<(String, f64)>,
}

impl BenchReport {
    pub fn timing(&self, spec: ClosureSpec) -> Option<&SchemeTiming> {
        self.schemes.iter().find(|s| s.spec == spec.label())
    }

    pub fn step_speedup_over(&self, spec: ClosureSpec) -> Option<f64> {
        let avg = self.timing(ClosureSpec::AVG_AVG)?;
        Some(self.timing(spec)?.step_ns_median / avg.step_ns_median)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// One scheme prepared for timing.
struct Bench {
    spec: ClosureSpec,
    n: usize,
    dt: f64,
    ev: RhsEvaluator,
    stepper: Stepper,
    state: State,
    k: usize,
    closure_solves: u64,
    step_solves: u64,
}

impl Bench {
    fn new(spec: ClosureSpec, n: usize, cfg: &RunConfig) -> Result<Self> {
        let mesh = Mesh::uniform(n, cfg.mesh.length)?;
        spec.check_mesh(&mesh)?;
        let mut local = cfg.clone();
        local.closure = spec;
        local.time.dt = None;
        let time = local.time_config(&mesh)?;
        let tc = cfg.testcase.resolve();
        let init = if cfg.params.f != 0.0 {
            geostrophic_state(&tc, &cfg.params, &mesh)?
        } else {
            unbalanced_state(&TestCaseConfig { balance_fraction: 0.0, ..tc }, &cfg.params, &mesh)?
        };
        let mut ev = RhsEvaluator::new(mesh, cfg.params, spec)?;

        reset_solve_count();
        ev.close(&init)?;
        let closure_solves = solve_count();

        let mut stepper = Stepper::new(n, &time);
        let mut state = init;
        reset_solve_count();
        stepper.step(&mut ev, &mut state, time.dt, 1, 0.0)?;
        let step_solves = solve_count();
        Ok(Bench { spec, n, dt: time.dt, ev, stepper, state, k: 2, closure_solves, step_solves })
    }

    fn steps(&mut self, count: usize) -> Result<f64> {
        let t0 = Instant::now();
        for _ in 0..count {
            self.stepper.step(&mut self.ev, &mut self.state, self.dt, self.k, 0.0)?;
            self.k += 1;
        }
        Ok(t0.elapsed().as_nanos() as f64 / count as f64)
    }

    fn closures(&mut self, count: usize) -> Result<f64> {
        let t0 = Instant::now();
        for _ in 0..count {
            self.ev.close(std::hint::black_box(&self.state))?;
        }
        Ok(t0.elapsed().as_nanos() as f64 / count as f64)
    }
}

/// Times `specs` on `n` elements (lowered by one for GP0 closures at even
/// `n`): a warmup of a tenth of `steps`, then `steps` steps in [`BLOCKS`]
/// blocks, interleaved across schemes so slow drifts of the machine affect
/// all of them alike. Bare closure stages are timed the same way.
pub fn time_schemes(specs: &[ClosureSpec], n: usize, steps: usize, cfg: &RunConfig) -> Result<Vec<SchemeTiming>> {
    let mut benches = specs.iter().map(|&s| Bench::new(s, admissible_n(s, n), cfg)).collect::<Result<Vec<_>>>()?;
    let per_block = (steps / BLOCKS).max(1);
    let warmup = (steps / 10).max(1);
    for b in benches.iter_mut() {
        b.steps(warmup)?;
        b.closures(warmup)?;
    }
    let mut step_blocks = vec![Vec::with_capacity(BLOCKS); benches.len()];
    let mut closure_blocks = step_blocks.clone();
    for _ in 0..BLOCKS {
        for (i, b) in benches.iter_mut().enumerate() {
            step_blocks[i].push(b.steps(per_block)?);
        }
        for (i, b) in benches.iter_mut().enumerate() {
            closure_blocks[i].push(b.closures(per_block)?);
        }
    }
    Ok(benches
        .into_iter()
        .zip(step_blocks.into_iter().zip(closure_blocks))
        .map(|(b, (sb, cb))| SchemeTiming {
            spec: b.spec.label(),
            n: b.n,
            dt: b.dt,
            closure_solves: b.closure_solves,
            step_solves: b.step_solves,
            closure_ns_median: median(cb.clone()),
            step_ns_median: median(sb.clone()),
            closure_ns_blocks: cb,
            step_ns_blocks: sb,
        })
        .collect())
}

/// Benchmarks avg-avg against gp1-gp1 and gp1-gp0 (at `n - 1` when `n` is
/// even) and writes `<prefix>_bench.json`.
pub fn cmd_bench(cfg: &RunConfig, n: usize, steps: usize) -> Result<(PathBuf, BenchReport)> {
    if n < Mesh::MIN_ELEMENTS + 1 {
        return Err(Error::Config(format!("bench n must be at least {}, got {n}", Mesh::MIN_ELEMENTS + 1)));
    }
    if steps == 0 {
        return Err(Error::Config("bench steps must be positive".into()));
    }
    use ClosureKind::*;
    let specs = [ClosureSpec::AVG_AVG, ClosureSpec::new(Gp1, Gp1), ClosureSpec::new(Gp1, Gp0)];
    let schemes = time_schemes(&specs, n, steps, cfg)?;
    if schemes[0].closure_solves != 0 {
        return Err(Error::Analysis(format!(
            "avg-avg closure stage performed {} linear solves",
            schemes[0].closure_solves
        )));
    }
    let avg = schemes[0].clone();
    let step_speedup = schemes[1..].iter().map(|s| (s.spec.clone(), s.step_ns_median / avg.step_ns_median)).collect();
    let closure_speedup =
        schemes[1..].iter().map(|s| (s.spec.clone(), s.closure_ns_median / avg.closure_ns_median)).collect();
    let report = BenchReport {
        n_requested: n,
        steps,
        warmup_steps: (steps / 10).max(1),
        blocks: BLOCKS,
        schemes,
        step_speedup,
        closure_speedup,
    };
    let mut json = serde_json::to_value(&report).map_err(std::io::Error::from)?;
    json["build"] = output::build_info();
    let path = output::output_path(&cfg.output.dir, &cfg.output.prefix, "bench.json");
    output::write_json(&path, &json)?;
    Ok((path, report))
}
