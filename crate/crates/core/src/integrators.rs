//! Time stepping for the semi-discrete equations.

use serde::{Deserialize, Serialize};

use crate::closures::ClosureSpec;
use crate::diagnostics::DiagnosticsRecord;
use crate::dynamics::RhsEvaluator;
use crate::error::{Error, Result};
use crate::fields::{State, Tendency};

/// Anything that can produce tendencies for a state.
pub trait OdeSystem {
    fn eval(&mut self, state: &State, out: &mut Tendency) -> Result<()>;
}

impl OdeSystem for RhsEvaluator {
    fn eval(&mut self, state: &State, out: &mut Tendency) -> Result<()> {
        RhsEvaluator::eval(self, state, out)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Rk4,
    ImplicitMidpoint,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
}

impl TimeConfig {
    pub const DEFAULT_FP_TOL: f64 = 1e-13;
    pub const DEFAULT_FP_MAX_ITERS: usize = 100;

    pub fn rk4(dt: f64) -> Self {
        TimeConfig { dt, scheme: Scheme::Rk4, fp_tol: Self::DEFAULT_FP_TOL, fp_max_iters: Self::DEFAULT_FP_MAX_ITERS }
    }

    pub fn implicit_midpoint(dt: f64) -> Self {
        TimeConfig { scheme: Scheme::ImplicitMidpoint, ..Self::rk4(dt) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::validation(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.fp_tol > 0.0) {
            return Err(Error::validation(format!("fp_tol must be positive, got {}", self.fp_tol)));
        }
        if self.fp_max_iters == 0 {
            return Err(Error::validation("fp_max_iters must be at least 1"));
        }
        Ok(())
    }
}

fn check_finite(state: &State, step: usize, t: f64, stage: usize) -> Result<()> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(Error::BlowUp { step, t, stage })
    }
}

/// Classical four-stage Runge–Kutta with preallocated stages.
#[derive(Clone, Debug)]
pub struct Rk4 {
    k: [Tendency; 4],
    stage: State,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Rk4 { k: std::array::from_fn(|_| Tendency::zeros(n)), stage: State::rest(n, 0.0) }
    }

    /// Advances `state` in place by `dt`. `step` and `t` only label errors.
    ///
    /// Non-finite values propagate through the stage sums, so only the
    /// result is scanned; a failing stage evaluation on a non-finite input
    /// is reported as a blow-up at that stage.
    pub fn step<S: OdeSystem>(&mut self, sys: &mut S, state: &mut State, dt: f64, step: usize, t: f64) -> Result<()> {
        let [k1, k2, k3, k4] = &mut self.k;
        let stage = &mut self.stage;
        let blown = |input: &State, stage: usize, e: Error| {
            if input.is_finite() {
                e
            } else {
                Error::BlowUp { step, t, stage }
            }
        };
        sys.eval(state, k1).map_err(|e| blown(state, 0, e))?;
        state.axpy_into(0.5 * dt, k1, stage);
        sys.eval(stage, k2).map_err(|e| blown(stage, 1, e))?;
        state.axpy_into(0.5 * dt, k2, stage);
        sys.eval(stage, k3).map_err(|e| blown(stage, 2, e))?;
        state.axpy_into(dt, k3, stage);
        sys.eval(stage, k4).map_err(|e| blown(stage, 3, e))?;
        let c = dt / 6.0;
        let fields = [
            (&mut state.u, &k1.du, &k2.du, &k3.du, &k4.du),
            (&mut state.v, &k1.dv, &k2.dv, &k3.dv, &k4.dv),
            (&mut state.h, &k1.dh, &k2.dh, &k3.dh, &k4.dh),
        ];
        for (y, a, b, cc, d) in fields {
            for i in 0..y.len() {
                y[i] += c * (a[i] + 2.0 * (b[i] + cc[i]) + d[i]);
            }
        }
        check_finite(state, step, t, 4)
    }
}

/// Implicit midpoint rule solved by fixed-point iteration.
#[derive(Clone, Debug)]
pub struct ImplicitMidpoint {
    k: Tendency,
    mid: State,
    next: State,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
    /// Iterations used by the last step.
    pub last_iterations: usize,
}

impl ImplicitMidpoint {
    pub fn new(n: usize, fp_tol: f64, fp_max_iters: usize) -> Self {
        ImplicitMidpoint {
            k: Tendency::zeros(n),
            mid: State::rest(n, 0.0),
            next: State::rest(n, 0.0),
            fp_tol,
            fp_max_iters,
            last_iterations: 0,
        }
    }

    pub fn step<S: OdeSystem>(&mut self, sys: &mut S, state: &mut State, dt: f64, step: usize, t: f64) -> Result<()> {
        self.mid.clone_from(state);
        let mut residual = f64::INFINITY;
        for it in 1..=self.fp_max_iters {
            sys.eval(&self.mid, &mut self.k)?;
            state.axpy_into(0.5 * dt, &self.k, &mut self.next);
            check_finite(&self.next, step, t, it)?;
            residual = self.next.max_abs_diff(&self.mid);
            std::mem::swap(&mut self.mid, &mut self.next);
            if residual <= self.fp_tol {
                self.last_iterations = it;
                // y1 = 2 y_mid - y0
                let fields = [(&mut state.u, &self.mid.u), (&mut state.v, &self.mid.v), (&mut state.h, &self.mid.h)];
                for (y, m) in fields {
                    for (yi, mi) in y.iter_mut().zip(m.iter()) {
                        *yi = 2.0 * mi - *yi;
                    }
                }
                return Ok(());
            }
        }
        Err(Error::Convergence { iterations: self.fp_max_iters, residual })
    }
}

/// Either integrator behind one interface.
#[derive(Clone, Debug)]
pub enum Stepper {
    Rk4(Rk4),
    ImplicitMidpoint(ImplicitMidpoint),
}

impl Stepper {
    pub fn new(n: usize, time: &TimeConfig) -> Self {
        match time.scheme {
            Scheme::Rk4 => Stepper::Rk4(Rk4::new(n)),
            Scheme::ImplicitMidpoint => {
                Stepper::ImplicitMidpoint(ImplicitMidpoint::new(n, time.fp_tol, time.fp_max_iters))
            }
        }
    }

    pub fn step<S: OdeSystem>(&mut self, sys: &mut S, state: &mut State, dt: f64, step: usize, t: f64) -> Result<()> {
        match self {
            Stepper::Rk4(s) => s.step(sys, state, dt, step, t),
            Stepper::ImplicitMidpoint(s) => s.step(sys, state, dt, step, t),
        }
    }
}

/// One stored sample of a run.
#[derive(Clone, Debug)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    pub state: State,
    pub diagnostics: DiagnosticsRecord,
}

/// Samples gathered by [`run_simulation`]; `failure` is set if the run was
/// aborted, in which case `samples` holds everything up to the failure.
#[derive(Debug)]
pub struct RunOutput {
    pub samples: Vec<Sample>,
    pub steps: usize,
    pub failure: Option<Error>,
}

impl RunOutput {
    pub fn into_result(self) -> Result<Vec<Sample>> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self.samples),
        }
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }
}

/// Number of steps of size `dt` (the last one possibly shorter) to reach `t_end`.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    if t_end <= 0.0 {
        return 0;
    }
    let k = (t_end / dt).ceil() as usize;
    // Drop a trailing sliver left by rounding.
    if k > 1 && t_end - (k - 1) as f64 * dt <= 1e-12 * t_end {
        k - 1
    } else {
        k.max(1)
    }
}

/// Integrates from `initial` to `t_end`, recording diagnostics at step 0,
/// every `sample_every` steps and at `t_end`.
pub fn run_simulation(
    evaluator: &mut RhsEvaluator,
    initial: &State,
    time: &TimeConfig,
    t_end: f64,
    sample_every: usize,
) -> Result<RunOutput> {
    time.validate()?;
    if !(t_end >= 0.0) {
        return Err(Error::validation(format!("t_end must be non-negative, got {t_end}")));
    }
    let sample_every = sample_every.max(1);
    let mesh = evaluator.mesh().clone();
    let params = *evaluator.params();
    let spec: ClosureSpec = evaluator.spec();
    initial.check_mesh(&mesh)?;

    let mut samples = vec![Sample {
        step: 0,
        t: 0.0,
        state: initial.clone(),
        diagnostics: DiagnosticsRecord::compute(0.0, initial, spec, &mesh, evaluator.operators(), &params)?,
    }];

    let total = step_count(t_end, time.dt);
    let mut stepper = Stepper::new(mesh.n(), time);
    let mut state = initial.clone();
    let mut failure = None;
    let mut done = 0;
    for k in 1..=total {
        let t0 = (k - 1) as f64 * time.dt;
        let (dt, t1) = if k == total { (t_end - t0, t_end) } else { (time.dt, k as f64 * time.dt) };
        if let Err(e) = stepper.step(evaluator, &mut state, dt, k, t0) {
            failure = Some(e);
            break;
        }
        done = k;
        if k % sample_every == 0 || k == total {
            let ops = evaluator.operators();
            match DiagnosticsRecord::compute(t1, &state, spec, &mesh, ops, &params) {
                Ok(d) => samples.push(Sample { step: k, t: t1, state: state.clone(), diagnostics: d }),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
    }
    Ok(RunOutput { samples, steps: done, failure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ModelParams;
    use crate::mesh::Mesh;

    /// u' = -ω h, h' = ω u: rotation of the (u, h) plane.
    struct Rotation(f64);

    impl OdeSystem for Rotation {
        fn eval(&mut self, s: &State, out: &mut Tendency) -> Result<()> {
            out.du[0] = -self.0 * s.h[0];
            out.dh[0] = self.0 * s.u[0];
            out.dv[0] = 0.0;
            Ok(())
        }
    }

    fn unit() -> State {
        State::new(vec![1.0], vec![0.0], vec![0.0]).unwrap()
    }

    #[test]
    fn rk4_matches_taylor_to_fifth_order() {
        let w = 1.0;
        for dt in [0.1, 0.05] {
            let mut s = unit();
            Rk4::new(1).step(&mut Rotation(w), &mut s, dt, 1, 0.0).unwrap();
            let z: f64 = w * dt;
            // Exact rotation of (1, 0) by angle z.
            let err = ((s.u[0] - z.cos()).powi(2) + (s.h[0] - z.sin()).powi(2)).sqrt();
            // Local error of RK4 on this problem is z^5 / 120.
            assert!((err - z.powi(5) / 120.0).abs() < 0.05 * z.powi(5) / 120.0, "dt={dt} err={err}");
        }
    }

    #[test]
    fn midpoint_unit_amplification() {
        let mut im = ImplicitMidpoint::new(1, 1e-15, 200);
        let mut s = unit();
        for k in 0..100 {
            im.step(&mut Rotation(1.0), &mut s, 0.3, k, 0.0).unwrap();
        }
        let r = (s.u[0].powi(2) + s.h[0].powi(2)).sqrt();
        assert!((r - 1.0).abs() < 1e-13);
        // Phase of the Cayley map: 2 atan(z/2) per step.
        let phase = s.h[0].atan2(s.u[0]);
        let expect = (100.0 * 2.0 * (0.15f64).atan()).rem_euclid(std::f64::consts::TAU);
        let expect = if expect > std::f64::consts::PI { expect - std::f64::consts::TAU } else { expect };
        assert!((phase - expect).abs() < 1e-10);
    }

    #[test]
    fn midpoint_reports_non_convergence() {
        let mut im = ImplicitMidpoint::new(1, 1e-15, 5);
        let mut s = unit();
        match im.step(&mut Rotation(1.0), &mut s, 0.5, 0, 0.0) {
            Err(Error::Convergence { iterations, residual }) => {
                assert_eq!(iterations, 5);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn blow_up_is_reported_with_step() {
        struct Explode;
        impl OdeSystem for Explode {
            fn eval(&mut self, _: &State, out: &mut Tendency) -> Result<()> {
                out.du[0] = f64::INFINITY;
                Ok(())
            }
        }
        let mut s = unit();
        match Rk4::new(1).step(&mut Explode, &mut s, 0.1, 7, 0.7) {
            Err(Error::BlowUp { step, .. }) => assert_eq!(step, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_stage_is_a_blow_up() {
        let mesh = Mesh::uniform(8, 1.0).unwrap();
        let mut ev = RhsEvaluator::new(mesh, ModelParams::default(), ClosureSpec::AVG_AVG).unwrap();
        let mut s = State::rest(8, 1.0);
        s.v[2] = 1.0;
        match Rk4::new(8).step(&mut ev, &mut s, 1e308, 3, 0.0) {
            Err(Error::BlowUp { step: 3, stage, .. }) => assert!(stage >= 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn step_count_bookkeeping() {
        assert_eq!(step_count(1.0, 0.1), 10);
        assert_eq!(step_count(1.05, 0.1), 11);
        assert_eq!(step_count(0.0, 0.1), 0);
        assert_eq!(step_count(1e-9, 0.1), 1);
    }

    #[test]
    fn rest_state_is_a_fixed_point() {
        let mesh = Mesh::uniform(9, 1.0).unwrap();
        let params = ModelParams::default();
        for scheme in [TimeConfig::rk4(0.01), TimeConfig::implicit_midpoint(0.01)] {
            let mut ev = RhsEvaluator::new(mesh.clone(), params, ClosureSpec::AVG_AVG).unwrap();
            let out = run_simulation(&mut ev, &State::rest(9, 1.0), &scheme, 0.05, 1).unwrap();
            let last = out.last().unwrap();
            assert!(last.state.max_abs_diff(&State::rest(9, 1.0)) < 1e-14);
        }
    }

    #[test]
    fn sampling_cadence_and_final_time() {
        let mesh = Mesh::uniform(8, 1.0).unwrap();
        let mut ev = RhsEvaluator::new(mesh, ModelParams::default(), ClosureSpec::AVG_AVG).unwrap();
        let init = State::rest(8, 1.0);
        let out = run_simulation(&mut ev, &init, &TimeConfig::rk4(0.01), 0.2, 5).unwrap();
        assert_eq!(out.steps, 20);
        assert_eq!(out.samples.len(), 20 / 5 + 1);
        assert!((out.last().unwrap().t - 0.2).abs() < 1e-15);

        let out = run_simulation(&mut ev, &init, &TimeConfig::rk4(0.03), 0.2, 5).unwrap();
        assert_eq!(out.steps, 7);
        assert_eq!(out.last().unwrap().t, 0.2);
        let steps: Vec<usize> = out.samples.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![0, 5, 7]);

        let out = run_simulation(&mut ev, &init, &TimeConfig::rk4(0.01), 0.0, 5).unwrap();
        assert_eq!(out.samples.len(), 1);
    }
}
