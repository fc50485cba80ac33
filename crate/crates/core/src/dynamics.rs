//! Topological prognostic equations and the potential-vorticity diagnosis.
//!
//! In coefficient form, with `G` the element-row incidence and `M_ne` the
//! element-row pairing (entries `dx_e / 2` on the two endpoint nodes):
//!
//! ```text
//! du = ( -G B + M_ne (q ∘ Fv) ) / dx
//! dv = ( -M_ne (q ∘ Fu) ) / dx
//! dh = ( -G Fu ) / dx
//! ```
//!
//! where `Fu = h0 ∘ u0`, `Fv = h0 ∘ v0`, `B = ½u0² + ½v0² + g h0` and `q`
//! solves the weak PV equation `W(h) q = A (G v0) + f ∫φ`.

use crate::closures::{close_into, ClosureSpec};
use crate::error::{Error, Result};
use crate::fields::{ElementField, ModelParams, NodalField, State, Tendency};
use crate::mesh::Mesh;
use crate::operators::{Operators, TridiagCirculant};
use crate::solver::{solve_cyclic_streamed, CyclicTridiagFactor, StreamedWork};

/// Nodal mass fluxes `(h0 ∘ u0, h0 ∘ v0)`.
pub fn mass_fluxes(h0: &NodalField, u0: &NodalField, v0: &NodalField) -> (NodalField, NodalField) {
    let fu = h0.iter().zip(u0.iter()).map(|(h, u)| h * u).collect::<Vec<_>>();
    let fv = h0.iter().zip(v0.iter()).map(|(h, v)| h * v).collect::<Vec<_>>();
    (fu.into(), fv.into())
}

/// Nodal Bernoulli function `½u0² + ½v0² + g h0`.
pub fn bernoulli(h0: &NodalField, u0: &NodalField, v0: &NodalField, g: f64) -> NodalField {
    h0.iter()
        .zip(u0.iter())
        .zip(v0.iter())
        .map(|((h, u), v)| 0.5 * u * u + 0.5 * v * v + g * h)
        .collect::<Vec<_>>()
        .into()
}

fn check_positive_height(h: &[f64]) -> Result<()> {
    if h.iter().all(|&v| v > 0.0) {
        return Ok(());
    }
    let e = h.iter().position(|&v| !(v > 0.0)).expect("found above");
    Err(Error::validation(format!("height must be positive for the PV diagnosis; element {e} has h = {}", h[e])))
}

/// `W(h)_{ll'} = Σ_e h_e ∫_e φ_l φ_l'`, written into `w`.
pub fn assemble_pv_matrix(h: &[f64], mesh: &Mesh, w: &mut TridiagCirculant) -> Result<()> {
    check_positive_height(h)?;
    let dx = mesh.dx();
    let n = mesh.n();
    for l in 0..n {
        let p = mesh.prev(l);
        let left = h[p] * dx[p];
        let right = h[l] * dx[l];
        w.lower[l] = left / 6.0;
        w.diag[l] = (left + right) / 3.0;
        w.upper[l] = right / 6.0;
    }
    Ok(())
}

/// Right-hand side `⟨φ_l, ∂x v0⟩ + f ∫ φ_l = ½(v0_{l+1} - v0_{l-1}) + f (dx_{l-1} + dx_l) / 2`.
pub fn pv_rhs(v0: &[f64], f: f64, mesh: &Mesh, out: &mut [f64]) {
    let dx = mesh.dx();
    for l in 0..mesh.n() {
        let p = mesh.prev(l);
        out[l] = 0.5 * (v0[mesh.next(l)] - v0[p]) + 0.5 * f * (dx[p] + dx[l]);
    }
}

/// Diagnoses the nodal potential vorticity from `q h = ∂x v0 + f` weakly.
pub fn diagnose_pv(h: &ElementField, v0: &NodalField, f: f64, mesh: &Mesh) -> Result<NodalField> {
    let n = mesh.n();
    let mut w = TridiagCirculant { lower: vec![0.0; n], diag: vec![0.0; n], upper: vec![0.0; n] };
    assemble_pv_matrix(h, mesh, &mut w)?;
    let mut q = NodalField::zeros(n);
    pv_rhs(v0, f, mesh, &mut q);
    CyclicTridiagFactor::new(&w)?.solve_in_place(&mut q);
    Ok(q)
}

/// Reusable buffers and fixed data for evaluating the tendencies.
///
/// One evaluator per simulation; it is not meant to be shared between
/// concurrent runs.
#[derive(Clone, Debug)]
pub struct RhsEvaluator {
    mesh: Mesh,
    ops: Operators,
    params: ModelParams,
    spec: ClosureSpec,
    h0: Vec<f64>,
    u0: Vec<f64>,
    v0: Vec<f64>,
    q: Vec<f64>,
    pv_work: StreamedWork,
    inv_dx: Vec<f64>,
}

impl RhsEvaluator {
    pub fn new(mesh: Mesh, params: ModelParams, spec: ClosureSpec) -> Result<Self> {
        let ops = Operators::new(&mesh)?;
        Self::with_operators(mesh, ops, params, spec)
    }

    pub fn with_operators(mesh: Mesh, ops: Operators, params: ModelParams, spec: ClosureSpec) -> Result<Self> {
        params.validate()?;
        spec.check_mesh(&mesh)?;
        let n = mesh.n();
        let inv_dx = mesh.dx().iter().map(|w| 1.0 / w).collect();
        Ok(RhsEvaluator {
            mesh,
            ops,
            params,
            spec,
            h0: vec![0.0; n],
            u0: vec![0.0; n],
            v0: vec![0.0; n],
            q: vec![0.0; n],
            pv_work: StreamedWork::default(),
            inv_dx,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn operators(&self) -> &Operators {
        &self.ops
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn spec(&self) -> ClosureSpec {
        self.spec
    }

    /// Closure stage only: fills the nodal `h0, u0, v0` buffers.
    pub fn close(&mut self, state: &State) -> Result<()> {
        state.check_mesh(&self.mesh)?;
        close_into(self.spec.height, &self.mesh, &self.ops, &state.h, &mut self.h0)?;
        close_into(self.spec.velocity, &self.mesh, &self.ops, &state.u, &mut self.u0)?;
        close_into(self.spec.velocity, &self.mesh, &self.ops, &state.v, &mut self.v0)?;
        Ok(())
    }

    /// Nodal values from the last evaluation: `(h0, u0, v0, q)`.
    pub fn nodal(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        (&self.h0, &self.u0, &self.v0, &self.q)
    }

    /// `W(h) q = r` with the rows of `W` and `r` generated during the sweep.
    fn solve_pv(&mut self, h: &[f64]) -> Result<()> {
        check_positive_height(h)?;
        let n = self.mesh.n();
        let dx = self.mesh.dx();
        let v0 = &self.v0;
        let f = self.params.f;
        let row = |l: usize| {
            let p = if l == 0 { n - 1 } else { l - 1 };
            let nx = if l + 1 == n { 0 } else { l + 1 };
            let left = h[p] * dx[p];
            let right = h[l] * dx[l];
            let r = 0.5 * (v0[nx] - v0[p]) + 0.5 * f * (dx[p] + dx[l]);
            (left / 6.0, (left + right) / 3.0, right / 6.0, r)
        };
        solve_cyclic_streamed(n, row, &mut self.pv_work, &mut self.q)
    }

    /// Tendencies of the coefficient arrays.
    pub fn eval(&mut self, state: &State, out: &mut Tendency) -> Result<()> {
        self.close(state)?;
        self.solve_pv(&state.h)?;
        let n = self.mesh.n();
        let g = self.params.g;
        let (h0, u0, v0, q) = (&self.h0, &self.u0, &self.v0, &self.q);
        let node = |l: usize| {
            let fu = h0[l] * u0[l];
            let fv = h0[l] * v0[l];
            let b = 0.5 * (u0[l] * u0[l] + v0[l] * v0[l]) + g * h0[l];
            (fu, q[l] * fu, q[l] * fv, b)
        };
        let mut left = node(0);
        let first = left;
        for e in 0..n {
            let right = if e + 1 < n { node(e + 1) } else { first };
            let (fu_a, qfu_a, qfv_a, b_a) = left;
            let (fu_b, qfu_b, qfv_b, b_b) = right;
            let inv = self.inv_dx[e];
            out.du[e] = -(b_b - b_a) * inv + 0.5 * (qfv_a + qfv_b);
            out.dv[e] = -0.5 * (qfu_a + qfu_b);
            out.dh[e] = -(fu_b - fu_a) * inv;
            left = right;
        }
        Ok(())
    }

    pub fn rhs(&mut self, state: &State) -> Result<Tendency> {
        let mut out = Tendency::zeros(self.mesh.n());
        self.eval(state, &mut out)?;
        Ok(out)
    }

    /// Tendencies of the equations linearized about the rest state
    /// `(h_mean, 0, 0)`, applied to the perturbation `delta`.
    ///
    /// Exactly linear: `Fu' = H u0'`, `Fv' = H v0'`, `B' = g h0'` and the PV
    /// enters only through its rest value `f / H`.
    pub fn eval_linearized(&mut self, delta: &State, out: &mut Tendency) -> Result<()> {
        self.close(delta)?;
        let n = self.mesh.n();
        let (g, big_h) = (self.params.g, self.params.h_mean);
        let q_rest = self.params.f / big_h;
        for e in 0..n {
            let (a, b) = self.mesh.element_nodes(e);
            let inv = self.inv_dx[e];
            let fu = |l: usize| big_h * self.u0[l];
            let fv = |l: usize| big_h * self.v0[l];
            out.du[e] = -g * (self.h0[b] - self.h0[a]) * inv + 0.5 * q_rest * (fv(a) + fv(b));
            out.dv[e] = -0.5 * q_rest * (fu(a) + fu(b));
            out.dh[e] = -(fu(b) - fu(a)) * inv;
        }
        Ok(())
    }
}

/// Tendencies for one state, allocating a fresh evaluator.
pub fn rhs(state: &State, params: &ModelParams, spec: ClosureSpec, mesh: &Mesh) -> Result<Tendency> {
    RhsEvaluator::new(mesh.clone(), *params, spec)?.rhs(state)
}
