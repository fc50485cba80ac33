//! Energy, Casimirs and error norms.

use serde::{Deserialize, Serialize};

use crate::closures::{close_state, ClosureSpec};
use crate::dynamics::diagnose_pv;
use crate::error::Result;
use crate::fields::{ElementField, ModelParams, NodalField, State};
use crate::mesh::Mesh;
use crate::operators::Operators;
use crate::quadrature::GaussRule;

/// One row of the diagnostics time series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub mass_e: f64,
    pub mass_n: f64,
    pub total_pv: f64,
    pub enstrophy: f64,
    /// Energy with a factor ½ on the potential term.
    pub energy_half: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str = "t,energy,mass_e,mass_n,total_pv,enstrophy,energy_half";

    pub fn compute(
        t: f64,
        state: &State,
        spec: ClosureSpec,
        mesh: &Mesh,
        ops: &Operators,
        params: &ModelParams,
    ) -> Result<Self> {
        let (h0, u0, v0) = close_state(spec, mesh, ops, state)?;
        let q = diagnose_pv(&state.h, &v0, params.f, mesh)?;
        let (kinetic, potential) = energy_parts(state, &h0, &u0, &v0, mesh, params.g);
        let (total_pv, enstrophy) = pv_integrals(&state.h, &q, mesh);
        Ok(DiagnosticsRecord {
            t,
            energy: kinetic + potential,
            mass_e: mass_e(state, mesh),
            mass_n: mass_n(&h0, ops),
            total_pv,
            enstrophy,
            energy_half: kinetic + 0.5 * potential,
        })
    }

    pub fn csv_row(&self) -> String {
        [self.t, self.energy, self.mass_e, self.mass_n, self.total_pv, self.enstrophy, self.energy_half]
            .iter()
            .map(|v| crate::cli_io::output::fmt_f64(*v))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// `∫_e a_h b_h` for two P1 fields, by the two-point rule.
#[inline]
fn p1_product(a: (f64, f64), b: (f64, f64), dx: f64) -> f64 {
    GaussRule::TWO
        .unit_points()
        .map(|(s, w)| w * ((1.0 - s) * a.0 + s * a.1) * ((1.0 - s) * b.0 + s * b.1))
        .sum::<f64>()
        * dx
}

/// Kinetic `½∫u h0 u0 + ½∫v h0 v0` and potential `g∫h h0` parts.
pub fn energy_parts(state: &State, h0: &[f64], u0: &[f64], v0: &[f64], mesh: &Mesh, g: f64) -> (f64, f64) {
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for e in 0..mesh.n() {
        let (a, b) = mesh.element_nodes(e);
        let dx = mesh.dx()[e];
        let hh = (h0[a], h0[b]);
        kinetic += 0.5 * state.u[e] * p1_product(hh, (u0[a], u0[b]), dx);
        kinetic += 0.5 * state.v[e] * p1_product(hh, (v0[a], v0[b]), dx);
        potential += g * state.h[e] * p1_product(hh, (1.0, 1.0), dx);
    }
    (kinetic, potential)
}

/// Discrete Hamiltonian `½⟨u, h0 u0⟩ + ½⟨v, h0 v0⟩ + g⟨h, h0⟩`.
pub fn energy(state: &State, spec: ClosureSpec, mesh: &Mesh, ops: &Operators, g: f64) -> Result<f64> {
    let (h0, u0, v0) = close_state(spec, mesh, ops, state)?;
    let (k, p) = energy_parts(state, &h0, &u0, &v0, mesh, g);
    Ok(k + p)
}

/// `Σ_e dx_e h_e`.
pub fn mass_e(state: &State, mesh: &Mesh) -> f64 {
    mesh.dx().iter().zip(state.h.iter()).map(|(d, h)| d * h).sum()
}

/// `∫ h0_h = Σ_l (M_nn h0)_l`.
pub fn mass_n(h0: &[f64], ops: &Operators) -> f64 {
    ops.mass_nn.apply(h0).iter().sum()
}

/// `(∫ q h, ∫ q² h)` for element heights and nodal PV.
pub fn pv_integrals(h: &[f64], q: &[f64], mesh: &Mesh) -> (f64, f64) {
    let mut pv = 0.0;
    let mut pe = 0.0;
    for e in 0..mesh.n() {
        let (a, b) = mesh.element_nodes(e);
        let dx = mesh.dx()[e];
        let qq = (q[a], q[b]);
        pv += h[e] * p1_product(qq, (1.0, 1.0), dx);
        pe += h[e] * p1_product(qq, qq, dx);
    }
    (pv, pe)
}

/// Total potential vorticity `∫ q h`, diagnosing `q` first.
pub fn total_pv(state: &State, v0: &NodalField, f: f64, mesh: &Mesh) -> Result<f64> {
    let q = diagnose_pv(&state.h, v0, f, mesh)?;
    Ok(pv_integrals(&state.h, &q, mesh).0)
}

/// Potential enstrophy `∫ q² h` for a given PV.
pub fn enstrophy(state: &State, q: &NodalField, mesh: &Mesh) -> f64 {
    pv_integrals(&state.h, q, mesh).1
}

/// A discrete field as a function on the mesh.
#[derive(Clone, Copy, Debug)]
pub enum FieldView<'a> {
    Element(&'a [f64]),
    Nodal(&'a [f64]),
}

impl<'a> From<&'a ElementField> for FieldView<'a> {
    fn from(f: &'a ElementField) -> Self {
        FieldView::Element(f)
    }
}

impl<'a> From<&'a NodalField> for FieldView<'a> {
    fn from(f: &'a NodalField) -> Self {
        FieldView::Nodal(f)
    }
}

/// `‖field_h − reference‖_L2`, five-point Gauss per element.
pub fn l2_error<'a>(field: impl Into<FieldView<'a>>, reference: impl Fn(f64) -> f64, mesh: &Mesh) -> f64 {
    let field = field.into();
    let mut sum = 0.0;
    for e in 0..mesh.n() {
        let (a, b) = mesh.element_nodes(e);
        let (x0, _) = mesh.element_bounds(e);
        let dx = mesh.dx()[e];
        for (x, w) in GaussRule::FIVE.on_element(mesh, e) {
            let value = match field {
                FieldView::Element(c) => c[e],
                FieldView::Nodal(c) => {
                    let s = (x - x0) / dx;
                    (1.0 - s) * c[a] + s * c[b]
                }
            };
            let d = value - reference(x);
            sum += w * d * d;
        }
    }
    sum.sqrt()
}
