//! Coefficient arrays for the P0 (element) and P1 (nodal) spaces and the
//! prognostic state built from them.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// What an element coefficient array stands for. Documentation only: with a
/// single positive orientation straight and twisted forms share coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Degree {
    #[default]
    OneFormCoefficient,
    ZeroForm,
}

/// One value per element (P0).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ElementField {
    pub values: Vec<f64>,
    pub degree: Degree,
}

/// One value per node (P1).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
}

macro_rules! field_common {
    ($ty:ident) => {
        impl Deref for $ty {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.values
            }
        }

        impl DerefMut for $ty {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.values
            }
        }

        impl $ty {
            pub fn zeros(n: usize) -> Self {
                Self::from(vec![0.0; n])
            }

            pub fn constant(n: usize, c: f64) -> Self {
                Self::from(vec![c; n])
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.values
            }

            pub fn is_finite(&self) -> bool {
                self.values.iter().all(|v| v.is_finite())
            }
        }
    };
}

field_common!(ElementField);
field_common!(NodalField);

impl From<Vec<f64>> for ElementField {
    fn from(values: Vec<f64>) -> Self {
        ElementField { values, degree: Degree::OneFormCoefficient }
    }
}

impl From<Vec<f64>> for NodalField {
    fn from(values: Vec<f64>) -> Self {
        NodalField { values }
    }
}

impl ElementField {
    /// Samples `f` as element means with the two-point rule.
    pub fn element_means(mesh: &Mesh, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = (0..mesh.n())
            .map(|e| {
                crate::quadrature::gauss2_quadrature(e, mesh).iter().map(|&(x, w)| w * f(x)).sum::<f64>() / mesh.dx()[e]
            })
            .collect();
        ElementField::from(values)
    }

    /// Value of the piecewise-constant function at `x`.
    pub fn eval(&self, mesh: &Mesh, x: f64) -> f64 {
        self.values[mesh.locate(x).0]
    }
}

impl NodalField {
    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(f64) -> f64) -> Self {
        NodalField::from(mesh.node_x().iter().map(|&x| f(x)).collect::<Vec<_>>())
    }

    /// Value of the piecewise-linear function at `x`.
    pub fn eval(&self, mesh: &Mesh, x: f64) -> f64 {
        let (e, s) = mesh.locate(x);
        let (a, b) = mesh.element_nodes(e);
        (1.0 - s) * self.values[a] + s * self.values[b]
    }
}

/// Prognostic variables: coefficient arrays of the 1-forms u, ṽ, h̃.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: ElementField,
    pub v: ElementField,
    pub h: ElementField,
}

impl State {
    pub fn new(u: Vec<f64>, v: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() || v.len() != h.len() {
            return Err(Error::validation(format!(
                "state arrays differ in length (u {}, v {}, h {})",
                u.len(),
                v.len(),
                h.len()
            )));
        }
        Ok(State { u: u.into(), v: v.into(), h: h.into() })
    }

    /// Fluid at rest with height `h_mean`.
    pub fn rest(n: usize, h_mean: f64) -> Self {
        State { u: ElementField::zeros(n), v: ElementField::zeros(n), h: ElementField::constant(n, h_mean) }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.u.len() != mesh.n() || self.v.len() != mesh.n() || self.h.len() != mesh.n() {
            return Err(Error::validation(format!(
                "state length {} does not match mesh with {} elements",
                self.len(),
                mesh.n()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.h.is_finite()
    }

    /// `self + a * t`, written into `out`.
    pub fn axpy_into(&self, a: f64, t: &Tendency, out: &mut State) {
        axpy(&self.u, a, &t.du, &mut out.u);
        axpy(&self.v, a, &t.dv, &mut out.v);
        axpy(&self.h, a, &t.dh, &mut out.h);
    }

    pub fn max_abs_diff(&self, other: &State) -> f64 {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        d(&self.u, &other.u).max(d(&self.v, &other.v)).max(d(&self.h, &other.h))
    }
}

fn axpy(x: &[f64], a: f64, y: &[f64], out: &mut [f64]) {
    for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// Time derivatives of the state coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Tendency {
    pub du: ElementField,
    pub dv: ElementField,
    pub dh: ElementField,
}

impl Tendency {
    pub fn zeros(n: usize) -> Self {
        Tendency { du: ElementField::zeros(n), dv: ElementField::zeros(n), dh: ElementField::zeros(n) }
    }

    pub fn max_abs(&self) -> f64 {
        self.du.iter().chain(self.dv.iter()).chain(self.dh.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Physical constants of the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Gravitational constant.
    pub g: f64,
    /// Coriolis parameter.
    pub f: f64,
    /// Reference height H.
    pub h_mean: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { g: 1.0, f: 10.0, h_mean: 1.0 }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0) || !self.g.is_finite() {
            return Err(Error::validation(format!("g must be positive, got {}", self.g)));
        }
        if !(self.h_mean > 0.0) || !self.h_mean.is_finite() {
            return Err(Error::validation(format!("h_mean must be positive, got {}", self.h_mean)));
        }
        if !self.f.is_finite() {
            return Err(Error::validation("f must be finite"));
        }
        Ok(())
    }

    /// Gravity-wave speed √(gH).
    pub fn wave_speed(&self) -> f64 {
        (self.g * self.h_mean).sqrt()
    }

    /// Time for a gravity wave to cross a domain of the given length.
    pub fn cycle(&self, length: f64) -> f64 {
        length / self.wave_speed()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mismatched_state_rejected() {
        assert!(State::new(vec![0.0; 3], vec![0.0; 4], vec![1.0; 3]).is_err());
    }

    #[test]
    fn element_means_of_linear_function() {
        let mesh = Mesh::uniform(4, 1.0).unwrap();
        let f = ElementField::element_means(&mesh, |x| 2.0 * x);
        for (e, v) in f.iter().enumerate() {
            assert!((v - (2.0 * (e as f64 + 0.5) * 0.25)).abs() < 1e-15);
        }
    }

    #[test]
    fn nodal_eval_is_linear_between_nodes() {
        let mesh = Mesh::uniform(4, 1.0).unwrap();
        let f = NodalField::from(vec![0.0, 1.0, 0.0, -1.0]);
        assert!((f.eval(&mesh, 0.125) - 0.5).abs() < 1e-15);
        assert!((f.eval(&mesh, 0.875) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams { g: 0.0, ..Default::default() }.validate().is_err());
        assert!(ModelParams { h_mean: -1.0, ..Default::default() }.validate().is_err());
        assert!(ModelParams { f: 0.0, ..Default::default() }.validate().is_ok());
    }
}
