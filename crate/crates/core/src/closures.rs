//! Metric closures: the discrete Hodge star taking element (1-form)
//! coefficients to nodal (0-form) values.
//!
//! * `Gp1` tests against P1 hats: `M_nn x = M_en c`.
//! * `Gp0` tests against P0 boxes: `M_ne x = M_ee c`; singular for even `n`.
//! * `Avg` averages the two adjacent coefficients, no solve.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ElementField, NodalField, State};
use crate::mesh::Mesh;
use crate::operators::Operators;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosureKind {
    Gp1,
    Gp0,
    Avg,
}

impl ClosureKind {
    pub const ALL: [ClosureKind; 3] = [ClosureKind::Gp1, ClosureKind::Gp0, ClosureKind::Avg];

    pub fn as_str(self) -> &'static str {
        match self {
            ClosureKind::Gp1 => "gp1",
            ClosureKind::Gp0 => "gp0",
            ClosureKind::Avg => "avg",
        }
    }

    pub fn needs_odd_n(self) -> bool {
        self == ClosureKind::Gp0
    }

    pub fn needs_solve(self) -> bool {
        self != ClosureKind::Avg
    }
}

impl fmt::Display for ClosureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClosureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gp1" => Ok(ClosureKind::Gp1),
            "gp0" => Ok(ClosureKind::Gp0),
            "avg" => Ok(ClosureKind::Avg),
            other => Err(Error::Config(format!("unknown closure '{other}' (expected gp1, gp0 or avg)"))),
        }
    }
}

/// Closure for the height field and, shared by u and v, for the velocities.
///
/// Labels are written velocity first, `"<velocity>-<height>"`, e.g.
/// `"gp1-gp0"` is GP1 for u and v with GP0 for h.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureSpec {
    pub height: ClosureKind,
    pub velocity: ClosureKind,
}

impl ClosureSpec {
    pub const AVG_AVG: ClosureSpec = ClosureSpec::new(ClosureKind::Avg, ClosureKind::Avg);

    pub const fn new(velocity: ClosureKind, height: ClosureKind) -> Self {
        ClosureSpec { height, velocity }
    }

    /// The four Galerkin combinations followed by the averaged scheme.
    pub fn all_schemes() -> [ClosureSpec; 5] {
        use ClosureKind::*;
        [
            ClosureSpec::new(Gp1, Gp1),
            ClosureSpec::new(Gp1, Gp0),
            ClosureSpec::new(Gp0, Gp1),
            ClosureSpec::new(Gp0, Gp0),
            ClosureSpec::new(Avg, Avg),
        ]
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.velocity, self.height)
    }

    pub fn needs_odd_n(&self) -> bool {
        self.height.needs_odd_n() || self.velocity.needs_odd_n()
    }

    /// Rejects meshes the closures cannot be solved on.
    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.needs_odd_n() && mesh.n().is_multiple_of(2) {
            return Err(Error::Singular {
                system: "gp0 closure",
                detail: format!(
                    "{} needs an odd number of elements, got n = {}: the cyclic (1/2, 1/2) \
                     band matrix has the alternating null vector (+1, -1, +1, ...) for even n",
                    self.label(),
                    mesh.n()
                ),
            });
        }
        Ok(())
    }
}

impl fmt::Display for ClosureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for ClosureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (v, h) = s
            .split_once(['-', '_'])
            .ok_or_else(|| Error::Config(format!("closure spec '{s}' is not '<velocity>-<height>'")))?;
        Ok(ClosureSpec::new(v.parse()?, h.parse()?))
    }
}

/// Writes the nodal partner of `coeffs` into `out`.
pub fn close_into(kind: ClosureKind, mesh: &Mesh, ops: &Operators, coeffs: &[f64], out: &mut [f64]) -> Result<()> {
    if coeffs.len() != mesh.n() || out.len() != mesh.n() {
        return Err(Error::validation(format!(
            "closure input of length {} on mesh with {} elements",
            coeffs.len(),
            mesh.n()
        )));
    }
    if let Some(e) = coeffs.iter().position(|c| !c.is_finite()) {
        return Err(Error::validation(format!("non-finite coefficient at element {e}")));
    }
    match kind {
        ClosureKind::Gp1 => {
            ops.mass_en.apply_into(coeffs, out);
            ops.mass_nn_factor.solve_in_place(out);
        }
        ClosureKind::Gp0 => {
            // (dx_e / 2)(x_e + x_{e+1}) = dx_e c_e, i.e. (x_e + x_{e+1}) / 2 = c_e.
            match &ops.box_mean_factor {
                Some(f) => f.solve_into(coeffs, out),
                None => return Err(ClosureSpec::new(kind, kind).check_mesh(mesh).unwrap_err()),
            }
        }
        ClosureKind::Avg => ops.averaging.apply_into(coeffs, out),
    }
    Ok(())
}

pub fn close_to_nodal(kind: ClosureKind, mesh: &Mesh, ops: &Operators, coeffs: &ElementField) -> Result<NodalField> {
    let mut out = NodalField::zeros(mesh.n());
    close_into(kind, mesh, ops, coeffs, &mut out)?;
    Ok(out)
}

/// Nodal `(h0, u0, v0)` for a state.
pub fn close_state(
    spec: ClosureSpec,
    mesh: &Mesh,
    ops: &Operators,
    state: &State,
) -> Result<(NodalField, NodalField, NodalField)> {
    state.check_mesh(mesh)?;
    let h0 = close_to_nodal(spec.height, mesh, ops, &state.h)?;
    let u0 = close_to_nodal(spec.velocity, mesh, ops, &state.u)?;
    let v0 = close_to_nodal(spec.velocity, mesh, ops, &state.v)?;
    Ok((h0, u0, v0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{assemble_mass_nn, AvgWeighting};
    use crate::quadrature::GaussRule;
    use proptest::prelude::*;

    fn random_mesh(widths: &[f64]) -> Mesh {
        let mut nodes = Vec::new();
        let mut x = 0.0;
        for w in widths {
            nodes.push(x);
            x += w;
        }
        Mesh::from_nodes(nodes, x).unwrap()
    }

    fn solve_dense(a: Vec<Vec<f64>>, b: Vec<f64>) -> Vec<f64> {
        crate::solver::tests_support::dense_solve(a, b)
    }

    #[test]
    fn parse_and_label() {
        let s: ClosureSpec = "gp1-gp0".parse().unwrap();
        assert_eq!(s.velocity, ClosureKind::Gp1);
        assert_eq!(s.height, ClosureKind::Gp0);
        assert_eq!(s.label(), "gp1-gp0");
        assert!("gp2-avg".parse::<ClosureSpec>().is_err());
        assert_eq!(serde_json::to_string(&ClosureKind::Avg).unwrap(), "\"avg\"");
        let k: ClosureKind = serde_json::from_str("\"gp0\"").unwrap();
        assert_eq!(k, ClosureKind::Gp0);
    }

    #[test]
    fn constants_preserved_by_every_kind() {
        let mesh = Mesh::from_nodes(vec![0.0, 0.2, 0.25, 0.6, 0.9], 1.1).unwrap();
        let ops = Operators::new(&mesh).unwrap();
        for kind in ClosureKind::ALL {
            let x = close_to_nodal(kind, &mesh, &ops, &ElementField::constant(5, 1.7)).unwrap();
            assert!(x.iter().all(|v| (v - 1.7).abs() < 1e-13), "{kind}");
        }
    }

    #[test]
    fn avg_two_point_means() {
        let mesh = Mesh::uniform(5, 1.0).unwrap();
        let ops = Operators::new(&mesh).unwrap();
        let c = ElementField::from(vec![0.0, 1.0, 0.0, 1.0, 0.0]);
        let x = close_to_nodal(ClosureKind::Avg, &mesh, &ops, &c).unwrap();
        // Node l averages elements l-1 and l.
        assert_eq!(x.values, vec![0.0, 0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn avg_does_not_solve() {
        let mesh = Mesh::uniform(16, 1.0).unwrap();
        let ops = Operators::new(&mesh).unwrap();
        crate::solver::reset_solve_count();
        close_to_nodal(ClosureKind::Avg, &mesh, &ops, &ElementField::constant(16, 1.0)).unwrap();
        assert_eq!(crate::solver::solve_count(), 0);
        close_to_nodal(ClosureKind::Gp1, &mesh, &ops, &ElementField::constant(16, 1.0)).unwrap();
        assert_eq!(crate::solver::solve_count(), 1);
    }

    #[test]
    fn gp0_rejects_even_n() {
        let mesh = Mesh::uniform(8, 1.0).unwrap();
        let ops = Operators::new(&mesh).unwrap();
        let r = close_to_nodal(ClosureKind::Gp0, &mesh, &ops, &ElementField::constant(8, 1.0));
        assert!(matches!(r, Err(Error::Singular { .. })));
    }

    #[test]
    fn non_finite_rejected() {
        let mesh = Mesh::uniform(5, 1.0).unwrap();
        let ops = Operators::new(&mesh).unwrap();
        let mut c = ElementField::constant(5, 1.0);
        c[3] = f64::NAN;
        for kind in ClosureKind::ALL {
            assert!(matches!(close_to_nodal(kind, &mesh, &ops, &c), Err(Error::Validation(_))));
        }
    }

    #[test]
    fn gp1_matches_dense_projection() {
        let mesh = Mesh::uniform(8, 1.0).unwrap();
        let ops = Operators::new(&mesh).unwrap();
        let c: Vec<f64> = (0..8).map(|i| ((i * 7 + 3) % 5) as f64 - 1.3).collect();
        // Right-hand side ∫ φ_l c_h by five-point quadrature of the hats.
        let mut rhs = vec![0.0; 8];
        for e in 0..8 {
            for (x, w) in GaussRule::FIVE.on_element(&mesh, e) {
                for (l, r) in rhs.iter_mut().enumerate() {
                    *r += w * mesh.hat(l, x) * c[e];
                }
            }
        }
        let oracle = solve_dense(assemble_mass_nn(&mesh).to_dense(), rhs);
        let x = close_to_nodal(ClosureKind::Gp1, &mesh, &ops, &ElementField::from(c)).unwrap();
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn close_state_composes() {
        let mesh = Mesh::uniform(7, 1.0).unwrap();
        let ops = Operators::new(&mesh).unwrap();
        let state = State::new(
            (0..7).map(|i| (i as f64).sin()).collect(),
            (0..7).map(|i| (i as f64).cos()).collect(),
            (0..7).map(|i| 1.0 + 0.1 * (i as f64)).collect(),
        )
        .unwrap();
        let spec: ClosureSpec = "gp1-gp0".parse().unwrap();
        let (h0, u0, v0) = close_state(spec, &mesh, &ops, &state).unwrap();
        assert_eq!(h0, close_to_nodal(ClosureKind::Gp0, &mesh, &ops, &state.h).unwrap());
        assert_eq!(u0, close_to_nodal(ClosureKind::Gp1, &mesh, &ops, &state.u).unwrap());
        assert_eq!(v0, close_to_nodal(ClosureKind::Gp1, &mesh, &ops, &state.v).unwrap());

        let rest = State::rest(7, 2.0);
        for spec in ClosureSpec::all_schemes() {
            let (h0, u0, v0) = close_state(spec, &mesh, &ops, &rest).unwrap();
            assert!(h0.iter().all(|v| (v - 2.0).abs() < 1e-13));
            assert!(u0.iter().chain(v0.iter()).all(|v| v.abs() < 1e-15));
        }
    }

    proptest! {
        #[test]
        fn closures_are_linear(
            half in 1usize..=8,
            x in proptest::collection::vec(-1.0f64..1.0, 17),
            y in proptest::collection::vec(-1.0f64..1.0, 17),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            widths in proptest::collection::vec(0.1f64..1.0, 17),
        ) {
            let n = 2 * half + 1;
            let mesh = random_mesh(&widths[..n]);
            for weighting in [AvgWeighting::Mean, AvgWeighting::LengthWeighted] {
                let ops = Operators::with_weighting(&mesh, weighting).unwrap();
                for kind in ClosureKind::ALL {
                    let xs = ElementField::from(x[..n].to_vec());
                    let ys = ElementField::from(y[..n].to_vec());
                    let comb = ElementField::from((0..n).map(|i| a * x[i] + b * y[i]).collect::<Vec<_>>());
                    let cx = close_to_nodal(kind, &mesh, &ops, &xs).unwrap();
                    let cy = close_to_nodal(kind, &mesh, &ops, &ys).unwrap();
                    let cc = close_to_nodal(kind, &mesh, &ops, &comb).unwrap();
                    for i in 0..n {
                        prop_assert!((cc[i] - (a * cx[i] + b * cy[i])).abs() <= 1e-12);
                    }
                }
            }
        }

        #[test]
        fn gp1_residual_orthogonal_to_hats(
            c in proptest::collection::vec(-1.0f64..1.0, 3..=17),
            widths in proptest::collection::vec(0.1f64..1.0, 17),
        ) {
            let n = c.len();
            let mesh = random_mesh(&widths[..n]);
            let ops = Operators::new(&mesh).unwrap();
            let coeffs = ElementField::from(c.clone());
            let x = close_to_nodal(ClosureKind::Gp1, &mesh, &ops, &coeffs).unwrap();
            for l in 0..n {
                let mut inner = 0.0;
                for e in 0..n {
                    for (q, w) in GaussRule::FIVE.on_element(&mesh, e) {
                        inner += w * (c[e] - x.eval(&mesh, q)) * mesh.hat(l, q);
                    }
                }
                prop_assert!(inner.abs() <= 1e-12);
            }
        }

        #[test]
        fn gp0_box_means_match(
            half in 1usize..=8,
            c in proptest::collection::vec(-1.0f64..1.0, 17),
            widths in proptest::collection::vec(0.1f64..1.0, 17),
        ) {
            let n = 2 * half + 1;
            let mesh = random_mesh(&widths[..n]);
            let ops = Operators::new(&mesh).unwrap();
            let x = close_to_nodal(ClosureKind::Gp0, &mesh, &ops, &ElementField::from(c[..n].to_vec())).unwrap();
            for e in 0..n {
                let (a, b) = mesh.element_nodes(e);
                prop_assert!((0.5 * (x[a] + x[b]) - c[e]).abs() <= 1e-12);
            }
        }
    }
}
