//! Gauss–Legendre rules mapped onto mesh elements.

use crate::mesh::Mesh;

/// Reference points and weights on [-1, 1].
#[derive(Clone, Copy, Debug)]
pub struct GaussRule {
    points: &'static [f64],
    weights: &'static [f64],
}

const G2_P: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
const G2_W: [f64; 2] = [1.0, 1.0];

const G5_P: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const G5_W: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

impl GaussRule {
    /// Two points; exact for cubics.
    pub const TWO: GaussRule = GaussRule { points: &G2_P, weights: &G2_W };
    /// Five points; exact for degree 9.
    pub const FIVE: GaussRule = GaussRule { points: &G5_P, weights: &G5_W };

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical `(x, weight)` pairs on `[a, a + width]`.
    pub fn on_interval(&self, a: f64, width: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * width;
        self.points.iter().zip(self.weights).map(move |(&p, &w)| (a + half * (1.0 + p), half * w))
    }

    /// `(x, weight)` pairs on element `e`. Points of the seam element may
    /// exceed `L`; integrands are expected to be periodic.
    pub fn on_element<'a>(&'a self, mesh: &Mesh, e: usize) -> impl Iterator<Item = (f64, f64)> + 'a {
        let (a, _) = mesh.element_bounds(e);
        self.on_interval(a, mesh.dx()[e])
    }

    /// Local coordinate in [0, 1] of each point, with its weight fraction.
    pub fn unit_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.on_interval(0.0, 1.0)
    }
}

/// The two-point rule on element `e`.
pub fn gauss2_quadrature(e: usize, mesh: &Mesh) -> [(f64, f64); 2] {
    let mut out = [(0.0, 0.0); 2];
    for (slot, pw) in out.iter_mut().zip(GaussRule::TWO.on_element(mesh, e)) {
        *slot = pw;
    }
    out
}
