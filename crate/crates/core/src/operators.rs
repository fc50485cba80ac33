//! Mass, incidence and averaging matrices of the P1/P0 pair.
//!
//! All matrices are `n × n` and periodic. Node-row matrices map element
//! arrays to nodal arrays (row `l` touches elements `l - 1` and `l`);
//! element-row matrices map nodal arrays to element arrays (row `e` touches
//! nodes `e` and `e + 1`).

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mesh::Mesh;
use crate::solver::{CyclicTridiagFactor, TwoBandFactor};

/// Cyclic tridiagonal matrix: row `i` is
/// `lower[i]·x[i-1] + diag[i]·x[i] + upper[i]·x[i+1]` (indices mod n).
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagCirculant {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TridiagCirculant {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| self.lower[i] * x[(i + n - 1) % n] + self.diag[i] * x[i] + self.upper[i] * x[(i + 1) % n])
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][(i + n - 1) % n] += self.lower[i];
            a[i][i] += self.diag[i];
            a[i][(i + 1) % n] += self.upper[i];
        }
        a
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.lower[i] + self.diag[i] + self.upper[i]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.lower.iter().chain(&self.diag).chain(&self.upper).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `min_i |d_i| / (|l_i| + |u_i|)`; above one means strictly dominant.
    pub fn dominance_ratio(&self) -> f64 {
        (0..self.n())
            .map(|i| self.diag[i].abs() / (self.lower[i].abs() + self.upper[i].abs()))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| self.upper[i] == self.lower[(i + 1) % n])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalMatrix {
    pub diag: Vec<f64>,
}

impl DiagonalMatrix {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.diag.iter().zip(x).map(|(d, x)| d * x).collect()
    }
}

/// Periodic matrix with two adjacent nonzero bands per row:
/// row `i` is `left[i]·x[i+o] + right[i]·x[i+o+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoBandCirculant {
    offset: isize,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl TwoBandCirculant {
    pub fn new(offset: isize, left: Vec<f64>, right: Vec<f64>) -> Self {
        assert_eq!(left.len(), right.len());
        TwoBandCirculant { offset, left, right }
    }

    pub fn n(&self) -> usize {
        self.left.len()
    }

    /// Column offsets of the two bands.
    pub fn offsets(&self) -> (isize, isize) {
        (self.offset, self.offset + 1)
    }

    pub fn bands(&self) -> (&[f64], &[f64]) {
        (&self.left, &self.right)
    }

    #[inline]
    fn col(&self, i: usize, off: isize) -> usize {
        (i as isize + off).rem_euclid(self.n() as isize) as usize
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        let o = self.offset;
        // Rows whose two columns need no wrap-around.
        let lo = (-o).clamp(0, n as isize) as usize;
        let hi = (n as isize - o - 1).clamp(lo as isize, n as isize) as usize;
        let wrapped = |i: usize| self.left[i] * x[self.col(i, o)] + self.right[i] * x[self.col(i, o + 1)];
        for i in (0..lo).chain(hi..n) {
            out[i] = wrapped(i);
        }
        if hi > lo {
            let c = (lo as isize + o) as usize;
            let m = hi - lo;
            let rows = out[lo..hi].iter_mut().zip(&self.left[lo..hi]).zip(&self.right[lo..hi]);
            for (((y, l), r), (a, b)) in rows.zip(x[c..c + m].iter().zip(&x[c + 1..c + 1 + m])) {
                *y = l * a + r * b;
            }
        }
    }

    /// Exact transpose (values are moved, not recomputed).
    pub fn transpose(&self) -> TwoBandCirculant {
        // Entry (i, i+o) moves to (r, r-o) with r = i+o. The band at offset
        // -o-1 (old right band) becomes the new left band.
        let n = self.n();
        let o = self.offset;
        let left = (0..n).map(|r| self.right[self.col(r, -o - 1)]).collect();
        let right = (0..n).map(|r| self.left[self.col(r, -o)]).collect();
        TwoBandCirculant { offset: -o - 1, left, right }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][self.col(i, self.offset)] += self.left[i];
            a[i][self.col(i, self.offset + 1)] += self.right[i];
        }
        a
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.left.iter().zip(&self.right).map(|(a, b)| a + b).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.transpose().row_sums()
    }
}

/// Node-row mass matrix `∫ φ_l φ_l'`.
pub fn assemble_mass_nn(mesh: &Mesh) -> TridiagCirculant {
    let dx = mesh.dx();
    let n = mesh.n();
    let mut lower = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for l in 0..n {
        let left = dx[mesh.prev(l)];
        let right = dx[l];
        lower.push(left / 6.0);
        diag.push((left + right) / 3.0);
        upper.push(right / 6.0);
    }
    TridiagCirculant { lower, diag, upper }
}

/// Element mass matrix `∫ χ_m χ_m' = diag(dx)`.
pub fn assemble_mass_ee(mesh: &Mesh) -> DiagonalMatrix {
    DiagonalMatrix { diag: mesh.dx().to_vec() }
}

/// Node-row mixed mass matrix `∫ φ_l χ_m`.
pub fn assemble_mass_en(mesh: &Mesh) -> TwoBandCirculant {
    let dx = mesh.dx();
    let left = (0..mesh.n()).map(|l| 0.5 * dx[mesh.prev(l)]).collect();
    let right = dx.iter().map(|w| 0.5 * w).collect();
    TwoBandCirculant::new(-1, left, right)
}

/// Element-row form of the mixed mass matrix, the transpose of
/// [`assemble_mass_en`].
pub fn assemble_mass_ne(mesh: &Mesh) -> TwoBandCirculant {
    assemble_mass_en(mesh).transpose()
}

/// Metric-free derivative pairing `∫ φ_l' χ_e`, element-row form:
/// `(G x)_e = x_{e+1} - x_e`.
pub fn assemble_deriv_en(mesh: &Mesh) -> TwoBandCirculant {
    let n = mesh.n();
    TwoBandCirculant::new(0, vec![-1.0; n], vec![1.0; n])
}

/// How the averaging closure weighs the two neighbouring elements of a node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvgWeighting {
    /// Plain two-point mean of the coefficients.
    #[default]
    Mean,
    /// Mean weighted by element width.
    LengthWeighted,
}

/// Node-row averaging of element coefficients onto nodes.
pub fn averaging_en(mesh: &Mesh, weighting: AvgWeighting) -> TwoBandCirculant {
    let n = mesh.n();
    match weighting {
        AvgWeighting::Mean => TwoBandCirculant::new(-1, vec![0.5; n], vec![0.5; n]),
        AvgWeighting::LengthWeighted => {
            let dx = mesh.dx();
            let (left, right) = (0..n)
                .map(|l| {
                    let a = dx[mesh.prev(l)];
                    let b = dx[l];
                    (a / (a + b), b / (a + b))
                })
                .unzip();
            TwoBandCirculant::new(-1, left, right)
        }
    }
}

/// Every matrix a simulation on one mesh needs, assembled once.
#[derive(Clone, Debug)]
pub struct Operators {
    pub mass_nn: TridiagCirculant,
    pub mass_nn_factor: CyclicTridiagFactor,
    pub mass_ee: DiagonalMatrix,
    pub mass_en: TwoBandCirculant,
    pub mass_ne: TwoBandCirculant,
    /// Factors of the box-mean system `(x_e + x_{e+1}) / 2 = c_e` of the GP0
    /// closure; `None` for even `n`, where it is singular.
    pub box_mean_factor: Option<TwoBandFactor>,
    pub deriv: TwoBandCirculant,
    pub averaging: TwoBandCirculant,
    pub weighting: AvgWeighting,
}

impl Operators {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        Self::with_weighting(mesh, AvgWeighting::Mean)
    }

    pub fn with_weighting(mesh: &Mesh, weighting: AvgWeighting) -> Result<Self> {
        let mass_nn = assemble_mass_nn(mesh);
        let mass_nn_factor = CyclicTridiagFactor::new(&mass_nn)?;
        let mass_en = assemble_mass_en(mesh);
        let mass_ne = mass_en.transpose();
        let mass_ee = assemble_mass_ee(mesh);
        // M_ee^{-1} M_ne has rows (1/2, 1/2) on every mesh.
        let box_mean = TwoBandCirculant::new(
            mass_ne.offset,
            mass_ne.left.iter().zip(&mass_ee.diag).map(|(a, d)| a / d).collect(),
            mass_ne.right.iter().zip(&mass_ee.diag).map(|(a, d)| a / d).collect(),
        );
        let box_mean_factor = TwoBandFactor::new(&box_mean).ok();
        Ok(Operators {
            mass_nn,
            mass_nn_factor,
            mass_ee,
            mass_en,
            mass_ne,
            box_mean_factor,
            deriv: assemble_deriv_en(mesh),
            averaging: averaging_en(mesh, weighting),
            weighting,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss2_quadrature;
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

    /// Dense matrices by two-point quadrature of the basis functions.
    struct QuadratureOracle {
        nn: Vec<Vec<f64>>,
        en: Vec<Vec<f64>>,
        ee: Vec<Vec<f64>>,
        deriv_ne: Vec<Vec<f64>>,
    }

    fn oracle(mesh: &Mesh) -> QuadratureOracle {
        let n = mesh.n();
        let mut o = QuadratureOracle {
            nn: vec![vec![0.0; n]; n],
            en: vec![vec![0.0; n]; n],
            ee: vec![vec![0.0; n]; n],
            deriv_ne: vec![vec![0.0; n]; n],
        };
        for e in 0..n {
            let (a, b) = mesh.element_nodes(e);
            let (xa, _) = mesh.element_bounds(e);
            let w = mesh.dx()[e];
            for (x, wt) in gauss2_quadrature(e, mesh) {
                let s = (x - xa) / w;
                let mut phi = vec![0.0; n];
                let mut dphi = vec![0.0; n];
                phi[a] += 1.0 - s;
                phi[b] += s;
                dphi[a] -= 1.0 / w;
                dphi[b] += 1.0 / w;
                for l in 0..n {
                    for m in 0..n {
                        o.nn[l][m] += wt * phi[l] * phi[m];
                    }
                    o.en[l][e] += wt * phi[l];
                    o.deriv_ne[e][l] += wt * dphi[l];
                }
                o.ee[e][e] += wt;
            }
        }
        o
    }

    fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn uniform_mass_rows() {
        let mesh = Mesh::uniform(4, 1.0).unwrap();
        let m = assemble_mass_nn(&mesh);
        for l in 0..4 {
            assert!((m.diag[l] - 1.0 / 6.0).abs() < 1e-16);
            assert!((m.lower[l] - 0.25 / 6.0).abs() < 1e-16);
            assert!((m.upper[l] - 0.25 / 6.0).abs() < 1e-16);
        }
        assert!(m.is_symmetric());
        assert!(m.dominance_ratio() > 1.0);
    }

    #[test]
    fn mass_ee_nonuniform() {
        let mesh = Mesh::from_nodes(vec![0.0, 0.1, 0.5], 1.0).unwrap();
        let d = assemble_mass_ee(&mesh).diag;
        for (a, b) in d.iter().zip([0.1, 0.4, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn mixed_mass_of_constant_is_width() {
        let mesh = Mesh::from_nodes(vec![0.0, 0.1, 0.5, 0.8], 1.0).unwrap();
        let r = assemble_mass_ne(&mesh).apply(&[1.0; 4]);
        for (a, b) in r.iter().zip(mesh.dx()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_of_constant_and_coordinate() {
        let mesh = Mesh::uniform(8, 2.0).unwrap();
        let g = assemble_deriv_en(&mesh);
        assert!(g.apply(&[3.0; 8]).iter().all(|v| *v == 0.0));
        let gx = g.apply(mesh.node_x());
        for v in &gx[..7] {
            assert!((v - 0.25).abs() < 1e-15);
        }
        assert!(g.row_sums().iter().all(|v| *v == 0.0));
        assert!(g.col_sums().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn averaging_examples() {
        let mesh = Mesh::uniform(4, 1.0).unwrap();
        let a = averaging_en(&mesh, AvgWeighting::Mean);
        assert!(a.apply(&[2.5; 4]).iter().all(|v| (v - 2.5).abs() < 1e-15));
        assert_eq!(a.apply(&[0.0, 1.0, 0.0, 1.0]), vec![0.5; 4]);
        assert!(a.apply(&[1.0, -1.0, 1.0, -1.0]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn length_weighted_averaging_preserves_constants() {
        let mesh = Mesh::from_nodes(vec![0.0, 0.1, 0.5, 0.8], 1.0).unwrap();
        let a = averaging_en(&mesh, AvgWeighting::LengthWeighted);
        assert!(a.apply(&[4.0; 4]).iter().all(|v| (v - 4.0).abs() < 1e-14));
    }

    #[test]
    fn transpose_round_trip() {
        let mesh = Mesh::from_nodes(vec![0.0, 0.1, 0.5, 0.8, 0.9], 1.0).unwrap();
        let en = assemble_mass_en(&mesh);
        assert_eq!(en.transpose().transpose(), en);
        let dense = en.to_dense();
        let dense_t = en.transpose().to_dense();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(dense[i][j], dense_t[j][i]);
            }
        }
    }

    proptest! {
        #[test]
        fn assembled_matrices_match_quadrature(widths in proptest::collection::vec(0.05f64..1.0, 3..=17)) {
            let mesh = random_mesh(&widths);
            let o = oracle(&mesh);
            prop_assert!(max_diff(&assemble_mass_nn(&mesh).to_dense(), &o.nn) <= 1e-14);
            prop_assert!(max_diff(&assemble_mass_en(&mesh).to_dense(), &o.en) <= 1e-14);
            let n = mesh.n();
            let mut ee = vec![vec![0.0; n]; n];
            for (e, d) in assemble_mass_ee(&mesh).diag.iter().enumerate() {
                ee[e][e] = *d;
            }
            prop_assert!(max_diff(&ee, &o.ee) <= 1e-15);
            prop_assert!(max_diff(&assemble_deriv_en(&mesh).to_dense(), &o.deriv_ne) <= 1e-14);
        }

        #[test]
        fn mixed_mass_factorizes_through_averaging(widths in proptest::collection::vec(0.05f64..1.0, 3..=17)) {
            let mesh = random_mesh(&widths);
            let en = assemble_mass_en(&mesh);
            let p = averaging_en(&mesh, AvgWeighting::Mean);
            // M^{en} = P^{ne} · diag(dx), entrywise.
            let (pl, pr) = p.bands();
            let (ml, mr) = en.bands();
            let dx = mesh.dx();
            for l in 0..mesh.n() {
                prop_assert_eq!(ml[l], pl[l] * dx[mesh.prev(l)]);
                prop_assert_eq!(mr[l], pr[l] * dx[l]);
            }
            prop_assert_eq!(assemble_mass_ne(&mesh).transpose(), en.clone());
            // Row sums of M_nn and M^{en} both integrate the hat function.
            for (a, b) in assemble_mass_nn(&mesh).row_sums().iter().zip(en.row_sums()) {
                prop_assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
            }
        }
    }
}
