//! Periodic 1D mesh and the P0/P1 space conventions.
//!
//! Node `l` is the left endpoint of element `l`; element `e` joins nodes
//! `e` and `e + 1 (mod n)`. The hat function of node `l` is supported on
//! elements `l - 1` and `l`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    length: f64,
    node_x: Vec<f64>,
    dx: Vec<f64>,
}

impl Mesh {
    pub const MIN_ELEMENTS: usize = 3;

    /// Uniform mesh with `n` elements on `[0, length)`.
    pub fn uniform(n: usize, length: f64) -> Result<Self> {
        check_size(n, length)?;
        let h = length / n as f64;
        let node_x = (0..n).map(|l| l as f64 * h).collect();
        Ok(Mesh { length, node_x, dx: vec![h; n] })
    }

    /// Mesh from explicit node coordinates, strictly increasing in `[0, length)`.
    pub fn from_nodes(node_x: Vec<f64>, length: f64) -> Result<Self> {
        let n = node_x.len();
        check_size(n, length)?;
        if node_x[0] < 0.0 || node_x[n - 1] >= length {
            return Err(Error::validation(format!("node coordinates must lie in [0, {length})")));
        }
        let mut dx = Vec::with_capacity(n);
        for e in 0..n {
            let right = if e + 1 < n { node_x[e + 1] } else { node_x[0] + length };
            let w = right - node_x[e];
            if !(w > 0.0) {
                return Err(Error::validation(format!(
                    "node coordinates must be strictly increasing (element {e} has width {w})"
                )));
            }
            dx.push(w);
        }
        Ok(Mesh { length, node_x, dx })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.dx.len()
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn node_x(&self) -> &[f64] {
        &self.node_x
    }

    #[inline]
    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn min_dx(&self) -> f64 {
        self.dx.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_uniform(&self) -> bool {
        let h = self.length / self.n() as f64;
        self.dx.iter().all(|&w| (w - h).abs() <= 1e-12 * h)
    }

    /// Index of the element to the left of node `l`.
    #[inline]
    pub fn prev(&self, l: usize) -> usize {
        if l == 0 {
            self.n() - 1
        } else {
            l - 1
        }
    }

    /// Index of the node (or element) following `i`.
    #[inline]
    pub fn next(&self, i: usize) -> usize {
        if i + 1 == self.n() {
            0
        } else {
            i + 1
        }
    }

    /// Endpoint nodes of element `e`.
    #[inline]
    pub fn element_nodes(&self, e: usize) -> (usize, usize) {
        (e, self.next(e))
    }

    /// Unwrapped bounds `(a, a + dx[e])` of element `e`.
    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        let a = self.node_x[e];
        (a, a + self.dx[e])
    }

    pub fn element_midpoints(&self) -> Vec<f64> {
        (0..self.n()).map(|e| self.node_x[e] + 0.5 * self.dx[e]).collect()
    }

    /// Element containing `x` (after wrapping into `[0, L)`) and the local
    /// coordinate in `[0, 1]`.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let x = x.rem_euclid(self.length);
        let e = match self.node_x.partition_point(|&xn| xn <= x) {
            0 => self.n() - 1,
            k => k - 1,
        };
        let mut offset = x - self.node_x[e];
        if offset < 0.0 {
            offset += self.length;
        }
        (e, (offset / self.dx[e]).clamp(0.0, 1.0))
    }

    /// Value of the hat function of node `l` at `x`.
    pub fn hat(&self, l: usize, x: f64) -> f64 {
        let (e, s) = self.locate(x);
        let (left, right) = self.element_nodes(e);
        let mut v = 0.0;
        if left == l {
            v += 1.0 - s;
        }
        if right == l {
            v += s;
        }
        v
    }
}

fn check_size(n: usize, length: f64) -> Result<()> {
    if n < Mesh::MIN_ELEMENTS {
        return Err(Error::validation(format!("mesh needs at least {} elements, got {n}", Mesh::MIN_ELEMENTS)));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::validation(format!("domain length must be positive, got {length}")));
    }
    Ok(())
}
