//! Direct solvers for the periodic banded systems used by the closures and
//! the PV diagnosis.
//!
//! Cyclic tridiagonal systems are solved with a Thomas sweep plus a
//! Sherman–Morrison correction for the two corner entries. Cyclic
//! bidiagonal systems are solved by sweeping once around the ring.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::operators::{TridiagCirculant, TwoBandCirculant};

thread_local! {
    static SOLVES: Cell<u64> = const { Cell::new(0) };
}

/// Number of linear solves performed on the current thread.
pub fn solve_count() -> u64 {
    SOLVES.with(|c| c.get())
}

pub fn reset_solve_count() {
    SOLVES.with(|c| c.set(0));
}

#[inline]
fn count_solve() {
    SOLVES.with(|c| c.set(c.get() + 1));
}

/// LU factors of a cyclic tridiagonal matrix, reusable across right-hand sides.
#[derive(Clone, Debug)]
pub struct CyclicTridiagFactor {
    lower: Vec<f64>,
    /// Thomas multipliers of the corner-modified matrix.
    c_prime: Vec<f64>,
    inv_pivot: Vec<f64>,
    /// Solution of the modified system for the rank-one column.
    z: Vec<f64>,
    /// Scaling of the rank-one row: `v = [1, 0, ..., 0, v_last]`.
    v_last: f64,
    inv_denominator: f64,
}

impl CyclicTridiagFactor {
    pub fn new(a: &TridiagCirculant) -> Result<Self> {
        let n = a.diag.len();
        let mut f = CyclicTridiagFactor {
            lower: vec![0.0; n],
            c_prime: vec![0.0; n],
            inv_pivot: vec![0.0; n],
            z: vec![0.0; n],
            v_last: 0.0,
            inv_denominator: 0.0,
        };
        f.refactor(a)?;
        Ok(f)
    }

    /// Factors `a` into the existing buffers (same size).
    pub fn refactor(&mut self, a: &TridiagCirculant) -> Result<()> {
        let n = a.diag.len();
        if n < 3 {
            return Err(Error::validation("cyclic tridiagonal system needs n >= 3"));
        }
        if self.z.len() != n {
            *self = CyclicTridiagFactor::new(a)?;
            return Ok(());
        }
        let scale = a.max_abs();
        let corner_top = a.lower[0]; // A[0][n-1]
        let corner_bottom = a.upper[n - 1]; // A[n-1][0]
        let gamma = -a.diag[0];
        if gamma == 0.0 {
            return Err(singular(a, "zero leading diagonal entry"));
        }
        self.lower.copy_from_slice(&a.lower);

        let mut pivot = a.diag[0] - gamma;
        for i in 0..n {
            if i > 0 {
                let mut d = a.diag[i];
                if i == n - 1 {
                    d -= corner_top * corner_bottom / gamma;
                }
                pivot = d - a.lower[i] * self.c_prime[i - 1];
            }
            if !(pivot.abs() > 1e-14 * scale) {
                return Err(singular(a, &format!("vanishing pivot {pivot:e} at row {i}")));
            }
            self.inv_pivot[i] = 1.0 / pivot;
            self.c_prime[i] = if i + 1 < n { a.upper[i] * self.inv_pivot[i] } else { 0.0 };
        }

        self.z.fill(0.0);
        self.z[0] = gamma;
        self.z[n - 1] = corner_bottom;
        thomas_in_place(&self.lower, &self.c_prime, &self.inv_pivot, &mut self.z);
        self.v_last = corner_top / gamma;
        let denom = 1.0 + self.z[0] + self.v_last * self.z[n - 1];
        if !(denom.abs() > 1e-13) {
            return Err(singular(a, &format!("rank-one correction denominator {denom:e}")));
        }
        self.inv_denominator = 1.0 / denom;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Solves in place: `x` holds the right-hand side on entry.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        count_solve();
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        thomas_in_place(&self.lower, &self.c_prime, &self.inv_pivot, x);
        let factor = (x[0] + self.v_last * x[n - 1]) * self.inv_denominator;
        for (xi, zi) in x.iter_mut().zip(&self.z) {
            *xi -= factor * zi;
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Scratch space for [`solve_cyclic_streamed`].
#[derive(Clone, Debug, Default)]
pub struct StreamedWork {
    c_prime: Vec<f64>,
    z: Vec<f64>,
}

/// Solves a cyclic tridiagonal system whose rows are produced on the fly,
/// for a single right-hand side: one forward pass, one backward pass and
/// the rank-one correction. `row(i)` returns `(lower, diag, upper, rhs)`
/// with `lower` coupling to `i - 1` and `upper` to `i + 1` (cyclically).
pub fn solve_cyclic_streamed<F>(n: usize, row: F, work: &mut StreamedWork, x: &mut [f64]) -> Result<()>
where
    F: Fn(usize) -> (f64, f64, f64, f64),
{
    if n < 3 {
        return Err(Error::validation("cyclic tridiagonal system needs n >= 3"));
    }
    check_len(n, x.len())?;
    count_solve();
    work.c_prime.resize(n, 0.0);
    work.z.resize(n, 0.0);
    let (c_prime, z) = (&mut work.c_prime, &mut work.z);

    let (corner_top, d0, _, _) = row(0);
    let (_, _, corner_bottom, _) = row(n - 1);
    let gamma = -d0;
    if gamma == 0.0 {
        return Err(Error::Singular { system: "cyclic tridiagonal", detail: "zero leading diagonal entry".into() });
    }
    let mut prev_c = 0.0;
    let mut prev_x = 0.0;
    let mut prev_z = 0.0;
    for i in 0..n {
        let (l, mut d, u, b) = row(i);
        let (l, zb) = if i == 0 {
            d -= gamma;
            (0.0, gamma)
        } else if i == n - 1 {
            d -= corner_top * corner_bottom / gamma;
            (l, corner_bottom)
        } else {
            (l, 0.0)
        };
        let pivot = d - l * prev_c;
        if !(pivot.abs() > 1e-14 * d.abs().max(l.abs()).max(u.abs())) {
            return Err(Error::Singular {
                system: "cyclic tridiagonal",
                detail: format!("vanishing pivot {pivot:e} at row {i}"),
            });
        }
        let inv = 1.0 / pivot;
        prev_c = if i + 1 < n { u * inv } else { 0.0 };
        prev_x = (b - l * prev_x) * inv;
        prev_z = (zb - l * prev_z) * inv;
        c_prime[i] = prev_c;
        x[i] = prev_x;
        z[i] = prev_z;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c_prime[i] * x[i + 1];
        z[i] -= c_prime[i] * z[i + 1];
    }
    let v_last = corner_top / gamma;
    let denom = 1.0 + z[0] + v_last * z[n - 1];
    if !(denom.abs() > 1e-13) {
        return Err(Error::Singular {
            system: "cyclic tridiagonal",
            detail: format!("rank-one correction denominator {denom:e}"),
        });
    }
    let factor = (x[0] + v_last * x[n - 1]) / denom;
    for (xi, zi) in x.iter_mut().zip(z.iter()) {
        *xi -= factor * zi;
    }
    Ok(())
}

/// Forward elimination and back substitution for a factored (non-cyclic)
/// tridiagonal matrix.
#[inline]
fn thomas_in_place(lower: &[f64], c_prime: &[f64], inv_pivot: &[f64], x: &mut [f64]) {
    let n = x.len();
    x[0] *= inv_pivot[0];
    for i in 1..n {
        x[i] = (x[i] - lower[i] * x[i - 1]) * inv_pivot[i];
    }
    for i in (0..n - 1).rev() {
        x[i] -= c_prime[i] * x[i + 1];
    }
}

fn singular(a: &TridiagCirculant, what: &str) -> Error {
    Error::Singular {
        system: "cyclic tridiagonal",
        detail: format!("{what}; diagonal dominance ratio min |d|/(|l|+|u|) = {:.3e}", a.dominance_ratio()),
    }
}

/// Solves `A x = b` for a cyclic tridiagonal `A`.
pub fn solve_tridiag_circulant(a: &TridiagCirculant, b: &[f64]) -> Result<Vec<f64>> {
    check_len(a.diag.len(), b.len())?;
    Ok(CyclicTridiagFactor::new(a)?.solve(b))
}

/// Solves `A x = b` for a cyclic matrix with two adjacent bands per row.
///
/// Each row couples two neighbouring unknowns, so the unknowns can be swept
/// around the ring as an affine function of the first one; closing the ring
/// fixes it. With equal bands the closing factor is `(-1)^n`, which makes even
/// `n` singular with the alternating null vector `(+1, -1, +1, ...)`.
pub fn solve_two_band(a: &TwoBandCirculant, b: &[f64]) -> Result<Vec<f64>> {
    let mut x = vec![0.0; b.len()];
    solve_two_band_into(a, b, &mut x)?;
    Ok(x)
}

pub fn solve_two_band_into(a: &TwoBandCirculant, b: &[f64], x: &mut [f64]) -> Result<()> {
    let n = a.n();
    check_len(n, b.len())?;
    check_len(n, x.len())?;
    TwoBandFactor::new(a)?.solve_into(b, x);
    Ok(())
}

/// Precomputed sweep of a fixed cyclic two-band matrix.
///
/// Writing `x_j = alpha_j + beta_j x_0`, the sweep only depends on the
/// right-hand side through `alpha`; `beta` and the closing factor are stored.
/// The sweep runs forward or backward around the ring, whichever divides by
/// the larger band on average, so rounding errors are damped rather than
/// amplified along the way.
#[derive(Clone, Debug)]
pub struct TwoBandFactor {
    /// Row solved at each sweep step.
    rows: Vec<usize>,
    ratio: Vec<f64>,
    inv_pivot: Vec<f64>,
    beta: Vec<f64>,
    inv_closing: f64,
    /// Sweep step `t > 0` determines `x[n - t]` instead of `x[t]`.
    backward: bool,
}

impl TwoBandFactor {
    pub fn new(a: &TwoBandCirculant) -> Result<Self> {
        let n = a.n();
        let (o0, o1) = a.offsets();
        if (o1 - o0).rem_euclid(n as isize) != 1 {
            return Err(Error::validation("two-band solve needs adjacent band offsets"));
        }
        let (left, right) = a.bands();
        // Row i couples x[j] (left band) and x[j + 1] (right band), j = i + o0.
        let row_of = |j: usize| (j as isize - o0).rem_euclid(n as isize) as usize;
        let growth: f64 = (0..n).map(|i| (left[i] / right[i]).abs().ln()).sum();
        let backward = growth > 0.0;
        let mut rows = Vec::with_capacity(n);
        let mut ratio = Vec::with_capacity(n);
        let mut inv_pivot = Vec::with_capacity(n);
        for t in 0..n {
            // Forward: x[t] known, x[t + 1] new. Backward: x[n - t] known, x[n - t - 1] new.
            let (i, known, pivot) = if backward {
                let i = row_of(n - t - 1);
                (i, right[i], left[i])
            } else {
                let i = row_of(t);
                (i, left[i], right[i])
            };
            if pivot == 0.0 {
                return Err(Error::Singular {
                    system: "cyclic two-band",
                    detail: format!("zero coupling coefficient in row {i}"),
                });
            }
            rows.push(i);
            ratio.push(known / pivot);
            inv_pivot.push(1.0 / pivot);
        }
        let mut beta = vec![1.0; n + 1];
        for t in 0..n {
            beta[t + 1] = -ratio[t] * beta[t];
        }
        let closing = 1.0 - beta[n];
        if !(closing.abs() > 1e-12 * beta[n].abs().max(1.0)) {
            return Err(Error::Singular {
                system: "cyclic two-band",
                detail: format!(
                    "closing factor {closing:e} for n = {n}; with equal bands an even n has the \
                     alternating null vector (+1, -1, +1, ...)"
                ),
            });
        }
        beta.truncate(n);
        Ok(TwoBandFactor { rows, ratio, inv_pivot, beta, inv_closing: 1.0 / closing, backward })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Solves `A x = b`.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        count_solve();
        let n = self.len();
        debug_assert!(b.len() == n && x.len() == n);
        // x holds the sweep in step order until the end.
        let mut alpha = 0.0;
        x[0] = 0.0;
        for t in 0..n {
            alpha = b[self.rows[t]] * self.inv_pivot[t] - self.ratio[t] * alpha;
            if t + 1 < n {
                x[t + 1] = alpha;
            }
        }
        let x0 = alpha * self.inv_closing;
        for (xj, bj) in x.iter_mut().zip(&self.beta) {
            *xj += bj * x0;
        }
        if self.backward {
            x[1..].reverse();
        }
    }
}

fn check_len(n: usize, m: usize) -> Result<()> {
    if n != m {
        return Err(Error::validation(format!("dimension mismatch: matrix {n}, vector {m}")));
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::tests_support::dense_solve;
    use super::*;
    use crate::mesh::Mesh;
    use crate::operators::{assemble_mass_ne, assemble_mass_nn, averaging_en, AvgWeighting};
    use proptest::prelude::*;

    fn inf_norm(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn identity_solve() {
        let a = TridiagCirculant { lower: vec![0.0; 5], diag: vec![1.0; 5], upper: vec![0.0; 5] };
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        let x = solve_tridiag_circulant(&a, &b).unwrap();
        assert!(x.iter().zip(&b).all(|(x, b)| (x - b).abs() < 1e-15));
    }

    #[test]
    fn constructed_solution_of_mass_matrix() {
        let mesh = Mesh::uniform(64, 1.0).unwrap();
        let m = assemble_mass_nn(&mesh);
        let ones = vec![1.0; 64];
        let b = m.apply(&ones);
        let x = solve_tridiag_circulant(&m, &b).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn singular_tridiag_reports_dominance() {
        // Rows (1, -2, 1): the periodic second difference, constants in its null space.
        let a = TridiagCirculant { lower: vec![1.0; 6], diag: vec![-2.0; 6], upper: vec![1.0; 6] };
        match solve_tridiag_circulant(&a, &[1.0; 6]) {
            Err(Error::Singular { detail, .. }) => assert!(detail.contains("dominance")),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn two_band_odd_constructed() {
        let mesh = Mesh::uniform(3, 1.0).unwrap();
        let a = assemble_mass_ne(&mesh);
        let b = a.apply(&[1.0; 3]);
        let x = solve_two_band(&a, &b).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn two_band_even_is_singular() {
        let mesh = Mesh::uniform(4, 1.0).unwrap();
        let a = averaging_en(&mesh, AvgWeighting::Mean);
        let alt = [1.0, -1.0, 1.0, -1.0];
        assert!(a.apply(&alt).iter().all(|v| v.abs() < 1e-15));
        match solve_two_band(&a, &[1.0; 4]) {
            Err(Error::Singular { detail, .. }) => assert!(detail.contains("alternating")),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn counter_increments() {
        reset_solve_count();
        let mesh = Mesh::uniform(5, 1.0).unwrap();
        let f = CyclicTridiagFactor::new(&assemble_mass_nn(&mesh)).unwrap();
        f.solve(&[1.0; 5]);
        solve_two_band(&assemble_mass_ne(&mesh), &[1.0; 5]).unwrap();
        assert_eq!(solve_count(), 2);
    }

    proptest! {
        #[test]
        fn tridiag_matches_dense(
            n in 3usize..=17,
            seed in proptest::collection::vec(-1.0f64..1.0, 4 * 17),
        ) {
            // Random symmetric, strictly diagonally dominant cyclic matrix.
            let off: Vec<f64> = seed[..n].to_vec();
            let diag: Vec<f64> = (0..n)
                .map(|i| off[i].abs() + off[(i + n - 1) % n].abs() + 0.1 + seed[17 + i].abs())
                .collect();
            let a = TridiagCirculant {
                lower: (0..n).map(|i| off[(i + n - 1) % n]).collect(),
                diag,
                upper: off.clone(),
            };
            let b: Vec<f64> = seed[34..34 + n].to_vec();
            let x = solve_tridiag_circulant(&a, &b).unwrap();
            let oracle = dense_solve(a.to_dense(), b.clone());
            for (xi, oi) in x.iter().zip(&oracle) {
                prop_assert!((xi - oi).abs() <= 1e-12 * inf_norm(&oracle).max(1.0));
            }
            let r: Vec<f64> = a.apply(&x).iter().zip(&b).map(|(ax, b)| ax - b).collect();
            prop_assert!(inf_norm(&r) <= 1e-12 * inf_norm(&b).max(1e-300));
        }

        #[test]
        fn two_band_matches_dense(
            half in 1usize..=8,
            widths in proptest::collection::vec(0.1f64..1.0, 17),
            b in proptest::collection::vec(-1.0f64..1.0, 17),
        ) {
            let n = 2 * half + 1;
            let mut nodes = Vec::new();
            let mut x = 0.0;
            for w in &widths[..n] {
                nodes.push(x);
                x += w;
            }
            let mesh = Mesh::from_nodes(nodes, x).unwrap();
            for a in [assemble_mass_ne(&mesh), crate::operators::assemble_mass_en(&mesh)] {
                let sol = solve_two_band(&a, &b[..n]).unwrap();
                let mut factored = vec![0.0; n];
                TwoBandFactor::new(&a).unwrap().solve_into(&b[..n], &mut factored);
                let oracle = dense_solve(a.to_dense(), b[..n].to_vec());
                for ((xi, fi), oi) in sol.iter().zip(&factored).zip(&oracle) {
                    prop_assert!((xi - oi).abs() <= 1e-12 * inf_norm(&oracle).max(1.0));
                    prop_assert!((fi - oi).abs() <= 1e-12 * inf_norm(&oracle).max(1.0));
                }
            }
        }

        #[test]
        fn two_band_either_dominance(
            n in 3usize..=17,
            big in proptest::collection::vec(1.5f64..3.0, 17),
            small in proptest::collection::vec(-1.0f64..1.0, 17),
            left_dominant in any::<bool>(),
            offset in -2isize..=1,
            b in proptest::collection::vec(-1.0f64..1.0, 17),
        ) {
            let (big, small) = (big[..n].to_vec(), small[..n].to_vec());
            let a = if left_dominant {
                TwoBandCirculant::new(offset, big, small)
            } else {
                TwoBandCirculant::new(offset, small, big)
            };
            let oracle = dense_solve(a.to_dense(), b[..n].to_vec());
            let sol = solve_two_band(&a, &b[..n]).unwrap();
            for (xi, oi) in sol.iter().zip(&oracle) {
                prop_assert!((xi - oi).abs() <= 1e-12 * inf_norm(&oracle).max(1.0));
            }
        }
    }
}
