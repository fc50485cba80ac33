//! Discrete dispersion relations of the linearized gravity-wave system.
//!
//! The measured relation applies the linearized tendencies (about rest,
//! `f = 0`) to a discrete Fourier mode of the element coefficients. On a
//! uniform mesh every closure is circulant, so the mode spans an invariant
//! subspace and the 2×2 complex symbol on `(u, h)` gives `±iω`.

use num_complex::Complex64;

use crate::closures::ClosureSpec;
use crate::dynamics::RhsEvaluator;
use crate::error::{Error, Result};
use crate::fields::{ModelParams, State, Tendency};
use crate::mesh::Mesh;

/// `ω = √(gH) sin(k dx) / dx`, the relation of the averaged scheme.
pub fn dispersion_avg_analytic(k: f64, g: f64, h_mean: f64, dx: f64) -> f64 {
    (g * h_mean).sqrt() * (k * dx).sin() / dx
}

/// A measured `(k, ω)` pair for one scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersionSample {
    pub k: f64,
    pub omega: f64,
    pub scheme: ClosureSpec,
}

/// Wavenumber of discrete mode `k_index` on a domain of length `length`.
pub fn wavenumber(k_index: usize, length: f64) -> f64 {
    std::f64::consts::TAU * k_index as f64 / length
}

/// Largest resolvable mode index on `n` elements.
pub fn max_k_index(n: usize) -> usize {
    n / 2
}

/// Linear operator of the gravity-wave subsystem for one scheme and mesh.
pub struct LinearWaveOperator {
    evaluator: RhsEvaluator,
    delta: State,
    out: Tendency,
}

impl LinearWaveOperator {
    pub fn new(spec: ClosureSpec, mesh: &Mesh, g: f64, h_mean: f64) -> Result<Self> {
        Self::with_coriolis(spec, mesh, ModelParams { g, f: 0.0, h_mean })
    }

    pub fn with_coriolis(spec: ClosureSpec, mesh: &Mesh, params: ModelParams) -> Result<Self> {
        let n = mesh.n();
        Ok(LinearWaveOperator {
            evaluator: RhsEvaluator::new(mesh.clone(), params, spec)?,
            delta: State::rest(n, 0.0),
            out: Tendency::zeros(n),
        })
    }

    pub fn apply(&mut self, delta: &State) -> Result<Tendency> {
        self.evaluator.eval_linearized(delta, &mut self.out)?;
        Ok(self.out.clone())
    }

    /// Applies the operator to a complex perturbation of the `(u, h)`
    /// components (v stays zero) by linearity over real and imaginary parts.
    fn apply_complex(&mut self, u: &[Complex64], h: &[Complex64]) -> Result<(Vec<Complex64>, Vec<Complex64>, f64)> {
        let n = u.len();
        let mut ru = vec![Complex64::new(0.0, 0.0); n];
        let mut rh = ru.clone();
        let mut v_leak: f64 = 0.0;
        for part in 0..2 {
            let pick = |z: &Complex64| if part == 0 { z.re } else { z.im };
            for i in 0..n {
                self.delta.u[i] = pick(&u[i]);
                self.delta.v[i] = 0.0;
                self.delta.h[i] = pick(&h[i]);
            }
            self.evaluator.eval_linearized(&self.delta, &mut self.out)?;
            let unit = if part == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
            for i in 0..n {
                ru[i] += unit * self.out.du[i];
                rh[i] += unit * self.out.dh[i];
                v_leak = v_leak.max(self.out.dv[i].abs());
            }
        }
        Ok((ru, rh, v_leak))
    }
}

/// Measured angular frequency (nonnegative branch) of mode `k_index`.
pub fn dispersion_measured(spec: ClosureSpec, k_index: usize, mesh: &Mesh, g: f64, h_mean: f64) -> Result<f64> {
    let mut op = LinearWaveOperator::new(spec, mesh, g, h_mean)?;
    measure_with(&mut op, k_index, mesh)
}

/// Same as [`dispersion_measured`], reusing an operator across modes.
pub fn measure_with(op: &mut LinearWaveOperator, k_index: usize, mesh: &Mesh) -> Result<f64> {
    let n = mesh.n();
    if !mesh.is_uniform() {
        return Err(Error::Analysis("Fourier modes are eigenvectors only on uniform meshes".into()));
    }
    if k_index > max_k_index(n) {
        return Err(Error::Analysis(format!(
            "mode {k_index} exceeds the largest resolvable index {} for n = {n}",
            max_k_index(n)
        )));
    }
    let theta = std::f64::consts::TAU * k_index as f64 / n as f64;
    let mode: Vec<Complex64> = (0..n).map(|e| Complex64::from_polar(1.0, theta * e as f64)).collect();
    let zero = vec![Complex64::new(0.0, 0.0); n];

    let project = |r: &[Complex64]| -> (Complex64, f64, f64) {
        let a = r.iter().zip(&mode).map(|(ri, m)| m.conj() * ri).sum::<Complex64>() / n as f64;
        let resid = r.iter().zip(&mode).map(|(ri, m)| (ri - a * m).norm_sqr()).sum::<f64>().sqrt();
        let norm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        (a, resid, norm)
    };

    let (ru_u, rh_u, leak_u) = op.apply_complex(&mode, &zero)?;
    let (ru_h, rh_h, leak_h) = op.apply_complex(&zero, &mode)?;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut symbol = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (slot, r) in [((0, 0), &ru_u), ((1, 0), &rh_u), ((0, 1), &ru_h), ((1, 1), &rh_h)] {
        let (a, resid, norm) = project(r);
        symbol[slot.0][slot.1] = a;
        worst = worst.max(resid);
        scale = scale.max(norm);
    }
    // Zero-frequency modes have a vanishing response, so the natural size
    // √n c / dx of the operator sets the floor.
    let natural = (n as f64).sqrt() * op.evaluator.params().wave_speed() / mesh.min_dx();
    let tol = 1e-9 * scale.max(natural);
    if worst > tol || leak_u.max(leak_h) > tol {
        return Err(Error::Analysis(format!(
            "mode {k_index} does not span an invariant subspace (residual {worst:e}, v leakage {:e})",
            leak_u.max(leak_h)
        )));
    }
    let tr = symbol[0][0] + symbol[1][1];
    let det = symbol[0][0] * symbol[1][1] - symbol[0][1] * symbol[1][0];
    let disc = (tr * tr * 0.25 - det).sqrt();
    let l1 = tr * 0.5 + disc;
    let l2 = tr * 0.5 - disc;
    Ok(l1.im.abs().max(l2.im.abs()))
}

/// Measured relation for every mode `0..=n/2`.
pub fn measured_curve(spec: ClosureSpec, mesh: &Mesh, g: f64, h_mean: f64) -> Result<Vec<DispersionSample>> {
    let mut op = LinearWaveOperator::new(spec, mesh, g, h_mean)?;
    (0..=max_k_index(mesh.n()))
        .map(|k| {
            Ok(DispersionSample {
                k: wavenumber(k, mesh.length()),
                omega: measure_with(&mut op, k, mesh)?,
                scheme: spec,
            })
        })
        .collect()
}

/// Estimate of the largest linear frequency (including Coriolis) by power
/// iteration on the square of the linearized operator. Works on any mesh.
pub fn estimate_max_frequency(spec: ClosureSpec, mesh: &Mesh, params: ModelParams) -> Result<f64> {
    let n = mesh.n();
    let mut op = LinearWaveOperator::with_coriolis(spec, mesh, params)?;
    // Deterministic start vector with content at all wavenumbers.
    let mut seed = 0x9e37_79b9_7f4a_7c15_u64;
    let mut next = move || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut x = State::rest(n, 0.0);
    for i in 0..n {
        x.u[i] = next();
        x.v[i] = next();
        x.h[i] = next();
    }
    let norm = |s: &State| s.u.iter().chain(s.v.iter()).chain(s.h.iter()).map(|v| v * v).sum::<f64>().sqrt();
    let mut estimate = 0.0;
    for _ in 0..80 {
        let nx = norm(&x);
        if nx == 0.0 {
            break;
        }
        let y = op.apply(&x)?;
        let y = op.apply(&State { u: y.du, v: y.dv, h: y.dh })?;
        let y = State { u: y.du, v: y.dv, h: y.dh };
        let ny = norm(&y);
        estimate = (ny / nx).sqrt();
        let s = 1.0 / ny.max(f64::MIN_POSITIVE);
        x = State {
            u: y.u.iter().map(|v| v * s).collect::<Vec<_>>().into(),
            v: y.v.iter().map(|v| v * s).collect::<Vec<_>>().into(),
            h: y.h.iter().map(|v| v * s).collect::<Vec<_>>().into(),
        };
    }
    Ok(estimate)
}

/// Courant number `c dt / dx` of the default time step.
pub const DEFAULT_COURANT: f64 = 0.1;

/// Fraction of the RK4 imaginary-axis stability bound (2√2) kept as margin.
const STABILITY_FRACTION: f64 = 2.0 / (2.0 * std::f64::consts::SQRT_2) / 1.1;

/// Default step: `DEFAULT_COURANT · min dx / √(gH)`, reduced when a GP0
/// closure makes the fastest discrete mode faster than the continuum allows.
pub fn default_dt(spec: ClosureSpec, mesh: &Mesh, params: ModelParams) -> Result<f64> {
    let courant = DEFAULT_COURANT * mesh.min_dx() / params.wave_speed();
    if !spec.needs_odd_n() {
        return Ok(courant);
    }
    let omega = estimate_max_frequency(spec, mesh, params)?;
    let bound = STABILITY_FRACTION * 2.0 * std::f64::consts::SQRT_2 / omega.max(f64::MIN_POSITIVE);
    Ok(courant.min(bound))
}
