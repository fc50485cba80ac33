//! Initial states: balanced (tc1, tc2) and partially balanced (tc3) height bumps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ElementField, ModelParams, State};
use crate::mesh::Mesh;

/// Named test cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestCase {
    Tc1,
    Tc2,
    Tc3,
}

impl TestCase {
    pub fn as_str(self) -> &'static str {
        match self {
            TestCase::Tc1 => "tc1",
            TestCase::Tc2 => "tc2",
            TestCase::Tc3 => "tc3",
        }
    }

    /// Default configuration of the case.
    pub fn default_config(self) -> TestCaseConfig {
        match self {
            TestCase::Tc1 | TestCase::Tc2 => TestCaseConfig::default(),
            TestCase::Tc3 => TestCaseConfig { balance_fraction: 0.0, ..TestCaseConfig::default() },
        }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tc1" => Ok(TestCase::Tc1),
            "tc2" => Ok(TestCase::Tc2),
            "tc3" => Ok(TestCase::Tc3),
            other => Err(Error::Config(format!("unknown test case {other:?} (expected tc1, tc2 or tc3)"))),
        }
    }
}

/// Gaussian height bump `H + Δh exp(-(x - x0)² / σ²)` with geostrophic
/// velocity scaled by `balance_fraction`. `width` and `center` are given as
/// fractions of the domain length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCaseConfig {
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
    pub balance_fraction: f64,
}

impl Default for TestCaseConfig {
    fn default() -> Self {
        TestCaseConfig { amplitude: 0.075, width: 0.05, center: 0.5, balance_fraction: 1.0 }
    }
}

impl TestCaseConfig {
    pub fn validate(&self, h_mean: f64) -> Result<()> {
        let finite = [self.amplitude, self.width, self.center, self.balance_fraction].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::validation("test case parameters must be finite"));
        }
        if !(self.width > 0.0) {
            return Err(Error::validation(format!("width must be positive, got {}", self.width)));
        }
        if !(h_mean + self.amplitude.min(0.0) > 0.0) {
            return Err(Error::validation(format!(
                "h_mean + amplitude must be positive, got {} + {}",
                h_mean, self.amplitude
            )));
        }
        if !(0.0..=1.0).contains(&self.balance_fraction) {
            return Err(Error::validation(format!(
                "balance_fraction must lie in [0, 1], got {}",
                self.balance_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.center) {
            return Err(Error::validation(format!("center must lie in [0, 1), got {}", self.center)));
        }
        Ok(())
    }
}

/// Continuous profiles of a test case on a periodic domain.
#[derive(Clone, Copy, Debug)]
pub struct Profile {
    pub h_mean: f64,
    pub amplitude: f64,
    /// Absolute width and center.
    pub sigma: f64,
    pub x0: f64,
    pub length: f64,
    /// `β g / f`, or zero for an unbalanced state.
    pub v_scale: f64,
}

/// Images of the Gaussian summed on each side; far images are below 1e-300
/// for any width up to a quarter of the domain.
const IMAGES: i32 = 2;

impl Profile {
    pub fn new(cfg: &TestCaseConfig, params: &ModelParams, length: f64) -> Self {
        let v_scale = if cfg.balance_fraction == 0.0 { 0.0 } else { cfg.balance_fraction * params.g / params.f };
        Profile {
            h_mean: params.h_mean,
            amplitude: cfg.amplitude,
            sigma: cfg.width * length,
            x0: cfg.center * length,
            length,
            v_scale,
        }
    }

    pub fn h(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for m in -IMAGES..=IMAGES {
            let d = (x - self.x0 + m as f64 * self.length) / self.sigma;
            s += (-d * d).exp();
        }
        self.h_mean + self.amplitude * s
    }

    pub fn h_x(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for m in -IMAGES..=IMAGES {
            let d = (x - self.x0 + m as f64 * self.length) / self.sigma;
            s += -2.0 * d / self.sigma * (-d * d).exp();
        }
        self.amplitude * s
    }

    pub fn u(&self, _x: f64) -> f64 {
        0.0
    }

    pub fn v(&self, x: f64) -> f64 {
        self.v_scale * self.h_x(x)
    }

    /// Element means of `(u, v, h)`.
    pub fn sample(&self, mesh: &Mesh) -> State {
        State {
            u: ElementField::element_means(mesh, |x| self.u(x)),
            v: ElementField::element_means(mesh, |x| self.v(x)),
            h: ElementField::element_means(mesh, |x| self.h(x)),
        }
    }
}

/// Balanced state, `f v = β g h_x`, `u = 0`.
pub fn geostrophic_state(cfg: &TestCaseConfig, params: &ModelParams, mesh: &Mesh) -> Result<State> {
    params.validate()?;
    cfg.validate(params.h_mean)?;
    if params.f == 0.0 {
        return Err(Error::validation("geostrophic balance is undefined for f = 0"));
    }
    Ok(Profile::new(cfg, params, mesh.length()).sample(mesh))
}

/// Partially balanced state. With `balance_fraction == 0` the velocity is
/// zero and `f` may vanish.
pub fn unbalanced_state(cfg: &TestCaseConfig, params: &ModelParams, mesh: &Mesh) -> Result<State> {
    params.validate()?;
    cfg.validate(params.h_mean)?;
    if cfg.balance_fraction != 0.0 && params.f == 0.0 {
        return Err(Error::validation("a partially balanced state needs f != 0"));
    }
    Ok(Profile::new(cfg, params, mesh.length()).sample(mesh))
}

/// Initial state of a named case.
pub fn initial_state(case: TestCase, cfg: &TestCaseConfig, params: &ModelParams, mesh: &Mesh) -> Result<State> {
    match case {
        TestCase::Tc1 | TestCase::Tc2 => geostrophic_state(cfg, params, mesh),
        TestCase::Tc3 => unbalanced_state(cfg, params, mesh),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closures::ClosureSpec;
    use crate::dynamics::rhs;
    use proptest::prelude::*;

    fn params() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn zero_amplitude_is_rest() {
        let mesh = Mesh::uniform(16, 1.0).unwrap();
        let cfg = TestCaseConfig { amplitude: 0.0, ..Default::default() };
        let s = geostrophic_state(&cfg, &params(), &mesh).unwrap();
        assert!(s.max_abs_diff(&State::rest(16, 1.0)) == 0.0);
    }

    #[test]
    fn balance_needs_rotation() {
        let mesh = Mesh::uniform(16, 1.0).unwrap();
        let p = ModelParams { f: 0.0, ..params() };
        assert!(matches!(geostrophic_state(&TestCaseConfig::default(), &p, &mesh), Err(Error::Validation(_))));
        let s = unbalanced_state(&TestCase::Tc3.default_config(), &p, &mesh).unwrap();
        assert!(s.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let prof = Profile::new(&TestCaseConfig::default(), &params(), 1.0);
        for &x in &[0.0, 0.3, 0.47, 0.5, 0.55, 0.99] {
            let e = 1e-6;
            let fd = (prof.h(x + e) - prof.h(x - e)) / (2.0 * e);
            assert!((fd - prof.h_x(x)).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn profile_is_periodic_and_balanced() {
        let cfg = TestCaseConfig { center: 0.05, width: 0.1, ..Default::default() };
        let p = params();
        let prof = Profile::new(&cfg, &p, 2.0);
        for &x in &[0.0, 0.1, 0.7, 1.3] {
            assert!((prof.h(x) - prof.h(x + 2.0)).abs() < 1e-15);
            assert!((prof.h_x(x) - prof.h_x(x + 2.0)).abs() < 1e-13);
            assert!((-p.f * prof.v(x) + p.g * prof.h_x(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn element_means_match_fine_quadrature() {
        let mesh = Mesh::uniform(20, 1.0).unwrap();
        let s = geostrophic_state(&TestCaseConfig::default(), &params(), &mesh).unwrap();
        let prof = Profile::new(&TestCaseConfig::default(), &params(), 1.0);
        for e in 0..20 {
            let (a, b) = mesh.element_bounds(e);
            // Composite Simpson oracle.
            let m = 2000;
            let hstep = (b - a) / m as f64;
            let mut sum = prof.h(a) + prof.h(b);
            for i in 1..m {
                sum += prof.h(a + i as f64 * hstep) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let exact = sum * hstep / 3.0 / (b - a);
            // The two-point rule is only exact for cubics.
            assert!((s.h[e] - exact).abs() < 2e-3, "e={e}");
        }
    }

    #[test]
    fn unbalanced_state_has_velocity_tendency() {
        let mesh = Mesh::uniform(64, 1.0).unwrap();
        let s = unbalanced_state(&TestCase::Tc3.default_config(), &params(), &mesh).unwrap();
        let t = rhs(&s, &params(), ClosureSpec::AVG_AVG, &mesh).unwrap();
        assert!(t.du.iter().map(|v| v.abs()).fold(0.0, f64::max) > 1e-3);
    }

    #[test]
    fn balanced_tendency_decreases_with_resolution() {
        let p = params();
        let cfg = TestCaseConfig::default();
        for spec in [ClosureSpec::AVG_AVG, "gp1-gp1".parse().unwrap()] {
            let mut prev = f64::INFINITY;
            for n in [64usize, 128, 256, 512] {
                let mesh = Mesh::uniform(n, 1.0).unwrap();
                let s = geostrophic_state(&cfg, &p, &mesh).unwrap();
                let r = rhs(&s, &p, spec, &mesh).unwrap().max_abs();
                assert!(r < 0.6 * prev, "{spec} n={n}: {r} vs {prev}");
                prev = r;
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("TC2".parse::<TestCase>().unwrap(), TestCase::Tc2);
        assert!(matches!("tc4".parse::<TestCase>(), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn height_positive(amp in -0.5f64..2.0, width in 0.01f64..0.25, center in 0.0f64..1.0, n in 3usize..80) {
            let cfg = TestCaseConfig { amplitude: amp, width, center, balance_fraction: 1.0 };
            let mesh = Mesh::uniform(n, 1.0).unwrap();
            let s = geostrophic_state(&cfg, &params(), &mesh).unwrap();
            prop_assert!(s.h.iter().all(|&h| h > 0.0));
        }
    }
}
