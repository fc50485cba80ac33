//! Run configuration: a single JSON document with dotted `--set` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::closures::ClosureSpec;
use crate::dispersion::default_dt;
use crate::error::{Error, Result};
use crate::fields::ModelParams;
use crate::integrators::{Scheme, TimeConfig};
use crate::mesh::Mesh;
use crate::testcases::{TestCase, TestCaseConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub n: usize,
    #[serde(default = "one")]
    pub length: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { n: 512, length: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub scheme: Scheme,
    /// `None` selects [`default_dt`].
    pub dt: Option<f64>,
    pub t_end_cycles: f64,
    pub sample_every: usize,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            scheme: Scheme::Rk4,
            dt: None,
            t_end_cycles: 10.0,
            sample_every: 100,
            fp_tol: TimeConfig::DEFAULT_FP_TOL,
            fp_max_iters: TimeConfig::DEFAULT_FP_MAX_ITERS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCaseSection {
    pub name: TestCase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance_fraction: Option<f64>,
}

impl Default for TestCaseSection {
    fn default() -> Self {
        TestCaseSection { name: TestCase::Tc1, amplitude: None, width: None, center: None, balance_fraction: None }
    }
}

impl TestCaseSection {
    /// Explicit fields over the defaults of the named case.
    pub fn resolve(&self) -> TestCaseConfig {
        let d = self.name.default_config();
        TestCaseConfig {
            amplitude: self.amplitude.unwrap_or(d.amplitude),
            width: self.width.unwrap_or(d.width),
            center: self.center.unwrap_or(d.center),
            balance_fraction: self.balance_fraction.unwrap_or(d.balance_fraction),
        }
    }
}

/// What to write for each sample besides the diagnostics row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldOutput {
    /// A fields file at every sampled time.
    #[default]
    All,
    /// Only the first and last sample.
    Ends,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub prefix: String,
    pub fields: FieldOutput,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), prefix: "run".into(), fields: FieldOutput::All }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default = "avg_avg")]
    pub closure: ClosureSpec,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub testcase: TestCaseSection,
    #[serde(default)]
    pub output: OutputConfig,
}

fn avg_avg() -> ClosureSpec {
    ClosureSpec::AVG_AVG
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: MeshConfig::default(),
            params: ModelParams::default(),
            closure: ClosureSpec::AVG_AVG,
            time: TimeSection::default(),
            testcase: TestCaseSection::default(),
            output: OutputConfig::default(),
        }
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Validation(m) | Error::Singular { detail: m, .. } => Error::Config(m),
        other => other,
    }
}

impl RunConfig {
    /// Reads `path`, applies `key=value` overrides and the output-directory
    /// environment variable, then validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text, overrides, std::env::var_os(super::OUT_DIR_ENV).map(PathBuf::from))
    }

    pub fn from_json_str(text: &str, overrides: &[String], out_dir: Option<PathBuf>) -> Result<Self> {
        let mut value: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let mut cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        if let Some(dir) = out_dir {
            cfg.output.dir = dir;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mesh = self.mesh()?;
        self.params.validate().map_err(config_err)?;
        self.closure.check_mesh(&mesh).map_err(config_err)?;
        self.testcase.resolve().validate(self.params.h_mean).map_err(config_err)?;
        if self.testcase.name != TestCase::Tc3 && self.params.f == 0.0 {
            return Err(Error::Config(format!("{} is geostrophically balanced and needs f != 0", self.testcase.name)));
        }
        let t = &self.time;
        if !(t.t_end_cycles >= 0.0) || !t.t_end_cycles.is_finite() {
            return Err(Error::Config(format!("time.t_end_cycles must be non-negative, got {}", t.t_end_cycles)));
        }
        if t.sample_every == 0 {
            return Err(Error::Config("time.sample_every must be at least 1".into()));
        }
        if let Some(dt) = t.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::Config(format!("time.dt must be positive, got {dt}")));
            }
        }
        TimeConfig { dt: t.dt.unwrap_or(1.0), scheme: t.scheme, fp_tol: t.fp_tol, fp_max_iters: t.fp_max_iters }
            .validate()
            .map_err(config_err)?;
        if self.output.prefix.is_empty() || self.output.prefix.contains(['/', '\\']) {
            return Err(Error::Config(format!(
                "output.prefix {:?} is not a plain file-name prefix",
                self.output.prefix
            )));
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<Mesh> {
        if !(self.mesh.length > 0.0) || !self.mesh.length.is_finite() {
            return Err(Error::Config(format!("mesh.length must be positive, got {}", self.mesh.length)));
        }
        Mesh::uniform(self.mesh.n, self.mesh.length).map_err(config_err)
    }

    /// Simulated time span.
    pub fn t_end(&self) -> f64 {
        self.time.t_end_cycles * self.params.cycle(self.mesh.length)
    }

    /// Time-stepping settings with `dt` resolved.
    pub fn time_config(&self, mesh: &Mesh) -> Result<TimeConfig> {
        let dt = match self.time.dt {
            Some(dt) => dt,
            None => default_dt(self.closure, mesh, self.params)?,
        };
        Ok(TimeConfig { dt, scheme: self.time.scheme, fp_tol: self.time.fp_tol, fp_max_iters: self.time.fp_max_iters })
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Sets a dotted path, e.g. `mesh.n=129` or `closure.height="gp1"`. The value
/// is parsed as JSON and taken as a string if that fails.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override key {key:?} is malformed")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(map) => map,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().unwrap()
            }
            _ => return Err(Error::Config(format!("override {key:?}: {:?} is not an object", parts[..i].join(".")))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("key has at least one part")
}
