//! CSV and JSON writers.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::Result;
use crate::mesh::Mesh;

/// 17 significant digits; parses back to the same double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn join_row(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
}

/// Writes `header` followed by `rows`, creating parent directories.
pub fn write_csv<I, S>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{}", row.as_ref())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::from)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    write_csv(path, DiagnosticsRecord::CSV_HEADER, records.iter().map(|r| r.csv_row()))
}

pub const FIELDS_HEADER: &str = "x_node,h0,u0,v0,q,x_elem,h_e,u_e,v_e";

/// Nodal and element values side by side; row `i` holds node `i` and element `i`.
pub struct FieldSnapshot<'a> {
    pub mesh: &'a Mesh,
    pub h0: &'a [f64],
    pub u0: &'a [f64],
    pub v0: &'a [f64],
    pub q: &'a [f64],
    pub h: &'a [f64],
    pub u: &'a [f64],
    pub v: &'a [f64],
}

pub fn write_fields(path: &Path, s: &FieldSnapshot<'_>) -> Result<()> {
    let mid = s.mesh.element_midpoints();
    let x = s.mesh.node_x();
    let rows =
        (0..s.mesh.n()).map(|i| join_row(&[x[i], s.h0[i], s.u0[i], s.v0[i], s.q[i], mid[i], s.h[i], s.u[i], s.v[i]]));
    write_csv(path, FIELDS_HEADER, rows)
}

/// `<dir>/<prefix>_<suffix>`.
pub fn output_path(dir: &Path, prefix: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{prefix}_{suffix}"))
}

/// File-name tag of a sample time.
pub fn time_tag(t: f64) -> String {
    format!("{t:.6}")
}

/// Build and source information for `meta.json`.
pub fn build_info() -> serde_json::Value {
    serde_json::json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "git_commit": option_env!("SPLITFEM_GIT_COMMIT").unwrap_or("unknown"),
        "git_dirty": option_env!("SPLITFEM_GIT_DIRTY").map(|v| v == "true"),
        "profile": if cfg!(debug_assertions) { "debug" } else { "release" },
        "target_arch": std::env::consts::ARCH,
        "target_os": std::env::consts::OS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formatting() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(-0.1), "-1.0000000000000001e-1");
        assert_eq!(time_tag(0.25), "0.250000");
    }

    #[test]
    fn csv_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("a.csv");
        write_csv(&p, "a,b", [join_row(&[1.0, 2.0])]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next(), Some("a,b"));
        assert_eq!(text.lines().count(), 2);
    }

    proptest! {
        #[test]
        fn round_trip(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let back: f64 = fmt_f64(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
