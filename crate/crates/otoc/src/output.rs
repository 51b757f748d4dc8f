//! CSV emission. Every number is printed with 17 significant digits so a
//! file round-trips bit-exactly, and files are written through a temporary
//! sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use otoc_core::bounds::BoundSeries;
use otoc_core::otoc::{OtocSeries, TruncationReport};

use crate::error::CliError;

pub const OTOC_HEADER: &str = "t,re_F,im_F,abs_F";
pub const BOUND_HEADER: &str = "t,D_t,D_3t,fbte_factor,pbte_factor,diff_bound";

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `# key: value` lines, written in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance(Vec<(String, String)>);

impl Provenance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.0.push((key.to_string(), value.into()));
        self
    }

    fn write_into(&self, out: &mut String) {
        writeln!(out, "# otoc {}", env!("CARGO_PKG_VERSION")).unwrap();
        for (k, v) in &self.0 {
            // keep every entry on one comment line
            let v = v.replace('\n', " ");
            writeln!(out, "# {k}: {v}").unwrap();
        }
    }
}

pub fn truncation_line(report: &TruncationReport) -> String {
    let history: Vec<String> = report.history.iter().map(|(n, d)| format!("{n}:{}", num(*d))).collect();
    format!(
        "n_max={} deviation={} converged={} capped={} history=[{}]",
        report.n_max,
        num(report.deviation),
        report.converged,
        report.capped,
        history.join(" ")
    )
}

pub fn otoc_csv(series: &OtocSeries, provenance: &Provenance) -> String {
    let mut out = String::new();
    provenance.write_into(&mut out);
    out.push_str(OTOC_HEADER);
    out.push('\n');
    for (t, f) in series.times.iter().zip(&series.values) {
        writeln!(out, "{},{},{},{}", num(*t), num(f.re), num(f.im), num(f.norm())).unwrap();
    }
    out
}

pub fn bound_csv(series: &BoundSeries, provenance: &Provenance) -> String {
    let mut out = String::new();
    provenance.write_into(&mut out);
    // one method serves the whole grid
    writeln!(out, "# d_method_per_row: {} (all rows)", series.method.as_str()).unwrap();
    out.push_str(BOUND_HEADER);
    out.push('\n');
    for k in 0..series.times.len() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            num(series.times[k]),
            num(series.d_values[k]),
            num(series.d3_values[k]),
            num(series.fbte_factor[k]),
            num(series.pbte_factor[k]),
            num(series.difference[k].value)
        )
        .unwrap();
    }
    out
}

/// Writes `contents` to a temporary file next to `path`, then renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Schema(format!("cannot create output directory {}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

/// Parses the numeric rows of a CSV written by this module.
pub fn read_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use otoc_core::otoc::Scheme;
    use otoc_core::Complex64;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn otoc_csv_layout() {
        let series = OtocSeries {
            times: vec![0.0, 0.5],
            values: vec![Complex64::new(1.0, 0.0), Complex64::new(0.6, -0.8)],
            scheme: Scheme::Closed,
            truncation: None,
        };
        let mut p = Provenance::new();
        p.push("scheme", "closed");
        let text = otoc_csv(&series, &p);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# otoc "));
        assert_eq!(lines[1], "# scheme: closed");
        assert_eq!(lines[2], OTOC_HEADER);
        let rows = read_rows(&text);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1], vec![0.5, 0.6, -0.8, 1.0]);
    }

    #[test]
    fn atomic_write_replaces_existing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("out.csv");
        write_atomic(&path, "a\n").unwrap();
        write_atomic(&path, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b\n");
        let entries = std::fs::read_dir(path.parent().unwrap()).unwrap().count();
        assert_eq!(entries, 1);
    }
}
