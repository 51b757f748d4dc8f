//! Dephasing bound factors for a 20-site chain with λ = 0.1, for ohmic and
//! superohmic baths at a cold and an intermediate temperature.

use std::path::{Path, PathBuf};

use otoc_core::bath::{DMethod, SpectralDensity, ThermalContext};
use otoc_core::bounds::{bound_series, bound_series_with_method, BoundParams, BoundSeries};
use rayon::prelude::*;
use serde_json::json;

use crate::error::CliError;
use crate::output::{bound_csv, write_atomic, Provenance};

pub const SITES: usize = 20;
pub const COUPLING: f64 = 0.1;
pub const T_MAX: f64 = 10.0;
pub const POINTS: usize = 101;

/// One panel: file stem, spectral exponent, k_BT/Λ and an optional forced
/// D(t) method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Panel {
    pub name: &'static str,
    pub s: f64,
    pub temperature: f64,
    pub method: Option<DMethod>,
}

pub const PANELS: [Panel; 4] = [
    Panel { name: "s1_lowT", s: 1.0, temperature: 1e-2, method: None },
    Panel { name: "s1_midT", s: 1.0, temperature: 1.0, method: None },
    Panel { name: "s3_lowT", s: 3.0, temperature: 1e-2, method: None },
    Panel { name: "s3_midT", s: 3.0, temperature: 1.0, method: None },
];

/// The ohmic low-temperature logarithm applied outside its regime, for
/// comparison with the quadrature panel at k_BT = Λ.
pub const LOG_FORM_PANEL: Panel =
    Panel { name: "s1_midT_lowT_form", s: 1.0, temperature: 1.0, method: Some(DMethod::LowTemperatureLog) };

pub fn grid() -> Vec<f64> {
    (0..POINTS).map(|k| if k + 1 == POINTS { T_MAX } else { T_MAX * k as f64 / (POINTS - 1) as f64 }).collect()
}

impl Panel {
    pub fn params(&self) -> Result<BoundParams, CliError> {
        Ok(BoundParams::new(
            COUPLING,
            SITES,
            SpectralDensity::new(self.s, 1.0)?,
            ThermalContext::from_temperature(self.temperature)?,
        )?)
    }

    pub fn series(&self) -> Result<BoundSeries, CliError> {
        let params = self.params()?;
        let times = grid();
        Ok(match self.method {
            Some(m) => bound_series_with_method(&params, &times, m)?,
            None => bound_series(&params, &times)?,
        })
    }

    fn csv(&self, series: &BoundSeries) -> String {
        let mut p = Provenance::new();
        p.push("panel", self.name)
            .push("sites", SITES.to_string())
            .push("coupling", COUPLING.to_string())
            .push("s", self.s.to_string())
            .push("cutoff", "1")
            .push("temperature", self.temperature.to_string())
            .push("grid", format!("t in [0, {T_MAX}] with {POINTS} points"))
            .push("d_method", series.method.as_str());
        bound_csv(series, &p)
    }
}

/// Writes every panel into `out_dir` and returns the summary.
pub fn write_all(out_dir: &Path) -> Result<serde_json::Value, CliError> {
    let panels: Vec<Panel> = PANELS.iter().copied().chain([LOG_FORM_PANEL]).collect();
    let results: Vec<(Panel, BoundSeries)> = panels
        .par_iter()
        .map(|p| p.series().map(|s| (*p, s)))
        .collect::<Result<_, CliError>>()?;
    let mut files = Vec::new();
    for (panel, series) in &results {
        let path: PathBuf = out_dir.join(format!("{}.csv", panel.name));
        write_atomic(&path, &panel.csv(series))?;
        files.push(json!({ "file": path.display().to_string(), "d_method": series.method.as_str() }));
    }
    Ok(json!({ "status": "ok", "command": "figure2", "sites": SITES, "coupling": COUPLING, "files": files }))
}
