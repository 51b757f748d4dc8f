//! TOML run configuration.
//!
//! Frequencies are in units of the bath cutoff Λ, temperatures are k_BT/Λ and
//! times are Λt. A complete example:
//!
//! ```toml
//! scheme = "fbte"          # closed | fbte | pbte
//! engine = "exact"         # exact | influence | bound
//! initial_state = "maximally_mixed"   # or "ground", or "basis:01"
//!
//! [chain]
//! sites = 2
//! family = "ising_zz"      # ising_zz | transverse_ising | xxz | custom_diagonal
//! couplings = [1.0]        # one per bond
//! fields = [0.0, 0.0]      # one per site
//!
//! [observables]
//! w = ["x0"]               # Pauli factors as <axis><site>; empty is the identity
//! v = ["x1"]
//!
//! [bath]
//! s = 1.0
//! coupling = 0.2
//! temperature = 1.0        # or beta = ...
//! modes_per_site = 1
//! n_max = 10
//!
//! [grid]
//! t_min = 0.0
//! t_max = 5.0
//! points = 20
//!
//! [truncation]             # optional Fock-cutoff doubling gate
//! ceiling = 40
//!
//! [output]
//! path = "fbte.csv"        # relative to the config file
//! ```

use std::path::{Path, PathBuf};

use otoc_core::bath::{SpectralDensity, ThermalContext};
use otoc_core::model::{
    Axis, BathMode, BathModes, BathSpec, ChainFamily, ObservableSpec, SpinChainSpec, DEFAULT_OMEGA_MAX,
};
use otoc_core::otoc::{Scheme, TruncationGate};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: SchemeName,
    #[serde(default)]
    pub engine: EngineName,
    #[serde(default = "default_initial_state")]
    pub initial_state: String,
    pub chain: ChainConfig,
    #[serde(default)]
    pub observables: ObservablesConfig,
    pub bath: Option<BathConfig>,
    pub grid: GridConfig,
    pub truncation: Option<TruncationConfig>,
    pub output: OutputConfig,
}

fn default_initial_state() -> String {
    "maximally_mixed".into()
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Closed,
    Fbte,
    Pbte,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Closed => Scheme::Closed,
            SchemeName::Fbte => Scheme::Fbte,
            SchemeName::Pbte => Scheme::Pbte,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EngineName {
    #[default]
    Exact,
    Influence,
    Bound,
}

impl EngineName {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineName::Exact => "exact",
            EngineName::Influence => "influence",
            EngineName::Bound => "bound",
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    IsingZz,
    TransverseIsing,
    Xxz,
    CustomDiagonal,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub sites: usize,
    pub family: FamilyName,
    #[serde(default)]
    pub couplings: Vec<f64>,
    #[serde(default)]
    pub fields: Vec<f64>,
    pub transverse: Option<Vec<f64>>,
    pub anisotropy: Option<f64>,
    pub energies: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ObservablesConfig {
    #[serde(default)]
    pub w: Vec<String>,
    #[serde(default)]
    pub v: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    /// The same discrete modes the exact engine uses.
    #[default]
    Discrete,
    /// The continuous spectral density.
    Continuous,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub omega: f64,
    pub coupling: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub s: f64,
    #[serde(default = "one")]
    pub cutoff: f64,
    pub coupling: f64,
    pub site_couplings: Option<Vec<f64>>,
    pub temperature: Option<f64>,
    pub beta: Option<f64>,
    #[serde(default = "one_usize")]
    pub modes_per_site: usize,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    pub modes: Option<Vec<ModeConfig>>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default)]
    pub kernel: KernelName,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_omega_max() -> f64 {
    DEFAULT_OMEGA_MAX
}

fn default_n_max() -> usize {
    10
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    /// Non-convergence is a numerical failure.
    #[default]
    Strict,
    /// Non-convergence is recorded in the output and the summary.
    Report,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub start: Option<usize>,
    pub ceiling: usize,
    #[serde(default = "default_truncation_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub mode: TruncationMode,
}

fn default_truncation_tolerance() -> f64 {
    TruncationGate::DEFAULT_TOLERANCE
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: PathBuf,
}

/// How the chain starts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitialState {
    MaximallyMixed,
    /// Uniform mixture over the lowest eigenspace of H_S.
    Ground,
    /// Computational basis state, one 0/1 digit per site (site 0 first,
    /// 0 ↔ σ_z = +1).
    Basis(Vec<u8>),
}

fn schema(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Schema(format!("{key}: {msg}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Schema(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Schema checks that do not need any numerics.
    fn check(&self) -> Result<(), CliError> {
        self.chain_spec()?;
        self.observables()?;
        self.initial_state()?;
        self.times()?;
        if let Some(b) = &self.bath {
            b.thermal()?;
            b.spectral()?;
        }
        if let Some(t) = &self.truncation {
            if !(t.tolerance > 0.0 && t.tolerance.is_finite()) {
                return Err(schema("truncation.tolerance", "must be > 0"));
            }
            if self.bath.is_none() {
                return Err(schema("truncation", "needs a [bath] section"));
            }
        }
        match (self.engine, Scheme::from(self.scheme), &self.bath) {
            (EngineName::Bound, _, None) => return Err(schema("bath", "the bound engine needs a [bath] section")),
            (EngineName::Influence, Scheme::Closed, _) => {
                return Err(schema("scheme", "the influence engine evaluates fbte or pbte"))
            }
            (_, Scheme::Fbte | Scheme::Pbte, None) => return Err(schema("bath", "open schemes need a [bath] section")),
            _ => {}
        }
        if self.output.path.as_os_str().is_empty() {
            return Err(schema("output.path", "must not be empty"));
        }
        Ok(())
    }

    pub fn chain_spec(&self) -> Result<SpinChainSpec, CliError> {
        let c = &self.chain;
        let unused = |key: &str, present: bool| -> Result<(), CliError> {
            if present {
                Err(schema(&format!("chain.{key}"), format!("not used by family {:?}", c.family)))
            } else {
                Ok(())
            }
        };
        let family = match c.family {
            FamilyName::IsingZz => {
                unused("transverse", c.transverse.is_some())?;
                unused("anisotropy", c.anisotropy.is_some())?;
                unused("energies", c.energies.is_some())?;
                ChainFamily::IsingZz { couplings: c.couplings.clone(), fields: c.fields.clone() }
            }
            FamilyName::TransverseIsing => {
                unused("anisotropy", c.anisotropy.is_some())?;
                unused("energies", c.energies.is_some())?;
                let transverse = c
                    .transverse
                    .clone()
                    .ok_or_else(|| schema("chain.transverse", "required for transverse_ising"))?;
                ChainFamily::TransverseIsing { couplings: c.couplings.clone(), fields: c.fields.clone(), transverse }
            }
            FamilyName::Xxz => {
                unused("transverse", c.transverse.is_some())?;
                unused("energies", c.energies.is_some())?;
                let anisotropy = c.anisotropy.ok_or_else(|| schema("chain.anisotropy", "required for xxz"))?;
                ChainFamily::Xxz { couplings: c.couplings.clone(), anisotropy, fields: c.fields.clone() }
            }
            FamilyName::CustomDiagonal => {
                unused("transverse", c.transverse.is_some())?;
                unused("anisotropy", c.anisotropy.is_some())?;
                unused("couplings", !c.couplings.is_empty())?;
                unused("fields", !c.fields.is_empty())?;
                let energies = c
                    .energies
                    .clone()
                    .ok_or_else(|| schema("chain.energies", "required for custom_diagonal"))?;
                ChainFamily::CustomDiagonal { energies }
            }
        };
        SpinChainSpec::new(c.sites, family).map_err(|e| schema("chain", e))
    }

    pub fn observables(&self) -> Result<(ObservableSpec, ObservableSpec), CliError> {
        let n = self.chain.sites;
        let parse = |key: &str, items: &[String]| -> Result<ObservableSpec, CliError> {
            let mut factors = Vec::with_capacity(items.len());
            for item in items {
                let mut chars = item.chars();
                let axis = chars
                    .next()
                    .and_then(|a| a.to_string().parse::<Axis>().ok())
                    .ok_or_else(|| schema(key, format!("'{item}' must look like x0, y3 or z1")))?;
                let site: usize = chars
                    .as_str()
                    .parse()
                    .map_err(|_| schema(key, format!("'{item}' must look like x0, y3 or z1")))?;
                factors.push((site, axis));
            }
            let spec = ObservableSpec::new(factors);
            spec.validate(n).map_err(|e| schema(key, e))?;
            Ok(spec)
        };
        Ok((parse("observables.w", &self.observables.w)?, parse("observables.v", &self.observables.v)?))
    }

    pub fn initial_state(&self) -> Result<InitialState, CliError> {
        match self.initial_state.as_str() {
            "maximally_mixed" => Ok(InitialState::MaximallyMixed),
            "ground" => Ok(InitialState::Ground),
            other => {
                let bad = || schema("initial_state", format!("expected maximally_mixed, ground or basis:<bits>, got '{other}'"));
                let bits = other.strip_prefix("basis:").ok_or_else(bad)?;
                if bits.len() != self.chain.sites || !bits.bytes().all(|b| b == b'0' || b == b'1') {
                    return Err(schema(
                        "initial_state",
                        format!("basis label needs {} digits of 0/1, got '{bits}'", self.chain.sites),
                    ));
                }
                Ok(InitialState::Basis(bits.bytes().map(|b| b - b'0').collect()))
            }
        }
    }

    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        let g = &self.grid;
        if g.points == 0 {
            return Err(schema("grid.points", "must be >= 1"));
        }
        if !(g.t_min >= 0.0 && g.t_min.is_finite()) {
            return Err(schema("grid.t_min", "must be finite and >= 0"));
        }
        if g.points == 1 {
            return Ok(vec![g.t_min]);
        }
        if !(g.t_max > g.t_min && g.t_max.is_finite()) {
            return Err(schema("grid.t_max", "must exceed grid.t_min when points > 1"));
        }
        let step = (g.t_max - g.t_min) / (g.points - 1) as f64;
        Ok((0..g.points)
            .map(|k| if k + 1 == g.points { g.t_max } else { g.t_min + step * k as f64 })
            .collect())
    }

    /// Output path resolved against the directory of the config file.
    pub fn output_path(&self, config_dir: &Path) -> PathBuf {
        if self.output.path.is_absolute() {
            self.output.path.clone()
        } else {
            config_dir.join(&self.output.path)
        }
    }

    pub fn gate(&self) -> Option<(TruncationGate, TruncationMode)> {
        let t = self.truncation.as_ref()?;
        let start = t.start.unwrap_or(self.bath.as_ref()?.n_max);
        Some((TruncationGate { tolerance: t.tolerance, start, ceiling: t.ceiling }, t.mode))
    }
}

impl BathConfig {
    pub fn thermal(&self) -> Result<ThermalContext, CliError> {
        match (self.temperature, self.beta) {
            (Some(kt), None) => ThermalContext::from_temperature(kt).map_err(|e| schema("bath.temperature", e)),
            (None, Some(b)) => ThermalContext::new(b).map_err(|e| schema("bath.beta", e)),
            _ => Err(schema("bath", "give exactly one of temperature or beta")),
        }
    }

    pub fn spectral(&self) -> Result<SpectralDensity, CliError> {
        SpectralDensity::new(self.s, self.cutoff).map_err(|e| schema("bath.s", e))
    }

    pub fn spec(&self, sites: usize) -> Result<BathSpec, CliError> {
        let modes = match &self.modes {
            Some(list) => BathModes::Explicit(
                list.iter()
                    .map(|m| BathMode::new(m.omega, m.coupling).map_err(|e| schema("bath.modes", e)))
                    .collect::<Result<_, _>>()?,
            ),
            None => BathModes::Discretized { per_site: self.modes_per_site, omega_max: self.omega_max },
        };
        let spec = BathSpec {
            spectral: self.spectral()?,
            coupling: self.coupling,
            site_couplings: self.site_couplings.clone(),
            beta: self.thermal()?.beta(),
            modes,
            n_max: self.n_max,
        };
        spec.validate(sites).map_err(|e| schema("bath", e))?;
        Ok(spec)
    }
}
