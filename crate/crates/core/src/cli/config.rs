//! Run configuration, read from a single TOML document.
//!
//! Every section has defaults, so a config only needs the keys it changes.
//! Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::MsArFitOptions;
use crate::economics::CostModel;
use crate::error::{Error, Result};
use crate::market_data::CsvSchema;
use crate::metrics::MetricOptions;
use crate::models::OUParams;
use crate::numeric::HOURS_PER_YEAR;
use crate::pricing::{ContractTerms, SweepGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed for every stochastic step.
    pub seed: u64,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub contract: ContractConfig,
    pub costs: CostsConfig,
    pub metrics: MetricsConfig,
    pub sensitivity: SweepGrid,
    pub crm: CrmConfig,
    /// Not part of the fingerprint: two runs differing only in where they
    /// write must produce identical reports.
    #[serde(skip_serializing)]
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            contract: ContractConfig::default(),
            costs: CostsConfig::default(),
            metrics: MetricsConfig::default(),
            sensitivity: SweepGrid::default(),
            crm: CrmConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Single price file.
    pub path: Option<PathBuf>,
    /// Zonal files averaged with constant load weights.
    pub zones: Vec<ZoneConfig>,
    /// Built-in synthetic series instead of a file.
    pub synthetic: Option<SyntheticConfig>,
    pub schema: CsvSchema,
    /// Bucket-average to this resolution after loading.
    pub resample_hours: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneConfig {
    pub id: String,
    pub path: PathBuf,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    GermanyProxy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub kind: SyntheticKind,
    pub hours: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ou,
    OuJump,
    GarchJump,
    #[default]
    MrsmOu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "type")]
    pub kind: ModelKind,
    /// Regime count; chosen by the k-means elbow when absent.
    pub regimes: Option<usize>,
    pub k_max: usize,
    pub window_days: f64,
    /// Autoregressive order of the switching model.
    pub order: usize,
    pub n_starts: usize,
    pub jump_threshold: f64,
    /// Replaces the fitted per-regime OU parameters (the fitted transition
    /// matrix is kept).
    pub per_regime: Option<Vec<OUParams>>,
    pub n_paths: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::MrsmOu,
            regimes: None,
            k_max: 6,
            window_days: 7.0,
            order: 2,
            n_starts: MsArFitOptions::default().n_starts,
            jump_threshold: 4.0,
            per_regime: None,
            n_paths: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractConfig {
    #[serde(rename = "T")]
    pub t: f64,
    pub tau: f64,
    pub dt_hours: f64,
    /// Strike; taken as the `alpha` quantile of the data when absent.
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub alpha: f64,
    pub r: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub pre_steps: Option<usize>,
    /// Initial price and regime; default to the last fitted observation.
    pub s0: Option<f64>,
    pub r0: Option<usize>,
}

impl Default for ContractConfig {
    fn default() -> Self {
        Self {
            t: 1.0,
            tau: 1.0,
            dt_hours: 1.0,
            k: None,
            alpha: 0.95,
            r: 0.0,
            q: 1.0,
            pre_steps: None,
            s0: None,
            r0: None,
        }
    }
}

impl ContractConfig {
    pub fn dt_years(&self) -> f64 {
        self.dt_hours / HOURS_PER_YEAR
    }

    pub fn terms(&self, k: f64) -> Result<ContractTerms> {
        let terms = ContractTerms {
            t: self.t,
            tau: self.tau,
            dt: self.dt_years(),
            k,
            k_schedule: None,
            r: self.r,
            q: self.q,
            pre_steps: self.pre_steps,
        };
        terms.validate()?;
        Ok(terms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostsConfig {
    pub capex: f64,
    pub om: f64,
    pub cone: Option<f64>,
    pub as_revenue: f64,
    pub tau_max: u32,
}

impl Default for CostsConfig {
    fn default() -> Self {
        Self {
            capex: 0.0,
            om: 0.0,
            cone: None,
            as_revenue: 0.0,
            tau_max: 30,
        }
    }
}

impl CostsConfig {
    pub fn cost_model(&self) -> CostModel {
        CostModel {
            capex: self.capex,
            om: self.om,
            cone: self.cone,
            as_revenue: self.as_revenue,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub alpha_tail: f64,
    pub kl_weight: f64,
    /// Simulated paths per candidate, each as long as the data.
    pub sim_paths: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        let m = MetricOptions::default();
        Self {
            alpha_tail: m.alpha_tail,
            kl_weight: m.kl_weight,
            sim_paths: 4,
        }
    }
}

impl MetricsConfig {
    pub fn options(&self) -> MetricOptions {
        MetricOptions {
            alpha_tail: self.alpha_tail,
            kl_weight: self.kl_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrmConfig {
    /// Capacity payment per MW; the RO premium when absent.
    pub capacity_payment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Decimals written for prices in CSV artifacts.
    pub csv_decimals: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("relopt-out"),
            csv_decimals: 10,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Sets `a.b.c = value` in a TOML document; `value` is parsed as a TOML
/// value and taken as a string when that fails.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{assignment}` is not key=value")))?;
    let value: toml::Value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| config_err(format!("`{p}` in `{key}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e| config_err(format!("{e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(format!("{e}")))
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.data.path.as_mut() {
            fix(p);
        }
        for z in &mut self.data.zones {
            fix(&mut z.path);
        }
        fix(&mut self.output.directory);
    }

    /// Checks every section against the invariants of the types it feeds.
    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        let sources = d.path.is_some() as usize + (!d.zones.is_empty()) as usize + d.synthetic.is_some() as usize;
        if sources > 1 {
            return Err(config_err("data: give only one of `path`, `zones`, `synthetic`"));
        }
        for p in d.path.iter().chain(d.zones.iter().map(|z| &z.path)) {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "data file not found"),
                ));
            }
        }
        if d.zones.iter().any(|z| !(z.weight.is_finite() && z.weight >= 0.0)) {
            return Err(config_err("data.zones: weights must be >= 0"));
        }
        if let Some(s) = &d.synthetic {
            if s.hours < 2 {
                return Err(config_err("data.synthetic.hours must be >= 2"));
            }
        }
        if let Some(h) = d.resample_hours {
            if !(h > 0.0 && h.is_finite()) {
                return Err(config_err("data.resample_hours must be > 0"));
            }
        }

        let m = &self.model;
        if m.n_paths < 2 {
            return Err(config_err("model.n_paths must be >= 2"));
        }
        if !(1..=4).contains(&m.order) {
            return Err(config_err("model.order must lie in 1..=4"));
        }
        if m.regimes == Some(0) || m.k_max < 2 || m.n_starts == 0 {
            return Err(config_err("model.regimes, model.k_max and model.n_starts must be positive (k_max >= 2)"));
        }
        if !(m.window_days > 0.0) || !(m.jump_threshold >= 2.0) {
            return Err(config_err("model.window_days must be > 0 and model.jump_threshold >= 2"));
        }
        if let Some(pr) = &m.per_regime {
            if m.kind != ModelKind::MrsmOu {
                return Err(config_err("model.per_regime only applies to mrsm_ou"));
            }
            if let Some(r) = m.regimes {
                if r != pr.len() {
                    return Err(config_err("model.per_regime length must equal model.regimes"));
                }
            }
            for p in pr {
                p.validate()?;
            }
        }

        let c = &self.contract;
        if !(c.alpha > 0.0 && c.alpha < 1.0) {
            return Err(config_err("contract.alpha must lie in (0, 1)"));
        }
        if !(c.dt_hours > 0.0) {
            return Err(config_err("contract.dt_hours must be > 0"));
        }
        c.terms(c.k.unwrap_or(0.0))?;

        self.costs.cost_model().validate()?;
        if self.costs.tau_max < 1 {
            return Err(config_err("costs.tau_max must be >= 1"));
        }

        let mt = &self.metrics;
        if !(mt.alpha_tail > 0.0 && mt.alpha_tail < 1.0) || !(mt.kl_weight >= 1.0) || mt.sim_paths == 0 {
            return Err(config_err("metrics: need 0 < alpha_tail < 1, kl_weight >= 1, sim_paths >= 1"));
        }

        let g = &self.sensitivity;
        let all_pos = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if !all_pos(&g.tau) || !g.r.iter().all(|x| x.is_finite() && *x >= 0.0) || !g.k.iter().all(|x| x.is_finite()) {
            return Err(config_err("sensitivity: tau > 0, r >= 0, K finite"));
        }
        if !g.t.iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(config_err("sensitivity: T >= 0"));
        }
        if let Some(mp) = self.crm.capacity_payment {
            if !(mp.is_finite() && mp >= 0.0) {
                return Err(config_err("crm.capacity_payment must be >= 0"));
            }
        }
        Ok(())
    }

    /// Hash of the resolved config (output location excluded).
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).unwrap_or_default();
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_valid() {
        let c = RunConfig::from_toml("", &[]).unwrap();
        c.validate().unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn overrides_set_nested_keys() {
        let c = RunConfig::from_toml(
            "[contract]\nK = 150.0\n",
            &["contract.K=120".into(), "model.type=ou".into(), "seed=7".into()],
        )
        .unwrap();
        assert_eq!(c.contract.k, Some(120.0));
        assert_eq!(c.model.kind, ModelKind::Ou);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = RunConfig::from_toml("[contract]\nstrike = 1\n", &[]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn invariant_violations_rejected() {
        for o in ["contract.tau=0", "contract.r=-0.1", "metrics.kl_weight=0.5", "costs.capex=-1", "model.order=7"] {
            let c = RunConfig::from_toml("", &[o.into()]).unwrap();
            assert!(c.validate().is_err(), "{o}");
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let c = RunConfig::from_toml("[data]\npath = \"/nonexistent/prices.csv\"\n", &[]).unwrap();
        let e = c.validate().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("/nonexistent/prices.csv"));
    }

    #[test]
    fn fingerprint_ignores_output_dir() {
        let a = RunConfig::from_toml("[output]\ndirectory = \"a\"\n", &[]).unwrap();
        let b = RunConfig::from_toml("[output]\ndirectory = \"b\"\n", &[]).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = RunConfig::from_toml("seed = 1\n", &[]).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
