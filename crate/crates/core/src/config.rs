//! Run configuration: one JSON document, with dot-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::edl::EgnnConfig;
use crate::epn::ProbeConfig;
use crate::error::{Error, Result};
use crate::gnn::{BaselineConfig, GcnConfig};
use crate::graph::SplitConfig;
use crate::propagation::PropConfig;

/// Parameters of the synthetic CSBM benchmark graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub mu_norm: f64,
    pub id_classes: usize,
    /// Adds one extra class centred at the origin, as the last class index.
    pub include_ood: bool,
    pub n_per_class: usize,
    pub p_in: f64,
    pub p_out: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { dim: 8, mu_norm: 3.0, id_classes: 3, include_ood: true, n_per_class: 200, p_in: 0.05, p_out: 0.005 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// A directory in the `meta.json` / `edges.tsv` / ... layout.
    Directory { path: PathBuf },
    Synthetic(SyntheticConfig),
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self::Synthetic(SyntheticConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ece_bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { ece_bins: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub split: SplitConfig,
    pub backbone: GcnConfig,
    pub probe: ProbeConfig,
    pub egnn: EgnnConfig,
    pub baselines: BaselineConfig,
    pub propagation: PropConfig,
    pub eval: EvalConfig,
    /// Master seed; every random stream of a run is derived from it.
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            split: SplitConfig { ood_classes: vec![3], ..SplitConfig::default() },
            backbone: GcnConfig::default(),
            probe: ProbeConfig::default(),
            egnn: EgnnConfig::default(),
            baselines: BaselineConfig::default(),
            propagation: PropConfig::default(),
            eval: EvalConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::parse("config", e.line(), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Applies `key.path=value` overrides. The value is parsed as JSON when
    /// possible and taken as a string otherwise.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not of the form key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key, value)?;
        }
        let cfg: Self = serde_json::from_value(doc).map_err(|e| Error::Config(format!("after overrides: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.propagation.validate()?;
        let w = &self.probe.weights;
        if w.lambda1 < 0.0 || w.lambda2 < 0.0 {
            return Err(Error::Config("probe loss weights must be nonnegative".into()));
        }
        let p = &self.probe.pcl;
        if !(p.e_id > p.e_ood && p.e_ood >= 0.0) {
            return Err(Error::Config(format!("pcl margins need e_id > e_ood >= 0, got {} and {}", p.e_id, p.e_ood)));
        }
        if !(0.0..1.0).contains(&self.backbone.dropout) || !(0.0..1.0).contains(&self.egnn.gcn.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if self.eval.ece_bins == 0 {
            return Err(Error::Config("eval.ece_bins must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&serde_json::to_value(self).expect("config serializes"))
            .expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {} is not an object", parts[..depth].join("."))))?;
        if depth + 1 == parts.len() {
            if !obj.contains_key(*part) {
                return Err(Error::Config(format!("unknown config key {key:?}")));
            }
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = obj.get_mut(*part).ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
    }
    Err(Error::Config("empty override key".into()))
}

/// Record written next to every run's outputs. It carries no timestamps,
/// so rerunning the same command reproduces it byte for byte.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Output file name to SHA-256 of its contents.
    pub outputs: std::collections::BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            seed,
            outputs: Default::default(),
        }
    }

    pub fn record(&mut self, name: &str, contents: &[u8]) {
        self.outputs.insert(name.to_string(), hex::encode(Sha256::digest(contents)));
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Independent 64-bit seed for the named random stream of a run.
pub fn derive_seed(master: u64, stream: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(stream.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
