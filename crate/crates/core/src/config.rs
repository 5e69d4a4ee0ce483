//! One JSON document configures every stage. A file may hold any subset of
//! the sections; missing keys keep the preset's values.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::presets;
use crate::reference::{DatasetSettings, OptimizerSettings};
use crate::sac::SacConfig;
use crate::transformer::TransformerConfig;
use crate::vehicle::VehicleConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Drives every stage; section-level seeds are overwritten with it.
    pub seed: u64,
    pub vehicle: VehicleConfig,
    pub env: EnvConfig,
    pub optimizer: OptimizerSettings,
    pub dataset: DatasetSettings,
    pub transformer: TransformerConfig,
    pub sac: SacConfig,
    pub sac_toy: SacConfig,
}

impl RunConfig {
    pub fn desk() -> Self {
        RunConfig {
            seed: 0,
            vehicle: VehicleConfig::default(),
            env: EnvConfig::default(),
            optimizer: OptimizerSettings::default(),
            dataset: presets::desk_dataset(),
            transformer: presets::desk_transformer(),
            sac: presets::desk_sac(),
            sac_toy: presets::desk_sac_toy(),
        }
    }

    /// 1,000 references, the published transformer optimizer settings and
    /// 5e6-step SAC with 3×512 networks.
    pub fn full_scale() -> Self {
        RunConfig {
            dataset: presets::full_dataset(),
            transformer: TransformerConfig::default(),
            sac: SacConfig::default(),
            ..RunConfig::desk()
        }
    }

    /// Layers `file` and then `--set path=value` overrides onto `self`.
    /// The file may also be a run manifest, whose embedded config is used.
    pub fn merged(&self, file: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)?;
            let mut doc: Value =
                serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            if doc.get("command").is_some() {
                if let Some(cfg) = doc.get_mut("config") {
                    doc = cfg.take();
                }
            }
            merge(&mut value, doc);
        }
        for s in sets {
            let (path, raw) = s
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("override '{s}' is not of the form key.path=value")))?;
            let v = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut value, path, v)?;
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Copies the top-level seed into every section that carries one.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.optimizer.seed = seed;
        self.dataset.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.env.validate()?;
        self.transformer.validate()?;
        self.sac.validate()?;
        self.sac_toy.validate()
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut Value, path: &str, v: Value) -> Result<()> {
    let mut cur = root;
    for key in path.split('.') {
        cur = match cur {
            Value::Object(m) => m.get_mut(key),
            Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| Error::Format(format!("unknown config key '{path}'")))?;
    }
    *cur = v;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_and_sets_layer_in_order() {
        let dir = std::env::temp_dir().join(format!("tw-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let f = dir.join("c.json");
        std::fs::write(&f, r#"{"env": {"dt": 0.05}, "sac": {"batch": 32}}"#).unwrap();
        let cfg = RunConfig::desk().merged(Some(&f), &["sac.batch=8".into(), "sac.hidden=[4,4]".into()]).unwrap();
        assert_eq!(cfg.env.dt, 0.05);
        assert_eq!(cfg.sac.batch, 8);
        assert_eq!(cfg.sac.hidden, vec![4, 4]);
        assert_eq!(cfg.env.t_max, EnvConfig::default().t_max);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::desk().merged(None, &["sac.bogus=1".into()]).is_err());
        assert!(RunConfig::desk().merged(None, &["nonsense".into()]).is_err());
    }

    #[test]
    fn manifest_config_is_accepted() {
        let dir = std::env::temp_dir().join(format!("tw-config-m-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut cfg = RunConfig::desk();
        cfg.transformer.epochs = 7;
        let doc = serde_json::json!({"command": "train-transformer", "config": cfg});
        let f = dir.join("m.json");
        std::fs::write(&f, doc.to_string()).unwrap();
        assert_eq!(RunConfig::desk().merged(Some(&f), &[]).unwrap(), cfg);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn full_scale_differs_only_in_training_sections() {
        let (d, f) = (RunConfig::desk(), RunConfig::full_scale());
        assert_eq!(d.vehicle, f.vehicle);
        assert_eq!(d.env, f.env);
        assert_eq!(f.sac.total_steps, 5_000_000);
        assert_eq!(f.dataset.n, 1000);
    }
}
