//! Run configuration documents for the `train` command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{DataSource, SyntheticSpec};
use crate::error::{Error, Result};
use crate::net::{ArchSpec, ClipMode, QuantConfig};
use crate::quant::{AlphaGradient, QuantScheme};
use crate::train::{Regime, TrainPlan};

/// Environment variable naming the default dataset directory.
pub const DATA_DIR_ENV: &str = "FLEXBITS_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory receiving checkpoints and the metrics log.
    pub output: PathBuf,
    /// Seeds model initialization.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: DataConfig,
    pub model: ModelConfig,
    /// Full-precision pretraining before the regime; absent skips it.
    pub pretrain: Option<TrainPlan>,
    #[serde(default)]
    pub train: TrainPlan,
    pub regime: Regime,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// `synthetic`, `synthetic:<seed>` or a directory of IDX files. Defaults
    /// to `$FLEXBITS_DATA_DIR`, then to the synthetic task.
    pub source: Option<String>,
    /// Generator settings when the source is synthetic.
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// A preset name (`mlp`, `cnn`) or a path to an architecture TOML file.
    pub arch: String,
    pub scheme: QuantScheme,
    pub alpha_init: Option<f64>,
    #[serde(default)]
    pub alpha_gradient: AlphaGradient,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.regime.validate()?;
        self.train.validate()?;
        if let Some(p) = &self.pretrain {
            p.validate()?;
        }
        self.quant_config()?.validate()
    }

    /// Architecture, resolved relative to `base` when given as a path.
    pub fn arch(&self, base: &Path) -> Result<ArchSpec> {
        match ArchSpec::preset(&self.model.arch) {
            Ok(a) => Ok(a),
            Err(_) => {
                let path = base.join(&self.model.arch);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                ArchSpec::from_toml(&text)
            }
        }
    }

    pub fn quant_config(&self) -> Result<QuantConfig> {
        let clip = match self.regime {
            Regime::Joint { scl: true, .. } => ClipMode::Switchable,
            _ => ClipMode::Shared,
        };
        let mut q = QuantConfig::new(self.model.scheme, &self.regime.bit_widths(), clip)?;
        if let Some(a) = self.model.alpha_init {
            q.alpha_init = a;
        }
        q.alpha_gradient = self.model.alpha_gradient;
        Ok(q)
    }

    pub fn data_source(&self) -> DataSource {
        let mut source = resolve_source(self.data.source.as_deref());
        if let (DataSource::Synthetic(spec), Some(custom)) = (&mut source, &self.data.synthetic) {
            let seed = spec.seed;
            *spec = custom.clone();
            if self.data.source.as_deref().is_some_and(|s| s.starts_with("synthetic:")) {
                spec.seed = seed;
            }
        }
        source
    }
}

/// An explicit source, else `$FLEXBITS_DATA_DIR`, else the synthetic task.
pub fn resolve_source(explicit: Option<&str>) -> DataSource {
    match explicit {
        Some(s) => DataSource::parse(s),
        None => match std::env::var(DATA_DIR_ENV) {
            Ok(dir) if !dir.is_empty() => DataSource::Idx(dir.into()),
            _ => DataSource::Synthetic(SyntheticSpec::default()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::BitWidth;

    const EXAMPLE: &str = r#"
output = "runs/cnn"
seed = 3

[data]
source = "synthetic:5"

[model]
arch = "cnn"
scheme = "modified"

[train]
epochs = 2

[regime]
kind = "joint"
bits = [8, 6, 5, 4]
scl = true
"#;

    #[test]
    fn parses_example() {
        let cfg = RunConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(cfg.train.epochs, 2);
        let q = cfg.quant_config().unwrap();
        assert_eq!(q.clip_mode, ClipMode::Switchable);
        assert_eq!(q.max_bits(), BitWidth::new(8).unwrap());
        match cfg.data_source() {
            DataSource::Synthetic(s) => assert_eq!(s.seed, 5),
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.arch(Path::new(".")).unwrap(), ArchSpec::cnn());
    }

    #[test]
    fn rejects_unknown_and_invalid_fields() {
        assert!(RunConfig::from_toml(&EXAMPLE.replace("seed = 3", "seed = 3\nspeed = 1")).is_err());
        assert!(RunConfig::from_toml(&EXAMPLE.replace("bits = [8, 6, 5, 4]", "bits = [8, 9]")).is_err());
        assert!(RunConfig::from_toml(&EXAMPLE.replace("epochs = 2", "epochs = 2\nbatch_size = 0")).is_err());
        assert!(RunConfig::from_toml(&EXAMPLE.replace("scheme = \"modified\"", "scheme = \"floor\"")).is_err());
    }
}
