use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use had_core::data::DatasetManifest;
use had_core::{
    generate_synthetic, LabeledHypergraphDataset, ModelConfig, SplitConfig, SyntheticConfig,
    TrainConfig,
};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "HAD_OUTPUT_ROOT";

/// Exactly one of `manifest` and `synthetic` must be set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Reads a TOML config; a relative manifest path is resolved against
    /// the config file's directory.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(m) = cfg.dataset.manifest.as_mut() {
            if m.is_relative() {
                *m = path.parent().unwrap_or(Path::new(".")).join(&*m);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset.manifest, &self.dataset.synthetic) {
            (Some(_), Some(_)) => bail!("dataset: give either `manifest` or `synthetic`, not both"),
            (None, None) => {
                bail!("dataset: one of `manifest` or `[dataset.synthetic]` is required")
            }
            _ => {}
        }
        self.model.validate()?;
        self.train.validate()?;
        if self.split.num_folds < 2 {
            bail!("split.num_folds must be >= 2");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load_dataset(&self) -> Result<LabeledHypergraphDataset> {
        match (&self.dataset.manifest, &self.dataset.synthetic) {
            (Some(path), _) => {
                let manifest = DatasetManifest::read(path)?;
                Ok(manifest.load()?)
            }
            (None, Some(syn)) => Ok(generate_synthetic(syn)?),
            (None, None) => bail!("no dataset configured"),
        }
    }

    /// `--out` wins, then `output_dir`, then `$HAD_OUTPUT_ROOT/<stem>/<leaf>`
    /// (default root `had-output`).
    pub fn output_dir(&self, flag: Option<&Path>, config_path: &Path, leaf: &str) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.output_dir {
            return p.clone();
        }
        let root = std::env::var_os(OUTPUT_ROOT_ENV)
            .map_or_else(|| PathBuf::from("had-output"), PathBuf::from);
        let stem = config_path
            .file_stem()
            .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
        root.join(stem).join(leaf)
    }
}
