//! Single TOML file covering every stage of the pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{HpssConfig, WaveletConfig};
use crate::curation::{CurationConfig, ImpulsivenessConfig};
use crate::error::{Error, Result};
use crate::filtering::TwoStageParams;
use crate::metrics::{EvalOptions, LossConfig};
use crate::signal::StftConfig;
use crate::synthesis::SceneConfig;

/// Corpus inputs for scene generation. Relative paths are resolved against
/// the directory of the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// JSON list of `{path, label}` background files.
    pub backgrounds: Option<PathBuf>,
    /// JSON list of `{path, label}` impulse files.
    pub impulses: Option<PathBuf>,
    /// Label unification map, JSON or TOML.
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalConfig {
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    pub scene: SceneConfig,
    pub stft: StftConfig,
    pub two_stage: TwoStageParams,
    pub hpss: HpssConfig,
    pub wavelet: WaveletConfig,
    pub loss: LossConfig,
    pub curation: CurationConfig,
    pub impulsiveness: ImpulsivenessConfig,
    pub evaluation: EvalOptions,
    pub paths: PathsConfig,
}

impl GlobalConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.paths.backgrounds, &mut cfg.paths.impulses, &mut cfg.paths.labels]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::invalid_config("threads must be positive"));
        }
        self.scene.validate()?;
        self.stft.validate()?;
        self.two_stage.validate(self.stft.n_fft)?;
        self.hpss.validate()?;
        self.wavelet.validate()?;
        self.loss.validate()?;
        self.curation.validate()?;
        self.impulsiveness.validate()?;
        let w = &self.evaluation.wilcoxon;
        if w.batch_size == 0 || w.n_batches == 0 {
            return Err(Error::invalid_config("wilcoxon batch_size and n_batches must be positive"));
        }
        if !(self.evaluation.activity_pad_s >= 0.0 && self.evaluation.activity_pad_s.is_finite()) {
            return Err(Error::invalid_config("activity_pad_s must be non-negative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        GlobalConfig::default().validate().unwrap();
        assert_eq!(GlobalConfig::from_toml_str("").unwrap(), GlobalConfig::default());
    }

    #[test]
    fn partial_tables_and_unknown_keys() {
        let cfg = GlobalConfig::from_toml_str("threads = 2\n[hpss]\nmargin = 2.0\n[scene]\nseed = 9\n").unwrap();
        assert_eq!(cfg.hpss.margin, 2.0);
        assert_eq!(cfg.scene.seed, 9);
        assert_eq!(cfg.threads, Some(2));
        assert!(GlobalConfig::from_toml_str("[hpss]\nmargn = 2.0\n").is_err());
        assert!(GlobalConfig::from_toml_str("bogus = 1\n").is_err());
        assert!(matches!(
            GlobalConfig::from_toml_str("[hpss]\nmargin = 0.5\n"),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[paths]\nlabels = \"labels.json\"\n").unwrap();
        let cfg = GlobalConfig::from_path(&path).unwrap();
        assert_eq!(cfg.paths.labels.unwrap(), dir.path().join("labels.json"));
    }
}
