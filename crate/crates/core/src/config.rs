//! Every pipeline knob in one serializable structure.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::DatasetConfig;
use crate::error::{Error, Result};
use crate::segmenter::TrainConfig;
use crate::ssm::Retention;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ModelConfig {
    /// Normalize shapes to unit centroid size before the decomposition.
    pub scaling: bool,
    pub retention: Retention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub include_background: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            include_background: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PathConfig {
    pub cohort: Vec<PathBuf>,
    pub mean_labels: Option<PathBuf>,
    pub classes: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub dataset: DatasetConfig,
    pub training: TrainConfig,
    pub eval: EvalConfig,
    pub paths: PathConfig,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!((c.dataset.sigma_lo, c.dataset.sigma_hi), (-2.75, 1.75));
        assert_eq!(c.dataset.n_points, 4096);
        assert_eq!((c.dataset.n_train, c.dataset.n_val, c.dataset.n_test), (8800, 2200, 500));
        assert_eq!(c.training.lr, 1e-3);
        assert_eq!(c.training.batch_size, 12);
        assert!(c.eval.include_background);
        assert!(!c.model.scaling);
    }

    #[test]
    fn file_round_trip() {
        let mut c = PipelineConfig {
            seed: 17,
            ..PipelineConfig::default()
        };
        c.dataset.sigma_lo = -0.1 - 0.2;
        c.training.lr = 3.3e-4;
        c.model.retention = Retention::VarianceFraction { fraction: 0.95 };
        c.paths.cohort = vec!["a.obj".into(), "b.obj".into()];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pipeline.json");
        c.save(&p).unwrap();
        assert_eq!(PipelineConfig::load(&p).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"seed": 4, "dataset": {"n_points": 512}}"#).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.dataset.n_points, 512);
        assert_eq!(c.dataset.n_train, 8800);
    }
}
