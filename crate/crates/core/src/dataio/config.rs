use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::bench::{BenchConfig, SyntheticSpec};
use crate::clustering::ClusterConfig;
use crate::selection::ScoringConfig;
use crate::tinynet::{HeadSide, TrainerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub features: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Head checkpoint read by `select`; defaults to `<output_dir>/head.ckpt`.
    pub checkpoint: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            features: None,
            manifest: None,
            output_dir: PathBuf::from("out"),
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Mean-matching affine proxy fitted on the source and target features.
    #[default]
    Proxy,
    /// Reconstruction rows referenced by `recon_row` in the manifest.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Proxy blend weight in `[0, 1]`.
    pub lambda: f64,
    /// Domain name of the labeled source samples.
    pub source_domain: String,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Proxy,
            lambda: 1.0,
            source_domain: "source".into(),
        }
    }
}

/// Everything a CLI run needs. Every field has a default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub trainer: TrainerConfig,
    pub clustering: ClusterConfig,
    pub scoring: ScoringConfig,
    /// Head used to embed pool samples at selection time.
    pub embed_side: HeadSide,
    pub provider: ProviderConfig,
    pub synthetic: SyntheticSpec,
    pub bench: BenchConfig,
    /// Worker threads; `None` uses all cores. Results do not depend on it.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let invalid = |e: &dyn std::fmt::Display| DataError::InvalidConfig(e.to_string());
        self.trainer.validate().map_err(|e| invalid(&e))?;
        self.trainer.loss.validate().map_err(|e| invalid(&e))?;
        self.scoring.validate().map_err(|e| invalid(&e))?;
        if self.clustering.k < 1 {
            return Err(DataError::InvalidConfig("clustering.k must be >= 1".into()));
        }
        if !(self.clustering.tol >= 0.0) {
            return Err(DataError::InvalidConfig("clustering.tol must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.provider.lambda) {
            return Err(DataError::InvalidConfig(format!(
                "provider.lambda must lie in [0, 1], got {}",
                self.provider.lambda
            )));
        }
        if self.threads == Some(0) {
            return Err(DataError::InvalidConfig("threads must be >= 1".into()));
        }
        self.synthetic.validate().map_err(|e| invalid(&e))?;
        self.bench.validate().map_err(|e| invalid(&e))?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| DataError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.paths
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.paths.output_dir.join("head.ckpt"))
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, DataError> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| DataError::io(path.as_ref(), e))?;
    RunConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::{CombineMode, UncertaintyMode};

    #[test]
    fn defaults_carry_published_constants() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.trainer.loss.m, 4.0);
        assert_eq!(cfg.trainer.epochs, 200);
        assert_eq!(cfg.trainer.learning_rate, 1e-4);
        assert_eq!(cfg.trainer.d_embed, 256);
        assert_eq!(cfg.clustering.k, 4);
        assert_eq!(cfg.scoring.omega, 1.0);
        assert_eq!(cfg.scoring.uncertainty_mode, UncertaintyMode::PairwiseMin);
        assert_eq!(cfg.scoring.combine_mode, CombineMode::Raw);
        assert_eq!(cfg.provider.kind, ProviderKind::Proxy);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = RunConfig::from_json(
            r#"{"scoring": {"alpha_percent": 30, "uncertainty_mode": "range"},
                "provider": {"kind": "external"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.scoring.alpha_percent, 30.0);
        assert_eq!(cfg.scoring.uncertainty_mode, UncertaintyMode::Range);
        assert_eq!(cfg.scoring.omega, 1.0);
        assert_eq!(cfg.provider.kind, ProviderKind::External);
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        for bad in [
            r#"{"scoring": {"alpha_percent": 100}}"#,
            r#"{"trainer": {"epochs": 0}}"#,
            r#"{"trainer": {"loss": {"m": -1}}}"#,
            r#"{"provider": {"lambda": 2}}"#,
            r#"{"clustering": {"k": 0}}"#,
            r#"{"threads": 0}"#,
        ] {
            assert!(
                matches!(RunConfig::from_json(bad), Err(DataError::InvalidConfig(_))),
                "{bad}"
            );
        }
        assert!(matches!(
            RunConfig::from_json(r#"{"scoring": {"alpah_percent": 20}}"#),
            Err(DataError::Parse(_))
        ));
    }
}
