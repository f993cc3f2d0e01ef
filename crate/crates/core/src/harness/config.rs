use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{ColumnMapping, SynthSpec};
use crate::error::{Error, Result};
use crate::kernel::{GradientMode, Hyperparams, PredictionRule};
use crate::metrics::{ContextSourceKind, EvalOptions};
use crate::trainers::{Algorithm, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    File,
    #[default]
    Synthetic,
}

/// `[data]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    /// CSV path for `source = "file"`, relative to the config file.
    pub path: Option<PathBuf>,
    pub columns: ColumnMapping,
    pub synthetic: SynthSpec,
    pub test_fraction: f64,
    pub split_seed: u64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: DataSource::Synthetic,
            path: None,
            columns: ColumnMapping::default(),
            synthetic: SynthSpec::default(),
            test_fraction: 0.2,
            split_seed: 1,
        }
    }
}

/// Per-algorithm settings layered over `[model]` and `[train]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub gamma: Option<f64>,
    pub sigma_u: Option<f64>,
    pub sigma_v: Option<f64>,
    pub k: Option<usize>,
    pub prediction_rule: Option<PredictionRule>,
    pub gradient_mode: Option<GradientMode>,
    pub epochs: Option<usize>,
    pub init_scale: Option<f64>,
}

/// `[train]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub algorithms: Vec<Algorithm>,
    pub epochs: usize,
    pub init_scale: f64,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    /// Applies to powermat only.
    pub rating_blind: bool,
    pub overrides: BTreeMap<Algorithm, Overrides>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            algorithms: Algorithm::ALL.to_vec(),
            epochs: 20,
            init_scale: 1.0,
            init_seed: 2,
            shuffle_seed: 3,
            rating_blind: false,
            overrides: BTreeMap::new(),
        }
    }
}

/// `[sweep]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub gammas: Vec<f64>,
    /// Run sweep cells on a thread pool.
    pub parallel: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            gammas: default_gamma_grid(),
            parallel: true,
        }
    }
}

/// `[eval]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k_rec: usize,
    pub context_source: ContextSourceKind,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            k_rec: 10,
            context_source: ContextSourceKind::PerUserLast,
        }
    }
}

/// `[output]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Relative to the config file.
    pub dir: PathBuf,
    /// Write wall-clock timings; off keeps report files byte-reproducible.
    pub record_timing: bool,
    /// Save a model snapshot per algorithm on single runs.
    pub save_models: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            record_timing: false,
            save_models: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSection,
    pub model: Hyperparams,
    pub train: TrainSection,
    pub sweep: SweepSection,
    pub eval: EvalSection,
    pub output: OutputSection,
}

/// Eight log-spaced step sizes from 1e-4 to 3e-1.
pub fn default_gamma_grid() -> Vec<f64> {
    let (lo, hi) = (1e-4f64.log10(), 0.3f64.log10());
    (0..8)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / 7.0))
        .collect()
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a config file; relative data and output paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &config.data.path {
            if p.is_relative() {
                config.data.path = Some(base.join(p));
            }
        }
        if config.output.dir.is_relative() {
            config.output.dir = base.join(&config.output.dir);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm must be selected".into()));
        }
        if self.data.source == DataSource::File && self.data.path.is_none() {
            return Err(Error::Config("data.path is required when data.source = \"file\"".into()));
        }
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return Err(Error::Config("data.test_fraction must be in (0, 1)".into()));
        }
        if self.data.source == DataSource::File && self.data.columns.r_max != self.model.r_max {
            return Err(Error::Config(format!(
                "data.columns.r_max ({}) and model.r_max ({}) disagree",
                self.data.columns.r_max, self.model.r_max
            )));
        }
        if self.eval.k_rec == 0 {
            return Err(Error::Config("eval.k_rec must be >= 1".into()));
        }
        validate_grid(&self.sweep.gammas)?;
        for alg in &self.train.algorithms {
            self.train_config(*alg)?.validate()?;
        }
        Ok(())
    }

    /// Training settings for one algorithm with its overrides applied.
    pub fn train_config(&self, algorithm: Algorithm) -> Result<TrainConfig> {
        let mut hyper = self.model.clone();
        let mut epochs = self.train.epochs;
        let mut init_scale = self.train.init_scale;
        if let Some(o) = self.train.overrides.get(&algorithm) {
            hyper.gamma = o.gamma.unwrap_or(hyper.gamma);
            hyper.sigma_u = o.sigma_u.unwrap_or(hyper.sigma_u);
            hyper.sigma_v = o.sigma_v.unwrap_or(hyper.sigma_v);
            hyper.k = o.k.unwrap_or(hyper.k);
            hyper.prediction_rule = o.prediction_rule.unwrap_or(hyper.prediction_rule);
            hyper.gradient_mode = o.gradient_mode.unwrap_or(hyper.gradient_mode);
            epochs = o.epochs.unwrap_or(epochs);
            init_scale = o.init_scale.unwrap_or(init_scale);
        }
        Ok(TrainConfig {
            algorithm,
            epochs,
            shuffle_seed: self.train.shuffle_seed,
            init_seed: self.train.init_seed,
            init_scale,
            hyper,
            rating_blind: self.train.rating_blind && algorithm == Algorithm::PowerMat,
        })
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            k_rec: self.eval.k_rec,
            context_source: self.eval.context_source,
        }
    }

    /// Replaces the split, init and shuffle seeds.
    pub fn override_seed(&mut self, seed: u64) {
        self.data.split_seed = seed;
        self.train.init_seed = seed;
        self.train.shuffle_seed = seed;
    }
}

pub(crate) fn validate_grid(gammas: &[f64]) -> Result<()> {
    if gammas.is_empty() {
        return Err(Error::Config("sweep.gammas must not be empty".into()));
    }
    if gammas.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(Error::Config("sweep.gammas must be strictly positive".into()));
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("sweep.gammas must be strictly increasing".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid() {
        let g = default_gamma_grid();
        assert_eq!(g.len(), 8);
        assert!((g[0] - 1e-4).abs() < 1e-15);
        assert!((g[7] - 0.3).abs() < 1e-12);
        assert!(validate_grid(&g).is_ok());
        // log-spaced: constant ratio
        let r = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-9));
    }

    #[test]
    fn parses_sections_and_overrides() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [data]
            source = "synthetic"
            test_fraction = 0.25
            [data.synthetic]
            n_events = 500
            [model]
            gamma = 0.02
            k = 4
            [train]
            algorithms = ["powermat", "classic_mf"]
            epochs = 7
            [train.overrides.powermat]
            gamma = 0.0001
            prediction_rule = "power"
            [sweep]
            gammas = [0.001, 0.01]
            [output]
            dir = "results"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.data.synthetic.n_events, 500);
        let pm = cfg.train_config(Algorithm::PowerMat).unwrap();
        assert_eq!(pm.hyper.gamma, 0.0001);
        assert_eq!(pm.hyper.prediction_rule, PredictionRule::Power);
        assert_eq!(pm.hyper.k, 4);
        assert_eq!(pm.epochs, 7);
        let mf = cfg.train_config(Algorithm::ClassicMf).unwrap();
        assert_eq!(mf.hyper.gamma, 0.02);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml_str("[train]\nalgorithms = []").is_err());
        assert!(ExperimentConfig::from_toml_str("[sweep]\ngammas = [0.1, 0.01]").is_err());
        assert!(ExperimentConfig::from_toml_str("[sweep]\ngammas = [0.0, 0.01]").is_err());
        assert!(ExperimentConfig::from_toml_str("[data]\nsource = \"file\"").is_err());
        assert!(ExperimentConfig::from_toml_str("[model]\nbogus = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("[train]\nepochs = 0").is_err());
        assert!(
            ExperimentConfig::from_toml_str("[train]\nalgorithms = [\"dotmat\"]\nrating_blind = true").is_ok(),
            "rating_blind only binds powermat"
        );
    }
}
