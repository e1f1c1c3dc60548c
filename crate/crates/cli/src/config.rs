use std::path::{Path, PathBuf};

use canopy::cluster::DEFAULT_CLUSTERS;
use canopy::gboost::{GbmHyperparams, DEFAULT_SPLIT};
use canopy::synth::SynthSeasonSpec;
use canopy::{Error, FeatureSchema, MergeWindows, Result, SegmentationParams};
use serde::{Deserialize, Serialize};

/// Point classification method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Kmeans,
    Gbm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Kmeans => "kmeans",
            Method::Gbm => "gbm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmeansConfig {
    pub n_clusters: usize,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        KmeansConfig {
            n_clusters: DEFAULT_CLUSTERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbmConfig {
    /// Trained model to load for classification.
    pub model_path: Option<PathBuf>,
    pub hyperparams: GbmHyperparams,
    /// Fraction of each class used for training; the rest is the test set.
    pub train_fraction: f64,
    /// Explicit hyperparameter grid for `train`.
    pub grid: Vec<GbmHyperparams>,
    /// Use the built-in one-at-a-time grid around `hyperparams`.
    pub sweep: bool,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            model_path: None,
            hyperparams: GbmHyperparams::default(),
            train_fraction: DEFAULT_SPLIT,
            grid: Vec::new(),
            sweep: false,
        }
    }
}

/// Height band used for validation against deleafing ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Band {
    pub low_m: f64,
    pub high_m: f64,
}

impl Default for Band {
    fn default() -> Self {
        Band { low_m: 1.65, high_m: 2.65 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub warmup_runs: usize,
    pub runs: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig { warmup_runs: 1, runs: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads for per-tree work; 0 picks the number of CPUs.
    pub workers: usize,
    /// Segment raw clouds before classification.
    pub segment_input: bool,
    pub segmentation: SegmentationParams,
    pub windows: MergeWindows,
    pub schema: FeatureSchema,
    pub kmeans: KmeansConfig,
    pub gbm: GbmConfig,
    pub band: Band,
    pub timing: TimingConfig,
    pub synth: SynthSeasonSpec,
    /// Labeled points per class written by `synth`.
    pub synth_labels_per_class: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Kmeans,
            seed: 0,
            out_dir: PathBuf::from("out"),
            workers: 0,
            segment_input: true,
            segmentation: SegmentationParams::default(),
            windows: MergeWindows::default(),
            schema: FeatureSchema::default(),
            kmeans: KmeansConfig::default(),
            gbm: GbmConfig::default(),
            band: Band::default(),
            timing: TimingConfig::default(),
            synth: SynthSeasonSpec::default(),
            synth_labels_per_class: 60,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("config: {m}")));
        self.segmentation.validate()?;
        self.windows.validate()?;
        self.schema.validate()?;
        self.gbm.hyperparams.validate()?;
        for hp in &self.gbm.grid {
            hp.validate()?;
        }
        if self.kmeans.n_clusters == 0 {
            return bad("kmeans.n_clusters must be positive");
        }
        if !(self.gbm.train_fraction > 0.0 && self.gbm.train_fraction <= 1.0) {
            return bad("gbm.train_fraction must be in (0, 1]");
        }
        if !(self.band.low_m.is_finite() && self.band.high_m.is_finite() && self.band.low_m < self.band.high_m) {
            return bad("band.low_m must be below band.high_m");
        }
        if self.timing.runs == 0 {
            return bad("timing.runs must be positive");
        }
        Ok(())
    }
}
