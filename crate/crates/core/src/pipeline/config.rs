//! Declarative pipeline configuration.
//!
//! One TOML document: a `[source]` table plus one table per task. A task runs
//! when its table is present. Relative paths resolve against the config file's
//! directory.
//!
//! ```toml
//! [source]
//! image = "ortho.tif"
//! labels = "labels.tif"
//! class_count = 3
//!
//! [split]
//! tile = 512
//! stride = 0.5
//!
//! [split-set]
//! fractions = [0.7, 0.1, 0.2]
//!
//! [weights]
//!
//! [predict-check]
//! logits = "predictions/"
//!
//! [merge]
//! strategy = "crop"
//!
//! [score]
//! mode = "merged"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::degrade::Method;
use crate::error::{Error, IoContext, Result};
use crate::merge::{Strategy, DEFAULT_CHECKPOINT_EVERY};
use crate::metrics::ScoreMode;
use crate::sampling::{SplitMethod, SplitSpec};
use crate::survey::{Calibration, DEFAULT_SUFFICIENCY_FRACTION};
use crate::synthetic::SceneSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default)]
    pub image: Option<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// Procedural scene used instead of `image`/`labels`.
    #[serde(default)]
    pub synthetic: Option<SceneSpec>,
    #[serde(default)]
    pub class_count: Option<u32>,
    /// Source GSD in m/px; taken from the georeferencing when absent.
    #[serde(default)]
    pub gsd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitTask {
    pub tile: u32,
    #[serde(default = "default_stride")]
    pub stride: f64,
    #[serde(default = "default_quality")]
    pub jpeg_quality: u8,
    #[serde(default)]
    pub after: Vec<String>,
}

fn default_stride() -> f64 {
    0.5
}

fn default_quality() -> u8 {
    90
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSet {
    #[default]
    All,
    Train,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsTask {
    #[serde(default)]
    pub set: WeightSet,
    #[serde(default)]
    pub after: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSetTask {
    #[serde(default = "default_method")]
    pub method: SplitMethod,
    #[serde(default = "default_fractions")]
    pub fractions: [f64; 3],
    #[serde(default = "default_gap")]
    pub gap_rows: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Region raster for the manual method (0 train, 1 val, 2 test).
    #[serde(default)]
    pub regions: Option<PathBuf>,
    #[serde(default)]
    pub after: Vec<String>,
}

fn default_method() -> SplitMethod {
    SplitSpec::default().method
}

fn default_fractions() -> [f64; 3] {
    SplitSpec::default().fractions
}

fn default_gap() -> u32 {
    SplitSpec::default().gap_rows
}

fn default_seed() -> u64 {
    SplitSpec::default().seed
}

impl SplitSetTask {
    pub fn spec(&self) -> SplitSpec {
        SplitSpec {
            method: self.method,
            fractions: self.fractions,
            gap_rows: self.gap_rows,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradeTask {
    pub method: Method,
    pub target_gsd: Vec<f64>,
    #[serde(default)]
    pub after: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictTask {
    /// Directory of `{index}.lgt` files.
    #[serde(default)]
    pub logits: Option<PathBuf>,
    /// Logits derived from the dataset's own labels.
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub after: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeTask {
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_every")]
    pub checkpoint_every: u32,
    #[serde(default)]
    pub after: Vec<String>,
}

fn default_strategy() -> Strategy {
    Strategy::Crop
}

fn default_every() -> u32 {
    DEFAULT_CHECKPOINT_EVERY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreTask {
    #[serde(default = "default_mode")]
    pub mode: ScoreMode,
    /// Split set to score; every tile when no split-set task is configured.
    #[serde(default = "default_score_set")]
    pub set: String,
    #[serde(default)]
    pub exclude: Vec<u8>,
    #[serde(default)]
    pub after: Vec<String>,
}

fn default_mode() -> ScoreMode {
    ScoreMode::Merged
}

fn default_score_set() -> String {
    "test".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanTask {
    pub area_km2: f64,
    pub gsd: f64,
    #[serde(default)]
    pub tile: Option<u32>,
    #[serde(default)]
    pub stride: Option<f64>,
    /// Explicit training-set threshold. Otherwise `fraction` of `reference_tiles`.
    #[serde(default)]
    pub min_train_tiles: Option<usize>,
    #[serde(default)]
    pub reference_tiles: Option<usize>,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default)]
    pub calibration: Calibration,
    #[serde(default)]
    pub after: Vec<String>,
}

fn default_fraction() -> f64 {
    DEFAULT_SUFFICIENCY_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub source: SourceConfig,
    pub split: SplitTask,
    #[serde(default)]
    pub weights: Option<WeightsTask>,
    #[serde(default, rename = "split-set")]
    pub split_set: Option<SplitSetTask>,
    #[serde(default)]
    pub degrade: Option<DegradeTask>,
    #[serde(default, rename = "predict-check")]
    pub predict: Option<PredictTask>,
    #[serde(default)]
    pub merge: Option<MergeTask>,
    #[serde(default)]
    pub score: Option<ScoreTask>,
    #[serde(default)]
    pub plan: Option<PlanTask>,
}

impl PipelineConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.source.image);
        fix(&mut self.source.labels);
        if let Some(s) = &mut self.split_set {
            fix(&mut s.regions);
        }
        if let Some(p) = &mut self.predict {
            fix(&mut p.logits);
        }
    }

    /// Check inputs that can be checked before anything runs.
    pub fn validate(&self) -> Result<()> {
        let src = &self.source;
        match (&src.image, &src.synthetic) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("source sets both `image` and `synthetic`".into()))
            }
            (None, None) => return Err(Error::Config("source needs `image` or `synthetic`".into())),
            (None, Some(s)) => {
                s.validate().map_err(|e| Error::Config(e.to_string()))?;
                if src.labels.is_some() {
                    return Err(Error::Config("synthetic sources carry their own labels".into()));
                }
            }
            (Some(_), None) => {
                if src.class_count.is_none() {
                    return Err(Error::Config("source.class_count is not set".into()));
                }
            }
        }
        for p in [&src.image, &src.labels].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        if let Some(c) = self.class_count() {
            if c == 0 || c > 256 {
                return Err(Error::Config(format!("class count {c} outside 1..=256")));
            }
        }
        if self.split.tile == 0 || !(self.split.stride > 0.0 && self.split.stride <= 1.0) {
            return Err(Error::Config(format!(
                "split needs a positive tile and a stride in (0, 1], got {} and {}",
                self.split.tile, self.split.stride
            )));
        }
        if let Some(s) = &self.split_set {
            s.spec().validate()?;
            if s.method == SplitMethod::Manual && s.regions.is_none() {
                return Err(Error::Config("manual split-set needs a `regions` raster".into()));
            }
        }
        if let Some(p) = &self.predict {
            if p.logits.is_some() == p.oracle.is_some() {
                return Err(Error::Config(
                    "predict-check needs exactly one of `logits` or `oracle`".into(),
                ));
            }
            if p.oracle.is_some() && !self.has_labels() {
                return Err(Error::Config("oracle predictions need source labels".into()));
            }
        }
        if let Some(s) = &self.score {
            if !self.has_labels() {
                return Err(Error::Config("scoring needs source labels".into()));
            }
            if !matches!(s.set.as_str(), "train" | "val" | "test" | "all") {
                return Err(Error::Config(format!("unknown score set `{}`", s.set)));
            }
        }
        if let Some(d) = &self.degrade {
            if d.target_gsd.is_empty() {
                return Err(Error::Config("degrade lists no target GSD".into()));
            }
        }
        if let Some(w) = &self.weights {
            if !self.has_labels() {
                return Err(Error::Config("weights need source labels".into()));
            }
            if w.set == WeightSet::Train && self.split_set.is_none() {
                return Err(Error::Config("train-set weights need a split-set task".into()));
            }
        }
        Ok(())
    }

    pub fn has_labels(&self) -> bool {
        self.source.synthetic.is_some() || self.source.labels.is_some()
    }

    pub fn class_count(&self) -> Option<u32> {
        self.source
            .class_count
            .or(self.source.synthetic.as_ref().map(|s| s.class_count))
    }
}
