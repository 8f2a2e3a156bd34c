//! Task bodies shared by the pipeline runner and the standalone CLI verbs.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{OracleConfig, SourceConfig};
use crate::error::{Error, Result};
use crate::merge::{merge, MergeOptions, Strategy};
use crate::metrics::{score_merged, score_tiles, ScoreMode, ScoreReport};
use crate::pipeline::journal::Checkpoints;
use crate::predict::{DirectorySource, LogitSource, OracleSource};
use crate::raster::{
    open_raster, RasterInfo, RasterSource, RawRasterWriter, SampleType, Window,
    DEFAULT_MEMORY_BUDGET,
};
use crate::sampling::{
    class_histograms, sample_weights, split_horizontal, split_manual, DatasetSplit, SplitMethod,
    SplitSpec, TileWeight,
};
use crate::tiling::Dataset;

pub struct Sources {
    pub image: Box<dyn RasterSource>,
    pub labels: Option<Box<dyn RasterSource>>,
}

impl Sources {
    pub fn open(cfg: &SourceConfig) -> Result<Self> {
        if let Some(s) = &cfg.synthetic {
            return Ok(Sources {
                image: Box::new(s.image()?),
                labels: Some(Box::new(s.labels()?)),
            });
        }
        let image = cfg
            .image
            .as_deref()
            .ok_or_else(|| Error::Config("source has no image".into()))?;
        Ok(Sources {
            image: open_raster(image, DEFAULT_MEMORY_BUDGET)?,
            labels: cfg
                .labels
                .as_deref()
                .map(|p| open_raster(p, DEFAULT_MEMORY_BUDGET))
                .transpose()?,
        })
    }

    pub fn labels(&self) -> Option<&dyn RasterSource> {
        self.labels.as_deref()
    }

    /// Explicit GSD, else the synthetic scene's, else the geotransform's pixel width.
    pub fn gsd(&self, cfg: &SourceConfig) -> Option<f64> {
        cfg.gsd
            .or(cfg.synthetic.as_ref().map(|s| s.gsd))
            .or_else(|| {
                self.image
                    .info()
                    .geo
                    .as_ref()
                    .filter(|g| g.is_skew_free())
                    .map(|g| g.pixel_size_x.abs())
            })
    }
}

/// Oversampling weights for the tiles in `indices`.
pub fn compute_weights(ds: &Dataset, indices: &[usize]) -> Result<Vec<TileWeight>> {
    let classes = ds.class_count()? as usize;
    let (per_tile, totals) = class_histograms(indices, classes, |i| ds.label_tile(i))?;
    Ok(indices
        .iter()
        .zip(sample_weights(&per_tile, &totals))
        .map(|(&index, weight)| TileWeight { index, weight })
        .collect())
}

pub fn assign_sets(ds: &Dataset, spec: &SplitSpec, regions: Option<&Path>) -> Result<DatasetSplit> {
    match spec.method {
        SplitMethod::Horizontal => split_horizontal(&ds.grid, spec),
        SplitMethod::Manual => {
            let path = regions
                .ok_or_else(|| Error::Config("manual split needs a region raster".into()))?;
            let r = open_raster(path, DEFAULT_MEMORY_BUDGET)?;
            split_manual(&ds.grid, r.as_ref(), spec)
        }
    }
}

/// Where predictions come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions<'a> {
    Directory(&'a Path),
    Oracle(&'a OracleConfig),
}

pub fn logit_source<'a>(ds: &'a Dataset, p: &Predictions<'_>) -> Result<Box<dyn LogitSource + 'a>> {
    Ok(match p {
        Predictions::Directory(dir) => Box::new(DirectorySource::for_dataset(dir, ds)?),
        Predictions::Oracle(o) => Box::new(OracleSource::new(ds, ds.class_count()?, o.noise_rate, o.seed)?),
    })
}

/// Summary written by the predict-check task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionCheck {
    pub tiles: usize,
    pub class_count: u32,
    pub tile_w: u32,
    pub tile_h: u32,
    pub source: String,
}

/// Confirm that every tile of `ds` has readable logits of the right shape.
pub fn check_predictions(ds: &Dataset, p: &Predictions<'_>) -> Result<PredictionCheck> {
    let src = logit_source(ds, p)?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let missing = src.missing(&all);
    if !missing.is_empty() {
        return Err(Error::Incomplete { missing });
    }
    if let Predictions::Directory(_) = p {
        all.par_iter().try_for_each(|&i| src.logits(i).map(|_| ()))?;
    }
    let (tile_w, tile_h) = src.tile_dims();
    Ok(PredictionCheck {
        tiles: all.len(),
        class_count: src.class_count(),
        tile_w,
        tile_h,
        source: match p {
            Predictions::Directory(d) => d.display().to_string(),
            Predictions::Oracle(o) => format!("oracle noise={} seed={}", o.noise_rate, o.seed),
        },
    })
}

/// Merge predictions for `ds` into a raw class map at `out`.
///
/// When `checkpoints` already records merged rows and `out` exists, the existing
/// file is reopened and only the remaining rows are produced.
pub fn merge_to_file(
    ds: &Dataset,
    src: &dyn LogitSource,
    strategy: Strategy,
    out: &Path,
    checkpoints: &dyn Checkpoints,
    opts: &MergeOptions,
) -> Result<()> {
    if ds.meta.stored_tile.is_some() {
        return Err(Error::Input("resized tiles cannot be merged onto the source grid".into()));
    }
    let info = RasterInfo::new(ds.meta.source_width, ds.meta.source_height, 1, SampleType::U8)
        .with_geo(ds.meta.source_geo.clone());
    let resuming = checkpoints.get(crate::merge::ROWS_CHECKPOINT).is_some() && out.is_file();
    let writer = if resuming {
        RawRasterWriter::resume(out, info)?
    } else {
        RawRasterWriter::create(out, info)?
    };
    merge(strategy, &ds.grid, src, &writer, checkpoints, opts)?;
    writer.finish()
}

/// Which tiles a score covers: a split set, or every tile.
pub fn score_indices(ds: &Dataset, split: Option<&DatasetSplit>, set: &str) -> Result<Vec<usize>> {
    match (split, set) {
        (_, "all") | (None, _) => Ok((0..ds.len()).collect()),
        (Some(s), name) => Ok(s.set(name)?.to_vec()),
    }
}

pub fn score(
    ds: &Dataset,
    mode: ScoreMode,
    indices: &[usize],
    src: Option<&dyn LogitSource>,
    merged: Option<&Path>,
    ground_truth: Option<&dyn RasterSource>,
    excluded: &[u8],
) -> Result<ScoreReport> {
    let classes = ds.class_count()?;
    match mode {
        ScoreMode::TileSummed => {
            let src = src.ok_or_else(|| Error::Config("tile scoring needs predictions".into()))?;
            score_tiles(indices, src, ds, excluded)
        }
        ScoreMode::Merged => {
            let path = merged.ok_or_else(|| Error::Config("merged scoring needs a merged map".into()))?;
            let map = open_raster(path, DEFAULT_MEMORY_BUDGET)?;
            let mosaic;
            let gt = match ground_truth {
                Some(g) => g,
                None => {
                    mosaic = ds.label_mosaic()?;
                    &mosaic as &dyn RasterSource
                }
            };
            let regions: Option<Vec<Window>> = if indices.len() == ds.len() {
                None
            } else {
                Some(indices.iter().map(|&i| ds.grid.window(i)).collect())
            };
            score_merged(map.as_ref(), gt, classes as usize, regions.as_deref(), excluded)
        }
    }
}
