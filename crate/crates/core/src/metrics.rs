//! Per-class IoU and Dice from pixel confusion counts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::predict::{LabelTiles, LogitSource};
use crate::raster::{RasterSource, SampleType, Window};

/// One-vs-rest true positive, false positive and false negative counts per class.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionAccumulator {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
}

impl ConfusionAccumulator {
    pub fn new(class_count: usize) -> Self {
        ConfusionAccumulator {
            tp: vec![0; class_count],
            fp: vec![0; class_count],
            fn_: vec![0; class_count],
        }
    }

    pub fn class_count(&self) -> usize {
        self.tp.len()
    }

    /// Count every pixel of `pred` against `gt`.
    pub fn accumulate(&mut self, pred: &[u8], gt: &[u8]) -> Result<()> {
        if pred.len() != gt.len() {
            return Err(Error::Shape(format!(
                "prediction has {} pixels, ground truth {}",
                pred.len(),
                gt.len()
            )));
        }
        let n = self.class_count();
        // full 256x256 table first, then fold into per-class counts
        let mut table = vec![0u64; 256 * 256];
        for (&p, &g) in pred.iter().zip(gt) {
            table[(p as usize) << 8 | g as usize] += 1;
        }
        for p in 0..256 {
            for g in 0..256 {
                let v = table[p << 8 | g];
                if v == 0 {
                    continue;
                }
                if p >= n || g >= n {
                    return Err(Error::Data {
                        tile: "prediction".into(),
                        reason: format!("class id {} outside 0..{n}", p.max(g)),
                    });
                }
                if p == g {
                    self.tp[p] += v;
                } else {
                    self.fp[p] += v;
                    self.fn_[g] += v;
                }
            }
        }
        Ok(())
    }

    pub fn add(&mut self, other: &ConfusionAccumulator) {
        for (a, b) in [
            (&mut self.tp, &other.tp),
            (&mut self.fp, &other.fp),
            (&mut self.fn_, &other.fn_),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn finalize(&self, mode: ScoreMode) -> ScoreReport {
        self.finalize_excluding(mode, &[])
    }

    /// Scores with `excluded` classes reported but left out of the means.
    pub fn finalize_excluding(&self, mode: ScoreMode, excluded: &[u8]) -> ScoreReport {
        let classes: Vec<ClassScore> = (0..self.class_count())
            .map(|c| {
                let (tp, fp, fn_) = (self.tp[c], self.fp[c], self.fn_[c]);
                let denom = tp + fp + fn_;
                let (iou, dice) = if denom == 0 {
                    (None, None)
                } else {
                    (
                        Some(tp as f64 / denom as f64),
                        Some(2.0 * tp as f64 / (tp + denom) as f64),
                    )
                };
                ClassScore {
                    class: c as u8,
                    iou,
                    dice,
                    tp,
                    fp,
                    fn_,
                }
            })
            .collect();
        let counted: Vec<&ClassScore> = classes
            .iter()
            .filter(|s| s.iou.is_some() && !excluded.contains(&s.class))
            .collect();
        let mean = |f: fn(&ClassScore) -> f64| {
            if counted.is_empty() {
                None
            } else {
                Some(counted.iter().map(|s| f(s)).sum::<f64>() / counted.len() as f64)
            }
        };
        ScoreReport {
            mode,
            miou: mean(|s| s.iou.unwrap_or(0.0)),
            mdice: mean(|s| s.dice.unwrap_or(0.0)),
            excluded: excluded.to_vec(),
            classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    #[serde(alias = "tiles")]
    TileSummed,
    Merged,
}

impl ScoreMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tiles" | "tile-summed" => Some(ScoreMode::TileSummed),
            "merged" => Some(ScoreMode::Merged),
            _ => None,
        }
    }
}

fn round4<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_some(&((x * 1e4).round() / 1e4)),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: u8,
    /// `None` when the class appears in neither prediction nor ground truth.
    #[serde(serialize_with = "round4")]
    pub iou: Option<f64>,
    #[serde(serialize_with = "round4")]
    pub dice: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Contents of `scores.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub mode: ScoreMode,
    #[serde(serialize_with = "round4")]
    pub miou: Option<f64>,
    #[serde(serialize_with = "round4")]
    pub mdice: Option<f64>,
    #[serde(default)]
    pub excluded: Vec<u8>,
    pub classes: Vec<ClassScore>,
}

/// Sum confusion counts over the tiles in `indices`, comparing each tile's
/// pointwise argmax with its label tile.
pub fn accumulate_tiles(
    indices: &[usize],
    src: &dyn LogitSource,
    labels: &dyn LabelTiles,
) -> Result<ConfusionAccumulator> {
    let missing = src.missing(indices);
    if !missing.is_empty() {
        return Err(Error::Incomplete { missing });
    }
    let n = src.class_count() as usize;
    let (w, h) = labels.tile_dims();
    let full = Window { x: 0, y: 0, w, h };
    let parts: Vec<ConfusionAccumulator> = indices
        .par_iter()
        .map(|&i| {
            let pred = src.argmax_window(i, full)?;
            let gt = labels.label_tile(i)?;
            let mut acc = ConfusionAccumulator::new(n);
            acc.accumulate(&pred, &gt).map_err(|e| match e {
                Error::Data { reason, .. } => Error::Data {
                    tile: format!("tile {i}"),
                    reason,
                },
                e => e,
            })?;
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = ConfusionAccumulator::new(n);
    for p in &parts {
        total.add(p);
    }
    Ok(total)
}

pub fn score_tiles(
    indices: &[usize],
    src: &dyn LogitSource,
    labels: &dyn LabelTiles,
    excluded: &[u8],
) -> Result<ScoreReport> {
    Ok(accumulate_tiles(indices, src, labels)?.finalize_excluding(ScoreMode::TileSummed, excluded))
}

/// Confusion counts of a merged map against ground truth, optionally restricted
/// to the union of `regions` (each pixel counted once).
pub fn accumulate_merged(
    map: &dyn RasterSource,
    gt: &dyn RasterSource,
    class_count: usize,
    regions: Option<&[Window]>,
) -> Result<ConfusionAccumulator> {
    let (mi, gi) = (map.info(), gt.info());
    if !mi.same_dims(gi) || mi.bands != 1 || gi.bands != 1 {
        return Err(Error::Shape(format!(
            "map {}x{}x{} vs ground truth {}x{}x{}",
            mi.width, mi.height, mi.bands, gi.width, gi.height, gi.bands
        )));
    }
    if mi.sample_type != SampleType::U8 || gi.sample_type != SampleType::U8 {
        return Err(Error::Input("class maps must be uint8".into()));
    }
    let (w, h) = (mi.width, mi.height);
    let band = 256u32;
    let starts: Vec<u32> = (0..h).step_by(band as usize).collect();
    let parts: Vec<ConfusionAccumulator> = starts
        .par_iter()
        .map(|&y| {
            let win = Window {
                x: 0,
                y,
                w,
                h: band.min(h - y),
            };
            let mut pred = map.read_window_u8(win)?;
            let mut truth = gt.read_window_u8(win)?;
            if let Some(regions) = regions {
                let keep = region_mask(regions, win);
                pred = select(&pred, &keep);
                truth = select(&truth, &keep);
            }
            let mut acc = ConfusionAccumulator::new(class_count);
            acc.accumulate(&pred, &truth)?;
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = ConfusionAccumulator::new(class_count);
    for p in &parts {
        total.add(p);
    }
    Ok(total)
}

fn region_mask(regions: &[Window], band: Window) -> Vec<bool> {
    let mut keep = vec![false; band.pixel_count() as usize];
    for r in regions.iter().filter(|r| r.intersects(&band)) {
        let y0 = r.y.max(band.y);
        let y1 = r.bottom().min(band.bottom());
        let x0 = r.x.max(band.x);
        let x1 = r.right().min(band.right());
        for y in y0..y1 {
            let row = ((y - band.y) * band.w) as usize;
            keep[row + (x0 - band.x) as usize..row + (x1 - band.x) as usize].fill(true);
        }
    }
    keep
}

fn select(v: &[u8], keep: &[bool]) -> Vec<u8> {
    v.iter().zip(keep).filter(|(_, &k)| k).map(|(&x, _)| x).collect()
}

pub fn score_merged(
    map: &dyn RasterSource,
    gt: &dyn RasterSource,
    class_count: usize,
    regions: Option<&[Window]>,
    excluded: &[u8],
) -> Result<ScoreReport> {
    Ok(accumulate_merged(map, gt, class_count, regions)?.finalize_excluding(ScoreMode::Merged, excluded))
}
