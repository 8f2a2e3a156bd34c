//! Class statistics, oversampling weights and spatially contiguous dataset splits.

use num::{BigInt, BigRational, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{RasterSource, SampleType};
use crate::tiling::TileGrid;

/// Per-class pixel tallies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub counts: Vec<u64>,
}

impl ClassHistogram {
    pub fn zeros(class_count: usize) -> Self {
        ClassHistogram {
            counts: vec![0; class_count],
        }
    }

    /// Tally one label tile. `name` identifies the tile in errors.
    pub fn of_tile(ids: &[u8], class_count: usize, name: &str) -> Result<Self> {
        let mut raw = [0u64; 256];
        for &id in ids {
            raw[id as usize] += 1;
        }
        if let Some(bad) = (class_count..256).find(|&c| raw[c] > 0) {
            return Err(Error::Data {
                tile: name.to_string(),
                reason: format!("class id {bad} outside 0..{class_count}"),
            });
        }
        Ok(ClassHistogram {
            counts: raw[..class_count].to_vec(),
        })
    }

    pub fn add(&mut self, other: &ClassHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Histograms of `tiles` (label tiles fetched by index) plus their element-wise sum.
pub fn class_histograms<F>(
    indices: &[usize],
    class_count: usize,
    fetch: F,
) -> Result<(Vec<ClassHistogram>, ClassHistogram)>
where
    F: Fn(usize) -> Result<Vec<u8>> + Sync,
{
    let per_tile: Vec<ClassHistogram> = indices
        .par_iter()
        .map(|&i| ClassHistogram::of_tile(&fetch(i)?, class_count, &format!("tile {i}")))
        .collect::<Result<_>>()?;
    let mut total = ClassHistogram::zeros(class_count);
    for h in &per_tile {
        total.add(h);
    }
    Ok((per_tile, total))
}

/// Oversampling weight of each tile: the sum over classes of the tile's share
/// of that class's pixels. Classes with no pixels contribute nothing.
pub fn sample_weights_exact(per_tile: &[ClassHistogram], totals: &ClassHistogram) -> Vec<BigRational> {
    per_tile
        .iter()
        .map(|h| {
            h.counts
                .iter()
                .zip(&totals.counts)
                .filter(|(_, &t)| t > 0)
                .fold(BigRational::zero(), |acc, (&c, &t)| {
                    acc + BigRational::new(BigInt::from(c), BigInt::from(t))
                })
        })
        .collect()
}

pub fn sample_weights(per_tile: &[ClassHistogram], totals: &ClassHistogram) -> Vec<f64> {
    sample_weights_exact(per_tile, totals)
        .iter()
        .map(|w| w.to_f64().unwrap_or(f64::NAN))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    Horizontal,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub method: SplitMethod,
    /// (train, val, test)
    pub fractions: [f64; 3],
    pub gap_rows: u32,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            method: SplitMethod::Horizontal,
            fractions: [0.7, 0.1, 0.2],
            gap_rows: 1,
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::Config(format!(
                "split fractions must be non-negative, got {:?}",
                self.fractions
            )));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Contents of `split.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub spec: SplitSpec,
}

impl DatasetSplit {
    pub fn set(&self, name: &str) -> Result<&[usize]> {
        match name {
            "train" => Ok(&self.train),
            "val" => Ok(&self.val),
            "test" => Ok(&self.test),
            other => Err(Error::Input(format!("unknown split set `{other}`"))),
        }
    }
}

fn shuffle_train(train: &mut [usize], seed: u64) {
    train.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
}

/// Largest-remainder apportionment of `rows` among the fractions.
fn apportion(rows: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * rows as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = (e + 1e-9).floor() as usize;
    }
    let mut left = rows.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..3).collect();
    // stable sort keeps the earlier set first on equal remainders
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &k in &order {
        if left == 0 {
            break;
        }
        if fractions[k] > 0.0 {
            counts[k] += 1;
            left -= 1;
        }
    }
    counts
}

/// Split tile-grid rows into contiguous bands, top to bottom: train, val, test.
///
/// `gap_rows` whole grid rows are dropped between consecutive non-empty sets.
/// When the gap is positive, further rows are dropped while they would still
/// overlap the previous set's windows, so no train window touches an evaluation
/// window even for small strides or a clamped last row.
pub fn split_horizontal(grid: &TileGrid, spec: &SplitSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    let rows = grid.rows();
    let active = spec.fractions.iter().filter(|&&f| f > 0.0).count();
    let gaps = spec.gap_rows as usize * active.saturating_sub(1);
    if rows < gaps + active {
        return Err(Error::Config(format!(
            "{rows} tile rows cannot hold {active} sets separated by {} gap rows",
            spec.gap_rows
        )));
    }
    let mut counts = apportion(rows - gaps, &spec.fractions);
    for (&fraction, &count) in spec.fractions.iter().zip(&counts) {
        if fraction > 0.0 && count == 0 {
            return Err(Error::Config(format!(
                "fraction {} of {} usable rows rounds to an empty set",
                fraction,
                rows - gaps
            )));
        }
    }

    let mut bands: [Vec<usize>; 3] = Default::default();
    let mut next = 0usize;
    let mut prev_end: Option<usize> = None;
    for k in 0..3 {
        if counts[k] == 0 {
            continue;
        }
        if let Some(end) = prev_end {
            next = end + spec.gap_rows as usize;
            if spec.gap_rows > 0 {
                let bottom = grid.ys[end - 1] + grid.tile_h;
                while next < rows && grid.ys[next] < bottom {
                    next += 1;
                }
            }
        }
        let take = counts[k].min(rows.saturating_sub(next));
        if take == 0 {
            return Err(Error::Config(format!(
                "not enough tile rows left for set {k} after separating gaps"
            )));
        }
        counts[k] = take;
        bands[k] = (next..next + take).collect();
        next += take;
        prev_end = Some(next);
    }

    let tiles_of = |rows: &[usize]| -> Vec<usize> {
        rows.iter().flat_map(|&r| grid.row_indices(r)).collect()
    };
    let mut train = tiles_of(&bands[0]);
    shuffle_train(&mut train, spec.seed);
    Ok(DatasetSplit {
        train,
        val: tiles_of(&bands[1]),
        test: tiles_of(&bands[2]),
        seed: spec.seed,
        spec: spec.clone(),
    })
}

/// Region codes in a manual split raster; any other value marks pixels outside every set.
pub const REGION_TRAIN: u8 = 0;
pub const REGION_VAL: u8 = 1;
pub const REGION_TEST: u8 = 2;

/// Assign each tile to the set owning a strict majority of its pixels in
/// `regions`; tiles without a majority are left out of every set.
pub fn split_manual(grid: &TileGrid, regions: &dyn RasterSource, spec: &SplitSpec) -> Result<DatasetSplit> {
    let info = regions.info();
    if (info.width, info.height) != (grid.source_width, grid.source_height) {
        return Err(Error::Shape(format!(
            "region raster is {}x{}, source is {}x{}",
            info.width, info.height, grid.source_width, grid.source_height
        )));
    }
    if info.bands != 1 || info.sample_type != SampleType::U8 {
        return Err(Error::Shape("region raster must be single-band uint8".into()));
    }
    let owners: Vec<Option<u8>> = (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<Option<u8>> {
            let win = grid.window(i);
            let ids = regions.read_window_u8(win)?;
            let mut tally = [0u64; 3];
            for id in ids {
                if let Some(t) = tally.get_mut(id as usize) {
                    *t += 1;
                }
            }
            let half = win.pixel_count();
            Ok((0..3u8).find(|&k| 2 * tally[k as usize] > half))
        })
        .collect::<Result<_>>()?;
    let pick = |code: u8| -> Vec<usize> {
        owners
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Some(code))
            .map(|(i, _)| i)
            .collect()
    };
    let mut train = pick(REGION_TRAIN);
    shuffle_train(&mut train, spec.seed);
    Ok(DatasetSplit {
        train,
        val: pick(REGION_VAL),
        test: pick(REGION_TEST),
        seed: spec.seed,
        spec: SplitSpec {
            method: SplitMethod::Manual,
            ..spec.clone()
        },
    })
}

/// Entry of `weights.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileWeight {
    pub index: usize,
    pub weight: f64,
}
