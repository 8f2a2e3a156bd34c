//! Per-tile class confidences ("logits") and where they come from.
//!
//! `.lgt` layout, little-endian: magic `LGT1`, then `u32` height, width and
//! class count, then `h * w * c` `f32` values, row-major with the class index
//! varying fastest.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, IoContext, Result};
use crate::fsutil::write_atomic;
use crate::raster::{RasterSource, SampleType, Window};
use crate::tiling::{Dataset, TileGrid};

pub const LGT_MAGIC: &[u8; 4] = b"LGT1";
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct LogitTile {
    pub index: usize,
    pub height: u32,
    pub width: u32,
    pub classes: u32,
    pub data: Vec<f32>,
}

impl LogitTile {
    pub fn new(index: usize, height: u32, width: u32, classes: u32, data: Vec<f32>) -> Result<Self> {
        if data.len() != height as usize * width as usize * classes as usize {
            return Err(Error::Shape(format!(
                "{} logits for a {height}x{width}x{classes} tile",
                data.len()
            )));
        }
        Ok(LogitTile {
            index,
            height,
            width,
            classes,
            data,
        })
    }

    /// Class scores of pixel `p` (row-major).
    pub fn pixel(&self, p: usize) -> &[f32] {
        let c = self.classes as usize;
        &self.data[p * c..(p + 1) * c]
    }

    /// Pointwise argmax; ties go to the lowest class id.
    pub fn argmax(&self) -> Vec<u8> {
        self.data
            .chunks_exact(self.classes as usize)
            .map(argmax_lowest)
            .collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(LGT_MAGIC);
        for v in [self.height, self.width, self.classes] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(index: usize, bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != LGT_MAGIC {
            return Err(Error::format(path, "missing LGT1 header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let (h, w, c) = (word(0), word(1), word(2));
        let n = h as u64 * w as u64 * c as u64;
        if c == 0 || (bytes.len() - HEADER_LEN) as u64 != n * 4 {
            return Err(Error::format(
                path,
                format!("{h}x{w}x{c} header but {} payload bytes", bytes.len() - HEADER_LEN),
            ));
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(LogitTile {
            index,
            height: h,
            width: w,
            classes: c,
            data,
        })
    }
}

pub(crate) fn argmax_lowest(scores: &[f32]) -> u8 {
    let mut best = 0;
    for (c, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = c;
        }
    }
    best as u8
}

pub fn lgt_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("{index}.lgt"))
}

pub fn write_logits(dir: &Path, tile: &LogitTile) -> Result<()> {
    write_atomic(&lgt_path(dir, tile.index), &tile.encode())
}

/// Read `{index}.lgt` from `dir`.
pub fn load_logits(dir: &Path, index: usize) -> Result<LogitTile> {
    let path = lgt_path(dir, index);
    let bytes = fs::read(&path).at(&path)?;
    LogitTile::decode(index, &bytes, &path)
}

/// A provider of per-tile class confidences over a fixed tile grid.
pub trait LogitSource: Sync {
    fn class_count(&self) -> u32;

    /// Tile size `(w, h)`.
    fn tile_dims(&self) -> (u32, u32);

    fn logits(&self, index: usize) -> Result<LogitTile>;

    /// Indices among `indices` for which no logits can be produced.
    fn missing(&self, indices: &[usize]) -> Vec<usize> {
        let _ = indices;
        Vec::new()
    }

    /// Pointwise argmax restricted to `win`, given in tile pixel coordinates.
    fn argmax_window(&self, index: usize, win: Window) -> Result<Vec<u8>> {
        let tile = self.logits(index)?;
        let c = tile.classes as usize;
        let mut out = Vec::with_capacity(win.pixel_count() as usize);
        for y in win.y..win.bottom() {
            let row = (y * tile.width) as usize;
            for x in win.x..win.right() {
                let p = row + x as usize;
                out.push(argmax_lowest(&tile.data[p * c..(p + 1) * c]));
            }
        }
        Ok(out)
    }
}

/// Logits stored as `{index}.lgt` files, validated against a dataset's grid.
pub struct DirectorySource {
    dir: PathBuf,
    class_count: u32,
    tile: (u32, u32),
}

impl DirectorySource {
    pub fn new(dir: &Path, class_count: u32, tile_dims: (u32, u32)) -> Self {
        DirectorySource {
            dir: dir.to_path_buf(),
            class_count,
            tile: tile_dims,
        }
    }

    pub fn for_dataset(dir: &Path, ds: &Dataset) -> Result<Self> {
        Ok(Self::new(dir, ds.class_count()?, ds.meta.stored_tile_dims()))
    }
}

impl LogitSource for DirectorySource {
    fn class_count(&self) -> u32 {
        self.class_count
    }

    fn tile_dims(&self) -> (u32, u32) {
        self.tile
    }

    fn logits(&self, index: usize) -> Result<LogitTile> {
        let tile = load_logits(&self.dir, index)?;
        if tile.classes != self.class_count {
            return Err(Error::Consistency(format!(
                "{} holds {} classes, dataset has {}",
                lgt_path(&self.dir, index).display(),
                tile.classes,
                self.class_count
            )));
        }
        if (tile.width, tile.height) != self.tile {
            return Err(Error::Consistency(format!(
                "{} is {}x{}, dataset tiles are {}x{}",
                lgt_path(&self.dir, index).display(),
                tile.width,
                tile.height,
                self.tile.0,
                self.tile.1
            )));
        }
        Ok(tile)
    }

    fn missing(&self, indices: &[usize]) -> Vec<usize> {
        indices
            .iter()
            .copied()
            .filter(|&i| !lgt_path(&self.dir, i).is_file())
            .collect()
    }
}

/// Ground-truth label tiles by grid index.
pub trait LabelTiles: Sync {
    fn tile_dims(&self) -> (u32, u32);

    fn label_tile(&self, index: usize) -> Result<Vec<u8>>;

    /// Labels of `win` within tile `index` (tile pixel coordinates).
    fn label_window(&self, index: usize, win: Window) -> Result<Vec<u8>> {
        let (tw, _) = self.tile_dims();
        let full = self.label_tile(index)?;
        let mut out = Vec::with_capacity(win.pixel_count() as usize);
        for y in win.y..win.bottom() {
            let row = (y * tw) as usize;
            out.extend_from_slice(&full[row + win.x as usize..row + win.right() as usize]);
        }
        Ok(out)
    }
}

impl LabelTiles for Dataset {
    fn tile_dims(&self) -> (u32, u32) {
        self.meta.stored_tile_dims()
    }

    fn label_tile(&self, index: usize) -> Result<Vec<u8>> {
        Dataset::label_tile(self, index)
    }
}

impl<T: LabelTiles + ?Sized> LabelTiles for &T {
    fn tile_dims(&self) -> (u32, u32) {
        (**self).tile_dims()
    }

    fn label_tile(&self, index: usize) -> Result<Vec<u8>> {
        (**self).label_tile(index)
    }

    fn label_window(&self, index: usize, win: Window) -> Result<Vec<u8>> {
        (**self).label_window(index, win)
    }
}

/// Label tiles cut on the fly from a label raster.
pub struct RasterTiles<'a> {
    pub labels: &'a dyn RasterSource,
    pub grid: &'a TileGrid,
}

impl<'a> RasterTiles<'a> {
    pub fn new(labels: &'a dyn RasterSource, grid: &'a TileGrid) -> Result<Self> {
        let info = labels.info();
        if (info.width, info.height) != (grid.source_width, grid.source_height)
            || info.bands != 1
            || info.sample_type != SampleType::U8
        {
            return Err(Error::Shape(format!(
                "label raster {}x{}x{} does not fit the {}x{} grid",
                info.width, info.height, info.bands, grid.source_width, grid.source_height
            )));
        }
        Ok(RasterTiles { labels, grid })
    }
}

impl LabelTiles for RasterTiles<'_> {
    fn tile_dims(&self) -> (u32, u32) {
        (self.grid.tile_w, self.grid.tile_h)
    }

    fn label_tile(&self, index: usize) -> Result<Vec<u8>> {
        self.labels.read_window_u8(self.grid.window(index))
    }

    fn label_window(&self, index: usize, win: Window) -> Result<Vec<u8>> {
        let t = self.grid.window(index);
        self.labels.read_window_u8(win.offset(t.x, t.y))
    }
}

/// Logits derived from ground truth: one-hot at the true class, optionally with
/// each pixel independently moved to a uniformly drawn wrong class with
/// probability `noise_rate`.
///
/// Draws are keyed by `(seed, tile index, pixel)`, so any sub-window of a tile
/// sees the same values as the full tile.
pub struct OracleSource<L> {
    labels: L,
    class_count: u32,
    noise_rate: f64,
    seed: u64,
}

impl<L: LabelTiles> OracleSource<L> {
    pub fn new(labels: L, class_count: u32, noise_rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise_rate) {
            return Err(Error::Config(format!("noise rate {noise_rate} outside [0, 1]")));
        }
        if class_count == 0 || class_count > 256 || (noise_rate > 0.0 && class_count < 2) {
            return Err(Error::Config(format!(
                "oracle needs 2..=256 classes for noise, got {class_count}"
            )));
        }
        Ok(OracleSource {
            labels,
            class_count,
            noise_rate,
            seed,
        })
    }

    pub fn labels(&self) -> &L {
        &self.labels
    }

    fn predicted(&self, index: usize, win: Window, truth: &mut [u8]) -> Result<()> {
        if let Some(&bad) = truth.iter().find(|&&c| c as u32 >= self.class_count) {
            return Err(Error::Data {
                tile: format!("tile {index}"),
                reason: format!("class id {bad} outside 0..{}", self.class_count),
            });
        }
        if self.noise_rate == 0.0 {
            return Ok(());
        }
        let (tw, _) = self.labels.tile_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let wrong = self.class_count as u64 - 1;
        // compare in 2^-53 units so p = 1 always fires
        let threshold = (self.noise_rate * (1u64 << 53) as f64) as u64;
        for (r, y) in (win.y..win.bottom()).enumerate() {
            // each pixel owns two u64 draws, i.e. four 32-bit words
            rng.set_word_pos(4 * (y as u128 * tw as u128 + win.x as u128));
            let row = &mut truth[r * win.w as usize..(r + 1) * win.w as usize];
            for c in row.iter_mut() {
                let u = rng.next_u64() >> 11;
                let pick = rng.next_u64();
                if u < threshold || self.noise_rate == 1.0 {
                    let k = (pick % wrong) as u8;
                    *c = if k >= *c { k + 1 } else { k };
                }
            }
        }
        Ok(())
    }
}

impl<L: LabelTiles> LogitSource for OracleSource<L> {
    fn class_count(&self) -> u32 {
        self.class_count
    }

    fn tile_dims(&self) -> (u32, u32) {
        self.labels.tile_dims()
    }

    fn logits(&self, index: usize) -> Result<LogitTile> {
        let (w, h) = self.labels.tile_dims();
        let full = Window { x: 0, y: 0, w, h };
        let classes = self.argmax_window(index, full)?;
        let c = self.class_count as usize;
        let mut data = vec![0f32; classes.len() * c];
        for (p, &k) in classes.iter().enumerate() {
            data[p * c + k as usize] = 1.0;
        }
        LogitTile::new(index, h, w, self.class_count, data)
    }

    fn argmax_window(&self, index: usize, win: Window) -> Result<Vec<u8>> {
        let mut ids = self.labels.label_window(index, win)?;
        self.predicted(index, win, &mut ids)?;
        Ok(ids)
    }
}
