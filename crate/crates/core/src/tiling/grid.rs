use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Window;

/// Sliding-window layout over a raster extent.
///
/// Windows are full-size: the last origin on each axis is clamped to
/// `extent - tile`, so boundary tiles shift inward rather than being padded.
/// Tile indices are row-major over `(ys, xs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileGrid {
    pub tile_w: u32,
    pub tile_h: u32,
    pub stride: f64,
    pub step_x: u32,
    pub step_y: u32,
    pub source_width: u32,
    pub source_height: u32,
    pub xs: Vec<u32>,
    pub ys: Vec<u32>,
}

fn step_for(tile: u32, stride: f64) -> u32 {
    // 1e-9 guards against strides like 0.3 landing just under an integer
    ((tile as f64 * stride) + 1e-9).floor() as u32
}

fn axis_origins(extent: u32, tile: u32, step: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut o = 0u32;
    loop {
        if o as u64 + tile as u64 >= extent as u64 {
            out.push(extent - tile);
            break;
        }
        out.push(o);
        o += step;
    }
    out
}

/// Lay out overlapping tiles with `step = floor(tile * stride)` on each axis.
pub fn plan_grid(width: u32, height: u32, tile_w: u32, tile_h: u32, stride: f64) -> Result<TileGrid> {
    if !(stride > 0.0 && stride <= 1.0) {
        return Err(Error::Config(format!("stride must lie in (0, 1], got {stride}")));
    }
    if tile_w == 0 || tile_h == 0 {
        return Err(Error::Config("tile dimensions must be positive".into()));
    }
    if tile_w > width || tile_h > height {
        return Err(Error::Config(format!(
            "tile {tile_w}x{tile_h} is larger than the {width}x{height} image"
        )));
    }
    let step_x = step_for(tile_w, stride);
    let step_y = step_for(tile_h, stride);
    if step_x == 0 || step_y == 0 {
        return Err(Error::Config(format!(
            "stride {stride} yields a zero pixel step for tile {tile_w}x{tile_h}"
        )));
    }
    Ok(TileGrid {
        tile_w,
        tile_h,
        stride,
        step_x,
        step_y,
        source_width: width,
        source_height: height,
        xs: axis_origins(width, tile_w, step_x),
        ys: axis_origins(height, tile_h, step_y),
    })
}

/// Asymptotic ratio of tile counts at stride `s` versus `s = 1`.
pub fn data_gain(stride: f64) -> Result<f64> {
    if !(stride > 0.0 && stride <= 1.0) {
        return Err(Error::Config(format!("stride must lie in (0, 1], got {stride}")));
    }
    Ok((1.0 / stride).powi(2))
}

impl TileGrid {
    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rows(&self) -> usize {
        self.ys.len()
    }

    pub fn cols(&self) -> usize {
        self.xs.len()
    }

    pub fn row_of(&self, index: usize) -> usize {
        index / self.cols()
    }

    pub fn window(&self, index: usize) -> Window {
        let (r, c) = (index / self.cols(), index % self.cols());
        Window {
            x: self.xs[c],
            y: self.ys[r],
            w: self.tile_w,
            h: self.tile_h,
        }
    }

    pub fn windows(&self) -> impl Iterator<Item = Window> + '_ {
        (0..self.len()).map(|i| self.window(i))
    }

    /// Indices of the tiles in grid row `row`.
    pub fn row_indices(&self, row: usize) -> std::ops::Range<usize> {
        row * self.cols()..(row + 1) * self.cols()
    }

    pub fn overlap_x(&self) -> u32 {
        self.tile_w - self.step_x
    }

    pub fn overlap_y(&self) -> u32 {
        self.tile_h - self.step_y
    }

    pub fn same_layout(&self, other: &TileGrid) -> bool {
        self.xs == other.xs
            && self.ys == other.ys
            && self.tile_w == other.tile_w
            && self.tile_h == other.tile_h
    }
}
