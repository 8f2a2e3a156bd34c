//! Stitching per-tile predictions into one class map over the source extent.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::fault;
use crate::pipeline::journal::Checkpoints;
use crate::predict::{argmax_lowest, LogitSource, LogitTile};
use crate::raster::{
    write_raster, GeoTransform, MemRaster, MemSink, RasterInfo, RasterSource, RowSink, SampleType,
    Window,
};
use crate::tiling::TileGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Per-class maximum over covering tiles, then argmax.
    Logit,
    /// Central crop of each tile's argmax, copied into place.
    Crop,
}

impl Strategy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "logit" => Some(Strategy::Logit),
            "crop" => Some(Strategy::Crop),
            _ => None,
        }
    }
}

pub const DEFAULT_CHECKPOINT_EVERY: u32 = 64;
/// Checkpoint id under which merges record how many leading rows are final.
pub const ROWS_CHECKPOINT: &str = "rows";

#[derive(Debug, Clone, Copy)]
pub struct MergeOptions {
    /// Commit progress after this many emitted row bands.
    pub checkpoint_every: u32,
    /// Upper bound on logit tiles held in memory at once by the logit merge.
    pub tiles_in_flight: usize,
}

impl Default for MergeOptions {
    fn default() -> Self {
        MergeOptions {
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
            tiles_in_flight: 16,
        }
    }
}

/// Crop boundaries along one axis: tile `i` owns `[b[i], b[i+1])`.
///
/// Between consecutive tiles the boundary sits halfway through their overlap,
/// which for a regular step cuts `overlap / 2` from each facing side. Sides on
/// the image edge keep their full margin.
pub fn crop_bounds(origins: &[u32], tile: u32, extent: u32) -> Vec<u32> {
    let mut b = Vec::with_capacity(origins.len() + 1);
    b.push(0);
    for p in origins.windows(2) {
        b.push(((p[0] as u64 + p[1] as u64 + tile as u64) / 2) as u32);
    }
    b.push(extent);
    b
}

fn check_inputs(grid: &TileGrid, src: &dyn LogitSource, sink: &dyn RowSink) -> Result<()> {
    if src.tile_dims() != (grid.tile_w, grid.tile_h) {
        return Err(Error::Consistency(format!(
            "logit tiles are {:?}, grid tiles are {}x{}",
            src.tile_dims(),
            grid.tile_w,
            grid.tile_h
        )));
    }
    let info = sink.info();
    if (info.width, info.height) != (grid.source_width, grid.source_height)
        || info.bands != 1
        || info.sample_type != SampleType::U8
    {
        return Err(Error::Shape(format!(
            "output raster {}x{}x{} {} cannot hold a {}x{} class map",
            info.width,
            info.height,
            info.bands,
            info.sample_type.name(),
            grid.source_width,
            grid.source_height
        )));
    }
    let all: Vec<usize> = (0..grid.len()).collect();
    let missing = src.missing(&all);
    if !missing.is_empty() {
        return Err(Error::Incomplete { missing });
    }
    Ok(())
}

fn resume_row(checkpoints: &dyn Checkpoints) -> u32 {
    checkpoints
        .get(ROWS_CHECKPOINT)
        .and_then(|e| e.note)
        .and_then(|n| n.parse().ok())
        .unwrap_or(0)
}

struct Progress<'a> {
    sink: &'a dyn RowSink,
    checkpoints: &'a dyn Checkpoints,
    every: u32,
    bands: u32,
}

impl Progress<'_> {
    fn emitted(&mut self, final_rows: u32, last: bool) -> Result<()> {
        self.bands += 1;
        fault::point("merge.band");
        if last || (self.every > 0 && self.bands.is_multiple_of(self.every)) {
            self.sink.flush()?;
            self.checkpoints
                .commit(ROWS_CHECKPOINT, &final_rows.to_string(), Some(final_rows.to_string()))?;
        }
        Ok(())
    }
}

/// Crop-merge into `sink`, resuming after the rows recorded in `checkpoints`.
pub fn merge_crop(
    grid: &TileGrid,
    src: &dyn LogitSource,
    sink: &dyn RowSink,
    checkpoints: &dyn Checkpoints,
    opts: &MergeOptions,
) -> Result<()> {
    check_inputs(grid, src, sink)?;
    let bx = crop_bounds(&grid.xs, grid.tile_w, grid.source_width);
    let by = crop_bounds(&grid.ys, grid.tile_h, grid.source_height);
    let width = grid.source_width as usize;
    let done = resume_row(checkpoints);
    let mut progress = Progress {
        sink,
        checkpoints,
        every: opts.checkpoint_every,
        bands: 0,
    };
    for r in 0..grid.rows() {
        let (y0, y1) = (by[r], by[r + 1]);
        if y1 <= done {
            continue;
        }
        let h = (y1 - y0) as usize;
        let pieces: Vec<Vec<u8>> = grid
            .row_indices(r)
            .into_par_iter()
            .map(|i| {
                let c = i - r * grid.cols();
                let t = grid.window(i);
                src.argmax_window(
                    i,
                    Window {
                        x: bx[c] - t.x,
                        y: y0 - t.y,
                        w: bx[c + 1] - bx[c],
                        h: y1 - y0,
                    },
                )
            })
            .collect::<Result<_>>()?;
        let mut band = vec![0u8; width * h];
        for (c, piece) in pieces.iter().enumerate() {
            let (x0, w) = (bx[c] as usize, (bx[c + 1] - bx[c]) as usize);
            for row in 0..h {
                band[row * width + x0..row * width + x0 + w]
                    .copy_from_slice(&piece[row * w..(row + 1) * w]);
            }
        }
        sink.write_rows(y0, &band)?;
        progress.emitted(y1, r + 1 == grid.rows())?;
    }
    Ok(())
}

/// Logit-merge into `sink`: each pixel takes the class whose maximum score over
/// all covering tiles is highest, ties going to the lowest class id.
///
/// Per-class running maxima are kept for one tile height of rows; a row is
/// final once the next tile row starts below it.
pub fn merge_logits(
    grid: &TileGrid,
    src: &dyn LogitSource,
    sink: &dyn RowSink,
    checkpoints: &dyn Checkpoints,
    opts: &MergeOptions,
) -> Result<()> {
    check_inputs(grid, src, sink)?;
    let (w, h) = (grid.source_width as usize, grid.source_height);
    let c = src.class_count() as usize;
    let th = grid.tile_h;
    let row_len = w * c;
    let mut ring = vec![f32::NEG_INFINITY; th as usize * row_len];
    let done = resume_row(checkpoints);
    let mut base = done;
    let mut progress = Progress {
        sink,
        checkpoints,
        every: opts.checkpoint_every,
        bands: 0,
    };

    let emit = |ring: &mut [f32], from: u32, to: u32| -> Result<()> {
        if to <= from {
            return Ok(());
        }
        let mut out = vec![0u8; (to - from) as usize * w];
        out.par_chunks_mut(w).enumerate().for_each(|(k, dst)| {
            let slot = ((from + k as u32) % th) as usize;
            let src = &ring[slot * row_len..(slot + 1) * row_len];
            for (x, d) in dst.iter_mut().enumerate() {
                *d = argmax_lowest(&src[x * c..(x + 1) * c]);
            }
        });
        for y in from..to {
            let slot = (y % th) as usize;
            ring[slot * row_len..(slot + 1) * row_len].fill(f32::NEG_INFINITY);
        }
        sink.write_rows(from, &out)
    };

    for r in 0..grid.rows() {
        let oy = grid.ys[r];
        if oy + th <= done {
            continue;
        }
        if oy > base {
            emit(&mut ring, base, oy)?;
            base = oy;
            progress.emitted(base, false)?;
        }
        let indices: Vec<usize> = grid.row_indices(r).collect();
        for chunk in indices.chunks(opts.tiles_in_flight.max(1)) {
            let tiles: Vec<LogitTile> = chunk
                .par_iter()
                .map(|&i| src.logits(i))
                .collect::<Result<_>>()?;
            for t in &tiles {
                if t.classes as usize != c || (t.width, t.height) != (grid.tile_w, th) {
                    return Err(Error::Consistency(format!(
                        "logit tile {} is {}x{}x{}",
                        t.index, t.width, t.height, t.classes
                    )));
                }
            }
            let xs: Vec<usize> = chunk.iter().map(|&i| grid.window(i).x as usize).collect();
            let tw = grid.tile_w as usize;
            ring.par_chunks_mut(row_len).enumerate().for_each(|(slot, dst)| {
                // the ring slot holding a row of this tile band
                let y = oy + ((slot as u32 + th - oy % th) % th);
                if y < base {
                    return;
                }
                let ty = (y - oy) as usize;
                for (t, &x0) in tiles.iter().zip(&xs) {
                    let src = &t.data[ty * tw * c..(ty + 1) * tw * c];
                    let dst = &mut dst[x0 * c..(x0 + tw) * c];
                    for (d, s) in dst.iter_mut().zip(src) {
                        if *s > *d {
                            *d = *s;
                        }
                    }
                }
            });
        }
    }
    emit(&mut ring, base, h)?;
    progress.emitted(h, true)?;
    Ok(())
}

pub fn merge(
    strategy: Strategy,
    grid: &TileGrid,
    src: &dyn LogitSource,
    sink: &dyn RowSink,
    checkpoints: &dyn Checkpoints,
    opts: &MergeOptions,
) -> Result<()> {
    match strategy {
        Strategy::Logit => merge_logits(grid, src, sink, checkpoints, opts),
        Strategy::Crop => merge_crop(grid, src, sink, checkpoints, opts),
    }
}

/// Merge into memory, tagging the map with `geo`.
pub fn merge_to_memory(
    strategy: Strategy,
    grid: &TileGrid,
    src: &dyn LogitSource,
    geo: Option<GeoTransform>,
) -> Result<MemRaster> {
    let info = RasterInfo::new(grid.source_width, grid.source_height, 1, SampleType::U8).with_geo(geo);
    let sink = MemSink::new(info);
    merge(
        strategy,
        grid,
        src,
        &sink,
        &crate::pipeline::journal::NoCheckpoints,
        &MergeOptions::default(),
    )?;
    sink.into_raster()
}

/// Write a class map with its georeferencing; GeoTIFF for `.tif`/`.tiff`, raw plus sidecar otherwise.
pub fn write_georeferenced(map: &dyn RasterSource, path: &Path) -> Result<()> {
    match &map.info().geo {
        Some(g) => g.validate()?,
        None => return Err(Error::Input("segmentation map has no geotransform".into())),
    }
    write_raster(path, map)
}
