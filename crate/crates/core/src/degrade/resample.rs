//! Separable resampling of band-interleaved 8-bit rasters.
//!
//! Each axis gets a table of contiguous source runs and weights per output
//! index; rows are filtered horizontally into an f32 buffer, then vertically.
//! Large rasters are processed in bands of output rows so only a slab of the
//! source is resident at a time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{RasterSource, RowSink, SampleType, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Filter {
    /// Pixel-area averaging; the usual choice for shrinking.
    Area,
    /// Cubic convolution with a = -0.75.
    Bicubic,
    /// Windowed sinc with three lobes, widened when shrinking.
    Lanczos,
}

impl Filter {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "area" => Some(Filter::Area),
            "bicubic" | "cubic" => Some(Filter::Bicubic),
            "lanczos" | "lanczos3" => Some(Filter::Lanczos),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Taps {
    start: Vec<u32>,
    offset: Vec<u32>,
    len: Vec<u32>,
    weights: Vec<f32>,
}

impl Taps {
    fn run(&self, o: usize) -> (usize, &[f32]) {
        let off = self.offset[o] as usize;
        (
            self.start[o] as usize,
            &self.weights[off..off + self.len[o] as usize],
        )
    }

    fn build(input: u32, output: u32, filter: Filter) -> Self {
        let scale = input as f64 / output as f64;
        let mut taps = Taps {
            start: Vec::with_capacity(output as usize),
            offset: Vec::with_capacity(output as usize),
            len: Vec::with_capacity(output as usize),
            weights: Vec::new(),
        };
        let last = input as i64 - 1;
        for o in 0..output as i64 {
            let (lo, ws): (i64, Vec<f64>) = match filter {
                Filter::Area => {
                    let a = o as f64 * scale;
                    let b = (o + 1) as f64 * scale;
                    let lo = a.floor() as i64;
                    let hi = (b.ceil() as i64).min(input as i64);
                    let ws = (lo..hi)
                        .map(|i| ((i + 1) as f64).min(b) - (i as f64).max(a))
                        .map(|ov| ov.max(0.0) / scale)
                        .collect();
                    (lo, ws)
                }
                Filter::Bicubic => {
                    let c = (o as f64 + 0.5) * scale - 0.5;
                    let f = c.floor() as i64;
                    let t = c - f as f64;
                    let k = [cubic(1.0 + t), cubic(t), cubic(1.0 - t), cubic(2.0 - t)];
                    let lo = (f - 1).clamp(0, last);
                    let hi = (f + 2).clamp(0, last);
                    let mut ws = vec![0.0; (hi - lo + 1) as usize];
                    for (j, w) in k.iter().enumerate() {
                        let i = (f - 1 + j as i64).clamp(0, last);
                        ws[(i - lo) as usize] += w;
                    }
                    (lo, ws)
                }
                Filter::Lanczos => {
                    let stretch = scale.max(1.0);
                    let support = 3.0 * stretch;
                    let c = (o as f64 + 0.5) * scale;
                    let lo = ((c - support).floor() as i64).max(0);
                    let hi = ((c + support).ceil() as i64).min(input as i64);
                    let mut ws: Vec<f64> = (lo..hi)
                        .map(|i| lanczos3((i as f64 + 0.5 - c) / stretch))
                        .collect();
                    let sum: f64 = ws.iter().sum();
                    if sum != 0.0 {
                        ws.iter_mut().for_each(|w| *w /= sum);
                    }
                    (lo, ws)
                }
            };
            // trim zero weights at both ends so runs stay tight
            let first = ws.iter().position(|&w| w != 0.0).unwrap_or(0);
            let end = ws.iter().rposition(|&w| w != 0.0).map_or(first + 1, |p| p + 1);
            taps.start.push((lo + first as i64) as u32);
            taps.offset.push(taps.weights.len() as u32);
            taps.len.push((end - first) as u32);
            taps.weights.extend(ws[first..end].iter().map(|&w| w as f32));
        }
        taps
    }

    /// Source index range touched by outputs `o0..o1`.
    fn span(&self, o0: u32, o1: u32) -> (u32, u32) {
        let lo = (o0..o1).map(|o| self.start[o as usize]).min().unwrap_or(0);
        let hi = (o0..o1)
            .map(|o| self.start[o as usize] + self.len[o as usize])
            .max()
            .unwrap_or(0);
        (lo, hi)
    }
}

fn cubic(x: f64) -> f64 {
    const A: f64 = -0.75;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn lanczos3(x: f64) -> f64 {
    if x.abs() < 3.0 {
        sinc(x) * sinc(x / 3.0)
    } else {
        0.0
    }
}

fn to_u8(v: f32) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Precomputed resampling plan between two raster sizes.
#[derive(Debug, Clone)]
pub struct Resampler {
    in_w: u32,
    in_h: u32,
    out_w: u32,
    out_h: u32,
    bands: usize,
    xt: Taps,
    yt: Taps,
}

impl Resampler {
    pub fn new(in_dims: (u32, u32), out_dims: (u32, u32), bands: u32, filter: Filter) -> Result<Self> {
        let (in_w, in_h) = in_dims;
        let (out_w, out_h) = out_dims;
        if in_w == 0 || in_h == 0 || out_w == 0 || out_h == 0 || bands == 0 {
            return Err(Error::Config(format!(
                "cannot resample {in_w}x{in_h} to {out_w}x{out_h}"
            )));
        }
        Ok(Resampler {
            in_w,
            in_h,
            out_w,
            out_h,
            bands: bands as usize,
            xt: Taps::build(in_w, out_w, filter),
            yt: Taps::build(in_h, out_h, filter),
        })
    }

    /// Source rows `[lo, hi)` needed for output rows `[o0, o1)`.
    pub fn source_rows(&self, o0: u32, o1: u32) -> (u32, u32) {
        self.yt.span(o0, o1)
    }

    /// Resample output rows `[o0, o1)` given source rows starting at `src_y0`.
    pub fn band(&self, src: &[u8], src_y0: u32, o0: u32, o1: u32) -> Vec<u8> {
        let b = self.bands;
        let in_row = self.in_w as usize * b;
        let out_row = self.out_w as usize * b;
        let rows = src.len() / in_row;
        let mut horiz = vec![0f32; rows * out_row];
        horiz
            .par_chunks_mut(out_row)
            .zip(src.par_chunks(in_row))
            .for_each(|(dst, row)| {
                for ox in 0..self.out_w as usize {
                    let (s, ws) = self.xt.run(ox);
                    for c in 0..b {
                        let mut acc = 0f32;
                        for (k, w) in ws.iter().enumerate() {
                            acc += w * row[(s + k) * b + c] as f32;
                        }
                        dst[ox * b + c] = acc;
                    }
                }
            });
        let mut out = vec![0u8; (o1 - o0) as usize * out_row];
        out.par_chunks_mut(out_row).enumerate().for_each(|(r, dst)| {
            let (s, ws) = self.yt.run(o0 as usize + r);
            let base = s - src_y0 as usize;
            for (j, px) in dst.iter_mut().enumerate() {
                let mut acc = 0f32;
                for (k, w) in ws.iter().enumerate() {
                    acc += w * horiz[(base + k) * out_row + j];
                }
                *px = to_u8(acc);
            }
        });
        out
    }

    pub fn run(&self, src: &[u8]) -> Vec<u8> {
        self.band(src, 0, 0, self.out_h)
    }

    /// Stream a raster through the plan into `sink`, one slab at a time.
    pub fn run_raster(&self, src: &dyn RasterSource, sink: &dyn RowSink) -> Result<()> {
        check_stream_shapes(src, sink, (self.in_w, self.in_h), (self.out_w, self.out_h))?;
        // aim for ~256 source rows of fresh data per slab
        let per = ((256.0 * self.out_h as f64 / self.in_h as f64).floor() as u32).max(1);
        let mut o0 = 0;
        while o0 < self.out_h {
            let o1 = (o0 + per).min(self.out_h);
            let (lo, hi) = self.source_rows(o0, o1);
            let slab = src.read_window_u8(Window {
                x: 0,
                y: lo,
                w: self.in_w,
                h: hi - lo,
            })?;
            sink.write_rows(o0, &self.band(&slab, lo, o0, o1))?;
            o0 = o1;
        }
        Ok(())
    }
}

fn check_stream_shapes(
    src: &dyn RasterSource,
    sink: &dyn RowSink,
    input: (u32, u32),
    output: (u32, u32),
) -> Result<()> {
    let (si, oi) = (src.info(), sink.info());
    if si.sample_type != SampleType::U8 || oi.sample_type != SampleType::U8 {
        return Err(Error::Input("resampling supports uint8 rasters only".into()));
    }
    if (si.width, si.height) != input || (oi.width, oi.height) != output || si.bands != oi.bands {
        return Err(Error::Shape(format!(
            "resample {}x{}x{} -> {}x{}x{} does not match plan {:?} -> {:?}",
            si.width, si.height, si.bands, oi.width, oi.height, oi.bands, input, output
        )));
    }
    Ok(())
}

pub fn resize_u8(
    pixels: &[u8],
    in_dims: (u32, u32),
    bands: u32,
    out_dims: (u32, u32),
    filter: Filter,
) -> Result<Vec<u8>> {
    if pixels.len() != in_dims.0 as usize * in_dims.1 as usize * bands as usize {
        return Err(Error::Shape(format!(
            "{} bytes for a {}x{}x{bands} block",
            pixels.len(),
            in_dims.0,
            in_dims.1
        )));
    }
    Ok(Resampler::new(in_dims, out_dims, bands, filter)?.run(pixels))
}

/// Source index picked for output index `o` when mapping `input` samples onto `output`.
pub fn nearest_index(o: u32, input: u32, output: u32) -> u32 {
    ((2 * o as u64 + 1) * input as u64 / (2 * output as u64)) as u32
}

/// Nearest-neighbour resize; every output value is copied from some input pixel.
pub fn resize_nearest(pixels: &[u8], in_dims: (u32, u32), bands: u32, out_dims: (u32, u32)) -> Vec<u8> {
    let b = bands as usize;
    let cols: Vec<usize> = (0..out_dims.0)
        .map(|x| nearest_index(x, in_dims.0, out_dims.0) as usize)
        .collect();
    let in_row = in_dims.0 as usize * b;
    let mut out = vec![0u8; out_dims.0 as usize * out_dims.1 as usize * b];
    out.par_chunks_mut(out_dims.0 as usize * b)
        .enumerate()
        .for_each(|(y, dst)| {
            let sy = nearest_index(y as u32, in_dims.1, out_dims.1) as usize;
            let row = &pixels[sy * in_row..(sy + 1) * in_row];
            for (x, &sx) in cols.iter().enumerate() {
                dst[x * b..(x + 1) * b].copy_from_slice(&row[sx * b..(sx + 1) * b]);
            }
        });
    out
}

/// Stream a nearest-neighbour resize of `src` into `sink`.
pub fn resize_nearest_raster(src: &dyn RasterSource, sink: &dyn RowSink) -> Result<()> {
    let (si, oi) = (src.info().clone(), sink.info().clone());
    check_stream_shapes(src, sink, (si.width, si.height), (oi.width, oi.height))?;
    let b = si.bands as usize;
    let cols: Vec<usize> = (0..oi.width)
        .map(|x| nearest_index(x, si.width, oi.width) as usize)
        .collect();
    let chunk = 64u32;
    let mut y0 = 0;
    while y0 < oi.height {
        let y1 = (y0 + chunk).min(oi.height);
        let rows: Vec<Vec<u8>> = (y0..y1)
            .into_par_iter()
            .map(|y| -> Result<Vec<u8>> {
                let sy = nearest_index(y, si.height, oi.height);
                let row = src.read_window_u8(Window {
                    x: 0,
                    y: sy,
                    w: si.width,
                    h: 1,
                })?;
                let mut out = Vec::with_capacity(cols.len() * b);
                for &sx in &cols {
                    out.extend_from_slice(&row[sx * b..(sx + 1) * b]);
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        sink.write_rows(y0, &rows.concat())?;
        y0 = y1;
    }
    Ok(())
}
