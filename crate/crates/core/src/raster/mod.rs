//! Georeferenced rasters with windowed access.
//!
//! Every raster is addressed through [`RasterSource`], which only ever hands out
//! windows. Samples are row-major and band-interleaved-by-pixel; multi-byte samples
//! travel as little-endian bytes so that in-memory, memory-mapped and procedural
//! sources share one copy path.

mod geo;
mod geotiff;
mod ndvi;
mod raw;

use std::fmt;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use geo::GeoTransform;
pub use geotiff::{write_geotiff, GeoTiffRaster};
pub use ndvi::{masked_ndvi, NDVI_NODATA};
pub use raw::{read_sidecar, sidecar_path, write_sidecar, RawRaster, RawRasterWriter};

/// Rasters whose payload exceeds this many bytes are memory mapped instead of loaded.
pub const DEFAULT_MEMORY_BUDGET: u64 = 512 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Window {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::Input(format!("empty window {w}x{h}")));
        }
        Ok(Window { x, y, w, h })
    }

    pub fn full(width: u32, height: u32) -> Self {
        Window {
            x: 0,
            y: 0,
            w: width,
            h: height,
        }
    }

    pub fn offset(mut self, dx: u32, dy: u32) -> Self {
        self.x += dx;
        self.y += dy;
        self
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn pixel_count(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn intersects(&self, other: &Window) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.w > 0
            && self.h > 0
            && self.x as u64 + self.w as u64 <= width as u64
            && self.y as u64 + self.h as u64 <= height as u64
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}x{})", self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleType {
    #[serde(rename = "uint8")]
    U8,
    #[serde(rename = "float32")]
    F32,
}

impl SampleType {
    pub fn size(self) -> usize {
        match self {
            SampleType::U8 => 1,
            SampleType::F32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SampleType::U8 => "uint8",
            SampleType::F32 => "float32",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "uint8" => Some(SampleType::U8),
            "float32" => Some(SampleType::F32),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterInfo {
    pub width: u32,
    pub height: u32,
    pub bands: u32,
    pub sample_type: SampleType,
    pub geo: Option<GeoTransform>,
    pub nodata: Option<f64>,
}

impl RasterInfo {
    pub fn new(width: u32, height: u32, bands: u32, sample_type: SampleType) -> Self {
        RasterInfo {
            width,
            height,
            bands,
            sample_type,
            geo: None,
            nodata: None,
        }
    }

    pub fn with_geo(mut self, geo: Option<GeoTransform>) -> Self {
        self.geo = geo;
        self
    }

    pub fn pixel_bytes(&self) -> usize {
        self.bands as usize * self.sample_type.size()
    }

    pub fn row_bytes(&self) -> usize {
        self.width as usize * self.pixel_bytes()
    }

    pub fn byte_len(&self) -> u64 {
        self.row_bytes() as u64 * self.height as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.bands == 0 {
            return Err(Error::Input(format!(
                "raster must be non-empty, got {}x{}x{}",
                self.width, self.height, self.bands
            )));
        }
        if let Some(geo) = &self.geo {
            geo.validate()?;
        }
        Ok(())
    }

    pub fn check_window(&self, win: Window) -> Result<()> {
        if win.fits_within(self.width, self.height) {
            Ok(())
        } else {
            Err(Error::Bounds {
                window: win,
                width: self.width,
                height: self.height,
            })
        }
    }

    pub fn same_dims(&self, other: &RasterInfo) -> bool {
        self.width == other.width && self.height == other.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::U8(v) => v.len(),
            Samples::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_f64(&self, i: usize) -> f64 {
        match self {
            Samples::U8(v) => v[i] as f64,
            Samples::F32(v) => v[i] as f64,
        }
    }
}

/// The result of a window read.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelBlock {
    pub window: Window,
    pub bands: u32,
    pub samples: Samples,
}

impl PixelBlock {
    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.samples {
            Samples::U8(v) => Some(v),
            Samples::F32(_) => None,
        }
    }

    pub fn into_u8(self) -> Option<Vec<u8>> {
        match self.samples {
            Samples::U8(v) => Some(v),
            Samples::F32(_) => None,
        }
    }
}

/// Read-only windowed access to a raster. Implementations must be safe to share
/// between worker threads and must return identical bytes for identical windows.
pub trait RasterSource: Send + Sync {
    fn info(&self) -> &RasterInfo;

    /// Copy the window's samples as little-endian bytes into `out`, which must be
    /// exactly `w * h * pixel_bytes` long. The window has already been bounds checked.
    fn copy_window(&self, win: Window, out: &mut [u8]) -> Result<()>;

    fn read_window_bytes(&self, win: Window) -> Result<Vec<u8>> {
        let info = self.info();
        info.check_window(win)?;
        let mut out = vec![0u8; win.pixel_count() as usize * info.pixel_bytes()];
        self.copy_window(win, &mut out)?;
        Ok(out)
    }

    fn read_window(&self, win: Window) -> Result<PixelBlock> {
        let bytes = self.read_window_bytes(win)?;
        let samples = match self.info().sample_type {
            SampleType::U8 => Samples::U8(bytes),
            SampleType::F32 => Samples::F32(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
        };
        Ok(PixelBlock {
            window: win,
            bands: self.info().bands,
            samples,
        })
    }

    /// Convenience for 8-bit rasters.
    fn read_window_u8(&self, win: Window) -> Result<Vec<u8>> {
        if self.info().sample_type != SampleType::U8 {
            return Err(Error::Input("expected a uint8 raster".into()));
        }
        self.read_window_bytes(win)
    }
}

impl<T: RasterSource + ?Sized> RasterSource for Box<T> {
    fn info(&self) -> &RasterInfo {
        (**self).info()
    }

    fn copy_window(&self, win: Window, out: &mut [u8]) -> Result<()> {
        (**self).copy_window(win, out)
    }
}

impl<T: RasterSource + ?Sized> RasterSource for std::sync::Arc<T> {
    fn info(&self) -> &RasterInfo {
        (**self).info()
    }

    fn copy_window(&self, win: Window, out: &mut [u8]) -> Result<()> {
        (**self).copy_window(win, out)
    }
}

/// Copy a window out of a contiguous row-major buffer.
pub(crate) fn copy_from_contiguous(info: &RasterInfo, data: &[u8], win: Window, out: &mut [u8]) {
    let px = info.pixel_bytes();
    let row = info.row_bytes();
    let span = win.w as usize * px;
    for (r, dst) in out.chunks_exact_mut(span).enumerate() {
        let start = (win.y as usize + r) * row + win.x as usize * px;
        dst.copy_from_slice(&data[start..start + span]);
    }
}

/// A raster held fully in memory.
#[derive(Debug, Clone)]
pub struct MemRaster {
    info: RasterInfo,
    data: Vec<u8>,
}

impl MemRaster {
    pub fn new(info: RasterInfo, data: Vec<u8>) -> Result<Self> {
        info.validate()?;
        if data.len() as u64 != info.byte_len() {
            return Err(Error::Shape(format!(
                "buffer holds {} bytes, raster needs {}",
                data.len(),
                info.byte_len()
            )));
        }
        Ok(MemRaster { info, data })
    }

    pub fn from_u8(width: u32, height: u32, bands: u32, data: Vec<u8>) -> Result<Self> {
        Self::new(RasterInfo::new(width, height, bands, SampleType::U8), data)
    }

    pub fn from_f32(width: u32, height: u32, bands: u32, data: &[f32]) -> Result<Self> {
        let bytes = data.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::new(RasterInfo::new(width, height, bands, SampleType::F32), bytes)
    }

    /// Materialise any source into memory.
    pub fn load(src: &dyn RasterSource) -> Result<Self> {
        let info = src.info().clone();
        let data = src.read_window_bytes(Window::full(info.width, info.height))?;
        Self::new(info, data)
    }

    pub fn with_geo(mut self, geo: Option<GeoTransform>) -> Self {
        self.info.geo = geo;
        self
    }

    pub fn with_nodata(mut self, nodata: Option<f64>) -> Self {
        self.info.nodata = nodata;
        self
    }

    pub fn bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }
}

impl RasterSource for MemRaster {
    fn info(&self) -> &RasterInfo {
        &self.info
    }

    fn copy_window(&self, win: Window, out: &mut [u8]) -> Result<()> {
        copy_from_contiguous(&self.info, &self.data, win, out);
        Ok(())
    }
}

/// Destination for full-width row blocks of an output raster. Row blocks written by
/// different workers never overlap.
pub trait RowSink: Sync {
    fn info(&self) -> &RasterInfo;
    fn write_rows(&self, y: u32, rows: &[u8]) -> Result<()>;

    /// Make every row written so far durable.
    fn flush(&self) -> Result<()> {
        Ok(())
    }
}

/// Row sink that collects the raster in memory.
pub struct MemSink {
    info: RasterInfo,
    data: Mutex<Vec<u8>>,
}

impl MemSink {
    pub fn new(info: RasterInfo) -> Self {
        let len = info.byte_len() as usize;
        MemSink {
            info,
            data: Mutex::new(vec![0; len]),
        }
    }

    pub fn into_raster(self) -> Result<MemRaster> {
        let data = self.data.into_inner().expect("sink poisoned");
        MemRaster::new(self.info, data)
    }
}

impl RowSink for MemSink {
    fn info(&self) -> &RasterInfo {
        &self.info
    }

    fn write_rows(&self, y: u32, rows: &[u8]) -> Result<()> {
        let start = y as usize * self.info.row_bytes();
        let end = start + rows.len();
        let mut data = self.data.lock().expect("sink poisoned");
        if end > data.len() || !rows.len().is_multiple_of(self.info.row_bytes()) {
            return Err(Error::Shape(format!(
                "row block of {} bytes at row {y} does not fit the raster",
                rows.len()
            )));
        }
        data[start..end].copy_from_slice(rows);
        Ok(())
    }
}

fn is_tiff(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()),
        Some(ref e) if e == "tif" || e == "tiff"
    )
}

/// Open a raster by path: GeoTIFF for `.tif`/`.tiff`, otherwise a raw grid with a
/// `.hdr` sidecar.
pub fn open_raster(path: &Path, memory_budget: u64) -> Result<Box<dyn RasterSource>> {
    if is_tiff(path) {
        Ok(Box::new(GeoTiffRaster::open(path)?))
    } else {
        Ok(Box::new(RawRaster::open(path, memory_budget)?))
    }
}

/// Write a whole in-memory raster in the format implied by the path.
pub fn write_raster(path: &Path, raster: &dyn RasterSource) -> Result<()> {
    if is_tiff(path) {
        write_geotiff(path, raster)
    } else {
        let info = raster.info().clone();
        let writer = RawRasterWriter::create(path, info.clone())?;
        let rows_per_block = (64 * 1024 * 1024 / info.row_bytes().max(1)).max(1) as u32;
        let mut y = 0;
        while y < info.height {
            let h = rows_per_block.min(info.height - y);
            let block = raster.read_window_bytes(Window::full(info.width, h).offset(0, y))?;
            writer.write_rows(y, &block)?;
            y += h;
        }
        writer.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(w: u32, h: u32) -> MemRaster {
        MemRaster::from_u8(w, h, 1, (0..w * h).map(|v| v as u8).collect()).unwrap()
    }

    #[test]
    fn reads_inner_window_row_major() {
        let r = ramp(4, 4);
        let block = r.read_window(Window::new(1, 1, 2, 2).unwrap()).unwrap();
        assert_eq!(block.as_u8().unwrap(), &[5, 6, 9, 10]);
    }

    #[test]
    fn full_window_is_identity() {
        let r = ramp(4, 4);
        let all = r.read_window_bytes(Window::full(4, 4)).unwrap();
        assert_eq!(all, r.bytes());
    }

    #[test]
    fn out_of_bounds_window_is_rejected() {
        let r = ramp(4, 4);
        let err = r.read_window(Window::new(3, 0, 2, 1).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Bounds { .. }));
        assert!(Window::new(0, 0, 0, 1).is_err());
    }

    #[test]
    fn float_samples_decode() {
        let r = MemRaster::from_f32(2, 1, 2, &[0.5, -1.0, 2.0, 3.5]).unwrap();
        let b = r.read_window(Window::new(1, 0, 1, 1).unwrap()).unwrap();
        assert_eq!(b.samples, Samples::F32(vec![2.0, 3.5]));
    }

    #[test]
    fn mem_sink_collects_rows() {
        let sink = MemSink::new(RasterInfo::new(3, 2, 1, SampleType::U8));
        sink.write_rows(1, &[4, 5, 6]).unwrap();
        sink.write_rows(0, &[1, 2, 3]).unwrap();
        assert!(sink.write_rows(2, &[0, 0, 0]).is_err());
        assert_eq!(sink.into_raster().unwrap().bytes(), &[1, 2, 3, 4, 5, 6]);
    }

    proptest! {
        // A window read equals the concatenation of reads over a row/column partition.
        #[test]
        fn window_reads_tile_decompose(
            w in 1u32..20, h in 1u32..20, bands in 1u32..4,
            fx in 0.0f64..1.0, fy in 0.0f64..1.0, seed in any::<u64>()
        ) {
            let n = (w * h * bands) as usize;
            let data: Vec<u8> = (0..n).map(|i| (i as u64).wrapping_mul(seed | 1) as u8).collect();
            let r = MemRaster::from_u8(w, h, bands, data).unwrap();
            let full = r.read_window_bytes(Window::full(w, h)).unwrap();
            let sx = ((w as f64 * fx) as u32).clamp(1, w);
            let sy = ((h as f64 * fy) as u32).clamp(1, h);
            let mut stitched = vec![0u8; n];
            let px = bands as usize;
            for (x0, ww) in [(0, sx), (sx, w - sx)] {
                for (y0, hh) in [(0, sy), (sy, h - sy)] {
                    if ww == 0 || hh == 0 { continue; }
                    let part = r.read_window_bytes(Window::new(x0, y0, ww, hh).unwrap()).unwrap();
                    for row in 0..hh as usize {
                        let dst = ((y0 as usize + row) * w as usize + x0 as usize) * px;
                        let src = row * ww as usize * px;
                        stitched[dst..dst + ww as usize * px]
                            .copy_from_slice(&part[src..src + ww as usize * px]);
                    }
                }
            }
            prop_assert_eq!(full, stitched);
        }
    }
}
