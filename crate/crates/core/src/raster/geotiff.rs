//! GeoTIFF reading and writing on top of the `tiff` codec.
//!
//! Georeferencing uses ModelPixelScale + ModelTiepoint for north-up rasters and
//! ModelTransformation otherwise. The opaque CRS identifier travels in
//! GeoAsciiParams, referenced from a citation key.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use tiff::decoder::{ChunkType, Decoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::tags::Tag;

use super::{GeoTransform, RasterInfo, RasterSource, SampleType, Window};
use crate::error::{Error, IoContext, Result};

const GEO_ASCII_PARAMS: u16 = 34737;

const STRIP_BYTES: usize = 256 * 1024;
const CACHE_BYTES: usize = 128 * 1024 * 1024;

fn tiff_err(path: &Path) -> impl FnOnce(tiff::TiffError) -> Error + '_ {
    move |source| Error::Tiff {
        path: path.to_path_buf(),
        source,
    }
}

/// Decoded chunk bytes and the chunk's pixel dimensions.
type Chunk = (Arc<Vec<u8>>, (u32, u32));

struct ChunkCache {
    chunks: HashMap<u32, Arc<Vec<u8>>>,
    order: std::collections::VecDeque<u32>,
    bytes: usize,
}

impl ChunkCache {
    fn insert(&mut self, idx: u32, data: Arc<Vec<u8>>) {
        self.bytes += data.len();
        self.chunks.insert(idx, data);
        self.order.push_back(idx);
        while self.bytes > CACHE_BYTES && self.order.len() > 1 {
            if let Some(old) = self.order.pop_front() {
                if let Some(d) = self.chunks.remove(&old) {
                    self.bytes -= d.len();
                }
            }
        }
    }
}

/// A GeoTIFF opened for windowed reads. Only the strips or tiles intersecting a
/// window are decoded; recently used chunks are kept in a bounded cache.
pub struct GeoTiffRaster {
    path: PathBuf,
    info: RasterInfo,
    chunk_dims: (u32, u32),
    chunks_across: u32,
    decoder: Mutex<Decoder<BufReader<File>>>,
    cache: Mutex<ChunkCache>,
}

impl GeoTiffRaster {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).at(path)?;
        let mut dec = Decoder::new(BufReader::new(file)).map_err(tiff_err(path))?;
        let (width, height) = dec.dimensions().map_err(tiff_err(path))?;
        let (bands, sample_type) = match dec.colortype().map_err(tiff_err(path))? {
            tiff::ColorType::Gray(8) => (1, SampleType::U8),
            tiff::ColorType::RGB(8) => (3, SampleType::U8),
            tiff::ColorType::RGBA(8) => (4, SampleType::U8),
            tiff::ColorType::Gray(32) => (1, SampleType::F32),
            tiff::ColorType::RGB(32) => (3, SampleType::F32),
            tiff::ColorType::RGBA(32) => (4, SampleType::F32),
            other => {
                return Err(Error::format(path, format!("unsupported color type {other:?}")));
            }
        };
        let geo = read_geo(&mut dec, path)?;
        let nodata = dec
            .find_tag(Tag::GdalNodata)
            .ok()
            .flatten()
            .and_then(|v| v.into_string().ok())
            .and_then(|s| s.trim_matches(char::from(0)).trim().parse().ok());
        let chunk_dims = dec.chunk_dimensions();
        let chunks_across = match dec.get_chunk_type() {
            ChunkType::Strip => 1,
            ChunkType::Tile => width.div_ceil(chunk_dims.0),
        };
        let info = RasterInfo {
            width,
            height,
            bands,
            sample_type,
            geo,
            nodata,
        };
        info.validate()?;
        Ok(GeoTiffRaster {
            path: path.to_path_buf(),
            info,
            chunk_dims,
            chunks_across,
            decoder: Mutex::new(dec),
            cache: Mutex::new(ChunkCache {
                chunks: HashMap::new(),
                order: Default::default(),
                bytes: 0,
            }),
        })
    }

    fn chunk(&self, idx: u32) -> Result<Chunk> {
        if let Some(c) = self.cache.lock().expect("cache poisoned").chunks.get(&idx) {
            let dims = self.decoder.lock().expect("decoder poisoned").chunk_data_dimensions(idx);
            return Ok((c.clone(), dims));
        }
        let mut dec = self.decoder.lock().expect("decoder poisoned");
        let dims = dec.chunk_data_dimensions(idx);
        let bytes = match dec.read_chunk(idx).map_err(tiff_err(&self.path))? {
            DecodingResult::U8(v) => v,
            DecodingResult::F32(v) => v.iter().flat_map(|f| f.to_le_bytes()).collect(),
            _ => return Err(Error::format(&self.path, "unexpected sample format")),
        };
        drop(dec);
        let data = Arc::new(bytes);
        self.cache
            .lock()
            .expect("cache poisoned")
            .insert(idx, data.clone());
        Ok((data, dims))
    }
}

impl RasterSource for GeoTiffRaster {
    fn info(&self) -> &RasterInfo {
        &self.info
    }

    fn copy_window(&self, win: Window, out: &mut [u8]) -> Result<()> {
        let px = self.info.pixel_bytes();
        let (cw, ch) = self.chunk_dims;
        let (cw, ch) = if self.chunks_across == 1 {
            (self.info.width, ch)
        } else {
            (cw, ch)
        };
        let out_row = win.w as usize * px;
        for cy in win.y / ch..=(win.bottom() - 1) / ch {
            for cx in win.x / cw..=(win.right() - 1) / cw {
                let (data, (dw, _)) = self.chunk(cy * self.chunks_across + cx)?;
                let x0 = (cx * cw).max(win.x);
                let x1 = (cx * cw + cw).min(win.right());
                let y0 = (cy * ch).max(win.y);
                let y1 = (cy * ch + ch).min(win.bottom());
                let span = (x1 - x0) as usize * px;
                for y in y0..y1 {
                    let src = ((y - cy * ch) as usize * dw as usize + (x0 - cx * cw) as usize) * px;
                    let dst = (y - win.y) as usize * out_row + (x0 - win.x) as usize * px;
                    out[dst..dst + span].copy_from_slice(&data[src..src + span]);
                }
            }
        }
        Ok(())
    }
}

fn read_geo(dec: &mut Decoder<BufReader<File>>, path: &Path) -> Result<Option<GeoTransform>> {
    let crs_id = dec
        .find_tag(Tag::GeoAsciiParamsTag)
        .ok()
        .flatten()
        .and_then(|v| v.into_string().ok())
        .map(|s| s.trim_end_matches(char::from(0)).trim_end_matches('|').to_string())
        .unwrap_or_default();
    if let Ok(m) = dec.get_tag_f64_vec(Tag::ModelTransformationTag) {
        if m.len() < 8 {
            return Err(Error::format(path, "short ModelTransformation tag"));
        }
        return Ok(Some(GeoTransform {
            origin_x: m[3],
            origin_y: m[7],
            pixel_size_x: m[0],
            pixel_size_y: m[5],
            skew_x: m[1],
            skew_y: m[4],
            crs_id,
        }));
    }
    let scale = dec.get_tag_f64_vec(Tag::ModelPixelScaleTag);
    let tie = dec.get_tag_f64_vec(Tag::ModelTiepointTag);
    match (scale, tie) {
        (Ok(s), Ok(t)) if s.len() >= 2 && t.len() >= 6 => Ok(Some(GeoTransform {
            origin_x: t[3] - t[0] * s[0],
            origin_y: t[4] + t[1] * s[1],
            pixel_size_x: s[0],
            pixel_size_y: -s[1],
            skew_x: 0.0,
            skew_y: 0.0,
            crs_id,
        })),
        _ => Ok(None),
    }
}

/// Write any raster source as a striped, uncompressed GeoTIFF.
pub fn write_geotiff(path: &Path, raster: &dyn RasterSource) -> Result<()> {
    let info = raster.info().clone();
    match (info.sample_type, info.bands) {
        (SampleType::U8, 1) => write_typed::<colortype::Gray8, _>(path, raster, |b| b.to_vec()),
        (SampleType::U8, 3) => write_typed::<colortype::RGB8, _>(path, raster, |b| b.to_vec()),
        (SampleType::U8, 4) => write_typed::<colortype::RGBA8, _>(path, raster, |b| b.to_vec()),
        (SampleType::F32, 1) => write_typed::<colortype::Gray32Float, _>(path, raster, le_f32),
        (SampleType::F32, 3) => write_typed::<colortype::RGB32Float, _>(path, raster, le_f32),
        (SampleType::F32, 4) => write_typed::<colortype::RGBA32Float, _>(path, raster, le_f32),
        (t, b) => Err(Error::Input(format!(
            "GeoTIFF output supports 1, 3 or 4 bands, got {b} of {}",
            t.name()
        ))),
    }
}

fn le_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn write_typed<C, F>(path: &Path, raster: &dyn RasterSource, convert: F) -> Result<()>
where
    C: colortype::ColorType,
    [C::Inner]: tiff::encoder::TiffValue,
    F: Fn(&[u8]) -> Vec<C::Inner>,
{
    let info = raster.info().clone();
    let tmp = crate::fsutil::temp_sibling(path);
    let file = File::create(&tmp).at(&tmp)?;
    let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(tiff_err(path))?;
    let mut img = enc
        .new_image::<C>(info.width, info.height)
        .map_err(tiff_err(path))?;
    let rows_per_strip = (STRIP_BYTES / info.row_bytes().max(1)).clamp(1, info.height as usize) as u32;
    img.rows_per_strip(rows_per_strip).map_err(tiff_err(path))?;
    {
        let dir = img.encoder();
        if let Some(g) = &info.geo {
            if g.is_skew_free() && g.pixel_size_y < 0.0 {
                dir.write_tag(
                    Tag::ModelPixelScaleTag,
                    &[g.pixel_size_x, -g.pixel_size_y, 0.0][..],
                )
                .map_err(tiff_err(path))?;
                dir.write_tag(
                    Tag::ModelTiepointTag,
                    &[0.0, 0.0, 0.0, g.origin_x, g.origin_y, 0.0][..],
                )
                .map_err(tiff_err(path))?;
            } else {
                let m = [
                    g.pixel_size_x, g.skew_x, 0.0, g.origin_x,
                    g.skew_y, g.pixel_size_y, 0.0, g.origin_y,
                    0.0, 0.0, 0.0, 0.0,
                    0.0, 0.0, 0.0, 1.0,
                ];
                dir.write_tag(Tag::ModelTransformationTag, &m[..])
                    .map_err(tiff_err(path))?;
            }
            let ascii = format!("{}|", g.crs_id);
            // version 1.1.0, three keys: model type (user defined), raster type
            // (pixel is area), citation pointing into the ascii params.
            let keys: [u16; 16] = [
                1, 1, 0, 3,
                1024, 0, 1, 32767,
                1025, 0, 1, 1,
                1026, GEO_ASCII_PARAMS, ascii.len() as u16, 0,
            ];
            dir.write_tag(Tag::GeoKeyDirectoryTag, &keys[..])
                .map_err(tiff_err(path))?;
            dir.write_tag(Tag::GeoAsciiParamsTag, ascii.as_str())
                .map_err(tiff_err(path))?;
        }
        if let Some(nd) = info.nodata {
            dir.write_tag(Tag::GdalNodata, format!("{nd}").as_str())
                .map_err(tiff_err(path))?;
        }
    }
    let mut y = 0;
    while y < info.height {
        let h = rows_per_strip.min(info.height - y);
        let bytes = raster.read_window_bytes(Window::full(info.width, h).offset(0, y))?;
        img.write_strip(&convert(&bytes)).map_err(tiff_err(path))?;
        y += h;
    }
    img.finish().map_err(tiff_err(path))?;
    drop(enc);
    std::fs::rename(&tmp, path).at(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::MemRaster;

    #[test]
    fn geotiff_round_trip_keeps_transform_and_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ortho.tif");
        let data: Vec<u8> = (0..(37 * 29 * 3)).map(|i| (i * 13 % 256) as u8).collect();
        let geo = GeoTransform::north_up(512345.125, 1801234.5, 0.08, "EPSG:32651");
        let r = MemRaster::from_u8(37, 29, 3, data).unwrap().with_geo(Some(geo.clone()));
        write_geotiff(&path, &r).unwrap();
        let back = GeoTiffRaster::open(&path).unwrap();
        assert_eq!(back.info().geo.as_ref(), Some(&geo));
        assert_eq!(back.info().bands, 3);
        let win = Window::new(3, 5, 30, 20).unwrap();
        assert_eq!(back.read_window_bytes(win).unwrap(), r.read_window_bytes(win).unwrap());
    }

    #[test]
    fn skewed_float_raster_uses_full_transform() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ndvi.tif");
        let geo = GeoTransform {
            origin_x: 10.0,
            origin_y: 20.0,
            pixel_size_x: 0.5,
            pixel_size_y: -0.25,
            skew_x: 0.01,
            skew_y: -0.02,
            crs_id: "local".into(),
        };
        let vals: Vec<f32> = (0..20).map(|i| i as f32 * 0.1 - 1.0).collect();
        let r = MemRaster::from_f32(5, 4, 1, &vals)
            .unwrap()
            .with_geo(Some(geo.clone()))
            .with_nodata(Some(-9999.0));
        write_geotiff(&path, &r).unwrap();
        let back = GeoTiffRaster::open(&path).unwrap();
        assert_eq!(back.info().geo.as_ref(), Some(&geo));
        assert_eq!(back.info().nodata, Some(-9999.0));
        assert_eq!(back.read_window_bytes(Window::full(5, 4)).unwrap(), r.bytes());
    }
}
