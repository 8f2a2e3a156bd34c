//! On-disk tiled dataset: `images/{i}.jpg`, `labels/{i}.png`, `manifest.jsonl`
//! with one [`TileRecord`] per line, and `grid.json`.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};
use serde::{Deserialize, Serialize};

use super::grid::{plan_grid, TileGrid};
use crate::error::{Error, IoContext, Result};
use crate::raster::{GeoTransform, MemRaster, RasterInfo, SampleType, Window};

pub const GRID_FILE: &str = "grid.json";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const IMAGES_DIR: &str = "images";
pub const LABELS_DIR: &str = "labels";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub id: u8,
    pub name: String,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileRecord {
    pub index: usize,
    pub window: Window,
    pub image_path: String,
    pub label_path: String,
    pub geo: Option<GeoTransform>,
}

/// Contents of `grid.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub tile_w: u32,
    pub tile_h: u32,
    pub stride: f64,
    pub source_width: u32,
    pub source_height: u32,
    pub source_geo: Option<GeoTransform>,
    pub class_count: Option<u32>,
    #[serde(default)]
    pub palette: Vec<PaletteEntry>,
    pub image_bands: u32,
    pub has_labels: bool,
    pub tile_count: usize,
    /// Ground sampling distance of the source in m/px, when known.
    #[serde(default)]
    pub gsd: Option<f64>,
    #[serde(default)]
    pub source_image: Option<PathBuf>,
    #[serde(default)]
    pub source_labels: Option<PathBuf>,
    /// Stored tile size when tiles were resized after cutting (`[w, h]`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stored_tile: Option<[u32; 2]>,
}

impl GridFile {
    pub fn plan(&self) -> Result<TileGrid> {
        plan_grid(
            self.source_width,
            self.source_height,
            self.tile_w,
            self.tile_h,
            self.stride,
        )
    }

    /// Pixel size of the tile files on disk.
    pub fn stored_tile_dims(&self) -> (u32, u32) {
        self.stored_tile
            .map_or((self.tile_w, self.tile_h), |[w, h]| (w, h))
    }
}

pub fn image_tile_path(index: usize) -> String {
    format!("{IMAGES_DIR}/{index}.jpg")
}

pub fn label_tile_path(index: usize) -> String {
    format!("{LABELS_DIR}/{index}.png")
}

pub(crate) fn encode_jpeg(pixels: &[u8], w: u32, h: u32, bands: u32, quality: u8) -> Result<Vec<u8>> {
    let color = match bands {
        1 => ExtendedColorType::L8,
        3 => ExtendedColorType::Rgb8,
        b => return Err(Error::Input(format!("cannot encode {b}-band image tile"))),
    };
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality)
        .encode(pixels, w, h, color)
        .map_err(|source| Error::Codec {
            path: PathBuf::from("<jpeg>"),
            source,
        })?;
    Ok(buf)
}

pub(crate) fn encode_png_gray(pixels: &[u8], w: u32, h: u32) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    PngEncoder::new_with_quality(&mut buf, CompressionType::Fast, FilterType::Adaptive)
        .write_image(pixels, w, h, ExtendedColorType::L8)
        .map_err(|source| Error::Codec {
            path: PathBuf::from("<png>"),
            source,
        })?;
    Ok(buf)
}

/// Decoded image tile, band-interleaved.
#[derive(Debug, Clone)]
pub struct ImageTile {
    pub width: u32,
    pub height: u32,
    pub bands: u32,
    pub pixels: Vec<u8>,
}

pub fn decode_image_tile(path: &Path) -> Result<ImageTile> {
    let bytes = fs::read(path).at(path)?;
    let img = image::load_from_memory(&bytes).map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })?;
    let (width, height) = (img.width(), img.height());
    let (bands, pixels) = match img.color().channel_count() {
        1 => (1, img.into_luma8().into_raw()),
        _ => (3, img.into_rgb8().into_raw()),
    };
    Ok(ImageTile {
        width,
        height,
        bands,
        pixels,
    })
}

/// Decode a label tile as raw class ids.
pub fn decode_label_tile(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let bytes = fs::read(path).at(path)?;
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png).map_err(|source| {
        Error::Codec {
            path: path.to_path_buf(),
            source,
        }
    })?;
    if img.color() != image::ColorType::L8 {
        return Err(Error::format(path, "label tile is not single-band 8-bit"));
    }
    Ok((img.width(), img.height(), img.into_luma8().into_raw()))
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub meta: GridFile,
    pub grid: TileGrid,
    pub records: Vec<TileRecord>,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let meta: GridFile = crate::fsutil::read_json(&root.join(GRID_FILE))?;
        let grid = meta.plan()?;
        let mpath = root.join(MANIFEST_FILE);
        let file = fs::File::open(&mpath).at(&mpath)?;
        let mut records = Vec::with_capacity(grid.len());
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.at(&mpath)?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TileRecord = serde_json::from_str(&line)
                .map_err(|e| Error::format(&mpath, format!("line {}: {e}", n + 1)))?;
            records.push(rec);
        }
        if records.len() != grid.len() || meta.tile_count != grid.len() {
            return Err(Error::Consistency(format!(
                "{} lists {} tiles, grid plans {}",
                mpath.display(),
                records.len(),
                grid.len()
            )));
        }
        for (i, rec) in records.iter().enumerate() {
            if rec.index != i || rec.window != grid.window(i) {
                return Err(Error::Consistency(format!(
                    "manifest record {i} does not match the planned grid"
                )));
            }
        }
        Ok(Dataset {
            root: root.to_path_buf(),
            meta,
            grid,
            records,
        })
    }

    pub fn class_count(&self) -> Result<u32> {
        self.meta.class_count.ok_or_else(|| {
            Error::Config(format!(
                "{} does not record a class count",
                self.root.join(GRID_FILE).display()
            ))
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn image_tile(&self, index: usize) -> Result<ImageTile> {
        let rec = self.record(index)?;
        decode_image_tile(&self.root.join(&rec.image_path))
    }

    pub fn label_tile(&self, index: usize) -> Result<Vec<u8>> {
        let rec = self.record(index)?;
        if rec.label_path.is_empty() {
            return Err(Error::Input(format!("dataset has no label for tile {index}")));
        }
        let path = self.root.join(&rec.label_path);
        let (w, h, ids) = decode_label_tile(&path)?;
        let (ew, eh) = self.meta.stored_tile_dims();
        if (w, h) != (ew, eh) {
            return Err(Error::Consistency(format!(
                "{} is {w}x{h}, expected {ew}x{eh}",
                path.display()
            )));
        }
        Ok(ids)
    }

    fn record(&self, index: usize) -> Result<&TileRecord> {
        self.records
            .get(index)
            .ok_or_else(|| Error::Input(format!("tile index {index} out of range")))
    }

    /// Reassemble the source label raster from the lossless label tiles.
    pub fn label_mosaic(&self) -> Result<MemRaster> {
        if self.meta.stored_tile.is_some() {
            return Err(Error::Input("tiles were resized and no longer cover the source grid".into()));
        }
        let (w, h) = (self.meta.source_width, self.meta.source_height);
        let mut out = vec![0u8; w as usize * h as usize];
        for rec in &self.records {
            let ids = self.label_tile(rec.index)?;
            let win = rec.window;
            for r in 0..win.h as usize {
                let dst = (win.y as usize + r) * w as usize + win.x as usize;
                out[dst..dst + win.w as usize]
                    .copy_from_slice(&ids[r * win.w as usize..(r + 1) * win.w as usize]);
            }
        }
        let info = RasterInfo::new(w, h, 1, SampleType::U8).with_geo(self.meta.source_geo.clone());
        MemRaster::new(info, out)
    }
}
