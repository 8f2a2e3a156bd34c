//! Simulated coarsening of ground sampling distance.
//!
//! * Method A shrinks every tile (image and labels) by the scale factor.
//! * Method B shrinks image tiles and scales them back up, leaving a pixelated
//!   tile of the original size; labels are kept as they are.
//! * Method C resizes the whole mosaic and cuts a fresh set of tiles from it.

mod resample;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use resample::{
    nearest_index, resize_nearest, resize_nearest_raster, resize_u8, Filter, Resampler,
};

use crate::error::{Error, IoContext, Result};
use crate::fsutil::{write_atomic, write_json_atomic};
use crate::pipeline::journal::Checkpoints;
use crate::raster::{RasterInfo, RasterSource, RawRaster, RawRasterWriter, DEFAULT_MEMORY_BUDGET};
use crate::tiling::{
    encode_jpeg, encode_png_gray, image_tile_path, label_tile_path, plan_grid, split_raster,
    Dataset, ImageTile, SplitOptions, TileRecord, GRID_FILE, IMAGES_DIR, LABELS_DIR, MANIFEST_FILE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    #[serde(alias = "a")]
    A,
    #[serde(alias = "b")]
    B,
    #[serde(alias = "c")]
    C,
}

impl Method {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "a" | "A" => Some(Method::A),
            "b" | "B" => Some(Method::B),
            "c" | "C" => Some(Method::C),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradeSpec {
    pub method: Method,
    pub source_gsd: f64,
    pub target_gsd: f64,
    pub image_filter: Filter,
}

impl DegradeSpec {
    /// Spec with the usual filter for the method: area for tile shrinking,
    /// lanczos for whole-mosaic resizing.
    pub fn new(method: Method, source_gsd: f64, target_gsd: f64) -> Self {
        let image_filter = match method {
            Method::A | Method::B => Filter::Area,
            Method::C => Filter::Lanczos,
        };
        DegradeSpec {
            method,
            source_gsd,
            target_gsd,
            image_filter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.source_gsd > 0.0 && self.source_gsd.is_finite()) {
            return Err(Error::Config(format!("source GSD {} is not positive", self.source_gsd)));
        }
        if !(self.target_gsd >= self.source_gsd && self.target_gsd.is_finite()) {
            return Err(Error::Config(format!(
                "target GSD {} is finer than source GSD {}",
                self.target_gsd, self.source_gsd
            )));
        }
        Ok(())
    }

    /// Scale factor r = source / target, in (0, 1].
    pub fn ratio(&self) -> f64 {
        self.source_gsd / self.target_gsd
    }

    pub fn scaled(&self, dim: u32) -> u32 {
        scaled_dim(dim, self.source_gsd, self.target_gsd)
    }

    fn scaled_nonzero(&self, w: u32, h: u32) -> Result<(u32, u32)> {
        self.validate()?;
        let (sw, sh) = (self.scaled(w), self.scaled(h));
        if sw == 0 || sh == 0 {
            return Err(Error::Config(format!(
                "{w}x{h} at {} -> {} m/px leaves an empty {sw}x{sh} image",
                self.source_gsd, self.target_gsd
            )));
        }
        Ok((sw, sh))
    }
}

/// `dim * source / target` rounded half-up.
pub fn scaled_dim(dim: u32, source_gsd: f64, target_gsd: f64) -> u32 {
    // the epsilon keeps exact halves like 512 * 0.5 + 0.5 from rounding down
    (dim as f64 * source_gsd / target_gsd + 0.5 + 1e-9).floor() as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsdRung {
    pub gsd: f64,
    pub platforms: String,
}

pub type GsdLadder = Vec<GsdRung>;

/// Resolutions at which the reference dataset was re-created, with the sensor
/// platforms that deliver each one.
pub fn ladder_presets() -> GsdLadder {
    [
        (0.08, "UAV"),
        (0.10, "UAV"),
        (0.12, "UAV"),
        (0.15, "Maxar (Upscaled)"),
        (0.30, "Maxar, Digital Globe"),
        (0.50, "Maxar, Airbus"),
        (0.70, "Maxar, Planet, CNES, KARI"),
        (1.0, "Lockheed Martin Space"),
        (3.0, "Planet"),
        (5.0, "RapidEye Blackbridge"),
        (10.0, "Sentinel-2"),
        (15.0, "Landsat"),
    ]
    .into_iter()
    .map(|(gsd, p)| GsdRung {
        gsd,
        platforms: p.to_string(),
    })
    .collect()
}

/// Image dimensions at each rung of `ladder`, starting from `width`x`height` at `source_gsd`.
pub fn ladder_dims(width: u32, height: u32, source_gsd: f64, ladder: &[GsdRung]) -> Vec<(f64, u32, u32)> {
    ladder
        .iter()
        .map(|r| {
            (
                r.gsd,
                scaled_dim(width, source_gsd, r.gsd),
                scaled_dim(height, source_gsd, r.gsd),
            )
        })
        .collect()
}

/// Method A on one tile: image by the spec's filter, labels by nearest neighbour.
pub fn degrade_tile_a(
    image: &ImageTile,
    labels: Option<&[u8]>,
    spec: &DegradeSpec,
) -> Result<(ImageTile, Option<Vec<u8>>)> {
    let (w, h) = spec.scaled_nonzero(image.width, image.height)?;
    let pixels = resize_u8(
        &image.pixels,
        (image.width, image.height),
        image.bands,
        (w, h),
        spec.image_filter,
    )?;
    let labels = labels.map(|l| resize_nearest(l, (image.width, image.height), 1, (w, h)));
    Ok((
        ImageTile {
            width: w,
            height: h,
            bands: image.bands,
            pixels,
        },
        labels,
    ))
}

/// Method B on one image tile: shrink, then bicubic back to the original size.
pub fn degrade_tile_b(image: &ImageTile, spec: &DegradeSpec) -> Result<ImageTile> {
    let (w, h) = spec.scaled_nonzero(image.width, image.height)?;
    let dims = (image.width, image.height);
    let small = resize_u8(&image.pixels, dims, image.bands, (w, h), spec.image_filter)?;
    let pixels = resize_u8(&small, (w, h), image.bands, dims, Filter::Bicubic)?;
    Ok(ImageTile {
        pixels,
        ..image.clone()
    })
}

/// Contents of `degrade.json`, written next to every degraded dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradeRecord {
    pub spec: DegradeSpec,
    pub source_dataset: PathBuf,
    pub tile_w: u32,
    pub tile_h: u32,
    pub tile_count: usize,
}

pub const DEGRADE_FILE: &str = "degrade.json";

/// Apply method A or B to every tile of `ds`, writing a new dataset to `out`.
pub fn degrade_tiles(ds: &Dataset, spec: &DegradeSpec, out: &Path) -> Result<DegradeRecord> {
    if spec.method == Method::C {
        return Err(Error::Config("method C works on the mosaic, not on tiles".into()));
    }
    spec.validate()?;
    let (tw, th) = ds.meta.stored_tile_dims();
    let (nw, nh) = match spec.method {
        Method::A => spec.scaled_nonzero(tw, th)?,
        _ => {
            spec.scaled_nonzero(tw, th)?;
            (tw, th)
        }
    };
    fs::create_dir_all(out.join(IMAGES_DIR)).at(out)?;
    if ds.meta.has_labels {
        fs::create_dir_all(out.join(LABELS_DIR)).at(out)?;
    }
    ds.records.par_iter().try_for_each(|rec| -> Result<()> {
        let img = ds.image_tile(rec.index)?;
        let (img, labels) = match spec.method {
            Method::A => {
                let labels = if ds.meta.has_labels {
                    Some(ds.label_tile(rec.index)?)
                } else {
                    None
                };
                let (i, l) = degrade_tile_a(&img, labels.as_deref(), spec)?;
                (i, l.map(|l| encode_png_gray(&l, nw, nh)).transpose()?)
            }
            _ => {
                let labels = if ds.meta.has_labels {
                    // labels keep their original bytes
                    Some(fs::read(ds.root.join(&rec.label_path)).at(&rec.label_path)?)
                } else {
                    None
                };
                (degrade_tile_b(&img, spec)?, labels)
            }
        };
        let jpg = encode_jpeg(&img.pixels, img.width, img.height, img.bands, 90)?;
        write_atomic(&out.join(image_tile_path(rec.index)), &jpg)?;
        if let Some(png) = labels {
            write_atomic(&out.join(label_tile_path(rec.index)), &png)?;
        }
        Ok(())
    })?;

    let mut meta = ds.meta.clone();
    meta.gsd = Some(spec.target_gsd);
    let records: Vec<TileRecord> = ds
        .records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if spec.method == Method::A {
                r.geo = r.geo.map(|g| g.rescaled((tw, th), (nw, nh)));
            }
            r
        })
        .collect();
    if spec.method == Method::A {
        meta.stored_tile = Some([nw, nh]);
    }
    let mut manifest = String::new();
    for r in &records {
        manifest.push_str(&serde_json::to_string(r).expect("record serializes"));
        manifest.push('\n');
    }
    write_atomic(&out.join(MANIFEST_FILE), manifest.as_bytes())?;
    write_json_atomic(&out.join(GRID_FILE), &meta)?;
    let record = DegradeRecord {
        spec: spec.clone(),
        source_dataset: ds.root.clone(),
        tile_w: nw,
        tile_h: nh,
        tile_count: records.len(),
    };
    write_json_atomic(&out.join(DEGRADE_FILE), &record)?;
    Ok(record)
}

/// Tiling parameters for method C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileParams {
    pub tile_w: u32,
    pub tile_h: u32,
    pub stride: f64,
}

/// Resize a mosaic (and labels) into raw rasters under `work`, returning their paths.
///
/// The image is resampled with the spec's filter, labels by nearest neighbour.
/// Both are streamed in row slabs, so neither side is held in memory whole.
pub fn resize_mosaic(
    image: &dyn RasterSource,
    labels: Option<&dyn RasterSource>,
    spec: &DegradeSpec,
    work: &Path,
) -> Result<(PathBuf, Option<PathBuf>)> {
    let info = image.info();
    let (w, h) = spec.scaled_nonzero(info.width, info.height)?;
    fs::create_dir_all(work).at(work)?;
    let geo = info
        .geo
        .as_ref()
        .map(|g| g.rescaled((info.width, info.height), (w, h)));

    let img_path = work.join("image.raw");
    let out_info = RasterInfo::new(w, h, info.bands, info.sample_type).with_geo(geo.clone());
    let writer = RawRasterWriter::create(&img_path, out_info)?;
    if (w, h) == (info.width, info.height) {
        copy_raster(image, &writer)?;
    } else {
        Resampler::new((info.width, info.height), (w, h), info.bands, spec.image_filter)?
            .run_raster(image, &writer)?;
    }
    writer.finish()?;

    let lbl_path = match labels {
        Some(l) => {
            let li = l.info();
            let path = work.join("labels.raw");
            let out_info = RasterInfo::new(w, h, li.bands, li.sample_type).with_geo(geo);
            let writer = RawRasterWriter::create(&path, out_info)?;
            resize_nearest_raster(l, &writer)?;
            writer.finish()?;
            Some(path)
        }
        None => None,
    };
    Ok((img_path, lbl_path))
}

fn copy_raster(src: &dyn RasterSource, sink: &dyn crate::raster::RowSink) -> Result<()> {
    let info = src.info();
    let mut y = 0;
    while y < info.height {
        let rows = 256.min(info.height - y);
        let block = src.read_window_bytes(crate::raster::Window {
            x: 0,
            y,
            w: info.width,
            h: rows,
        })?;
        sink.write_rows(y, &block)?;
        y += rows;
    }
    Ok(())
}

/// Method C: resize the mosaic, then tile it with the same tile size and stride.
///
/// Fails before any resampling when the resized extent cannot hold one tile.
#[allow(clippy::too_many_arguments)]
pub fn degrade_mosaic_c(
    image: &dyn RasterSource,
    labels: Option<&dyn RasterSource>,
    spec: &DegradeSpec,
    tiles: TileParams,
    work: &Path,
    out: &Path,
    opts: &SplitOptions,
    checkpoints: &dyn Checkpoints,
) -> Result<Vec<TileRecord>> {
    let info = image.info();
    let (w, h) = spec.scaled_nonzero(info.width, info.height)?;
    let grid = plan_grid(w, h, tiles.tile_w, tiles.tile_h, tiles.stride).map_err(|e| {
        Error::Config(format!(
            "at {} m/px the mosaic shrinks to {w}x{h}: {e}",
            spec.target_gsd
        ))
    })?;
    let (img_path, lbl_path) = resize_mosaic(image, labels, spec, work)?;
    let img = RawRaster::open(&img_path, DEFAULT_MEMORY_BUDGET)?;
    let lbl = lbl_path
        .as_deref()
        .map(|p| RawRaster::open(p, DEFAULT_MEMORY_BUDGET))
        .transpose()?;
    let opts = SplitOptions {
        gsd: Some(spec.target_gsd),
        source_image: Some(img_path.clone()),
        source_labels: lbl_path.clone(),
        ..opts.clone()
    };
    let recs = split_raster(
        &img,
        lbl.as_ref().map(|l| l as &dyn RasterSource),
        &grid,
        out,
        &opts,
        checkpoints,
    )?;
    write_json_atomic(
        &out.join(DEGRADE_FILE),
        &DegradeRecord {
            spec: spec.clone(),
            source_dataset: opts.source_image.clone().unwrap_or_default(),
            tile_w: tiles.tile_w,
            tile_h: tiles.tile_h,
            tile_count: recs.len(),
        },
    )?;
    Ok(recs)
}

/// Directory name used for a degraded sibling of `dataset` at `gsd`.
pub fn sibling_dir(dataset: &Path, gsd: f64) -> PathBuf {
    let name = dataset
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    dataset.with_file_name(format!("{name}_gsd{gsd}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::journal::NoCheckpoints;
    use crate::raster::MemRaster;

    #[test]
    fn ladder_matches_reference_table() {
        let ladder = ladder_presets();
        assert_eq!(ladder.len(), 12);
        assert_eq!(ladder[0].gsd, 0.08);
        assert_eq!(ladder[0].platforms, "UAV");
        assert_eq!(ladder[3].platforms, "Maxar (Upscaled)");
        assert!(ladder.windows(2).all(|p| p[0].gsd < p[1].gsd));

        let dims = ladder_dims(23662, 25228, 0.08, &ladder);
        let expect = [
            (23662, 25228),
            (18930, 20182),
            (15775, 16819),
            (12620, 13455),
            (6310, 6727),
            (3786, 4036),
            (2704, 2883),
            (1893, 2018),
            (631, 673),
            (379, 404),
            (189, 202),
            (126, 135),
        ];
        for ((_, w, h), e) in dims.iter().zip(expect) {
            assert_eq!((*w, *h), e);
        }
    }

    fn tile(w: u32, h: u32, f: impl Fn(u32, u32) -> [u8; 3]) -> ImageTile {
        let mut pixels = Vec::new();
        for y in 0..h {
            for x in 0..w {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        ImageTile {
            width: w,
            height: h,
            bands: 3,
            pixels,
        }
    }

    #[test]
    fn method_a_halves_tiles() {
        let img = tile(512, 512, |x, y| [(x % 256) as u8, (y % 256) as u8, 7]);
        let labels = vec![2u8; 512 * 512];
        let spec = DegradeSpec::new(Method::A, 0.08, 0.16);
        let (out, l) = degrade_tile_a(&img, Some(&labels), &spec).unwrap();
        assert_eq!((out.width, out.height), (256, 256));
        let l = l.unwrap();
        assert_eq!(l.len(), 256 * 256);
        assert!(l.iter().all(|&c| c == 2));

        let same = DegradeSpec::new(Method::A, 0.08, 0.08);
        let (out, l) = degrade_tile_a(&img, Some(&labels), &same).unwrap();
        assert_eq!(out.pixels, img.pixels);
        assert_eq!(l.unwrap(), labels);

        let tiny = DegradeSpec::new(Method::A, 0.08, 1000.0);
        assert!(matches!(degrade_tile_a(&img, None, &tiny), Err(Error::Config(_))));
        let finer = DegradeSpec::new(Method::A, 0.08, 0.04);
        assert!(matches!(degrade_tile_a(&img, None, &finer), Err(Error::Config(_))));
    }

    #[test]
    fn method_a_keeps_classes_of_wide_regions() {
        // stripes of width 8 at r = 0.25 span 2 / r pixels
        let (w, r) = (128u32, 0.25);
        let labels: Vec<u8> = (0..w * w).map(|i| ((i % w) / 8 % 3) as u8).collect();
        let img = tile(w, w, |_, _| [0, 0, 0]);
        let spec = DegradeSpec::new(Method::A, 1.0, 1.0 / r);
        let (_, l) = degrade_tile_a(&img, Some(&labels), &spec).unwrap();
        let mut seen = [false; 3];
        l.unwrap().iter().for_each(|&c| seen[c as usize] = true);
        assert_eq!(seen, [true; 3]);
    }

    #[test]
    fn method_b_pixelates_at_original_size() {
        let img = tile(512, 512, |x, y| [((x / 4 * 37 + y / 4 * 11) % 256) as u8, 0, 255]);
        let spec = DegradeSpec::new(Method::B, 0.08, 0.32);
        let out = degrade_tile_b(&img, &spec).unwrap();
        assert_eq!((out.width, out.height), (512, 512));
        assert_ne!(out.pixels, img.pixels);

        let unit = DegradeSpec::new(Method::B, 0.08, 0.08);
        assert_eq!(degrade_tile_b(&img, &unit).unwrap().pixels, img.pixels);

        let flat = tile(64, 64, |_, _| [90, 140, 200]);
        assert_eq!(degrade_tile_b(&flat, &spec).unwrap().pixels, flat.pixels);
    }

    fn mosaic(w: u32, h: u32) -> (MemRaster, MemRaster) {
        let img: Vec<u8> = (0..w * h * 3).map(|i| (i / 3 % 251) as u8).collect();
        let lbl: Vec<u8> = (0..w * h).map(|i| ((i % w) / 100 % 3) as u8).collect();
        (
            MemRaster::from_u8(w, h, 3, img).unwrap(),
            MemRaster::from_u8(w, h, 1, lbl).unwrap(),
        )
    }

    #[test]
    fn method_c_rescales_and_retiles() {
        let (img, lbl) = mosaic(1024, 1024);
        let dir = tempfile::tempdir().unwrap();
        let spec = DegradeSpec::new(Method::C, 0.08, 0.16);
        let params = TileParams {
            tile_w: 512,
            tile_h: 512,
            stride: 0.5,
        };
        let recs = degrade_mosaic_c(
            &img,
            Some(&lbl),
            &spec,
            params,
            &dir.path().join("work"),
            &dir.path().join("out"),
            &SplitOptions::default(),
            &NoCheckpoints,
        )
        .unwrap();
        assert_eq!(recs.len(), 1);
        let ds = Dataset::open(&dir.path().join("out")).unwrap();
        assert_eq!(ds.meta.gsd, Some(0.16));

        let coarse = DegradeSpec::new(Method::C, 0.08, 0.32);
        let err = degrade_mosaic_c(
            &img,
            Some(&lbl),
            &coarse,
            params,
            &dir.path().join("w2"),
            &dir.path().join("o2"),
            &SplitOptions::default(),
            &NoCheckpoints,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(!dir.path().join("w2").exists(), "fails before resampling");
    }

    #[test]
    fn method_c_at_unit_ratio_equals_plain_split() {
        let (img, lbl) = mosaic(600, 600);
        let dir = tempfile::tempdir().unwrap();
        let params = TileParams {
            tile_w: 256,
            tile_h: 256,
            stride: 0.5,
        };
        let spec = DegradeSpec::new(Method::C, 0.1, 0.1);
        let opts = SplitOptions {
            gsd: Some(0.1),
            ..Default::default()
        };
        degrade_mosaic_c(
            &img,
            Some(&lbl),
            &spec,
            params,
            &dir.path().join("work"),
            &dir.path().join("c"),
            &opts,
            &NoCheckpoints,
        )
        .unwrap();
        let grid = plan_grid(600, 600, 256, 256, 0.5).unwrap();
        split_raster(&img, Some(&lbl), &grid, &dir.path().join("plain"), &opts, &NoCheckpoints).unwrap();
        for i in 0..grid.len() {
            for f in [image_tile_path(i), label_tile_path(i)] {
                assert_eq!(
                    fs::read(dir.path().join("c").join(&f)).unwrap(),
                    fs::read(dir.path().join("plain").join(&f)).unwrap()
                );
            }
        }
    }

    #[test]
    fn tile_methods_on_dataset() {
        let (img, lbl) = mosaic(1024, 1024);
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("ds");
        let grid = plan_grid(1024, 1024, 512, 512, 0.5).unwrap();
        split_raster(&img, Some(&lbl), &grid, &src, &SplitOptions::default(), &NoCheckpoints).unwrap();
        let ds = Dataset::open(&src).unwrap();

        let a = dir.path().join("a");
        let rec = degrade_tiles(&ds, &DegradeSpec::new(Method::A, 0.08, 0.16), &a).unwrap();
        assert_eq!((rec.tile_w, rec.tile_h), (256, 256));
        let da = Dataset::open(&a).unwrap();
        assert_eq!(da.label_tile(3).unwrap().len(), 256 * 256);
        assert_eq!(da.image_tile(3).unwrap().width, 256);

        let b = dir.path().join("b");
        degrade_tiles(&ds, &DegradeSpec::new(Method::B, 0.08, 0.32), &b).unwrap();
        for i in 0..9 {
            let f = label_tile_path(i);
            assert_eq!(fs::read(b.join(&f)).unwrap(), fs::read(src.join(&f)).unwrap());
        }
        assert_eq!(Dataset::open(&b).unwrap().image_tile(0).unwrap().width, 512);
    }

    #[test]
    fn sibling_names() {
        assert_eq!(
            sibling_dir(Path::new("/w/dataset"), 0.16),
            PathBuf::from("/w/dataset_gsd0.16")
        );
    }
}
