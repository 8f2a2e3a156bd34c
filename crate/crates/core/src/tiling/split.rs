use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::dataset::{
    encode_jpeg, encode_png_gray, image_tile_path, label_tile_path, GridFile, PaletteEntry,
    TileRecord, GRID_FILE, IMAGES_DIR, LABELS_DIR, MANIFEST_FILE,
};
use super::grid::TileGrid;
use crate::error::{Error, IoContext, Result};
use crate::fsutil::{write_atomic, write_json_atomic};
use crate::pipeline::fault;
use crate::pipeline::journal::Checkpoints;
use crate::raster::{RasterSource, SampleType, Window};

#[derive(Debug, Clone)]
pub struct SplitOptions {
    /// Upper bound on class ids; inferred from the labels when absent.
    pub class_count: Option<u32>,
    pub palette: Vec<PaletteEntry>,
    pub jpeg_quality: u8,
    pub gsd: Option<f64>,
    pub source_image: Option<PathBuf>,
    pub source_labels: Option<PathBuf>,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            class_count: None,
            palette: Vec::new(),
            jpeg_quality: 90,
            gsd: None,
            source_image: None,
            source_labels: None,
        }
    }
}

pub fn band_checkpoint(row: usize) -> String {
    format!("band:{row}")
}

/// Fragment an image (and optional aligned label map) into the tiles of `grid`.
///
/// Grid rows are processed as independent bands on the current worker pool; each
/// finished band is committed to `checkpoints`, and committed bands whose files are
/// present are skipped on a rerun. The dataset index files are written last.
pub fn split_raster(
    image: &dyn RasterSource,
    labels: Option<&dyn RasterSource>,
    grid: &TileGrid,
    out: &Path,
    opts: &SplitOptions,
    checkpoints: &dyn Checkpoints,
) -> Result<Vec<TileRecord>> {
    let info = image.info();
    if (info.width, info.height) != (grid.source_width, grid.source_height) {
        return Err(Error::Shape(format!(
            "grid planned for {}x{}, image is {}x{}",
            grid.source_width, grid.source_height, info.width, info.height
        )));
    }
    if info.sample_type != SampleType::U8 || !matches!(info.bands, 1 | 3 | 4) {
        return Err(Error::Input(format!(
            "image tiles need 1, 3 or 4 uint8 bands, got {} {}",
            info.bands,
            info.sample_type.name()
        )));
    }
    if let Some(l) = labels {
        let li = l.info();
        if !li.same_dims(info) {
            return Err(Error::Shape(format!(
                "labels are {}x{}, image is {}x{}",
                li.width, li.height, info.width, info.height
            )));
        }
        if li.bands != 1 || li.sample_type != SampleType::U8 {
            return Err(Error::Shape("labels must be a single-band uint8 raster".into()));
        }
    }
    if let Some(c) = opts.class_count {
        if c == 0 || c > 256 {
            return Err(Error::Config(format!("class count {c} outside 1..=256")));
        }
    }

    fs::create_dir_all(out.join(IMAGES_DIR)).at(out)?;
    if labels.is_some() {
        fs::create_dir_all(out.join(LABELS_DIR)).at(out)?;
    }

    let max_ids: Vec<Option<u8>> = (0..grid.rows())
        .into_par_iter()
        .map(|row| -> Result<Option<u8>> {
            let id = band_checkpoint(row);
            if let Some(entry) = checkpoints.get(&id) {
                if band_files_present(out, grid, row, labels.is_some()) {
                    return Ok(entry.note.and_then(|n| n.parse().ok()));
                }
            }
            let (hash, max_id) = write_band(image, labels, grid, row, out, opts)?;
            checkpoints.commit(&id, &hash, max_id.map(|m| m.to_string()))?;
            Ok(max_id)
        })
        .collect::<Result<_>>()?;

    let class_count = match (opts.class_count, labels.is_some()) {
        (Some(c), _) => Some(c),
        (None, true) => Some(max_ids.iter().flatten().copied().max().unwrap_or(0) as u32 + 1),
        (None, false) => None,
    };

    let records: Vec<TileRecord> = (0..grid.len())
        .map(|i| {
            let window = grid.window(i);
            TileRecord {
                index: i,
                window,
                image_path: image_tile_path(i),
                label_path: if labels.is_some() {
                    label_tile_path(i)
                } else {
                    String::new()
                },
                geo: info.geo.as_ref().map(|g| g.translated(window.x, window.y)),
            }
        })
        .collect();

    let mut manifest = String::new();
    for r in &records {
        manifest.push_str(&serde_json::to_string(r).expect("record serializes"));
        manifest.push('\n');
    }
    write_atomic(&out.join(MANIFEST_FILE), manifest.as_bytes())?;
    let meta = GridFile {
        tile_w: grid.tile_w,
        tile_h: grid.tile_h,
        stride: grid.stride,
        source_width: grid.source_width,
        source_height: grid.source_height,
        source_geo: info.geo.clone(),
        class_count,
        palette: opts.palette.clone(),
        image_bands: if info.bands == 1 { 1 } else { 3 },
        has_labels: labels.is_some(),
        tile_count: grid.len(),
        gsd: opts.gsd.or_else(|| info.geo.as_ref().map(|g| g.pixel_size_x)),
        source_image: opts.source_image.clone(),
        source_labels: opts.source_labels.clone(),
        stored_tile: None,
    };
    write_json_atomic(&out.join(GRID_FILE), &meta)?;
    Ok(records)
}

fn band_files_present(out: &Path, grid: &TileGrid, row: usize, labels: bool) -> bool {
    grid.row_indices(row).all(|i| {
        out.join(image_tile_path(i)).is_file() && (!labels || out.join(label_tile_path(i)).is_file())
    })
}

/// Write every tile of grid row `row`; returns the band digest and largest class id.
fn write_band(
    image: &dyn RasterSource,
    labels: Option<&dyn RasterSource>,
    grid: &TileGrid,
    row: usize,
    out: &Path,
    opts: &SplitOptions,
) -> Result<(String, Option<u8>)> {
    let info = image.info();
    let band_win = Window::full(info.width, grid.tile_h).offset(0, grid.ys[row]);
    let img_band = image.read_window_u8(band_win)?;
    let lbl_band = labels.map(|l| l.read_window_u8(band_win)).transpose()?;
    let src_bands = info.bands as usize;
    let out_bands = if src_bands == 1 { 1 } else { 3 };
    let (tw, th) = (grid.tile_w as usize, grid.tile_h as usize);

    let mut digest = Sha256::new();
    let mut max_id: Option<u8> = None;
    for i in grid.row_indices(row) {
        let x0 = grid.window(i).x as usize;
        let mut pixels = Vec::with_capacity(tw * th * out_bands);
        for r in 0..th {
            let start = (r * info.width as usize + x0) * src_bands;
            let src = &img_band[start..start + tw * src_bands];
            if src_bands == out_bands {
                pixels.extend_from_slice(src);
            } else {
                for px in src.chunks_exact(src_bands) {
                    pixels.extend_from_slice(&px[..3]);
                }
            }
        }
        let jpg = encode_jpeg(&pixels, tw as u32, th as u32, out_bands as u32, opts.jpeg_quality)?;
        digest.update((i as u64).to_le_bytes());
        digest.update(&jpg);
        write_atomic(&out.join(image_tile_path(i)), &jpg)?;

        if let Some(lb) = &lbl_band {
            let mut ids = Vec::with_capacity(tw * th);
            for r in 0..th {
                let start = r * info.width as usize + x0;
                ids.extend_from_slice(&lb[start..start + tw]);
            }
            let tile_max = ids.iter().copied().max().unwrap_or(0);
            if let Some(c) = opts.class_count {
                if tile_max as u32 >= c {
                    return Err(Error::Data {
                        tile: label_tile_path(i),
                        reason: format!("class id {tile_max} but only {c} classes configured"),
                    });
                }
            }
            max_id = Some(max_id.map_or(tile_max, |m| m.max(tile_max)));
            let png = encode_png_gray(&ids, tw as u32, th as u32)?;
            digest.update(&png);
            write_atomic(&out.join(label_tile_path(i)), &png)?;
        }
        fault::point("split.tile");
    }
    Ok((hex::encode(digest.finalize()), max_id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::journal::{Journal, JournalEntry, NoCheckpoints};
    use crate::raster::MemRaster;
    use crate::tiling::{plan_grid, Dataset};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn scene(w: u32, h: u32) -> (MemRaster, MemRaster) {
        let mut img = Vec::with_capacity((w * h * 3) as usize);
        let mut lbl = Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            for x in 0..w {
                let c = ((x / 37 + y / 53) % 3) as u8;
                lbl.push(c);
                img.extend_from_slice(&[c * 80, (x % 256) as u8, (y % 256) as u8]);
            }
        }
        (
            MemRaster::from_u8(w, h, 3, img).unwrap(),
            MemRaster::from_u8(w, h, 1, lbl).unwrap(),
        )
    }

    #[test]
    fn writes_tiles_and_index_files() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = scene(1024, 1024);
        let grid = plan_grid(1024, 1024, 512, 512, 0.5).unwrap();
        let recs =
            split_raster(&img, Some(&lbl), &grid, dir.path(), &SplitOptions::default(), &NoCheckpoints)
                .unwrap();
        assert_eq!(recs.len(), 9);
        assert_eq!(recs.iter().map(|r| r.index).collect::<Vec<_>>(), (0..9).collect::<Vec<_>>());
        for i in 0..9 {
            assert!(dir.path().join(format!("images/{i}.jpg")).is_file());
            assert!(dir.path().join(format!("labels/{i}.png")).is_file());
        }
        let ds = Dataset::open(dir.path()).unwrap();
        assert_eq!(ds.class_count().unwrap(), 3);
        // lossless labels
        let w = grid.window(4);
        assert_eq!(ds.label_tile(4).unwrap(), lbl.read_window_u8(w).unwrap());
        assert_eq!(ds.label_mosaic().unwrap().bytes(), lbl.bytes());
        let tile = ds.image_tile(4).unwrap();
        assert_eq!((tile.width, tile.height, tile.bands), (512, 512, 3));
    }

    #[test]
    fn labels_are_optional() {
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = scene(600, 520);
        let grid = plan_grid(600, 520, 256, 256, 0.5).unwrap();
        let recs =
            split_raster(&img, None, &grid, dir.path(), &SplitOptions::default(), &NoCheckpoints).unwrap();
        assert!(recs.iter().all(|r| r.label_path.is_empty()));
        assert!(!dir.path().join("labels").exists());
        assert_eq!(Dataset::open(dir.path()).unwrap().meta.class_count, None);
    }

    #[test]
    fn shape_and_class_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = scene(64, 64);
        let (_, lbl) = scene(64, 32);
        let grid = plan_grid(64, 64, 32, 32, 0.5).unwrap();
        let err = split_raster(&img, Some(&lbl), &grid, dir.path(), &SplitOptions::default(), &NoCheckpoints)
            .unwrap_err();
        assert!(matches!(err, Error::Shape(_)));

        let (_, lbl) = scene(64, 64);
        let opts = SplitOptions {
            class_count: Some(2),
            ..Default::default()
        };
        let err = split_raster(&img, Some(&lbl), &grid, dir.path(), &opts, &NoCheckpoints).unwrap_err();
        assert!(matches!(err, Error::Data { .. }));
    }

    #[test]
    fn tile_geotransforms_follow_windows() {
        let dir = tempfile::tempdir().unwrap();
        let geo = crate::raster::GeoTransform::north_up(1000.0, 2000.0, 0.08, "EPSG:32651");
        let (img, _) = scene(300, 300);
        let img = img.with_geo(Some(geo.clone()));
        let grid = plan_grid(300, 300, 128, 128, 0.5).unwrap();
        let recs =
            split_raster(&img, None, &grid, dir.path(), &SplitOptions::default(), &NoCheckpoints).unwrap();
        for r in recs {
            let tg = r.geo.unwrap();
            assert_eq!(
                tg.pixel_to_map(0.0, 0.0),
                geo.pixel_to_map(r.window.x as f64, r.window.y as f64)
            );
        }
    }

    /// Fails the n-th commit, emulating a crash between bands.
    struct CrashAfter<'a> {
        inner: &'a dyn Checkpoints,
        commits: AtomicUsize,
        fail_at: usize,
    }

    impl Checkpoints for CrashAfter<'_> {
        fn get(&self, id: &str) -> Option<JournalEntry> {
            self.inner.get(id)
        }
        fn commit(&self, id: &str, hash: &str, note: Option<String>) -> Result<()> {
            if self.commits.fetch_add(1, Ordering::SeqCst) + 1 == self.fail_at {
                return Err(Error::Journal("simulated crash".into()));
            }
            self.inner.commit(id, hash, note)
        }
    }

    #[test]
    fn resume_skips_committed_bands_and_matches_clean_run() {
        let (img, lbl) = scene(1024, 1024);
        let grid = plan_grid(1024, 1024, 512, 512, 0.5).unwrap();
        let clean = tempfile::tempdir().unwrap();
        split_raster(&img, Some(&lbl), &grid, clean.path(), &SplitOptions::default(), &NoCheckpoints)
            .unwrap();

        let dir = tempfile::tempdir().unwrap();
        let journal = Journal::open(&dir.path().join("journal.jsonl")).unwrap();
        let scope = journal.scope("split");
        let crash = CrashAfter {
            inner: &scope,
            commits: AtomicUsize::new(0),
            fail_at: 2,
        };
        let out = dir.path().join("ds");
        let res = crate::workers::with_workers(1, || {
            split_raster(&img, Some(&lbl), &grid, &out, &SplitOptions::default(), &crash)
        });
        assert!(res.is_err());
        assert!(journal.lookup("split", "band:0").is_some());
        let band0_before = fs::metadata(out.join("images/0.jpg")).unwrap().modified().unwrap();

        let counting = CrashAfter {
            inner: &scope,
            commits: AtomicUsize::new(0),
            fail_at: usize::MAX,
        };
        split_raster(&img, Some(&lbl), &grid, &out, &SplitOptions::default(), &counting).unwrap();
        assert_eq!(counting.commits.load(Ordering::SeqCst), 2, "only bands 1 and 2 rerun");
        assert_eq!(
            fs::metadata(out.join("images/0.jpg")).unwrap().modified().unwrap(),
            band0_before
        );
        for name in ["manifest.jsonl", "grid.json"] {
            assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(clean.path().join(name)).unwrap());
        }
        for i in 0..9 {
            for f in [format!("images/{i}.jpg"), format!("labels/{i}.png")] {
                assert_eq!(fs::read(out.join(&f)).unwrap(), fs::read(clean.path().join(&f)).unwrap());
            }
        }
    }

    #[test]
    fn output_independent_of_worker_count() {
        let (img, lbl) = scene(900, 700);
        let grid = plan_grid(900, 700, 256, 256, 0.5).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = crate::workers::with_workers(1, || {
            split_raster(&img, Some(&lbl), &grid, a.path(), &SplitOptions::default(), &NoCheckpoints)
        })
        .unwrap();
        let rb = crate::workers::with_workers(4, || {
            split_raster(&img, Some(&lbl), &grid, b.path(), &SplitOptions::default(), &NoCheckpoints)
        })
        .unwrap();
        assert_eq!(ra, rb);
        for i in 0..grid.len() {
            let f = format!("labels/{i}.png");
            assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap());
            let f = format!("images/{i}.jpg");
            assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap());
        }
    }
}
