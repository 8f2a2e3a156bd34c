//! Raw little-endian grids with a `key=value` text sidecar.
//!
//! The sidecar lives next to the data file with `.hdr` appended to the full file
//! name. Floating point coefficients are written in shortest round-trip form so a
//! read-back reproduces them bit for bit.

use std::fs::{self, File, OpenOptions};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use memmap2::Mmap;

use super::{copy_from_contiguous, GeoTransform, RasterInfo, RasterSource, RowSink, SampleType, Window};
use crate::error::{Error, IoContext, Result};

pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut name = data.as_os_str().to_owned();
    name.push(".hdr");
    PathBuf::from(name)
}

fn render_sidecar(info: &RasterInfo) -> String {
    let mut out = format!(
        "width={}\nheight={}\nbands={}\nsample_type={}\n",
        info.width,
        info.height,
        info.bands,
        info.sample_type.name()
    );
    if let Some(g) = &info.geo {
        out.push_str(&format!(
            "origin_x={}\npixel_size_x={}\nskew_x={}\norigin_y={}\nskew_y={}\npixel_size_y={}\ncrs_id={}\n",
            g.origin_x, g.pixel_size_x, g.skew_x, g.origin_y, g.skew_y, g.pixel_size_y, g.crs_id
        ));
    }
    if let Some(nd) = info.nodata {
        out.push_str(&format!("nodata={nd}\n"));
    }
    out
}

/// Atomically write the sidecar for `data`.
pub fn write_sidecar(data: &Path, info: &RasterInfo) -> Result<()> {
    crate::fsutil::write_atomic(&sidecar_path(data), render_sidecar(info).as_bytes())
}

pub fn read_sidecar(data: &Path) -> Result<RasterInfo> {
    let path = sidecar_path(data);
    let text = fs::read_to_string(&path).at(&path)?;
    parse_sidecar(&path, &text)
}

fn parse_sidecar(path: &Path, text: &str) -> Result<RasterInfo> {
    let mut kv = std::collections::HashMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("line {} is not key=value", n + 1)))?;
        kv.insert(k.trim(), v.to_string());
    }
    let get = |k: &str| {
        kv.get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::format(path, format!("missing key `{k}`")))
    };
    let int = |k: &str| -> Result<u32> {
        get(k)?
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("bad integer for `{k}`")))
    };
    let float = |k: &str| -> Result<f64> {
        get(k)?
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("bad number for `{k}`")))
    };
    let sample_type = SampleType::parse(get("sample_type")?.trim())
        .ok_or_else(|| Error::format(path, "unknown sample_type"))?;
    let geo = if kv.contains_key("origin_x") {
        Some(GeoTransform {
            origin_x: float("origin_x")?,
            origin_y: float("origin_y")?,
            pixel_size_x: float("pixel_size_x")?,
            pixel_size_y: float("pixel_size_y")?,
            skew_x: float("skew_x")?,
            skew_y: float("skew_y")?,
            crs_id: kv.get("crs_id").cloned().unwrap_or_default(),
        })
    } else {
        None
    };
    let nodata = if kv.contains_key("nodata") {
        Some(float("nodata")?)
    } else {
        None
    };
    let info = RasterInfo {
        width: int("width")?,
        height: int("height")?,
        bands: int("bands")?,
        sample_type,
        geo,
        nodata,
    };
    info.validate()?;
    Ok(info)
}

enum Backing {
    Loaded(Vec<u8>),
    Mapped(Mmap),
}

/// A raw grid opened for reading. Files larger than the memory budget are memory
/// mapped, smaller ones are read once into memory.
pub struct RawRaster {
    path: PathBuf,
    info: RasterInfo,
    backing: Backing,
}

impl RawRaster {
    pub fn open(path: &Path, memory_budget: u64) -> Result<Self> {
        let info = read_sidecar(path)?;
        let file = File::open(path).at(path)?;
        let len = file.metadata().at(path)?.len();
        if len != info.byte_len() {
            return Err(Error::format(
                path,
                format!("data holds {len} bytes, header implies {}", info.byte_len()),
            ));
        }
        let backing = if len > memory_budget {
            // SAFETY: the mapping is read-only; writers to source rasters are not
            // expected while a pipeline holds them open.
            Backing::Mapped(unsafe { Mmap::map(&file) }.at(path)?)
        } else {
            Backing::Loaded(fs::read(path).at(path)?)
        };
        Ok(RawRaster {
            path: path.to_path_buf(),
            info,
            backing,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn is_mapped(&self) -> bool {
        matches!(self.backing, Backing::Mapped(_))
    }
}

impl RasterSource for RawRaster {
    fn info(&self) -> &RasterInfo {
        &self.info
    }

    fn copy_window(&self, win: Window, out: &mut [u8]) -> Result<()> {
        let data: &[u8] = match &self.backing {
            Backing::Loaded(v) => v,
            Backing::Mapped(m) => m,
        };
        copy_from_contiguous(&self.info, data, win, out);
        Ok(())
    }
}

/// Writes a raw grid by full-width row blocks. The data file is preallocated so
/// blocks can land in any order; the sidecar is written by [`finish`](Self::finish).
pub struct RawRasterWriter {
    path: PathBuf,
    info: RasterInfo,
    file: File,
}

impl RawRasterWriter {
    pub fn create(path: &Path, info: RasterInfo) -> Result<Self> {
        info.validate()?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).at(parent)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .truncate(true)
            .read(true)
            .write(true)
            .open(path)
            .at(path)?;
        file.set_len(info.byte_len()).at(path)?;
        Ok(RawRasterWriter {
            path: path.to_path_buf(),
            info,
            file,
        })
    }

    /// Reopen an existing data file without truncating it, for resumed writes.
    pub fn resume(path: &Path, info: RasterInfo) -> Result<Self> {
        info.validate()?;
        let file = OpenOptions::new().read(true).write(true).open(path).at(path)?;
        let len = file.metadata().at(path)?.len();
        if len != info.byte_len() {
            file.set_len(info.byte_len()).at(path)?;
        }
        Ok(RawRasterWriter {
            path: path.to_path_buf(),
            info,
            file,
        })
    }

    pub fn sync(&self) -> Result<()> {
        self.file.sync_data().at(&self.path)
    }

    pub fn finish(self) -> Result<()> {
        self.file.sync_all().at(&self.path)?;
        write_sidecar(&self.path, &self.info)
    }
}

impl RowSink for RawRasterWriter {
    fn info(&self) -> &RasterInfo {
        &self.info
    }

    fn write_rows(&self, y: u32, rows: &[u8]) -> Result<()> {
        let row = self.info.row_bytes();
        if !rows.len().is_multiple_of(row) || y as u64 + (rows.len() / row) as u64 > self.info.height as u64 {
            return Err(Error::Shape(format!(
                "row block of {} bytes at row {y} does not fit {}",
                rows.len(),
                self.path.display()
            )));
        }
        self.file
            .write_all_at(rows, y as u64 * row as u64)
            .at(&self.path)
    }

    fn flush(&self) -> Result<()> {
        self.sync()
    }
}
