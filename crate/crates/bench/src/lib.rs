//! Timing harness for the raster-sized operations.
//!
//! Each size gets a freshly generated square scene that is materialized in memory
//! before the clock starts, so only the operation itself is timed. Scaling is
//! summarized by the least-squares slope of log time against log pixel count.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use geoseg_core::fsutil::{sha256_hex, write_atomic, write_json_atomic};
use geoseg_core::merge::{merge, MergeOptions, Strategy};
use geoseg_core::pipeline::NoCheckpoints;
use geoseg_core::predict::{OracleSource, RasterTiles};
use geoseg_core::raster::{MemRaster, MemSink, RasterInfo, RasterSource, SampleType};
use geoseg_core::synthetic::SceneSpec;
use geoseg_core::tiling::{plan_grid, split_raster, SplitOptions, GRID_FILE, MANIFEST_FILE};
use geoseg_core::workers::{with_workers, worker_count};

pub const DEFAULT_SIZES: [u32; 4] = [1024, 2048, 4096, 8192];
pub const DEFAULT_REPS: usize = 3;
pub const BENCH_TILE: u32 = 512;
pub const BENCH_STRIDE: f64 = 0.5;
const CLASSES: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchOp {
    Split,
    MergeCrop,
    MergeLogit,
}

impl BenchOp {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "split" => Some(BenchOp::Split),
            "merge-crop" => Some(BenchOp::MergeCrop),
            "merge-logit" => Some(BenchOp::MergeLogit),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BenchOp::Split => "split",
            BenchOp::MergeCrop => "merge-crop",
            BenchOp::MergeLogit => "merge-logit",
        }
    }
}

impl fmt::Display for BenchOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeTiming {
    pub size: u32,
    pub pixels: u64,
    /// Wall time of every repetition, in seconds.
    pub times_s: Vec<f64>,
    pub median_s: f64,
    /// Digest of the operation's output, identical across repetitions.
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub op: BenchOp,
    pub workers: usize,
    pub reps: usize,
    pub timings: Vec<SizeTiming>,
    /// Least-squares slope of ln(median time) over ln(pixels).
    pub slope: f64,
}

impl BenchResult {
    pub fn median_at(&self, size: u32) -> Option<f64> {
        self.timings.iter().find(|t| t.size == size).map(|t| t.median_s)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// The scene used for `size`: image and labels, both in memory.
pub fn scene(size: u32, seed: u64) -> Result<(MemRaster, MemRaster)> {
    let spec = SceneSpec {
        cell: 64,
        ..SceneSpec::new(size, size, CLASSES, seed)
    };
    let image = MemRaster::load(&spec.image()?)?;
    let labels = MemRaster::load(&spec.labels()?)?;
    Ok((image, labels))
}

/// Run `op` once on prepared inputs, returning the output digest.
pub fn run_once(op: BenchOp, image: &MemRaster, labels: &MemRaster, scratch: &Path) -> Result<String> {
    let info = labels.info();
    let grid = plan_grid(info.width, info.height, BENCH_TILE, BENCH_TILE, BENCH_STRIDE)?;
    match op {
        BenchOp::Split => {
            let out = scratch.join("dataset");
            if out.exists() {
                std::fs::remove_dir_all(&out).with_context(|| format!("clearing {}", out.display()))?;
            }
            let opts = SplitOptions {
                class_count: Some(CLASSES),
                ..SplitOptions::default()
            };
            split_raster(image, Some(labels), &grid, &out, &opts, &NoCheckpoints)?;
            Ok(geoseg_core::fsutil::hash_files(&out, [GRID_FILE, MANIFEST_FILE])?)
        }
        BenchOp::MergeCrop | BenchOp::MergeLogit => {
            let tiles = RasterTiles::new(labels, &grid)?;
            let oracle = OracleSource::new(tiles, CLASSES, 0.0, 0)?;
            let sink = MemSink::new(RasterInfo::new(info.width, info.height, 1, SampleType::U8));
            let strategy = if op == BenchOp::MergeCrop { Strategy::Crop } else { Strategy::Logit };
            merge(strategy, &grid, &oracle, &sink, &NoCheckpoints, &MergeOptions::default())?;
            Ok(sha256_hex(sink.into_raster()?.bytes()))
        }
    }
}

/// Time `op` at every size, `reps` times each, on `workers` threads.
pub fn run_bench(op: BenchOp, sizes: &[u32], reps: usize, workers: usize) -> Result<BenchResult> {
    ensure!(sizes.len() >= 4, "a scaling fit needs at least 4 sizes, got {}", sizes.len());
    ensure!(reps >= 1, "at least one repetition is needed");
    if let Some(s) = sizes.iter().find(|&&s| s < BENCH_TILE) {
        bail!("size {s} is smaller than one {BENCH_TILE} px tile");
    }
    let scratch = tempfile::tempdir()?;
    let mut timings = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let (image, labels) = scene(size, size as u64)?;
        let mut times = Vec::with_capacity(reps);
        let mut checksum: Option<String> = None;
        for _ in 0..reps {
            let t0 = Instant::now();
            let sum = with_workers(workers, || run_once(op, &image, &labels, scratch.path()))?;
            times.push(t0.elapsed().as_secs_f64().max(1e-9));
            match &checksum {
                Some(c) => ensure!(*c == sum, "{op} output changed between repetitions at {size}"),
                None => checksum = Some(sum),
            }
        }
        log::info!("{op} {size}x{size}: {:.3}s", median(&times));
        timings.push(SizeTiming {
            size,
            pixels: size as u64 * size as u64,
            median_s: median(&times),
            times_s: times,
            checksum: checksum.unwrap_or_default(),
        });
    }
    let px: Vec<f64> = timings.iter().map(|t| t.pixels as f64).collect();
    let tm: Vec<f64> = timings.iter().map(|t| t.median_s).collect();
    Ok(BenchResult {
        op,
        workers,
        reps,
        slope: log_log_slope(&px, &tm),
        timings,
    })
}

pub fn default_workers() -> usize {
    worker_count()
}

pub fn to_csv(results: &[BenchResult]) -> String {
    let mut out = String::from("op,size,pixels,median_s,times_s,slope\n");
    for r in results {
        for t in &r.timings {
            let times: Vec<String> = t.times_s.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&format!(
                "{},{},{},{:.6},{},{:.4}\n",
                r.op,
                t.size,
                t.pixels,
                t.median_s,
                times.join(" "),
                r.slope
            ));
        }
    }
    out
}

/// Write `bench.json` and `bench.csv` into `dir`.
pub fn write_reports(results: &[BenchResult], dir: &Path) -> Result<()> {
    write_json_atomic(&dir.join("bench.json"), &results)?;
    write_atomic(&dir.join("bench.csv"), to_csv(results).as_bytes())?;
    Ok(())
}
