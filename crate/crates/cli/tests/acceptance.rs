//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero
//! when any criterion fails.
//!
//! Run a subset with `cargo test -p geoseg-cli --test acceptance -- 3 5`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use num::{BigInt, BigRational, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use geoseg_bench::{run_bench, run_once, scene, BenchOp};
use geoseg_core::degrade::{degrade_mosaic_c, ladder_dims, ladder_presets, resize_mosaic, DegradeSpec, Method, TileParams};
use geoseg_core::merge::{merge, MergeOptions, Strategy};
use geoseg_core::metrics::{score_merged, score_tiles, ConfusionAccumulator, ScoreMode};
use geoseg_core::pipeline::{NoCheckpoints, RunSummary};
use geoseg_core::predict::{lgt_path, DirectorySource, LogitSource, LogitTile, OracleSource, RasterTiles};
use geoseg_core::raster::{write_raster, MemRaster, DEFAULT_MEMORY_BUDGET, MemSink, RasterInfo, RasterSource, RawRaster, SampleType, Window};
use geoseg_core::sampling::{class_histograms, sample_weights, sample_weights_exact};
use geoseg_core::survey::{cording_fixtures, plan_survey, Calibration, SurveyRequest};
use geoseg_core::synthetic::SceneSpec;
use geoseg_core::tiling::{plan_grid, split_raster, Dataset, SplitOptions, TileGrid};
use geoseg_core::workers::with_workers;
use geoseg_core::Error;

type Check = fn() -> Result<String, String>;

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(&str, Check); 10] = [
        ("oracle round trip through a tiled dataset", oracle_round_trip),
        ("logit merge equals crop merge for agreeing logits", merge_equivalence),
        ("logit merge against per-pixel brute force", logit_micro_oracle),
        ("tile weights against a literal re-implementation", weight_equivalence),
        ("metric identities", metric_identities),
        ("cording intervals", cording_intervals),
        ("resolution ladder dimensions", ladder_conformance),
        ("equal-pixel survey areas", survey_area_law),
        ("crash resume yields identical artifacts", crash_resilience),
        ("scaling of split and merge", scaling),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn merged(strategy: Strategy, grid: &TileGrid, src: &dyn LogitSource) -> Result<MemRaster, String> {
    let sink = MemSink::new(RasterInfo::new(grid.source_width, grid.source_height, 1, SampleType::U8));
    merge(strategy, grid, src, &sink, &NoCheckpoints, &MergeOptions::default()).map_err(e)?;
    sink.into_raster().map_err(e)
}

fn oracle_round_trip() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let shapes = [(2048, 2048, 48), (2048, 2048, 3), (2560, 2048, 120)];
    let mut slowest = 0.0f64;
    for (w, h, cell) in shapes {
        let spec = SceneSpec {
            cell,
            ..SceneSpec::new(w, h, 3, rng.gen())
        };
        let t0 = Instant::now();
        let image = spec.image().map_err(e)?;
        let labels = MemRaster::load(&spec.labels().map_err(e)?).map_err(e)?;
        let grid = plan_grid(w, h, 512, 512, 0.5).map_err(e)?;
        let dir = tempfile::tempdir().map_err(e)?;
        let opts = SplitOptions {
            class_count: Some(3),
            ..SplitOptions::default()
        };
        split_raster(&image, Some(&labels), &grid, dir.path(), &opts, &NoCheckpoints).map_err(e)?;
        let ds = Dataset::open(dir.path()).map_err(e)?;
        let oracle = OracleSource::new(&ds, 3, 0.0, rng.gen()).map_err(e)?;
        let map = merged(Strategy::Crop, &ds.grid, &oracle).map_err(e)?;
        let diff = map.bytes().iter().zip(labels.bytes()).filter(|(a, b)| a != b).count();
        ensure(diff == 0, || format!("{w}x{h} cell {cell}: {diff} pixels differ from the labels"))?;
        let all: Vec<usize> = (0..ds.len()).collect();
        let tiles = score_tiles(&all, &oracle, &ds, &[]).map_err(e)?;
        let whole = score_merged(&map, &labels, 3, None, &[]).map_err(e)?;
        ensure(tiles.miou == Some(1.0) && whole.miou == Some(1.0), || {
            format!("{w}x{h}: mIoU tiles {:?}, merged {:?}", tiles.miou, whole.miou)
        })?;
        drop(ds);
        dir.close().map_err(e)?;
        let secs = t0.elapsed().as_secs_f64();
        ensure(secs < 60.0, || format!("{w}x{h} took {secs:.1}s"))?;
        slowest = slowest.max(secs);
    }
    Ok(format!(
        "{} scenes bit-exact, mIoU 1.0 in both modes, slowest {slowest:.1}s (limit 60s)",
        shapes.len()
    ))
}

fn merge_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let tiles = [128u32, 200, 256, 384, 512];
    let strides = [0.25, 0.3, 0.5, 0.75, 1.0];
    let mut pixels = 0u64;
    for k in 0..100 {
        let classes = rng.gen_range(2..=8);
        let spec = SceneSpec {
            cell: rng.gen_range(2..=160),
            ..SceneSpec::new(1024, 1024, classes, rng.gen())
        };
        let labels = MemRaster::load(&spec.labels().map_err(e)?).map_err(e)?;
        let t = *tiles.choose(&mut rng).unwrap();
        let s = *strides.choose(&mut rng).unwrap();
        let grid = plan_grid(1024, 1024, t, t, s).map_err(e)?;
        let oracle = OracleSource::new(RasterTiles::new(&labels, &grid).map_err(e)?, classes, 0.0, k).map_err(e)?;
        let crop = merged(Strategy::Crop, &grid, &oracle)?;
        let logit = merged(Strategy::Logit, &grid, &oracle)?;
        let diff = crop.bytes().iter().zip(logit.bytes()).filter(|(a, b)| a != b).count();
        ensure(diff == 0, || format!("instance {k} (tile {t}, stride {s}): {diff} mismatches"))?;
        pixels += crop.bytes().len() as u64;
    }
    Ok(format!("100 instances, {pixels} pixels, zero mismatches"))
}

fn logit_micro_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let strides = [0.5, 0.6, 0.75, 0.9, 1.0];
    let mut trials = 0;
    let mut tied = 0u64;
    while trials < 500 {
        let t = rng.gen_range(33..=60);
        let s = *strides.choose(&mut rng).unwrap();
        let grid = plan_grid(64, 64, t, t, s).map_err(e)?;
        if grid.len() != 4 {
            continue;
        }
        trials += 1;
        let classes: u32 = rng.gen_range(2..=6);
        let quantized = trials % 2 == 0;
        let dir = tempfile::tempdir().map_err(e)?;
        let mut tiles = Vec::new();
        for i in 0..grid.len() {
            let data: Vec<f32> = (0..t * t * classes)
                .map(|_| {
                    if quantized {
                        rng.gen_range(-1i32..=1) as f32
                    } else {
                        rng.gen_range(-5.0f32..5.0)
                    }
                })
                .collect();
            let tile = LogitTile::new(i, t, t, classes, data).map_err(e)?;
            std::fs::write(lgt_path(dir.path(), i), tile.encode()).map_err(e)?;
            tiles.push(tile);
        }
        let src = DirectorySource::new(dir.path(), classes, (t, t));
        let got = merged(Strategy::Logit, &grid, &src)?;

        let windows: Vec<Window> = grid.windows().collect();
        for y in 0..64u32 {
            for x in 0..64u32 {
                let mut best = vec![f32::NEG_INFINITY; classes as usize];
                for (tile, w) in tiles.iter().zip(&windows) {
                    if x < w.x || x >= w.x + w.w || y < w.y || y >= w.y + w.h {
                        continue;
                    }
                    let p = ((y - w.y) * w.w + (x - w.x)) as usize;
                    for (c, &v) in tile.pixel(p).iter().enumerate() {
                        best[c] = best[c].max(v);
                    }
                }
                let mut arg = 0;
                for c in 1..best.len() {
                    if best[c] > best[arg] {
                        arg = c;
                    }
                }
                if best.iter().filter(|&&v| v == best[arg]).count() > 1 {
                    tied += 1;
                }
                let have = got.bytes()[(y * 64 + x) as usize] as usize;
                ensure(have == arg, || {
                    format!("trial {trials} tile {t} stride {s}: pixel ({x},{y}) merged {have}, expected {arg}")
                })?;
            }
        }
    }
    Ok(format!("{trials} extents of 64x64 with 4 tiles match, {tied} tied pixels resolved to the lowest class"))
}

/// Weight computation written step by step from its definition.
fn literal_weights(tiles: &[Vec<u8>], class_count: usize) -> Vec<BigRational> {
    let mut class_occurrences: Vec<Vec<u64>> = Vec::new();
    for label_tile in tiles {
        let mut occurrences = vec![0u64; class_count];
        for &pixel in label_tile {
            occurrences[pixel as usize] += 1;
        }
        class_occurrences.push(occurrences);
    }
    let mut total = vec![0u64; class_count];
    for occurrences in &class_occurrences {
        for i in 0..class_count {
            total[i] += occurrences[i];
        }
    }
    let mut sample_weights = Vec::new();
    for occurrences in &class_occurrences {
        let mut weight = BigRational::zero();
        for i in 0..class_count {
            if total[i] == 0 {
                continue;
            }
            weight += BigRational::new(BigInt::from(occurrences[i]), BigInt::from(total[i]));
        }
        sample_weights.push(weight);
    }
    sample_weights
}

fn weight_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    for k in 0..200 {
        let classes = rng.gen_range(1..=6usize);
        let n = rng.gen_range(1..=12);
        let tiles: Vec<Vec<u8>> = (0..n)
            .map(|_| {
                let len = rng.gen_range(1..=16) * rng.gen_range(1..=16);
                let present: Vec<u8> = (0..classes as u8).filter(|_| rng.gen_bool(0.6)).collect();
                let present = if present.is_empty() { vec![0] } else { present };
                (0..len).map(|_| *present.choose(&mut rng).unwrap()).collect()
            })
            .collect();
        let indices: Vec<usize> = (0..n).collect();
        let (per_tile, totals) = class_histograms(&indices, classes, |i| Ok(tiles[i].clone())).map_err(e)?;
        let got = sample_weights_exact(&per_tile, &totals);
        let want = literal_weights(&tiles, classes);
        ensure(got == want, || format!("dataset {k}: {got:?} != {want:?}"))?;
    }
    let fixture = [[vec![0u8; 90], vec![1u8; 10]].concat(), vec![0u8; 100]];
    let (per_tile, totals) = class_histograms(&[0, 1], 2, |i| Ok(fixture[i].clone())).map_err(e)?;
    let w: Vec<String> = sample_weights(&per_tile, &totals).iter().map(|v| format!("{v:.4}")).collect();
    ensure(w == ["1.4737", "0.5263"], || format!("hand fixture gave {w:?}"))?;
    Ok(format!("200 datasets equal as exact rationals; hand fixture [{}]", w.join(", ")))
}

fn metric_identities() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let mut worst = 0.0f64;
    let mut compared = 0;
    for k in 0..1000 {
        let classes = rng.gen_range(1..=12usize);
        let scale: u64 = [10, 1_000, 1_000_000, 1u64 << 40][rng.gen_range(0..4)];
        let mut acc = ConfusionAccumulator::new(classes);
        for p in 0..classes {
            for g in 0..classes {
                let v = if rng.gen_bool(0.3) { 0 } else { rng.gen_range(0..=scale) };
                if p == g {
                    acc.tp[p] += v;
                } else {
                    acc.fp[p] += v;
                    acc.fn_[g] += v;
                }
            }
        }
        for c in acc.finalize(ScoreMode::Merged).classes {
            match (c.iou, c.dice) {
                (Some(iou), Some(dice)) => {
                    let err = (dice - 2.0 * iou / (1.0 + iou)).abs();
                    worst = worst.max(err);
                    compared += 1;
                    ensure(err <= 1e-12, || format!("table {k} class {}: error {err:e}", c.class))?;
                }
                (None, None) => {}
                other => return Err(format!("table {k} class {}: {other:?}", c.class)),
            }
        }

        let len = rng.gen_range(1..=400);
        let pred: Vec<u8> = (0..len).map(|_| rng.gen_range(0..classes as u8)).collect();
        let gt: Vec<u8> = (0..len).map(|_| rng.gen_range(0..classes as u8)).collect();
        let cut = rng.gen_range(0..=len);
        let mut whole = ConfusionAccumulator::new(classes);
        whole.accumulate(&pred, &gt).map_err(e)?;
        let mut a = ConfusionAccumulator::new(classes);
        a.accumulate(&pred[..cut], &gt[..cut]).map_err(e)?;
        let mut b = ConfusionAccumulator::new(classes);
        b.accumulate(&pred[cut..], &gt[cut..]).map_err(e)?;
        a.add(&b);
        ensure(a == whole, || format!("table {k}: split accumulation differs"))?;
        let mut pairs: Vec<(u8, u8)> = pred.iter().copied().zip(gt.iter().copied()).collect();
        pairs.shuffle(&mut rng);
        let (sp, sg): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let mut shuffled = ConfusionAccumulator::new(classes);
        shuffled.accumulate(&sp, &sg).map_err(e)?;
        ensure(shuffled == whole, || format!("table {k}: permuted accumulation differs"))?;
        ensure(shuffled.finalize(ScoreMode::Merged) == whole.finalize(ScoreMode::Merged), || {
            format!("table {k}: permuted scores differ")
        })?;
    }
    Ok(format!(
        "1000 tables, {compared} class scores, max dice error {worst:e} (limit 1e-12); additivity and permutation exact"
    ))
}

/// Published interval endpoints as written, with as many decimals as printed.
const PUBLISHED_INTERVALS: [(&str, &str, &str); 6] = [
    ("chayote leaves", "0.05", "0.117"),
    ("dirt road tire tracks", "0.13", "0.28"),
    ("asphalt roads", "1", "2.67"),
    ("cows", "0.172", "0.23"),
    ("sheep", "0.147", "0.22"),
    ("vitis vinifera leaves", "0.016", "0.05"),
];

/// `value` agrees with the printed `text` to within one unit of its last printed decimal.
fn agrees(value: f64, text: &str) -> bool {
    let decimals = text.split_once('.').map_or(0, |(_, f)| f.len()) as i32;
    let printed: f64 = text.parse().unwrap();
    (value - printed).abs() < 10f64.powi(-decimals) - 1e-12
}

fn cording_intervals() -> Result<String, String> {
    let fixtures = cording_fixtures();
    ensure(fixtures.len() == 6, || format!("{} fixtures", fixtures.len()))?;
    let mut shown = Vec::new();
    for (name, lo, hi) in PUBLISHED_INTERVALS {
        let f = fixtures
            .iter()
            .find(|f| f.feature == name)
            .ok_or_else(|| format!("no fixture for {name}"))?;
        let (a, b) = (f.interval.lower, f.interval.upper);
        ensure(agrees(a, lo) && agrees(b, hi), || {
            format!("{name}: ({a:.3}, {b:.3}) vs published ({lo}, {hi})")
        })?;
        shown.push(format!("({a:.3}, {b:.3})"));
    }
    Ok(format!("six intervals {}", shown.join(" ")))
}

const LADDER_TABLE: [(f64, u32, u32); 12] = [
    (0.08, 23662, 25228),
    (0.10, 18930, 20182),
    (0.12, 15775, 16819),
    (0.15, 12620, 13455),
    (0.30, 6310, 6727),
    (0.50, 3786, 4036),
    (0.70, 2704, 2883),
    (1.0, 1893, 2018),
    (3.0, 631, 673),
    (5.0, 379, 404),
    (10.0, 189, 202),
    (15.0, 126, 135),
];

fn ladder_conformance() -> Result<String, String> {
    let (w0, h0) = (23662, 25228);
    let dims = ladder_dims(w0, h0, 0.08, &ladder_presets());
    ensure(dims.len() == LADDER_TABLE.len(), || format!("{} rungs", dims.len()))?;
    for (got, want) in dims.iter().zip(LADDER_TABLE) {
        ensure(*got == want, || format!("rung {}: {}x{} vs {}x{}", want.0, got.1, got.2, want.1, want.2))?;
    }

    // resample the full-size procedural scene at the coarse rungs and check the written rasters
    let spec = SceneSpec {
        gsd: 0.08,
        cell: 400,
        ..SceneSpec::new(w0, h0, 3, 7)
    };
    let work = tempfile::tempdir().map_err(e)?;
    write_raster(&work.path().join("image.raw"), &spec.image().map_err(e)?).map_err(e)?;
    write_raster(&work.path().join("labels.raw"), &spec.labels().map_err(e)?).map_err(e)?;
    let image = RawRaster::open(&work.path().join("image.raw"), DEFAULT_MEMORY_BUDGET).map_err(e)?;
    let labels = RawRaster::open(&work.path().join("labels.raw"), DEFAULT_MEMORY_BUDGET).map_err(e)?;
    let tiles = || TileParams {
        tile_w: 512,
        tile_h: 512,
        stride: 0.5,
    };
    let mut resampled = Vec::new();
    for (gsd, w, h) in LADDER_TABLE.iter().copied().filter(|r| r.0 >= 1.0) {
        let dspec = DegradeSpec::new(Method::C, 0.08, gsd);
        let sub = work.path().join(format!("gsd{gsd}"));
        if w >= 512 && h >= 512 {
            let recs = degrade_mosaic_c(
                &image,
                Some(&labels),
                &dspec,
                tiles(),
                &sub.join("work"),
                &sub.join("ds"),
                &SplitOptions {
                    class_count: Some(3),
                    ..SplitOptions::default()
                },
                &NoCheckpoints,
            )
            .map_err(e)?;
            let ds = Dataset::open(&sub.join("ds")).map_err(e)?;
            ensure((ds.meta.source_width, ds.meta.source_height) == (w, h), || {
                format!("rung {gsd}: dataset over {}x{}", ds.meta.source_width, ds.meta.source_height)
            })?;
            ensure(recs.len() == ds.len(), || format!("rung {gsd}: tile count"))?;
        } else {
            match degrade_mosaic_c(
                &image,
                Some(&labels),
                &dspec,
                tiles(),
                &sub.join("work"),
                &sub.join("ds"),
                &SplitOptions::default(),
                &NoCheckpoints,
            ) {
                Err(Error::Config(_)) => {}
                other => return Err(format!("rung {gsd}: expected a configuration error, got {other:?}")),
            }
            resize_mosaic(&image, Some(&labels), &dspec, &sub.join("work")).map_err(e)?;
        }
        for name in ["image.raw", "labels.raw"] {
            let r = RawRaster::open(&sub.join("work").join(name), u64::MAX).map_err(e)?;
            let info = r.info();
            ensure((info.width, info.height) == (w, h), || {
                format!("rung {gsd}: {name} is {}x{}", info.width, info.height)
            })?;
        }
        std::fs::remove_dir_all(&sub).map_err(e)?;
        resampled.push(format!("{gsd}"));
    }
    Ok(format!(
        "all 12 rungs match; rasters resampled from {w0}x{h0} at {} m/px; 10 and 15 m/px reject 512 px tiling",
        resampled.join(", ")
    ))
}

fn survey_area_law() -> Result<String, String> {
    let table = [
        (0.04, 10.12),
        (0.08, 40.48),
        (0.10, 63.26),
        (0.12, 91.09),
        (0.15, 142.32),
        (0.30, 569.30),
        (0.50, 1581.38),
        (0.70, 3099.50),
        (1.0, 6325.51),
    ];
    let mut worst = 0.0f64;
    for (gsd, area) in table {
        let plan = plan_survey(&SurveyRequest {
            area_km2: 1.0,
            gsd,
            tile: 512,
            stride: 0.5,
            min_train_tiles: 0,
            calibration: Calibration::default(),
        })
        .map_err(e)?;
        let rel = (plan.equal_pixel_area_km2 - area).abs() / area;
        worst = worst.max(rel);
        ensure(rel <= 0.005, || {
            format!("{gsd} m/px: {:.2} km2 vs {area} ({:.3}%)", plan.equal_pixel_area_km2, rel * 100.0)
        })?;
    }
    Ok(format!("9 GSDs, worst relative error {:.3}% (limit 0.5%)", worst * 100.0))
}

const CRASH_CONFIG: &str = "[source]
synthetic = { width = 1024, height = 1024, class_count = 3, seed = 21, cell = 40 }
[split]
tile = 256
[split-set]
fractions = [0.6, 0.2, 0.2]
[weights]
set = \"train\"
[predict-check]
oracle = { noise_rate = 0.1, seed = 5 }
[merge]
strategy = \"logit\"
checkpoint_every = 1
[score]
";

fn geoseg_run(cfg: &Path, ws: &Path, fault_at: Option<u64>) -> Result<std::process::Output, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_geoseg"));
    cmd.args(["run", "--json", "--config"]).arg(cfg).arg("--workspace").arg(ws);
    match fault_at {
        Some(k) => cmd.env("GEOSEG_FAULT_AT", k.to_string()),
        None => cmd.env_remove("GEOSEG_FAULT_AT"),
    };
    cmd.output().map_err(e)
}

/// Every file under `root` except the journal and lock, keyed by relative path.
fn artifacts(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(e)? {
            let path = entry.map_err(e)?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(root).unwrap().to_path_buf();
            if rel == Path::new("journal.jsonl") || rel == Path::new(".lock") {
                continue;
            }
            out.insert(rel, std::fs::read(&path).map_err(e)?);
        }
    }
    Ok(out)
}

fn crash_resilience() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(e)?;
    let cfg = dir.path().join("pipeline.toml");
    std::fs::write(&cfg, CRASH_CONFIG).map_err(e)?;
    let reference_ws = dir.path().join("reference");
    let out = geoseg_run(&cfg, &reference_ws, None)?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let summary: RunSummary = serde_json::from_slice(&out.stdout).map_err(e)?;
    let reference = artifacts(&reference_ws)?;
    for f in ["split.json", "weights.json", "predictions.json", "merged.raw", "scores.json"] {
        ensure(reference.contains_key(Path::new(f)), || format!("reference run wrote no {f}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0009);
    let mut points = Vec::new();
    for task in ["split", "merge"] {
        let [first, last] = *summary
            .task_sites
            .get(task)
            .ok_or_else(|| format!("no fault sites recorded for {task}"))?;
        ensure(last >= first + 10, || format!("{task} passes only {} sites", last + 1 - first))?;
        let mut picks: Vec<u64> = (first..=last).collect();
        picks.shuffle(&mut rng);
        points.extend(picks.into_iter().take(10).map(|k| (task, k)));
    }

    let mut resumes = 0;
    for (task, k) in &points {
        let ws = dir.path().join(format!("crash{k}"));
        let crashed = geoseg_run(&cfg, &ws, Some(*k))?;
        ensure(!crashed.status.success(), || format!("fault at site {k} ({task}) did not stop the run"))?;
        let mut attempts = 0;
        loop {
            attempts += 1;
            let out = geoseg_run(&cfg, &ws, None)?;
            if out.status.success() {
                break;
            }
            ensure(attempts < 3, || {
                format!("site {k} ({task}): resume failed: {}", String::from_utf8_lossy(&out.stderr))
            })?;
        }
        resumes += attempts;
        let got = artifacts(&ws)?;
        for (rel, bytes) in &reference {
            match got.get(rel) {
                Some(b) if b == bytes => {}
                Some(_) => return Err(format!("site {k} ({task}): {} differs", rel.display())),
                None => return Err(format!("site {k} ({task}): {} missing", rel.display())),
            }
        }
        std::fs::remove_dir_all(&ws).map_err(e)?;
    }
    let sites: Vec<String> = points.iter().map(|(t, k)| format!("{t}@{k}")).collect();
    Ok(format!(
        "20 injected crashes ({}) resumed in {resumes} run(s), {} artifacts byte-identical",
        sites.join(" "),
        reference.len()
    ))
}

fn scaling() -> Result<String, String> {
    let sizes = [1024, 2048, 4096, 8192];
    let workers = geoseg_bench::default_workers();
    let split = run_bench(BenchOp::Split, &sizes, 3, workers).map_err(e)?;
    let crop = run_bench(BenchOp::MergeCrop, &sizes, 3, workers).map_err(e)?;
    for r in [&split, &crop] {
        ensure((r.slope - 1.0).abs() <= 0.25, || format!("{} slope {:.3}", r.op, r.slope))?;
    }
    let (image, labels) = scene(8192, 8192).map_err(e)?;
    let scratch = tempfile::tempdir().map_err(e)?;
    let mut logit_times = Vec::new();
    for _ in 0..3 {
        let t0 = Instant::now();
        with_workers(workers, || run_once(BenchOp::MergeLogit, &image, &labels, scratch.path())).map_err(e)?;
        logit_times.push(t0.elapsed().as_secs_f64());
    }
    let logit = geoseg_bench::median(&logit_times);
    let crop_8192 = crop.median_at(8192).unwrap();
    ensure(crop_8192 < logit, || format!("crop {crop_8192:.2}s vs logit {logit:.2}s at 8192"))?;
    Ok(format!(
        "slopes split {:.3}, crop merge {:.3} (1 +/- 0.25); at 8192 crop {crop_8192:.2}s < logit {logit:.2}s",
        split.slope, crop.slope
    ))
}
