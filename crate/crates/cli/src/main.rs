use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use geoseg_core::degrade::{
    degrade_mosaic_c, degrade_tiles, ladder_presets, sibling_dir, DegradeSpec, Method, TileParams,
};
use geoseg_core::fsutil::{read_json, write_json_atomic};
use geoseg_core::merge::{merge_to_memory, write_georeferenced, MergeOptions, Strategy};
use geoseg_core::metrics::ScoreMode;
use geoseg_core::pipeline::config::OracleConfig;
use geoseg_core::pipeline::runner::{self, Workspace};
use geoseg_core::pipeline::tasks::{self, Predictions};
use geoseg_core::pipeline::{Checkpoints, NoCheckpoints, PipelineConfig};
use geoseg_core::raster::{open_raster, RasterSource, DEFAULT_MEMORY_BUDGET};
use geoseg_core::sampling::{DatasetSplit, SplitMethod, SplitSpec};
use geoseg_core::survey::{
    action_menu, cording_fixtures, cording_interval, min_train_tiles, plan_survey, ShapeHint,
    SurveyRequest, SvaMeasurements, DEFAULT_SUFFICIENCY_FRACTION,
};
use geoseg_core::tiling::{plan_grid, split_raster, Dataset, SplitOptions};
use geoseg_core::workers::with_env_workers;

#[derive(Parser)]
#[command(name = "geoseg", version, about = "Tile, merge, score and plan segmentation of large orthomosaics")]
struct Cli {
    /// Workspace directory. Required by `run` and `status`; other commands use it
    /// for checkpointing when given.
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cut an orthomosaic (and labels) into overlapping tiles.
    Split(SplitArgs),
    /// Per-tile oversampling weights.
    Weights(WeightsArgs),
    /// Assign tiles to train/val/test.
    SplitSet(SplitSetArgs),
    /// Simulate a coarser ground sampling distance.
    Degrade(DegradeArgs),
    /// Stitch per-tile predictions into one class map.
    Merge(MergeArgs),
    /// IoU and Dice of predictions against labels.
    Score(ScoreArgs),
    /// Critical GSD interval for a feature.
    Cording(CordingArgs),
    /// Survey size, altitude and effort estimates for a target GSD.
    Plan(PlanArgs),
    /// Run the pipeline described by a config file.
    Run(RunArgs),
    /// Show task states recorded in the workspace journal.
    Status,
    /// Time tiling and merging across raster sizes.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    tile: u32,
    #[arg(long, default_value_t = 0.5)]
    stride: f64,
    #[arg(long)]
    out: PathBuf,
    /// Number of classes; inferred from the labels when omitted.
    #[arg(long)]
    class_count: Option<u32>,
    /// Source GSD in m/px; taken from the georeferencing when omitted.
    #[arg(long)]
    gsd: Option<f64>,
    #[arg(long, default_value_t = 90)]
    jpeg_quality: u8,
}

#[derive(Args)]
struct WeightsArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Restrict to one set of a `split.json`.
    #[arg(long, requires = "set")]
    split: Option<PathBuf>,
    #[arg(long, requires = "split")]
    set: Option<String>,
    /// Defaults to `<dataset>/weights.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Horizontal,
    Manual,
}

#[derive(Args)]
struct SplitSetArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "horizontal")]
    method: MethodArg,
    #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.1, 0.2])]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    gap: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Region raster for the manual method (0 train, 1 val, 2 test).
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Defaults to `<dataset>/split.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DegradeArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, required_unless_present = "ladder")]
    target_gsd: Option<f64>,
    /// Every preset rung coarser than the source.
    #[arg(long)]
    ladder: bool,
    /// Overrides the GSD recorded in the dataset.
    #[arg(long)]
    source_gsd: Option<f64>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method `{s}`, expected a, b or c"))
}

#[derive(Args)]
struct PredictionArgs {
    /// Directory of `{index}.lgt` files.
    #[arg(long)]
    logits: Option<PathBuf>,
    /// Derive predictions from the dataset labels instead.
    #[arg(long, conflicts_with = "logits")]
    oracle: bool,
    #[arg(long, default_value_t = 0.0, requires = "oracle")]
    oracle_noise: f64,
    #[arg(long, default_value_t = 0, requires = "oracle")]
    oracle_seed: u64,
}

impl PredictionArgs {
    fn oracle(&self) -> OracleConfig {
        OracleConfig {
            noise_rate: self.oracle_noise,
            seed: self.oracle_seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Logit,
    Crop,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Logit => Strategy::Logit,
            StrategyArg::Crop => Strategy::Crop,
        }
    }
}

#[derive(Args)]
struct MergeArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    predictions: PredictionArgs,
    #[arg(long, value_enum, default_value = "crop")]
    strategy: StrategyArg,
    /// `.tif` for GeoTIFF, anything else for a raw grid with a `.hdr` sidecar.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = geoseg_core::merge::DEFAULT_CHECKPOINT_EVERY)]
    checkpoint_every: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Tiles,
    Merged,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    predictions: PredictionArgs,
    /// Set to score: train, val, test or all.
    #[arg(long, default_value = "all")]
    split: String,
    /// Defaults to `<dataset>/split.json`.
    #[arg(long)]
    split_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "merged")]
    mode: ModeArg,
    /// Merged map to score; merged in memory with `--strategy` when omitted.
    #[arg(long)]
    merged: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "crop")]
    strategy: StrategyArg,
    /// Ground-truth raster; the dataset's label tiles are reassembled when omitted.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Class ids left out of the means.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<u8>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Rectangular,
    Circular,
    Irregular,
}

#[derive(Args)]
struct CordingArgs {
    /// SVA sizes in metres.
    #[arg(long, value_delimiter = ',', required_unless_present = "fixtures")]
    measurements: Vec<f64>,
    #[arg(long, value_enum, default_value = "rectangular")]
    shape: ShapeArg,
    #[arg(long, default_value = "feature")]
    feature: String,
    /// Print the bundled worked examples.
    #[arg(long)]
    fixtures: bool,
}

#[derive(Args)]
struct PlanArgs {
    /// Survey area in km².
    #[arg(long)]
    area: f64,
    #[arg(long)]
    gsd: f64,
    #[arg(long, default_value_t = 512)]
    tile: u32,
    #[arg(long, default_value_t = 0.5)]
    stride: f64,
    #[arg(long, conflicts_with = "reference")]
    min_train: Option<usize>,
    /// Size of a reference training set; the threshold is `--fraction` of it.
    #[arg(long)]
    reference: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SUFFICIENCY_FRACTION)]
    fraction: f64,
    #[arg(long, default_value = "plan.json")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run only these tasks; their dependencies must already be done.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Print the run summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "split")]
    op: String,
    #[arg(long, value_delimiter = ',', default_values_t = geoseg_bench::DEFAULT_SIZES)]
    sizes: Vec<u32>,
    #[arg(long, default_value_t = geoseg_bench::DEFAULT_REPS)]
    reps: usize,
    /// Directory for `bench.json` and `bench.csv`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match with_env_workers(|| dispatch(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let ws = cli.workspace.as_deref();
    match cli.command {
        Command::Split(a) => split(a, ws),
        Command::Weights(a) => weights(a),
        Command::SplitSet(a) => split_set(a),
        Command::Degrade(a) => degrade(a, ws),
        Command::Merge(a) => merge(a, ws),
        Command::Score(a) => score(a),
        Command::Cording(a) => cording(a),
        Command::Plan(a) => plan(a),
        Command::Run(a) => run(a, ws.ok_or_else(|| anyhow!("`run` needs --workspace"))?),
        Command::Status => status(ws.ok_or_else(|| anyhow!("`status` needs --workspace"))?),
        Command::Bench(a) => bench(a),
    }
}

/// Run `f` with checkpoints journaled in the workspace, or with none.
fn checkpointed<T>(ws: Option<&Path>, task: &str, f: impl FnOnce(&dyn Checkpoints) -> Result<T>) -> Result<T> {
    match ws {
        Some(root) => {
            let ws = Workspace::open(root)?;
            f(&ws.journal().scope(task))
        }
        None => f(&NoCheckpoints),
    }
}

fn split(a: SplitArgs, ws: Option<&Path>) -> Result<()> {
    let image = open_raster(&a.image, DEFAULT_MEMORY_BUDGET)?;
    let labels = a
        .labels
        .as_deref()
        .map(|p| open_raster(p, DEFAULT_MEMORY_BUDGET))
        .transpose()?;
    let info = image.info();
    let grid = plan_grid(info.width, info.height, a.tile, a.tile, a.stride)?;
    let gsd = a.gsd.or_else(|| {
        info.geo
            .as_ref()
            .filter(|g| g.is_skew_free())
            .map(|g| g.pixel_size_x.abs())
    });
    let opts = SplitOptions {
        class_count: a.class_count,
        jpeg_quality: a.jpeg_quality,
        gsd,
        source_image: Some(absolute(&a.image)?),
        source_labels: a.labels.as_deref().map(absolute).transpose()?,
        ..SplitOptions::default()
    };
    let recs = checkpointed(ws, "split", |cp| {
        Ok(split_raster(image.as_ref(), labels.as_deref(), &grid, &a.out, &opts, cp)?)
    })?;
    println!(
        "{} tiles ({} rows x {} cols) written to {}",
        recs.len(),
        grid.rows(),
        grid.cols(),
        a.out.display()
    );
    Ok(())
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).with_context(|| format!("resolving {}", p.display()))
}

fn load_split(path: &Path) -> Result<DatasetSplit> {
    read_json(path).with_context(|| format!("reading split file {}", path.display()))
}

fn weights(a: WeightsArgs) -> Result<()> {
    let ds = Dataset::open(&a.dataset)?;
    let indices: Vec<usize> = match (&a.split, &a.set) {
        (Some(path), Some(set)) => load_split(path)?.set(set)?.to_vec(),
        _ => (0..ds.len()).collect(),
    };
    let w = tasks::compute_weights(&ds, &indices)?;
    let out = a.out.unwrap_or_else(|| a.dataset.join(runner::WEIGHTS_FILE));
    write_json_atomic(&out, &w)?;
    println!("{} weights written to {}", w.len(), out.display());
    Ok(())
}

fn split_set(a: SplitSetArgs) -> Result<()> {
    if a.fractions.len() != 3 {
        bail!("--fractions takes train,val,test, got {} value(s)", a.fractions.len());
    }
    let ds = Dataset::open(&a.dataset)?;
    let spec = SplitSpec {
        method: match a.method {
            MethodArg::Horizontal => SplitMethod::Horizontal,
            MethodArg::Manual => SplitMethod::Manual,
        },
        fractions: [a.fractions[0], a.fractions[1], a.fractions[2]],
        gap_rows: a.gap,
        seed: a.seed,
    };
    spec.validate()?;
    let split = tasks::assign_sets(&ds, &spec, a.regions.as_deref())?;
    let out = a.out.unwrap_or_else(|| a.dataset.join(runner::SPLIT_FILE));
    write_json_atomic(&out, &split)?;
    println!(
        "train {} / val {} / test {} tiles ({} discarded) written to {}",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        ds.len() - split.train.len() - split.val.len() - split.test.len(),
        out.display()
    );
    Ok(())
}

fn degrade(a: DegradeArgs, ws: Option<&Path>) -> Result<()> {
    let ds = Dataset::open(&a.dataset)?;
    let source_gsd = a
        .source_gsd
        .or(ds.meta.gsd)
        .ok_or_else(|| anyhow!("the dataset records no GSD; pass --source-gsd"))?;
    let targets: Vec<f64> = if a.ladder {
        ladder_presets()
            .into_iter()
            .map(|r| r.gsd)
            .filter(|&g| g > source_gsd)
            .collect()
    } else {
        vec![a.target_gsd.expect("required by clap")]
    };
    for g in targets {
        let spec = DegradeSpec::new(a.method, source_gsd, g);
        let out = sibling_dir(&a.dataset, g);
        match a.method {
            Method::A | Method::B => {
                let rec = degrade_tiles(&ds, &spec, &out)?;
                println!("{g} m/px: {} tiles of {}x{} -> {}", rec.tile_count, rec.tile_w, rec.tile_h, out.display());
            }
            Method::C => {
                let image_path = ds
                    .meta
                    .source_image
                    .as_deref()
                    .ok_or_else(|| anyhow!("method C needs the source mosaic recorded in grid.json"))?;
                let image = open_raster(image_path, DEFAULT_MEMORY_BUDGET)?;
                let labels = ds
                    .meta
                    .source_labels
                    .as_deref()
                    .map(|p| open_raster(p, DEFAULT_MEMORY_BUDGET))
                    .transpose()?;
                let tiles = TileParams {
                    tile_w: ds.meta.tile_w,
                    tile_h: ds.meta.tile_h,
                    stride: ds.meta.stride,
                };
                let opts = SplitOptions {
                    class_count: ds.meta.class_count,
                    palette: ds.meta.palette.clone(),
                    ..SplitOptions::default()
                };
                let work = out.with_extension("work");
                let recs = checkpointed(ws, &format!("degrade-{g}"), |cp| {
                    Ok(degrade_mosaic_c(image.as_ref(), labels.as_deref(), &spec, tiles, &work, &out, &opts, cp)?)
                })?;
                println!("{g} m/px: {} tiles -> {}", recs.len(), out.display());
            }
        }
    }
    Ok(())
}

fn predictions<'a>(p: &'a PredictionArgs, oracle: &'a OracleConfig) -> Result<Predictions<'a>> {
    match (&p.logits, p.oracle) {
        (Some(dir), _) => Ok(Predictions::Directory(dir)),
        (None, true) => Ok(Predictions::Oracle(oracle)),
        (None, false) => bail!("predictions are needed: pass --logits DIR or --oracle"),
    }
}

fn merge(a: MergeArgs, ws: Option<&Path>) -> Result<()> {
    let ds = Dataset::open(&a.dataset)?;
    let oracle = a.predictions.oracle();
    let src = tasks::logit_source(&ds, &predictions(&a.predictions, &oracle)?)?;
    let strategy = Strategy::from(a.strategy);
    let is_tiff = a
        .out
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("tif") || e.eq_ignore_ascii_case("tiff"));
    if is_tiff {
        let map = merge_to_memory(strategy, &ds.grid, src.as_ref(), ds.meta.source_geo.clone())?;
        if map.info().geo.is_some() {
            write_georeferenced(&map, &a.out)?;
        } else {
            geoseg_core::raster::write_raster(&a.out, &map)?;
        }
    } else {
        let opts = MergeOptions {
            checkpoint_every: a.checkpoint_every,
            ..MergeOptions::default()
        };
        checkpointed(ws, "merge", |cp| {
            Ok(tasks::merge_to_file(&ds, src.as_ref(), strategy, &a.out, cp, &opts)?)
        })?;
    }
    println!(
        "{}x{} class map written to {}",
        ds.meta.source_width,
        ds.meta.source_height,
        a.out.display()
    );
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    let ds = Dataset::open(&a.dataset)?;
    let split = if a.split == "all" {
        None
    } else {
        let path = a.split_file.clone().unwrap_or_else(|| a.dataset.join(runner::SPLIT_FILE));
        Some(load_split(&path)?)
    };
    let indices = tasks::score_indices(&ds, split.as_ref(), &a.split)?;
    let oracle = a.predictions.oracle();
    let mode = match a.mode {
        ModeArg::Tiles => ScoreMode::TileSummed,
        ModeArg::Merged => ScoreMode::Merged,
    };
    // a stored merged map is scored as is, without predictions
    let src = if mode == ScoreMode::Merged && a.merged.is_some() {
        None
    } else {
        Some(tasks::logit_source(&ds, &predictions(&a.predictions, &oracle)?)?)
    };
    let gt = a
        .labels
        .as_deref()
        .map(|p| open_raster(p, DEFAULT_MEMORY_BUDGET))
        .transpose()?;
    let scratch;
    let merged = match (mode, &a.merged) {
        (ScoreMode::Merged, None) => {
            scratch = tempfile::tempdir()?;
            let path = scratch.path().join("merged.raw");
            let src = src.as_deref().expect("predictions are loaded when no merged map is given");
            tasks::merge_to_file(&ds, src, a.strategy.into(), &path, &NoCheckpoints, &MergeOptions::default())?;
            Some(path)
        }
        (_, m) => m.clone(),
    };
    if let Some(m) = &merged {
        open_raster(m, DEFAULT_MEMORY_BUDGET).with_context(|| format!("opening merged map {}", m.display()))?;
    }
    let report = tasks::score(&ds, mode, &indices, src.as_deref(), merged.as_deref(), gt.as_deref(), &a.exclude)?;
    for c in &report.classes {
        let name = ds
            .meta
            .palette
            .iter()
            .find(|p| p.id == c.class)
            .map_or_else(|| format!("class {}", c.class), |p| p.name.clone());
        println!("{name:>16}  IoU {}  Dice {}", fmt_score(c.iou), fmt_score(c.dice));
    }
    println!("{:>16}  IoU {}  Dice {}", "mean", fmt_score(report.miou), fmt_score(report.mdice));
    let out = a.out.unwrap_or_else(|| PathBuf::from(runner::SCORES_FILE));
    write_json_atomic(&out, &report)?;
    Ok(())
}

fn fmt_score(v: Option<f64>) -> String {
    v.map_or_else(|| "   n/a".to_string(), |v| format!("{v:.4}"))
}

fn cording(a: CordingArgs) -> Result<()> {
    if a.fixtures {
        for f in cording_fixtures() {
            println!("{:<24} ({:.3}, {:.3}) m/px", f.feature, f.interval.lower, f.interval.upper);
        }
        return Ok(());
    }
    let shape = match a.shape {
        ShapeArg::Rectangular => ShapeHint::RectangularShortSide,
        ShapeArg::Circular => ShapeHint::CircularDiameter,
        ShapeArg::Irregular => ShapeHint::IrregularMeanSegment,
    };
    let iv = cording_interval(&SvaMeasurements::new(a.feature.clone(), shape, a.measurements))?;
    println!(
        "{}: segmentation quality is expected to decline for GSD in ({:.4}, {:.4}) m/px",
        a.feature, iv.lower, iv.upper
    );
    Ok(())
}

fn plan(a: PlanArgs) -> Result<()> {
    let threshold = match (a.min_train, a.reference) {
        (Some(m), _) => m,
        (None, Some(r)) => min_train_tiles(r, a.fraction),
        (None, None) => 0,
    };
    let plan = plan_survey(&SurveyRequest {
        area_km2: a.area,
        gsd: a.gsd,
        tile: a.tile,
        stride: a.stride,
        min_train_tiles: threshold,
        calibration: Default::default(),
    })?;
    println!("target GSD            {} m/px", plan.target_gsd);
    println!("area                  {} km²", plan.area_km2);
    println!("mosaic                ~{0} x {0} px", plan.extent_px);
    println!("tiles                 {} ({} px, stride {})", plan.estimated_tiles, a.tile, a.stride);
    println!("altitude              {:.1} m", plan.altitude_m);
    println!("duration (approx.)    {:.2} workdays", plan.duration_workdays);
    println!("same-pixel-count area {:.2} km²", plan.equal_pixel_area_km2);
    for w in &plan.warnings {
        println!("warning: {w}");
    }
    if plan.shortage {
        println!("shortage: {} tiles < {} needed; options:", plan.estimated_tiles, threshold);
        for opt in action_menu() {
            println!("  {:<14} {}", opt.key, opt.trade_off);
        }
    }
    write_json_atomic(&a.out, &plan)?;
    Ok(())
}

fn run(a: RunArgs, root: &Path) -> Result<()> {
    let cfg = PipelineConfig::load(&a.config)?;
    let ws = Workspace::open(root)?;
    let only = (!a.only.is_empty()).then_some(a.only.as_slice());
    let summary = runner::run_pipeline(&cfg, &ws, only)?;
    if a.json {
        println!("{}", serde_json::to_string(&summary)?);
    } else {
        println!(
            "executed {} task(s){}; skipped {} already done",
            summary.executed.len(),
            if summary.executed.is_empty() {
                String::new()
            } else {
                format!(" ({})", summary.executed.join(", "))
            },
            summary.skipped.len()
        );
    }
    Ok(())
}

fn status(root: &Path) -> Result<()> {
    for s in runner::workspace_status(root)? {
        let state = serde_json::to_value(s.state)?;
        println!(
            "{:<14} {:<8} {} checkpoint(s)",
            s.task,
            state.as_str().unwrap_or_default(),
            s.checkpoints
        );
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let ops: Vec<geoseg_bench::BenchOp> = a
        .op
        .split(',')
        .map(|o| geoseg_bench::BenchOp::parse(o.trim()).ok_or_else(|| anyhow!("unknown bench op `{o}`")))
        .collect::<Result<_>>()?;
    if ops.is_empty() {
        bail!("no bench op given");
    }
    let workers = geoseg_bench::default_workers();
    let mut results = Vec::new();
    for op in ops {
        let r = geoseg_bench::run_bench(op, &a.sizes, a.reps, workers)?;
        for t in &r.timings {
            println!("{:<12} {:>6}²  {:>9.4} s", r.op.name(), t.size, t.median_s);
        }
        println!("{:<12} slope {:.3}", r.op.name(), r.slope);
        results.push(r);
    }
    geoseg_bench::write_reports(&results, &a.out)?;
    Ok(())
}
