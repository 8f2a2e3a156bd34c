//! Dependency-ordered execution of the configured tasks inside a workspace.
//!
//! A workspace directory holds every task output, a copy of the config, the
//! journal and a lockfile. Each task commits `start` (carrying its config hash)
//! before doing work and `done` (carrying the output digest) after. On a rerun a
//! task is skipped when its `done` entry matches the current config hash and its
//! outputs exist; a task whose hash changed is reset and recomputed.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions, TryLockError};
use std::path::{Path, PathBuf};

use petgraph::algo::toposort;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, WeightSet};
use super::journal::{self, Checkpoints, Journal, JournalEntry, DONE, RESET};
use super::tasks::{self, Predictions, Sources};
use crate::degrade::{degrade_mosaic_c, degrade_tiles, DegradeSpec, Method, TileParams};
use crate::error::{Error, IoContext, Result};
use crate::fsutil::{hash_files, sha256_hex, write_atomic, write_json_atomic};
use crate::merge::MergeOptions;
use crate::sampling::DatasetSplit;
use crate::survey::{min_train_tiles, plan_survey, sufficiency_check, Sufficiency, SurveyPlan, SurveyRequest};
use crate::tiling::{plan_grid, split_raster, Dataset, SplitOptions, GRID_FILE, MANIFEST_FILE};

pub const TASK_NAMES: [&str; 8] = [
    "split",
    "split-set",
    "weights",
    "degrade",
    "predict-check",
    "merge",
    "score",
    "plan",
];

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const LOCK_FILE: &str = ".lock";
pub const CONFIG_COPY: &str = "config.toml";
pub const DATASET_DIR: &str = "dataset";
pub const SPLIT_FILE: &str = "split.json";
pub const WEIGHTS_FILE: &str = "weights.json";
pub const DEGRADED_DIR: &str = "degraded";
pub const PREDICT_FILE: &str = "predictions.json";
pub const MERGED_FILE: &str = "merged.raw";
pub const SCORES_FILE: &str = "scores.json";
pub const PLAN_FILE: &str = "plan.json";

const START: &str = "start";

/// An exclusively locked workspace directory with its journal.
pub struct Workspace {
    root: PathBuf,
    journal: Journal,
    _lock: File,
}

impl Workspace {
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).at(root)?;
        let lock_path = root.join(LOCK_FILE);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .at(&lock_path)?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(TryLockError::WouldBlock) => {
                return Err(Error::Config(format!(
                    "workspace {} is in use by another run",
                    root.display()
                )))
            }
            Err(TryLockError::Error(e)) => return Err(Error::io(&lock_path, e)),
        }
        Ok(Workspace {
            root: root.to_path_buf(),
            journal: Journal::open(&root.join(JOURNAL_FILE))?,
            _lock: lock,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

/// Enabled tasks with their dependencies, built-in edges plus `after` lists.
pub fn task_graph(cfg: &PipelineConfig) -> Result<BTreeMap<&'static str, Vec<String>>> {
    let mut g: BTreeMap<&'static str, Vec<String>> = BTreeMap::new();
    let enabled = |name: &str| -> bool {
        match name {
            "split" => true,
            "split-set" => cfg.split_set.is_some(),
            "weights" => cfg.weights.is_some(),
            "degrade" => cfg.degrade.is_some(),
            "predict-check" => cfg.predict.is_some(),
            "merge" => cfg.merge.is_some(),
            "score" => cfg.score.is_some(),
            "plan" => cfg.plan.is_some(),
            _ => false,
        }
    };
    let has_split_set = cfg.split_set.is_some();
    for name in TASK_NAMES.into_iter().filter(|n| enabled(n)) {
        let (mut deps, after): (Vec<&str>, &[String]) = match name {
            "split" => (vec![], &cfg.split.after),
            "split-set" => (vec!["split"], &cfg.split_set.as_ref().unwrap().after),
            "weights" => {
                let w = cfg.weights.as_ref().unwrap();
                let mut d = vec!["split"];
                if w.set == WeightSet::Train {
                    d.push("split-set");
                }
                (d, &w.after)
            }
            "degrade" => (vec!["split"], &cfg.degrade.as_ref().unwrap().after),
            "predict-check" => (vec!["split"], &cfg.predict.as_ref().unwrap().after),
            "merge" => (vec!["predict-check"], &cfg.merge.as_ref().unwrap().after),
            "score" => {
                let s = cfg.score.as_ref().unwrap();
                let mut d = match s.mode {
                    crate::metrics::ScoreMode::Merged => vec!["merge"],
                    crate::metrics::ScoreMode::TileSummed => vec!["predict-check"],
                };
                if has_split_set {
                    d.push("split-set");
                }
                (d, &s.after)
            }
            _ => {
                let p = cfg.plan.as_ref().unwrap();
                (if has_split_set { vec!["split-set"] } else { vec![] }, &p.after)
            }
        };
        deps.extend(after.iter().map(String::as_str));
        for d in &deps {
            if !TASK_NAMES.contains(d) {
                return Err(Error::Config(format!("task `{name}` depends on unknown task `{d}`")));
            }
            if !enabled(d) {
                return Err(Error::Config(format!(
                    "task `{name}` needs `{d}`, which is not configured"
                )));
            }
        }
        let mut deps: Vec<String> = deps.into_iter().map(String::from).collect();
        deps.dedup();
        g.insert(name, deps);
    }
    Ok(g)
}

/// Topological order of the enabled tasks; a dependency cycle is a config error.
pub fn execution_order(cfg: &PipelineConfig) -> Result<Vec<&'static str>> {
    let g = task_graph(cfg)?;
    let mut graph = DiGraph::<&'static str, ()>::new();
    let mut nodes = HashMap::new();
    for name in TASK_NAMES.into_iter().filter(|n| g.contains_key(n)) {
        nodes.insert(name, graph.add_node(name));
    }
    for (name, deps) in &g {
        for d in deps {
            graph.add_edge(nodes[d.as_str()], nodes[name], ());
        }
    }
    toposort(&graph, None)
        .map(|order| order.into_iter().map(|n| graph[n]).collect())
        .map_err(|cycle| {
            Error::Config(format!(
                "dependency cycle through task `{}`",
                graph[cycle.node_id()]
            ))
        })
}

/// Hash of everything that determines a task's outputs: its own table, the
/// source, and the hashes of its dependencies.
pub fn config_hashes(cfg: &PipelineConfig) -> Result<HashMap<&'static str, String>> {
    let graph = task_graph(cfg)?;
    let mut out: HashMap<&'static str, String> = HashMap::new();
    for name in execution_order(cfg)? {
        let own = match name {
            "split" => serde_json::to_string(&cfg.split),
            "split-set" => serde_json::to_string(&cfg.split_set),
            "weights" => serde_json::to_string(&cfg.weights),
            "degrade" => serde_json::to_string(&cfg.degrade),
            "predict-check" => serde_json::to_string(&cfg.predict),
            "merge" => serde_json::to_string(&cfg.merge),
            "score" => serde_json::to_string(&cfg.score),
            _ => serde_json::to_string(&cfg.plan),
        }
        .expect("config serializes");
        let source = serde_json::to_string(&cfg.source).expect("config serializes");
        let mut text = format!("{name}\n{own}\n{source}\n");
        for d in &graph[name] {
            text.push_str(&out[d.as_str()]);
            text.push('\n');
        }
        out.insert(name, sha256_hex(text.as_bytes())[..16].to_string());
    }
    Ok(out)
}

fn outputs(name: &str) -> &'static [&'static str] {
    match name {
        "split" => &[DATASET_DIR],
        "split-set" => &[SPLIT_FILE],
        "weights" => &[WEIGHTS_FILE],
        "degrade" => &[DEGRADED_DIR],
        "predict-check" => &[PREDICT_FILE],
        "merge" => &[MERGED_FILE],
        "score" => &[SCORES_FILE],
        _ => &[PLAN_FILE],
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
    /// Fault-injection sites passed by this process so far.
    pub fault_sites: u64,
    /// Per executed task, the first and last fault-site ordinal it passed.
    pub task_sites: BTreeMap<String, [u64; 2]>,
}

/// Checkpoints of one task with ids prefixed, so repeated sub-runs stay apart.
struct Prefixed<'a> {
    inner: &'a dyn Checkpoints,
    prefix: String,
}

impl Checkpoints for Prefixed<'_> {
    fn get(&self, id: &str) -> Option<JournalEntry> {
        self.inner.get(&format!("{}{id}", self.prefix))
    }

    fn commit(&self, id: &str, payload_hash: &str, note: Option<String>) -> Result<()> {
        self.inner.commit(&format!("{}{id}", self.prefix), payload_hash, note)
    }
}

/// Run the configured tasks in dependency order, or only `only` when given (whose
/// dependencies must then already be done).
pub fn run_pipeline(cfg: &PipelineConfig, ws: &Workspace, only: Option<&[String]>) -> Result<RunSummary> {
    cfg.validate()?;
    let order = execution_order(cfg)?;
    let graph = task_graph(cfg)?;
    let hashes = config_hashes(cfg)?;
    if let Some(only) = only {
        for t in only {
            if !order.contains(&t.as_str()) {
                return Err(Error::Config(format!("task `{t}` is not configured")));
            }
        }
    }
    let copy = cfg.to_toml();
    if fs::read_to_string(ws.path(CONFIG_COPY)).ok().as_deref() != Some(copy.as_str()) {
        write_atomic(&ws.path(CONFIG_COPY), copy.as_bytes())?;
    }

    let j = ws.journal();
    let mut summary = RunSummary::default();
    for name in order {
        if only.is_some_and(|o| !o.iter().any(|t| t == name)) {
            continue;
        }
        let hash = &hashes[name];
        if is_current(ws, name, hash) {
            summary.skipped.push(name.to_string());
            continue;
        }
        if only.is_some() {
            for d in &graph[name] {
                if !is_current(ws, d, &hashes[d.as_str()]) {
                    return Err(Error::Config(format!(
                        "`{name}` needs `{d}` to be done with the current config"
                    )));
                }
            }
        }
        let started = j.lookup(name, START);
        if started.as_ref().and_then(|e| e.note.as_deref()) != Some(hash.as_str()) || j.is_done(name) {
            if started.is_some() || j.is_done(name) {
                log::info!("{name}: configuration or outputs changed, starting over");
                j.commit(name, RESET, "", None)?;
            }
            j.commit(name, START, "", Some(hash.clone()))?;
        } else {
            log::info!("{name}: resuming");
        }
        log::info!("{name}: running");
        let first_site = super::fault::sites_passed() + 1;
        let digest = execute(cfg, ws, name).map_err(|e| Error::Task {
            task: name.to_string(),
            source: Box::new(e),
        })?;
        j.commit(name, DONE, &digest, Some(hash.clone()))?;
        summary
            .task_sites
            .insert(name.to_string(), [first_site, super::fault::sites_passed()]);
        summary.executed.push(name.to_string());
    }
    summary.fault_sites = super::fault::sites_passed();
    Ok(summary)
}

fn is_current(ws: &Workspace, name: &str, hash: &str) -> bool {
    ws.journal()
        .lookup(name, DONE)
        .is_some_and(|e| e.note.as_deref() == Some(hash))
        && outputs(name).iter().all(|o| ws.path(o).exists())
}

fn execute(cfg: &PipelineConfig, ws: &Workspace, name: &str) -> Result<String> {
    let scope = ws.journal().scope(name);
    match name {
        "split" => {
            let src = Sources::open(&cfg.source)?;
            let info = src.image.info();
            let grid = plan_grid(info.width, info.height, cfg.split.tile, cfg.split.tile, cfg.split.stride)?;
            let opts = SplitOptions {
                class_count: cfg.class_count(),
                jpeg_quality: cfg.split.jpeg_quality,
                gsd: src.gsd(&cfg.source),
                source_image: cfg.source.image.clone(),
                source_labels: cfg.source.labels.clone(),
                ..SplitOptions::default()
            };
            let out = ws.path(DATASET_DIR);
            split_raster(src.image.as_ref(), src.labels(), &grid, &out, &opts, &scope)?;
            hash_files(&out, [GRID_FILE, MANIFEST_FILE])
        }
        "split-set" => {
            let t = cfg.split_set.as_ref().expect("enabled");
            let ds = Dataset::open(&ws.path(DATASET_DIR))?;
            let split = tasks::assign_sets(&ds, &t.spec(), t.regions.as_deref())?;
            write_json(ws, SPLIT_FILE, &split)
        }
        "weights" => {
            let t = cfg.weights.as_ref().expect("enabled");
            let ds = Dataset::open(&ws.path(DATASET_DIR))?;
            let indices = match t.set {
                WeightSet::All => (0..ds.len()).collect(),
                WeightSet::Train => read_split(ws)?.train,
            };
            write_json(ws, WEIGHTS_FILE, &tasks::compute_weights(&ds, &indices)?)
        }
        "degrade" => run_degrade(cfg, ws, &scope),
        "predict-check" => {
            let ds = Dataset::open(&ws.path(DATASET_DIR))?;
            let check = tasks::check_predictions(&ds, &predictions(cfg))?;
            write_json(ws, PREDICT_FILE, &check)
        }
        "merge" => {
            let t = cfg.merge.as_ref().expect("enabled");
            let ds = Dataset::open(&ws.path(DATASET_DIR))?;
            let src = tasks::logit_source(&ds, &predictions(cfg))?;
            let opts = MergeOptions {
                checkpoint_every: t.checkpoint_every,
                ..MergeOptions::default()
            };
            tasks::merge_to_file(&ds, src.as_ref(), t.strategy, &ws.path(MERGED_FILE), &scope, &opts)?;
            hash_files(ws.root(), [MERGED_FILE])
        }
        "score" => {
            let t = cfg.score.as_ref().expect("enabled");
            let ds = Dataset::open(&ws.path(DATASET_DIR))?;
            let split = if cfg.split_set.is_some() { Some(read_split(ws)?) } else { None };
            let indices = tasks::score_indices(&ds, split.as_ref(), &t.set)?;
            let src = tasks::logit_source(&ds, &predictions(cfg))?;
            let sources = Sources::open(&cfg.source)?;
            let report = tasks::score(
                &ds,
                t.mode,
                &indices,
                Some(src.as_ref()),
                Some(&ws.path(MERGED_FILE)),
                sources.labels(),
                &t.exclude,
            )?;
            write_json(ws, SCORES_FILE, &report)
        }
        "plan" => {
            let t = cfg.plan.as_ref().expect("enabled");
            let threshold = t
                .min_train_tiles
                .or(t.reference_tiles.map(|r| min_train_tiles(r, t.fraction)))
                .unwrap_or(0);
            let plan = plan_survey(&SurveyRequest {
                area_km2: t.area_km2,
                gsd: t.gsd,
                tile: t.tile.unwrap_or(cfg.split.tile),
                stride: t.stride.unwrap_or(cfg.split.stride),
                min_train_tiles: threshold,
                calibration: t.calibration,
            })?;
            let sufficiency = if cfg.split_set.is_some() {
                Some(sufficiency_check(read_split(ws)?.train.len(), threshold))
            } else {
                None
            };
            write_json(ws, PLAN_FILE, &PlanReport { plan, sufficiency })
        }
        other => Err(Error::Config(format!("unknown task `{other}`"))),
    }
}

/// Contents of `plan.json` written by the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub plan: SurveyPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sufficiency: Option<Sufficiency>,
}

fn predictions(cfg: &PipelineConfig) -> Predictions<'_> {
    let p = cfg.predict.as_ref().expect("validated");
    match (&p.logits, &p.oracle) {
        (Some(dir), _) => Predictions::Directory(dir),
        (None, Some(o)) => Predictions::Oracle(o),
        (None, None) => unreachable!("validated"),
    }
}

fn read_split(ws: &Workspace) -> Result<DatasetSplit> {
    crate::fsutil::read_json(&ws.path(SPLIT_FILE))
}

fn write_json<T: Serialize>(ws: &Workspace, rel: &str, value: &T) -> Result<String> {
    write_json_atomic(&ws.path(rel), value)?;
    hash_files(ws.root(), [rel])
}

pub fn degraded_name(gsd: f64) -> String {
    format!("gsd{gsd}")
}

fn run_degrade(cfg: &PipelineConfig, ws: &Workspace, scope: &dyn Checkpoints) -> Result<String> {
    let t = cfg.degrade.as_ref().expect("enabled");
    let ds = Dataset::open(&ws.path(DATASET_DIR))?;
    let src_gsd = ds
        .meta
        .gsd
        .ok_or_else(|| Error::Config("the source GSD is unknown; set source.gsd".into()))?;
    let root = ws.path(DEGRADED_DIR);
    let mut names = Vec::new();
    for &g in &t.target_gsd {
        let spec = DegradeSpec::new(t.method, src_gsd, g);
        let name = degraded_name(g);
        let out = root.join(&name);
        match t.method {
            Method::A | Method::B => {
                degrade_tiles(&ds, &spec, &out)?;
            }
            Method::C => {
                let src = Sources::open(&cfg.source)?;
                let opts = SplitOptions {
                    class_count: cfg.class_count(),
                    jpeg_quality: cfg.split.jpeg_quality,
                    ..SplitOptions::default()
                };
                let tiles = TileParams {
                    tile_w: cfg.split.tile,
                    tile_h: cfg.split.tile,
                    stride: cfg.split.stride,
                };
                let sub = Prefixed {
                    inner: scope,
                    prefix: format!("{name}/"),
                };
                degrade_mosaic_c(
                    src.image.as_ref(),
                    src.labels(),
                    &spec,
                    tiles,
                    &root.join(format!("{name}.work")),
                    &out,
                    &opts,
                    &sub,
                )?;
            }
        }
        names.push(format!("{name}/{GRID_FILE}"));
        names.push(format!("{name}/{MANIFEST_FILE}"));
    }
    hash_files(&root, names.iter().map(String::as_str))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskState {
    Pending,
    Running,
    Done,
    /// Done under a different configuration.
    Stale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStatus {
    pub task: String,
    pub state: TaskState,
    pub checkpoints: usize,
}

/// Journal-derived state of every task configured in the workspace. Reads only;
/// safe while another run holds the workspace.
pub fn workspace_status(root: &Path) -> Result<Vec<TaskStatus>> {
    let cfg_path = root.join(CONFIG_COPY);
    if !cfg_path.is_file() {
        return Err(Error::Config(format!("{} holds no pipeline run", root.display())));
    }
    let cfg = PipelineConfig::parse(&fs::read_to_string(&cfg_path).at(&cfg_path)?, root)?;
    let hashes = config_hashes(&cfg)?;
    let entries = journal::snapshot(&root.join(JOURNAL_FILE))?;
    Ok(execution_order(&cfg)?
        .into_iter()
        .map(|name| {
            let mine: Vec<&JournalEntry> = entries.iter().filter(|e| e.task == name).collect();
            let done = mine.iter().find(|e| e.checkpoint == DONE);
            let state = match done {
                Some(e) if e.note.as_deref() == Some(hashes[name].as_str()) => TaskState::Done,
                Some(_) => TaskState::Stale,
                None if mine.is_empty() => TaskState::Pending,
                None => TaskState::Running,
            };
            TaskStatus {
                task: name.to_string(),
                state,
                checkpoints: mine
                    .iter()
                    .filter(|e| e.checkpoint != START && e.checkpoint != DONE)
                    .count(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> PipelineConfig {
        let text = format!(
            "[source]\nsynthetic = {{ width = 300, height = 480, class_count = 3, seed = 5, cell = 24 }}\n\
             [split]\ntile = 64\nstride = 0.5\n{extra}"
        );
        PipelineConfig::parse(&text, Path::new("/")).unwrap()
    }

    const FULL: &str = "[split-set]\n[weights]\n[predict-check]\noracle = {}\n[merge]\ncheckpoint_every = 2\n[score]\nmode = \"merged\"\nset = \"all\"\n";

    #[test]
    fn order_respects_dependencies() {
        let cfg = config(FULL);
        let order = execution_order(&cfg).unwrap();
        let pos = |n: &str| order.iter().position(|t| *t == n).unwrap();
        assert_eq!(order[0], "split");
        assert!(pos("predict-check") < pos("merge") && pos("merge") < pos("score"));
        assert!(pos("split-set") < pos("score"));
    }

    #[test]
    fn cycles_and_missing_tasks_are_config_errors() {
        let cfg = config("[split-set]\nafter = [\"weights\"]\n[weights]\nset = \"train\"\n");
        assert!(matches!(execution_order(&cfg), Err(Error::Config(m)) if m.contains("cycle")));
        let cfg = config("[merge]\n");
        assert!(matches!(execution_order(&cfg), Err(Error::Config(m)) if m.contains("predict-check")));
        let cfg = config("[weights]\nafter = [\"train\"]\n");
        assert!(execution_order(&cfg).is_err());
    }

    #[test]
    fn hashes_follow_dependencies() {
        let a = config_hashes(&config(FULL)).unwrap();
        let b = config_hashes(&config(&FULL.replace("checkpoint_every = 2", "strategy = \"logit\""))).unwrap();
        assert_eq!(a["split"], b["split"]);
        assert_eq!(a["predict-check"], b["predict-check"]);
        assert_ne!(a["merge"], b["merge"]);
        assert_ne!(a["score"], b["score"]);
    }

    #[test]
    fn oracle_run_reproduces_labels_and_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(FULL);
        {
            let ws = Workspace::open(dir.path()).unwrap();
            let s = run_pipeline(&cfg, &ws, None).unwrap();
            assert_eq!(s.executed.len(), 6);
            let again = run_pipeline(&cfg, &ws, None).unwrap();
            assert!(again.executed.is_empty());
            assert_eq!(again.skipped.len(), 6);
        }
        let merged = crate::raster::RawRaster::open(&dir.path().join(MERGED_FILE), u64::MAX).unwrap();
        let truth = cfg.source.synthetic.as_ref().unwrap().labels().unwrap();
        use crate::raster::{RasterSource, Window};
        assert_eq!(
            merged.read_window_bytes(Window::full(300, 480)).unwrap(),
            truth.read_window_bytes(Window::full(300, 480)).unwrap()
        );
        let scores: crate::metrics::ScoreReport =
            crate::fsutil::read_json(&dir.path().join(SCORES_FILE)).unwrap();
        assert_eq!(scores.miou, Some(1.0));
        let status = workspace_status(dir.path()).unwrap();
        assert!(status.iter().all(|s| s.state == TaskState::Done));
    }

    #[test]
    fn changed_config_reruns_only_affected_tasks() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        run_pipeline(&config(FULL), &ws, None).unwrap();
        let cfg2 = config(&FULL.replace("checkpoint_every = 2", "strategy = \"logit\""));
        let s = run_pipeline(&cfg2, &ws, None).unwrap();
        assert_eq!(s.executed, ["merge", "score"]);
    }

    #[test]
    fn isolated_task_needs_done_dependencies() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        let cfg = config(FULL);
        let only = vec!["merge".to_string()];
        assert!(matches!(run_pipeline(&cfg, &ws, Some(&only)), Err(Error::Config(_))));
        let first = vec!["split".to_string(), "predict-check".to_string()];
        run_pipeline(&cfg, &ws, Some(&first)).unwrap();
        let s = run_pipeline(&cfg, &ws, Some(&only)).unwrap();
        assert_eq!(s.executed, ["merge"]);
    }

    #[test]
    fn second_instance_is_locked_out() {
        let dir = tempfile::tempdir().unwrap();
        let _ws = Workspace::open(dir.path()).unwrap();
        assert!(matches!(Workspace::open(dir.path()), Err(Error::Config(m)) if m.contains("in use")));
    }
}
